# core/datagen.py
"""
Gerador sintético de listagens com CTR verdadeiro conhecido:

    true_ctr = sigmoid(base + w_item·x_item + w_ctx·x_ctx + offset_z + ruído)

O offset por campo e o efeito de contexto são constantes dentro de uma
listagem, então um ranker treinado com perda de ranking não os aprende
(fica descalibrado por construção), mas um calibrador com contexto sim.
O indicador one-hot do campo é anexado ao x_ctx gravado.

Com require_click as listagens sem clique são descartadas e sorteadas de novo;
o true_ctr gravado é então a probabilidade condicional ao aceite,
p_i / (1 - prod_j (1 - p_j)), que é a distribuição de onde os cliques saem.
"""
import logging
from typing import List, Optional

import numpy as np
from scipy.special import expit

from core.config import Config
from core.dataio import Dataset, Listing
from core.errors import GenerationError, InputError
from core.metrics import FieldPartition, oracle_ece_at_m
from core.models import GeneratorConfig

logger = logging.getLogger(__name__)

_WEIGHTS_STREAM = 0
_LISTING_STREAM = 1


def resolve_weights(config: GeneratorConfig):
    """(offsets por campo, pesos de contexto, pesos de item), sorteados pelo seed quando não informados."""
    rng = np.random.default_rng([config.seed, _WEIGHTS_STREAM])
    ctx_w = rng.normal(0.0, 0.5, size=config.ctx_dim)
    item_w = rng.normal(0.0, 1.0, size=config.item_dim) * (1.5 / np.sqrt(config.item_dim))
    if config.context_weights is not None:
        ctx_w = np.asarray(config.context_weights, dtype=np.float64)
    if config.item_weights is not None:
        item_w = np.asarray(config.item_weights, dtype=np.float64)
    if config.field_offsets is not None:
        offsets = np.asarray(config.field_offsets, dtype=np.float64)
    elif config.field_cardinality == 1:
        offsets = np.zeros(1)
    else:
        offsets = np.linspace(-1.0, 1.0, config.field_cardinality)
    return offsets, ctx_w, item_w


def field_label(z: int) -> str:
    return f"z{z}"


def _any_click_probability(ctr: np.ndarray) -> float:
    """P(ao menos um clique) = 1 - prod(1 - p), via log1p/expm1."""
    return float(-np.expm1(np.sum(np.log1p(-ctr))))


def _draw_listing(config: GeneratorConfig, listing_id: int, offsets, ctx_w, item_w) -> Listing:
    n_fields = config.field_cardinality
    for attempt in range(config.max_attempts):
        # seed por contador (seed, listagem, tentativa): a ordem de geração não altera o resultado
        rng = np.random.default_rng([config.seed, _LISTING_STREAM, listing_id, attempt])
        x_ctx = rng.normal(size=config.ctx_dim)
        z = int(rng.integers(n_fields))
        k = int(rng.integers(config.items_min, config.items_max + 1))
        x_item = rng.normal(size=(k, config.item_dim))
        noise = rng.normal(0.0, config.noise, size=k) if config.noise > 0 else np.zeros(k)
        logit = config.base_logit + x_item @ item_w + float(x_ctx @ ctx_w) + offsets[z] + noise
        ctr = np.clip(expit(logit), np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
        click = (rng.random(k) < ctr).astype(np.float64)
        if config.require_click:
            if click.sum() == 0:
                continue
            ctr = np.clip(ctr / _any_click_probability(ctr), np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
        onehot = np.zeros(n_fields)
        onehot[z] = 1.0
        return Listing(
            listing_id=listing_id,
            x_ctx=np.concatenate([x_ctx, onehot]),
            field=field_label(z),
            x_item=x_item,
            click=click,
            true_ctr=ctr,
        )
    raise GenerationError(
        f"listagem {listing_id}: nenhum clique após {config.max_attempts} tentativas "
        f"(config gera CTR próximo de zero?)")


def generate(config: GeneratorConfig) -> Dataset:
    offsets, ctx_w, item_w = resolve_weights(config)
    listings: List[Listing] = [_draw_listing(config, i, offsets, ctx_w, item_w) for i in range(config.listings)]
    ds = Dataset.from_listings(listings, field_name=config.field_name)
    logger.info("gerado dataset sintético: %s listagens, %s itens, taxa de clique %.4f",
                config.listings, len(ds), float(ds.click.mean()))
    return ds


def oracle_f_ece(preds, dataset: Dataset, M: int = Config.ECE_BINS) -> float:
    """F-ECE contra o true_ctr em vez dos cliques amostrados (medida sem ruído)."""
    if dataset.true_ctr is None:
        raise InputError("dataset sem ground truth (true_ctr)")
    preds = np.asarray(preds, dtype=np.float64)
    if preds.shape != (len(dataset),):
        raise InputError(f"preds {preds.shape} para dataset de {len(dataset)} linhas")
    if len(dataset) == 0:
        raise InputError("oracle_f_ece de dataset vazio")
    partition = FieldPartition.from_values(dataset.field_name, dataset.field)
    total = 0.0
    for z, idx in partition.blocks.items():
        total += len(idx) * oracle_ece_at_m(preds[idx], dataset.true_ctr[idx], M)
    return total / len(dataset)
