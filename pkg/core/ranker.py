# core/ranker.py
"""
Ranker de base f(x_ctx, x_item) -> r.

Treinado com perda par-a-par estilo LambdaRank (RankNet ponderado por
|ΔNDCG|) ou com a perda RCR simplificada (pointwise BCE + softmax listwise).
Os scores saem sem calibração: o ranker só enxerga diferenças dentro da
listagem, então deslocamentos por listagem (campo, contexto) não são aprendidos.
"""
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Tuple, Union

import numpy as np
from scipy.special import expit, logsumexp, softmax

from core.errors import ConfigError, InputError, ListingSkipped, ShapeError
from core.models import RankerConfig, RcrConfig
from core.nn import MlpParams, backward, bce_with_logits, forward, init_optimizer, mlp_from_spec, optimizer_step
from core.nn.serialization import decode, encode, mlp_from_parts, mlp_to_parts

if TYPE_CHECKING:
    from core.dataio import Dataset, Listing

logger = logging.getLogger(__name__)


@dataclass
class RankerModel:
    net: MlpParams                       # entrada = concat(x_ctx, x_item), saída escalar identity
    ctx_dim: int
    item_dim: int
    loss: str = 'lambda'
    alpha: Optional[float] = None
    final_loss: Optional[float] = None
    skipped_listings: int = 0

    def __post_init__(self):
        if self.net.in_dim != self.ctx_dim + self.item_dim:
            raise ShapeError(f"rede espera {self.net.in_dim} entradas, layout ctx={self.ctx_dim} item={self.item_dim}")
        if self.net.out_dim != 1:
            raise ShapeError("ranker deve ter saída escalar", layer=len(self.net.layers) - 1)

    def predict_proba(self, r) -> np.ndarray:
        """Para o ranker RCR a própria saída vira probabilidade via sigmoid."""
        return expit(np.asarray(r, dtype=np.float64))


# ----------------------------------------------------------------------------
# perdas por listagem
# ----------------------------------------------------------------------------

def _as_listing(scores, labels) -> Tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if s.ndim != 1 or s.shape != y.shape:
        raise ShapeError(f"scores {s.shape} e labels {y.shape} desalinhados")
    if len(s) == 0:
        raise InputError("listagem vazia")
    return s, y


def lambda_pair_loss(scores, labels) -> Tuple[float, np.ndarray]:
    """
    Σ_{y_i > y_j} |ΔNDCG_ij| · ln(1 + exp(-(s_i - s_j))).

    |ΔNDCG_ij| usa as posições induzidas pelos scores atuais (ganho = rótulo,
    normalizado pelo IDCG) e é tratado como constante na derivada.
    """
    s, y = _as_listing(scores, labels)
    if np.all(y == y[0]):
        raise ListingSkipped("rótulos todos iguais, sem pares informativos")
    n = len(s)
    order = np.argsort(-s, kind='stable')
    rank = np.empty(n, dtype=np.float64)
    rank[order] = np.arange(1, n + 1)
    disc = 1.0 / np.log2(rank + 1.0)
    idcg = float(np.sum(np.sort(y)[::-1] / np.log2(np.arange(2, n + 2))))

    dy = y[:, None] - y[None, :]
    pair = dy > 0
    delta = np.abs(dy * (disc[:, None] - disc[None, :])) / idcg
    ds = s[:, None] - s[None, :]
    loss = float(np.sum(np.where(pair, delta * np.logaddexp(0.0, -ds), 0.0)))
    lam = np.where(pair, -delta * expit(-ds), 0.0)
    grad = lam.sum(axis=1) - lam.sum(axis=0)
    return loss, grad


def _alpha_of(config: Union[RcrConfig, float]) -> float:
    alpha = float(config.alpha if isinstance(config, RcrConfig) else config)
    if not (0.0 <= alpha <= 1.0):
        raise ConfigError(f"alpha={alpha} fora de [0, 1]")
    return alpha


def rcr_loss(scores, labels, config: Union[RcrConfig, float]) -> Tuple[float, np.ndarray]:
    """(1-α)·BCE médio de sigmoid(s) + α·entropia cruzada de softmax(s) contra y/Σy."""
    alpha = _alpha_of(config)
    s, y = _as_listing(scores, labels)
    n = len(s)
    point, point_grad = bce_with_logits(s, y)
    point_loss = float(np.mean(point))
    point_grad = point_grad / n

    if alpha > 0.0:
        total = y.sum()
        if total <= 0:
            raise ListingSkipped("listagem sem clique, alvo listwise indefinido")
        target = y / total
        list_loss = float(-np.sum(target * (s - logsumexp(s))))
        list_grad = softmax(s) - target
    else:
        list_loss, list_grad = 0.0, np.zeros(n)

    if alpha == 0.0:
        return point_loss, point_grad
    if alpha == 1.0:
        return list_loss, list_grad
    return (1.0 - alpha) * point_loss + alpha * list_loss, (1.0 - alpha) * point_grad + alpha * list_grad


# ----------------------------------------------------------------------------
# scoring
# ----------------------------------------------------------------------------

def _features(model: RankerModel, x_ctx, x_item) -> np.ndarray:
    x_ctx = np.asarray(x_ctx, dtype=np.float64)
    x_item = np.asarray(x_item, dtype=np.float64)
    if x_item.ndim == 1:
        x_item = x_item[None, :]
    if x_item.shape[1] != model.item_dim:
        raise ShapeError(f"item_dim {x_item.shape[1]} != {model.item_dim}", layer=0)
    if x_ctx.ndim == 1:
        x_ctx = np.broadcast_to(x_ctx, (len(x_item), len(x_ctx)))
    if x_ctx.shape != (len(x_item), model.ctx_dim):
        raise ShapeError(f"x_ctx {x_ctx.shape} incompatível com ctx_dim {model.ctx_dim}", layer=0)
    return np.hstack([x_ctx, x_item])


def score_listing(model: RankerModel, listing: 'Listing') -> np.ndarray:
    return forward(model.net, _features(model, listing.x_ctx, listing.x_item)).output[:, 0].copy()


def score_dataset(model: RankerModel, dataset: 'Dataset') -> np.ndarray:
    """Score por linha; como o ranker é item-local, equivale a pontuar listagem a listagem."""
    if len(dataset) == 0:
        return np.zeros(0)
    return forward(model.net, _features(model, dataset.x_ctx, dataset.x_item)).output[:, 0].copy()


def ranker_context_embedding(model: RankerModel, x_ctx) -> np.ndarray:
    """Última ativação oculta do ranker alimentado só com o contexto (bloco de item zerado)."""
    x_ctx = np.asarray(x_ctx, dtype=np.float64)
    single = x_ctx.ndim == 1
    x = x_ctx[None, :] if single else x_ctx
    if x.shape[1] != model.ctx_dim:
        raise ShapeError(f"x_ctx com {x.shape[1]} colunas, ranker espera {model.ctx_dim}", layer=0)
    if len(model.net.layers) < 2:
        return x_ctx.copy()
    feats = np.hstack([x, np.zeros((len(x), model.item_dim))])
    emb = forward(model.net, feats).post[-2]
    return emb[0].copy() if single else emb.copy()


# ----------------------------------------------------------------------------
# treino
# ----------------------------------------------------------------------------

def _listing_loss(model_loss: str, alpha: Optional[float], scores, labels):
    if model_loss == 'rcr':
        return rcr_loss(scores, labels, alpha)
    return lambda_pair_loss(scores, labels)


def train_ranker(dataset: 'Dataset', config: Optional[RankerConfig] = None, seed: int = 0) -> RankerModel:
    """
    Um passo de Adam a cada `listings_per_step` listagens (gradiente médio),
    listagens embaralhadas por época com rng derivado do seed.
    """
    config = config or RankerConfig()
    if len(dataset) == 0:
        raise InputError("dataset de treino vazio")
    if config.loss == 'rcr':
        _alpha_of(config.alpha)

    bounds = dataset.listing_bounds()
    feats = np.hstack([dataset.x_ctx, dataset.x_item])
    net = mlp_from_spec(dataset.ctx_dim + dataset.item_dim, list(config.hidden) + [1], seed=seed)
    state = init_optimizer(net, rule='adam', lr=config.lr)

    skipped_ids = set()
    epoch_loss = float('nan')
    for epoch in range(config.epochs):
        rng = np.random.default_rng([seed, epoch])
        perm = rng.permutation(len(bounds))
        total, used = 0.0, 0
        acc, in_step = None, 0
        for pos, li in enumerate(perm):
            lid, s0, s1 = bounds[li]
            trace = forward(net, feats[s0:s1])
            try:
                loss, g = _listing_loss(config.loss, config.alpha, trace.output[:, 0], dataset.click[s0:s1])
            except ListingSkipped:
                skipped_ids.add(lid)
                continue
            grads, _ = backward(net, trace, g[:, None])
            acc = grads if acc is None else acc.add(grads)
            in_step += 1
            total += loss
            used += 1
            if in_step == config.listings_per_step:
                net, state = optimizer_step(net, acc.scaled(1.0 / in_step), state)
                acc, in_step = None, 0
        if acc is not None:
            net, state = optimizer_step(net, acc.scaled(1.0 / in_step), state)
        if used == 0:
            raise InputError("nenhuma listagem com rótulos mistos para treinar o ranker")
        epoch_loss = total / used
        logger.info("ranker época %s/%s: loss média %.6f (%s listagens)", epoch + 1, config.epochs, epoch_loss, used)

    if skipped_ids:
        logger.warning("ranker: %s listagens sem pares informativos ignoradas", len(skipped_ids))
    return RankerModel(
        net=net,
        ctx_dim=dataset.ctx_dim,
        item_dim=dataset.item_dim,
        loss=config.loss,
        alpha=config.alpha,
        final_loss=epoch_loss,
        skipped_listings=len(skipped_ids),
    )


def untrained_ranker(ctx_dim: int, item_dim: int, config: Optional[RankerConfig] = None, seed: int = 0) -> RankerModel:
    """Rede recém-inicializada; serve de baseline aleatório de NDCG."""
    config = config or RankerConfig()
    net = mlp_from_spec(ctx_dim + item_dim, list(config.hidden) + [1], seed=seed)
    return RankerModel(net=net, ctx_dim=ctx_dim, item_dim=item_dim)


# ----------------------------------------------------------------------------
# serialização
# ----------------------------------------------------------------------------

def ranker_to_bytes(model: RankerModel) -> bytes:
    net_meta, arrays = mlp_to_parts(model.net, 'net')
    meta = {
        'net': net_meta,
        'ctx_dim': model.ctx_dim,
        'item_dim': model.item_dim,
        'loss': model.loss,
        'alpha': model.alpha,
        'final_loss': model.final_loss,
        'skipped_listings': model.skipped_listings,
    }
    return encode('ranker', meta, arrays)


def ranker_from_bytes(data: bytes) -> RankerModel:
    _, meta, arrays = decode(data, expected_kind='ranker')
    return RankerModel(
        net=mlp_from_parts(meta['net'], arrays, 'net'),
        ctx_dim=int(meta['ctx_dim']),
        item_dim=int(meta['item_dim']),
        loss=meta.get('loss', 'lambda'),
        alpha=meta.get('alpha'),
        final_loss=meta.get('final_loss'),
        skipped_listings=int(meta.get('skipped_listings', 0)),
    )
