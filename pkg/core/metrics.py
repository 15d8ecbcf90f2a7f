# core/metrics.py
"""
Métricas de calibração e ranking: ECE(z)@M, F-ECE@M, LogLoss, AUC, NDCG e a
fração de listagens desordenadas (Spearman por listagem).
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata

from core.config import Config
from core.errors import InputError
from core.nn.losses import bce_loss

logger = logging.getLogger(__name__)


@dataclass
class FieldPartition:
    field_name: str
    blocks: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def from_values(cls, field_name: str, values) -> 'FieldPartition':
        values = np.asarray(values)
        blocks = {}
        for z in np.unique(values):
            blocks[str(z)] = np.flatnonzero(values == z)
        return cls(field_name, blocks)

    def size(self) -> int:
        return int(sum(len(idx) for idx in self.blocks.values()))

    def check_covers(self, n: int):
        all_idx = np.concatenate([idx for idx in self.blocks.values()]) if self.blocks else np.zeros(0, dtype=int)
        if len(all_idx) != n or len(np.unique(all_idx)) != n or (n and (all_idx.min() < 0 or all_idx.max() >= n)):
            raise InputError(f"partição {self.field_name!r} não cobre as {n} linhas de forma disjunta")


def _as_pair(preds, labels) -> Tuple[np.ndarray, np.ndarray]:
    p = np.asarray(preds, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape or p.ndim != 1:
        raise InputError(f"preds {p.shape} e labels {y.shape} devem ser vetores do mesmo tamanho")
    return p, y


def quantile_bins(preds: np.ndarray, M: int) -> List[np.ndarray]:
    """
    Bins de mesma contagem pela ordem (pred, índice original); o resto da
    divisão vai para os primeiros bins.
    """
    n = len(preds)
    if M > n:
        logger.warning("ECE: %s linhas < %s bins, reduzindo M para %s", n, M, n)
        M = n
    order = np.argsort(preds, kind='stable')
    return np.array_split(order, M)


def _binned_gap(preds: np.ndarray, target: np.ndarray, M: int) -> float:
    if len(preds) == 0:
        raise InputError("ECE de conjunto vazio")
    if M < 1:
        raise InputError("M deve ser >= 1")
    bins = quantile_bins(preds, M)
    gaps = [abs(float(np.sum(target[b] - preds[b]))) / len(b) for b in bins]
    return float(np.mean(gaps))


def ece_at_m(preds, labels, M: int = Config.ECE_BINS) -> float:
    p, y = _as_pair(preds, labels)
    return _binned_gap(p, y, M)


def oracle_ece_at_m(preds, true_ctr, M: int = Config.ECE_BINS) -> float:
    """Mesma divisão em bins do ece_at_m, mas comparando com o CTR verdadeiro médio do bin."""
    p, t = _as_pair(preds, true_ctr)
    return _binned_gap(p, t, M)


def reliability_curve(preds, labels, M: int = Config.ECE_BINS) -> List[Dict[str, float]]:
    p, y = _as_pair(preds, labels)
    return [
        {'mean_pred': float(p[b].mean()), 'pos_rate': float(y[b].mean()), 'count': int(len(b))}
        for b in quantile_bins(p, M)
    ]


def f_ece(preds, labels, partition: FieldPartition, M: int = Config.ECE_BINS) -> Tuple[float, Dict[str, float]]:
    p, y = _as_pair(preds, labels)
    partition.check_covers(len(p))
    per_field: Dict[str, float] = {}
    weights: Dict[str, int] = {}
    for z, idx in partition.blocks.items():
        if len(idx) == 0:
            logger.warning("F-ECE: bloco vazio para %s=%s, excluído", partition.field_name, z)
            continue
        per_field[z] = ece_at_m(p[idx], y[idx], M)
        weights[z] = len(idx)
    total = sum(weights.values())
    if total == 0:
        raise InputError("F-ECE sem observações")
    value = sum(weights[z] * per_field[z] for z in per_field) / total
    return float(value), per_field


def log_loss(preds, labels, eps: float = Config.PROB_EPS) -> float:
    p, y = _as_pair(preds, labels)
    loss, _ = bce_loss(p, y, eps=eps)
    return float(np.mean(loss))


def auc(scores, labels) -> Optional[float]:
    """Mann–Whitney com empates valendo 1/2. None quando só há uma classe."""
    s, y = _as_pair(scores, labels)
    pos = y == 1.0
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(s, method='average')
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def ndcg_listing(scores, labels) -> Optional[float]:
    """NDCG da lista completa, ganho = rótulo, desconto 1/log2(pos+1); empates pela ordem original."""
    s, y = _as_pair(scores, labels)
    if len(s) == 0 or y.sum() <= 0:
        return None
    order = np.argsort(-s, kind='stable')
    discounts = 1.0 / np.log2(np.arange(2, len(s) + 2))
    dcg = float(np.sum(y[order] * discounts))
    ideal = float(np.sum(np.sort(y)[::-1] * discounts))
    return dcg / ideal


def group_indices(listing_ids) -> List[np.ndarray]:
    """Índices de cada listagem (ordem original preservada dentro do grupo)."""
    ids = np.asarray(listing_ids)
    if len(ids) == 0:
        return []
    order = np.argsort(ids, kind='stable')
    cuts = np.flatnonzero(np.diff(ids[order])) + 1
    return np.split(order, cuts)


def mean_ndcg(scores, labels, listing_ids) -> Tuple[float, int]:
    """(NDCG médio, número de listagens excluídas por não terem positivo)."""
    s, y = _as_pair(scores, labels)
    values, excluded = [], 0
    for idx in group_indices(listing_ids):
        v = ndcg_listing(s[idx], y[idx])
        if v is None:
            excluded += 1
        else:
            values.append(v)
    if excluded:
        logger.info("NDCG: %s listagens sem clique excluídas da média", excluded)
    return (float(np.mean(values)) if values else 0.0), excluded


def listing_ndcgs(scores, labels, listing_ids) -> Dict[int, float]:
    s, y = _as_pair(scores, labels)
    ids = np.asarray(listing_ids)
    out = {}
    for idx in group_indices(ids):
        v = ndcg_listing(s[idx], y[idx])
        if v is not None:
            out[int(ids[idx[0]])] = v
    return out


def spearman(a, b) -> float:
    """
    Spearman com ranks médios nos empates. Se os dois lados são constantes a
    ordem é trivialmente preservada (1.0); se só um é constante, 0.0.
    """
    ra = rankdata(np.asarray(a, dtype=np.float64), method='average')
    rb = rankdata(np.asarray(b, dtype=np.float64), method='average')
    da = ra - ra.mean()
    db = rb - rb.mean()
    na = float(np.sqrt(np.sum(da * da)))
    nb = float(np.sqrt(np.sum(db * db)))
    if na == 0.0 and nb == 0.0:
        return 1.0
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.sum(da * db) / (na * nb))


def misordered_fraction(raw, calibrated, listing_ids, threshold: float = Config.MISORDER_THRESHOLD) -> float:
    r = np.asarray(raw, dtype=np.float64)
    c = np.asarray(calibrated, dtype=np.float64)
    if r.shape != c.shape:
        raise InputError("scores brutos e calibrados desalinhados")
    counted = misordered = 0
    for idx in group_indices(listing_ids):
        if len(idx) < 2:
            continue
        counted += 1
        if spearman(r[idx], c[idx]) < threshold:
            misordered += 1
    return misordered / counted if counted else 0.0


def evaluate(name: str, preds, labels, fields, listing_ids, ranking_scores=None, raw_scores=None,
             M: int = Config.ECE_BINS, field_name: str = 'field'):
    """
    MetricsReport de um par (ranker, calibrador). ranking_scores define a ordem
    para NDCG (default: preds); raw_scores é a referência da fração desordenada.
    """
    from core.models import MetricsReport

    p, y = _as_pair(preds, labels)
    partition = FieldPartition.from_values(field_name, fields)
    f_value, per_field = f_ece(p, y, partition, M)
    rank_scores = p if ranking_scores is None else np.asarray(ranking_scores, dtype=np.float64)
    ndcg_value, excluded = mean_ndcg(rank_scores, y, listing_ids)
    misordered = 0.0 if raw_scores is None else misordered_fraction(raw_scores, rank_scores, listing_ids)
    return MetricsReport(
        name=name,
        f_ece=f_value,
        per_field_ece=per_field,
        field_counts={z: int(len(idx)) for z, idx in partition.blocks.items() if z in per_field},
        log_loss=log_loss(p, y),
        auc=auc(p, y),
        ndcg=ndcg_value,
        misordered_fraction=misordered,
        bins=int(M),
        ndcg_excluded=excluded,
    )
