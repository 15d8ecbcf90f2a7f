# core/bench/significance.py
"""
Bootstrap pareado por listagem: as listagens do split de teste são
reamostradas com reposição e, em cada reamostra, a métrica é recalculada
para o candidato e para a referência (MLPlatt) nas mesmas listagens.

p bilateral = min(1, 2 · min(P(dif ≤ 0), P(dif ≥ 0))).
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from core.config import Config
from core.errors import InputError
from core.metrics import FieldPartition, auc, f_ece, group_indices, ndcg_listing

logger = logging.getLogger(__name__)

METRICS = ('F-ECE', 'LogLoss', 'NDCG', 'AUC')


@dataclass
class ScoredPredictions:
    preds: np.ndarray                 # probabilidades calibradas
    ranking_scores: np.ndarray        # ordem usada no NDCG

    def __post_init__(self):
        self.preds = np.asarray(self.preds, dtype=np.float64)
        self.ranking_scores = np.asarray(self.ranking_scores, dtype=np.float64)
        if self.preds.shape != self.ranking_scores.shape:
            raise InputError("preds e ranking_scores desalinhados")


def _per_listing_ndcg(scores: np.ndarray, labels: np.ndarray, groups: List[np.ndarray]) -> np.ndarray:
    """NaN nas listagens sem positivo (ficam fora da média)."""
    out = np.full(len(groups), np.nan)
    for k, idx in enumerate(groups):
        v = ndcg_listing(scores[idx], labels[idx])
        if v is not None:
            out[k] = v
    return out


def _per_row_log_loss(preds: np.ndarray, labels: np.ndarray) -> np.ndarray:
    eps = getattr(Config, 'PROB_EPS', 1e-7)
    p = np.clip(preds, eps, 1.0 - eps)
    return -(labels * np.log(p) + (1.0 - labels) * np.log(1.0 - p))


def _metric_values(s: ScoredPredictions, labels, fields, rows, sampled, ndcg, ll, M) -> Dict[str, Optional[float]]:
    y = labels[rows]
    partition = FieldPartition.from_values('field', fields[rows])
    ndcg_sample = ndcg[sampled]
    ndcg_sample = ndcg_sample[~np.isnan(ndcg_sample)]
    return {
        'F-ECE': f_ece(s.preds[rows], y, partition, M)[0],
        'LogLoss': float(np.mean(ll[rows])),
        'NDCG': float(np.mean(ndcg_sample)) if len(ndcg_sample) else None,
        'AUC': auc(s.preds[rows], y),
    }


def p_value(diffs: np.ndarray) -> float:
    diffs = np.asarray(diffs, dtype=np.float64)
    if diffs.size == 0:
        return 1.0
    below = float(np.mean(diffs <= 0.0))
    above = float(np.mean(diffs >= 0.0))
    return min(1.0, 2.0 * min(below, above))


def paired_bootstrap(candidate: ScoredPredictions, reference: ScoredPredictions, labels, fields, listing_ids,
                     M: int = Config.ECE_BINS, resamples: int = Config.BOOTSTRAP_RESAMPLES,
                     seed: int = 0) -> Dict[str, float]:
    """p-valor por métrica (F-ECE, LogLoss, NDCG, AUC) do candidato contra a referência."""
    labels = np.asarray(labels, dtype=np.float64)
    fields = np.asarray(fields, dtype=str)
    listing_ids = np.asarray(listing_ids)
    n = len(labels)
    for s in (candidate, reference):
        if s.preds.shape != (n,):
            raise InputError(f"predições {s.preds.shape} para {n} registros")
    if resamples < 1:
        raise InputError("resamples deve ser >= 1")

    groups = group_indices(listing_ids)
    if not groups:
        raise InputError("bootstrap sem listagens")
    cand_ndcg = _per_listing_ndcg(candidate.ranking_scores, labels, groups)
    ref_ndcg = _per_listing_ndcg(reference.ranking_scores, labels, groups)
    cand_ll = _per_row_log_loss(candidate.preds, labels)
    ref_ll = _per_row_log_loss(reference.preds, labels)

    rng = np.random.default_rng([seed, 4])
    diffs: Dict[str, List[float]] = {m: [] for m in METRICS}
    log_every = max(resamples // 4, 1)
    for b in range(resamples):
        sampled = rng.integers(0, len(groups), size=len(groups))
        rows = np.concatenate([groups[k] for k in sampled])
        cand = _metric_values(candidate, labels, fields, rows, sampled, cand_ndcg, cand_ll, M)
        ref = _metric_values(reference, labels, fields, rows, sampled, ref_ndcg, ref_ll, M)
        for m in METRICS:
            # reamostra com uma só classe (AUC) ou sem positivo (NDCG) não entra
            if cand[m] is not None and ref[m] is not None:
                diffs[m].append(cand[m] - ref[m])
        if (b + 1) % log_every == 0:
            logger.info("bootstrap: %s/%s reamostras", b + 1, resamples)

    return {m: p_value(np.asarray(diffs[m])) for m in METRICS}
