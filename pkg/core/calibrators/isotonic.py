# core/calibrators/isotonic.py
"""
Regressão isotônica suavizada: ajusta PAVA sobre bins de mesma contagem
(média de r, taxa de positivos) e prediz por interpolação linear entre os
knots, com clamp nas pontas.
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from core.calibrators.base import CalibrationModel, CalibrationSet, register_kind
from core.config import Config
from core.errors import InputError
from core.nn.serialization import decode, encode

logger = logging.getLogger(__name__)


def pava(values: Sequence[float], weights: Sequence[float] = None) -> np.ndarray:
    """Projeção de mínimos quadrados ponderados na sequência não-decrescente."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise InputError("pava: entrada vazia")
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != v.shape:
        raise InputError("pava: values e weights com tamanhos diferentes")
    if np.any(w <= 0):
        raise InputError("pava: pesos devem ser > 0")

    # pilha de blocos: (média, peso, tamanho)
    means: List[float] = []
    wsum: List[float] = []
    sizes: List[int] = []
    for x, wt in zip(v, w):
        means.append(float(x))
        wsum.append(float(wt))
        sizes.append(1)
        while len(means) > 1 and means[-2] > means[-1]:
            m2, w2, n2 = means.pop(), wsum.pop(), sizes.pop()
            m1, w1, n1 = means.pop(), wsum.pop(), sizes.pop()
            wt_total = w1 + w2
            means.append((m1 * w1 + m2 * w2) / wt_total)
            wsum.append(wt_total)
            sizes.append(n1 + n2)
    return np.repeat(means, sizes)


@dataclass
class SmoothedIsotonicModel(CalibrationModel):
    knot_r: np.ndarray          # estritamente crescente
    knot_p: np.ndarray          # não-decrescente em [0, 1]
    kind = 'isotonic'

    def predict(self, r, x_ctx=None, field=None) -> np.ndarray:
        out = np.interp(np.asarray(r, dtype=np.float64), self.knot_r, self.knot_p)
        return float(out) if np.ndim(out) == 0 else out

    def to_bytes(self) -> bytes:
        return encode('isotonic', {}, [('knot_r', self.knot_r), ('knot_p', self.knot_p)])


def fit_smoothed_isotonic(cal_set: CalibrationSet, bins: int = None) -> SmoothedIsotonicModel:
    bins = int(bins if bins is not None else getattr(Config, 'ISOTONIC_BINS', 100))
    if bins < 2:
        raise InputError("isotonic: é preciso ao menos 2 bins")
    if len(cal_set) == 0:
        raise InputError("isotonic: conjunto de calibração vazio")

    r, y = cal_set.r, cal_set.click
    distinct = len(np.unique(r))
    limit = min(distinct, len(r))
    if limit < bins:
        logger.warning("isotonic: só %s scores distintos para %s bins, reduzindo bins para %s", distinct, bins, limit)
        bins = limit

    order = np.argsort(r, kind='stable')
    groups = np.array_split(order, bins)
    mean_r = np.array([r[g].mean() for g in groups])
    rate = np.array([y[g].mean() for g in groups])
    size = np.array([len(g) for g in groups], dtype=np.float64)
    fitted = pava(rate, size)

    # bins com a mesma média de r viram um único knot
    uniq_r, inverse = np.unique(mean_r, return_inverse=True)
    knot_p = np.bincount(inverse, weights=fitted * size) / np.bincount(inverse, weights=size)
    model = SmoothedIsotonicModel(knot_r=uniq_r, knot_p=np.clip(knot_p, 0.0, 1.0))
    logger.info("isotonic: %s bins, %s knots", bins, len(uniq_r))
    return model


def isotonic_from_bytes(data: bytes) -> SmoothedIsotonicModel:
    _, _, arrays = decode(data, expected_kind='isotonic')
    return SmoothedIsotonicModel(knot_r=arrays['knot_r'], knot_p=arrays['knot_p'])


register_kind('isotonic', fit_smoothed_isotonic, isotonic_from_bytes)
