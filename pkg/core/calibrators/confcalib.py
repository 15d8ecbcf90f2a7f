# core/calibrators/confcalib.py
"""
ConfCalib: correção por campo sobre a saída do Platt.

Para cada valor z do campo, a taxa de positivos observada define um
intervalo de Wilson. Se a média das predições base no campo cai fora do
intervalo, as predições do campo são escaladas em direção ao limite mais
próximo, com o desvio amortecido por t(δ) = δ / (1 + |δ|).
"""
import logging
from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Tuple

import numpy as np
from scipy.stats import norm

from core.calibrators.base import CalibrationModel, CalibrationSet, register_kind
from core.calibrators.platt import PlattModel, apply_platt, fit_platt
from core.config import Config
from core.errors import InputError
from core.nn.serialization import decode, encode

logger = logging.getLogger(__name__)

GLOBAL_KEY = '__global__'


@dataclass
class FieldEntry:
    positives: float
    total: float
    lower: float
    upper: float
    scale: float


@dataclass
class ConfCalibModel(CalibrationModel):
    base: PlattModel
    level: float
    entries: Dict[str, FieldEntry] = dc_field(default_factory=dict)
    global_entry: FieldEntry = None
    kind = 'confcalib'

    def predict(self, r, x_ctx=None, field=None) -> np.ndarray:
        base_pred = apply_platt(self.base, np.atleast_1d(np.asarray(r, dtype=np.float64)))
        if field is None:
            field = np.full(len(base_pred), GLOBAL_KEY)
        return apply_confcalib(self, base_pred, field)

    def entry_for(self, z: str) -> FieldEntry:
        return self.entries.get(str(z), self.global_entry)

    def to_bytes(self) -> bytes:
        names = sorted(self.entries)
        rows = [self.entries[z] for z in names] + [self.global_entry]
        table = np.array([[e.positives, e.total, e.lower, e.upper, e.scale] for e in rows])
        meta = {'level': self.level, 'fields': names, 'degenerate': self.base.degenerate}
        return encode('confcalib', meta, [('base_ab', np.array([self.base.a, self.base.b])), ('table', table)])


def wilson_interval(positives: float, total: float, level: float) -> Tuple[float, float]:
    if total <= 0:
        raise InputError("wilson: total deve ser > 0")
    z = float(norm.ppf(0.5 + level / 2.0))
    p = positives / total
    denom = 1.0 + z * z / total
    center = (p + z * z / (2.0 * total)) / denom
    half = z * np.sqrt(p * (1.0 - p) / total + z * z / (4.0 * total * total)) / denom
    return float(max(center - half, 0.0)), float(min(center + half, 1.0))


def dampen(delta: float) -> float:
    return delta / (1.0 + abs(delta))


def _entry(clicks: np.ndarray, base_pred: np.ndarray, level: float) -> FieldEntry:
    pos, total = float(clicks.sum()), float(len(clicks))
    lower, upper = wilson_interval(pos, total, level)
    mean_pred = float(base_pred.mean())
    if mean_pred < lower:
        delta = lower - mean_pred
    elif mean_pred > upper:
        delta = upper - mean_pred
    else:
        delta = 0.0
    scale = (mean_pred + dampen(delta)) / mean_pred if delta != 0.0 else 1.0
    return FieldEntry(pos, total, lower, upper, max(scale, np.finfo(np.float64).tiny))


def fit_confcalib(cal_set: CalibrationSet, level: float = None, base: PlattModel = None) -> ConfCalibModel:
    level = float(level if level is not None else getattr(Config, 'CONFCALIB_LEVEL', 0.95))
    if not (0.0 < level < 1.0):
        raise InputError("confcalib: nível de confiança deve estar em (0, 1)")
    base = base or fit_platt(cal_set)
    base_pred = apply_platt(base, cal_set.r)

    entries: Dict[str, FieldEntry] = {}
    for z in np.unique(cal_set.field):
        mask = cal_set.field == z
        entries[str(z)] = _entry(cal_set.click[mask], base_pred[mask], level)
        e = entries[str(z)]
        if e.scale != 1.0:
            logger.info("confcalib: campo %s fora do intervalo [%.4f, %.4f], escala %.4f", z, e.lower, e.upper, e.scale)
    global_entry = _entry(cal_set.click, base_pred, level)
    return ConfCalibModel(base=base, level=level, entries=entries, global_entry=global_entry)


def apply_confcalib(model: ConfCalibModel, base_pred, field) -> np.ndarray:
    """Campo não visto no fit usa a entrada global."""
    p = np.asarray(base_pred, dtype=np.float64)
    z = np.asarray(field, dtype=str)
    if z.ndim == 0:
        z = np.full(p.shape, str(z))
    if z.shape != p.shape:
        raise InputError(f"field {z.shape} desalinhado com predições {p.shape}")
    scale = np.ones_like(p)
    for value in np.unique(z):
        scale[z == value] = model.entry_for(value).scale
    eps = getattr(Config, 'PROB_EPS', 1e-7)
    return np.clip(p * scale, eps, 1.0 - eps)


def confcalib_from_bytes(data: bytes) -> ConfCalibModel:
    _, meta, arrays = decode(data, expected_kind='confcalib')
    a, b = arrays['base_ab']
    rows: List[FieldEntry] = [FieldEntry(*map(float, row)) for row in arrays['table']]
    names = meta['fields']
    return ConfCalibModel(
        base=PlattModel(a=float(a), b=float(b), degenerate=bool(meta.get('degenerate', False))),
        level=float(meta['level']),
        entries=dict(zip(names, rows[:len(names)])),
        global_entry=rows[-1],
    )


register_kind('confcalib', fit_confcalib, confcalib_from_bytes)
