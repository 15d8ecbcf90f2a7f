# core/calibrators/platt.py
"""Platt scaling: c = sigmoid(a·r + b), (a, b) por máxima verossimilhança."""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from core.calibrators.base import CalibrationModel, CalibrationSet, register_kind
from core.config import Config
from core.nn.serialization import decode, encode

logger = logging.getLogger(__name__)


@dataclass
class PlattModel(CalibrationModel):
    a: float
    b: float
    degenerate: bool = False
    kind = 'platt'

    def predict(self, r, x_ctx=None, field=None) -> np.ndarray:
        return apply_platt(self, r)

    def to_bytes(self) -> bytes:
        return encode('platt', {'degenerate': self.degenerate}, [('ab', np.array([self.a, self.b]))])


def apply_platt(model: PlattModel, r):
    out = expit(model.a * np.asarray(r, dtype=np.float64) + model.b)
    return float(out) if np.ndim(out) == 0 else out


def _objective(w, r, y):
    s = w[0] * r + w[1]
    loss = float(np.mean(np.logaddexp(0.0, s) - y * s))
    g = expit(s) - y
    grad = np.array([np.mean(g * r), np.mean(g)])
    return loss, grad


def _hessian(w, r, y):
    p = expit(w[0] * r + w[1])
    q = p * (1.0 - p)
    return np.array([[np.mean(q * r * r), np.mean(q * r)],
                     [np.mean(q * r), np.mean(q)]])


def fit_platt(cal_set: CalibrationSet, gtol: float = None, max_iter: int = None) -> PlattModel:
    """BCE médio minimizado por região de confiança (gradiente < gtol ou max_iter iterações)."""
    cal_set.require_both_classes('platt')
    gtol = float(gtol if gtol is not None else getattr(Config, 'PLATT_GTOL', 1e-8))
    max_iter = int(max_iter if max_iter is not None else getattr(Config, 'PLATT_MAX_ITER', 10000))
    r, y = cal_set.r, cal_set.click
    rate = float(y.mean())

    if np.all(r == r[0]):
        logger.warning("platt: score constante, inclinação não identificável; usando a=0, b=logit(%.6f)", rate)
        return PlattModel(a=0.0, b=float(logit(rate)), degenerate=True)

    w0 = np.array([0.0, float(logit(rate))])
    res = minimize(_objective, w0, args=(r, y), jac=True, hess=_hessian, method='trust-exact',
                   options={'gtol': gtol, 'maxiter': max_iter})
    if not res.success:
        logger.warning("platt: otimização não convergiu (%s); usando último iterado", res.message)
    a, b = float(res.x[0]), float(res.x[1])
    logger.info("platt: a=%.6f b=%.6f (%s iterações)", a, b, res.nit)
    return PlattModel(a=a, b=b)


def platt_from_bytes(data: bytes) -> PlattModel:
    _, meta, arrays = decode(data, expected_kind='platt')
    a, b = arrays['ab']
    return PlattModel(a=float(a), b=float(b), degenerate=bool(meta.get('degenerate', False)))


register_kind('platt', fit_platt, platt_from_bytes)
