# core/nn/losses.py
from typing import Tuple

import numpy as np

from core.config import Config
from core.errors import InputError


def _check_labels(label: np.ndarray):
    if not np.all((label == 0.0) | (label == 1.0)):
        raise InputError("rótulo fora de {0,1}")


def bce_loss(pred, label, eps: float = Config.PROB_EPS) -> Tuple[np.ndarray, np.ndarray]:
    """
    BCE elemento a elemento com pred clipado em [eps, 1-eps].
    Devolve (loss, d loss / d pred); escalar entra, escalar sai.
    """
    p = np.clip(np.asarray(pred, dtype=np.float64), eps, 1.0 - eps)
    y = np.asarray(label, dtype=np.float64)
    _check_labels(y)
    loss = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    grad = -y / p + (1.0 - y) / (1.0 - p)
    if loss.ndim == 0:
        return float(loss), float(grad)
    return loss, grad


def bce_with_logits(logits, label) -> Tuple[np.ndarray, np.ndarray]:
    """BCE(sigmoid(s), y) em forma estável; gradiente em relação a s é sigmoid(s) - y."""
    s = np.asarray(logits, dtype=np.float64)
    y = np.asarray(label, dtype=np.float64)
    _check_labels(y)
    loss = np.logaddexp(0.0, s) - y * s
    grad = np.exp(-np.logaddexp(0.0, -s)) - y
    return loss, grad
