# core/calibrators/base.py
"""
Interface comum dos calibradores e registro por `kind`.

Cada módulo de calibrador registra (função de fit, loader) com
`register_kind`; `build_calibrator` monta um `Calibrator` a partir de um
CalibratorSpec e `load_calibrator` reabre qualquer container serializado.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, Optional, Tuple

import numpy as np

from core.errors import FitError, InputError, SerializationError, ShapeError
from core.models import CalibratorSpec
from core.nn.serialization import peek_kind

logger = logging.getLogger(__name__)


@dataclass
class CalibrationRecord:
    r: float
    x_ctx: np.ndarray
    field: str
    c_true: float
    listing_id: int


@dataclass
class CalibrationSet:
    """Registros de calibração em forma colunar (uma linha por item)."""
    r: np.ndarray
    x_ctx: np.ndarray
    field: np.ndarray
    click: np.ndarray
    listing_id: np.ndarray

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=np.float64)
        n = len(self.r)
        self.x_ctx = np.asarray(self.x_ctx, dtype=np.float64)
        if self.x_ctx.ndim == 1:
            self.x_ctx = self.x_ctx.reshape(n, -1) if n else self.x_ctx.reshape(0, 0)
        self.field = np.asarray(self.field, dtype=str)
        self.click = np.asarray(self.click, dtype=np.float64)
        self.listing_id = np.asarray(self.listing_id, dtype=np.int64)
        for name in ('x_ctx', 'field', 'click', 'listing_id'):
            if len(getattr(self, name)) != n:
                raise ShapeError(f"coluna {name} com {len(getattr(self, name))} linhas, esperado {n}")
        if not np.all(np.isfinite(self.r)):
            raise InputError("scores r não finitos no conjunto de calibração")

    def __len__(self):
        return len(self.r)

    @property
    def ctx_dim(self) -> int:
        return int(self.x_ctx.shape[1])

    def records(self) -> Iterator[CalibrationRecord]:
        for i in range(len(self)):
            yield CalibrationRecord(float(self.r[i]), self.x_ctx[i], str(self.field[i]),
                                    float(self.click[i]), int(self.listing_id[i]))

    def take(self, idx) -> 'CalibrationSet':
        return CalibrationSet(self.r[idx], self.x_ctx[idx], self.field[idx], self.click[idx], self.listing_id[idx])

    def require_both_classes(self, who: str):
        if len(self) == 0:
            raise FitError(f"{who}: conjunto de calibração vazio")
        pos = float(self.click.sum())
        if pos == 0 or pos == len(self):
            raise FitError(f"{who}: é preciso ter as duas classes de rótulo")


class CalibrationModel(ABC):
    kind: str = ''

    @abstractmethod
    def predict(self, r, x_ctx=None, field=None) -> np.ndarray:
        ...

    @abstractmethod
    def to_bytes(self) -> bytes:
        ...


FitFn = Callable[..., CalibrationModel]
LoadFn = Callable[[bytes], CalibrationModel]

_REGISTRY: Dict[str, Tuple[FitFn, LoadFn]] = {}


def register_kind(kind: str, fit: FitFn, load: LoadFn):
    _REGISTRY[kind] = (fit, load)


def registered_kinds():
    return sorted(_REGISTRY)


class Calibrator:
    """Envelope usado pelo bench e pelo serviço: fit(cal_set) -> predict(r, x_ctx, field)."""

    def __init__(self, kind: str, name: Optional[str] = None, params: Optional[Dict[str, Any]] = None,
                 model: Optional[CalibrationModel] = None):
        if kind not in _REGISTRY:
            raise InputError(f"calibrador desconhecido: {kind!r} (disponíveis: {registered_kinds()})")
        self.kind = kind
        self.name = name or kind
        self.params = dict(params or {})
        self.model = model

    def fit(self, cal_set: CalibrationSet) -> 'Calibrator':
        fit_fn, _ = _REGISTRY[self.kind]
        logger.info("ajustando calibrador %s em %s registros", self.name, len(cal_set))
        self.model = fit_fn(cal_set, **self.params)
        return self

    def predict(self, r, x_ctx=None, field=None) -> np.ndarray:
        if self.model is None:
            raise InputError(f"calibrador {self.name} ainda não ajustado")
        return self.model.predict(r, x_ctx, field)

    def predict_set(self, cal_set: CalibrationSet) -> np.ndarray:
        return self.predict(cal_set.r, cal_set.x_ctx, cal_set.field)

    def to_bytes(self) -> bytes:
        if self.model is None:
            raise SerializationError(f"calibrador {self.name} sem modelo para serializar")
        return self.model.to_bytes()

    @classmethod
    def from_bytes(cls, data: bytes, name: Optional[str] = None) -> 'Calibrator':
        kind = peek_kind(data)
        if kind not in _REGISTRY:
            raise SerializationError(f"container de tipo {kind!r} não é um calibrador")
        _, load_fn = _REGISTRY[kind]
        return cls(kind, name=name, model=load_fn(data))


def build_calibrator(spec: CalibratorSpec, defaults: Optional[Dict[str, Dict[str, Any]]] = None) -> Calibrator:
    """defaults[kind] traz parâmetros do ExperimentConfig; spec.params tem precedência."""
    params = dict((defaults or {}).get(spec.kind, {}))
    params.update(spec.params)
    return Calibrator(spec.kind, name=spec.label, params=params)


def load_calibrator(path) -> Calibrator:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"modelo não encontrado: {p}")
    return Calibrator.from_bytes(p.read_bytes())
