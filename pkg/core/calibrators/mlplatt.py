# core/calibrators/mlplatt.py
"""
MLPlatt: calibrador com contexto e penalidade de monotonicidade.

    emb = context_net(x_ctx)               (ou x_ctx, no modo identity)
    c   = mono_net(concat(emb, r))         (sigmoid na última camada)

Treino minimiza  BCE(c_true, c) + θ · mean(max(0, -d)),  d = ∂c/∂r.

d sai exato do backward (coordenada de r no input_grad). O gradiente da
penalidade em relação aos pesos precisa de ∂d/∂w; ele é obtido por
diferença central do backward completo (contexto + mono) em r ± h,
com output_grad = -θ/n nas linhas com d < 0.
"""
import logging
from dataclasses import dataclass, field as dc_field
from typing import List, Optional, Tuple

import numpy as np

from core.calibrators.base import CalibrationModel, CalibrationSet, register_kind
from core.errors import InputError, ShapeError, TrainingError
from core.models import MlplattConfig
from core.nn import MlpParams, backward, bce_loss, forward, init_optimizer, mlp_from_spec, optimizer_step
from core.nn.serialization import decode, encode, mlp_from_parts, mlp_to_parts

logger = logging.getLogger(__name__)


@dataclass
class MlplattModel(CalibrationModel):
    context_net: Optional[MlpParams]     # None = identity (x_ctx direto no mono_net)
    mono_net: MlpParams
    theta: float
    ctx_dim: int
    loss_history: List[float] = dc_field(default_factory=list)
    kind = 'mlplatt'

    def __post_init__(self):
        if self.context_net is not None and self.context_net.in_dim != self.ctx_dim:
            raise ShapeError(f"context_net espera {self.context_net.in_dim} entradas, ctx_dim={self.ctx_dim}", layer=0)
        if self.mono_net.in_dim != self.embedding_dim + 1:
            raise ShapeError(f"mono_net espera {self.mono_net.in_dim} entradas, embedding+r = {self.embedding_dim + 1}",
                             layer=0)
        if self.mono_net.out_dim != 1 or self.mono_net.activations[-1] != 'sigmoid':
            raise ShapeError("mono_net deve terminar em uma saída sigmoid", layer=len(self.mono_net.layers) - 1)

    @property
    def embedding_dim(self) -> int:
        return self.ctx_dim if self.context_net is None else self.context_net.out_dim

    def predict(self, r, x_ctx=None, field=None) -> np.ndarray:
        return apply_mlplatt(self, r, x_ctx)

    def to_bytes(self) -> bytes:
        mono_meta, arrays = mlp_to_parts(self.mono_net, 'mono')
        meta = {'theta': self.theta, 'ctx_dim': self.ctx_dim, 'mono': mono_meta, 'context': None}
        if self.context_net is not None:
            ctx_meta, ctx_arrays = mlp_to_parts(self.context_net, 'context')
            meta['context'] = ctx_meta
            arrays = ctx_arrays + arrays
        arrays.append(('loss_history', np.asarray(self.loss_history, dtype=np.float64)))
        return encode('mlplatt', meta, arrays)


# ----------------------------------------------------------------------------
# forward / derivadas
# ----------------------------------------------------------------------------

def _prepare(model: MlplattModel, r, x_ctx) -> Tuple[np.ndarray, np.ndarray]:
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    if r.ndim != 1:
        raise ShapeError(f"r deve ser vetor, veio shape {r.shape}")
    n = len(r)
    if x_ctx is None:
        if model.ctx_dim:
            raise ShapeError(f"x_ctx ausente para modelo com ctx_dim={model.ctx_dim}")
        return r, np.zeros((n, 0))
    x = np.asarray(x_ctx, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != model.ctx_dim:
            raise ShapeError(f"x_ctx com {x.shape[0]} valores, esperado {model.ctx_dim}", layer=0)
        x = np.broadcast_to(x, (n, model.ctx_dim))
    if x.shape != (n, model.ctx_dim):
        raise ShapeError(f"x_ctx {x.shape} incompatível com {n} scores e ctx_dim={model.ctx_dim}", layer=0)
    return r, x


def _embed(model: MlplattModel, x: np.ndarray):
    if model.context_net is None:
        return None, x
    trace = forward(model.context_net, x)
    return trace, trace.post[-1]


def _forward(model: MlplattModel, r: np.ndarray, x: np.ndarray):
    ctx_trace, emb = _embed(model, x)
    mono_trace = forward(model.mono_net, np.hstack([emb, r[:, None]]))
    return ctx_trace, mono_trace


def _backward(model: MlplattModel, ctx_trace, mono_trace, out_grad: np.ndarray):
    """Backward completo; devolve (grads contexto ou None, grads mono, input_grad do mono)."""
    mono_grads, in_grad = backward(model.mono_net, mono_trace, out_grad[:, None])
    ctx_grads = None
    if model.context_net is not None:
        ctx_grads, _ = backward(model.context_net, ctx_trace, in_grad[:, :-1])
    return ctx_grads, mono_grads, in_grad


def _derivative(model: MlplattModel, mono_trace) -> np.ndarray:
    _, in_grad = backward(model.mono_net, mono_trace, np.ones((mono_trace.input.shape[0], 1)))
    return in_grad[:, -1]


def apply_mlplatt(model: MlplattModel, r, x_ctx=None) -> np.ndarray:
    r, x = _prepare(model, r, x_ctx)
    _, mono_trace = _forward(model, r, x)
    return mono_trace.post[-1][:, 0].copy()


def input_derivative(model: MlplattModel, r, x_ctx=None) -> np.ndarray:
    """∂c/∂r exato, lido na coordenada de r do gradiente de entrada do mono_net."""
    r, x = _prepare(model, r, x_ctx)
    _, mono_trace = _forward(model, r, x)
    return _derivative(model, mono_trace)


def monotonicity_penalty(d) -> float:
    d = np.asarray(d, dtype=np.float64)
    if d.size == 0:
        raise InputError("penalidade monotônica de conjunto vazio")
    return float(np.mean(np.maximum(0.0, -d)))


def training_loss(model: MlplattModel, r, x_ctx, labels, theta: Optional[float] = None) -> float:
    """BCE médio + θ · penalidade monotônica, no conjunto inteiro."""
    theta = model.theta if theta is None else theta
    r, x = _prepare(model, r, x_ctx)
    _, mono_trace = _forward(model, r, x)
    c = mono_trace.post[-1][:, 0]
    bce, _ = bce_loss(c, np.asarray(labels, dtype=np.float64))
    loss = float(np.mean(bce))
    if theta > 0:
        loss += theta * monotonicity_penalty(_derivative(model, mono_trace))
    return loss


# ----------------------------------------------------------------------------
# treino
# ----------------------------------------------------------------------------

def _batch_grads(model: MlplattModel, r, x, y, fd_step: float, batch: int):
    n = len(r)
    ctx_trace, mono_trace = _forward(model, r, x)
    c = mono_trace.post[-1][:, 0]
    d = _derivative(model, mono_trace)
    bce, dbce = bce_loss(c, y)
    loss = float(np.mean(bce)) + model.theta * monotonicity_penalty(d)
    if not np.isfinite(loss):
        raise TrainingError("loss não finita", batch=batch)

    ctx_g, mono_g, _ = _backward(model, ctx_trace, mono_trace, dbce / n)

    violating = d < 0
    if model.theta > 0 and np.any(violating):
        w = np.where(violating, -model.theta / n, 0.0)
        cp, mp = _forward(model, r + fd_step, x)
        ctx_plus, mono_plus, _ = _backward(model, cp, mp, w)
        cm, mm = _forward(model, r - fd_step, x)
        ctx_minus, mono_minus, _ = _backward(model, cm, mm, w)
        inv = 1.0 / (2.0 * fd_step)
        mono_g = mono_g.add(mono_plus.add(mono_minus, scale=-1.0), scale=inv)
        if ctx_g is not None:
            ctx_g = ctx_g.add(ctx_plus.add(ctx_minus, scale=-1.0), scale=inv)
    return loss, ctx_g, mono_g


def init_mlplatt(ctx_dim: int, config: MlplattConfig) -> MlplattModel:
    identity = not config.context_layers or ctx_dim == 0
    if ctx_dim == 0 and config.context_layers:
        logger.info("mlplatt: ctx_dim=0, usando contexto identity")
    context_net = None
    emb_dim = ctx_dim
    if not identity:
        context_net = mlp_from_spec(ctx_dim, config.context_layers, 'relu', 'identity', seed=2 * config.seed)
        emb_dim = context_net.out_dim
    mono_net = mlp_from_spec(emb_dim + 1, config.mono_layers, 'relu', 'sigmoid', seed=2 * config.seed + 1)
    return MlplattModel(context_net=context_net, mono_net=mono_net, theta=float(config.theta), ctx_dim=ctx_dim)


def fit_mlplatt(cal_set: CalibrationSet, config: Optional[MlplattConfig] = None, **params) -> MlplattModel:
    """
    Adam em mini-batches embaralhados por época; lr cai pela metade quando a
    melhora da loss da época fica abaixo de plateau_tol. loss_history guarda a
    loss no conjunto inteiro antes do treino e ao fim de cada época.
    """
    config = config or MlplattConfig(**params)
    cal_set.require_both_classes('mlplatt')
    r_all, x_all, y_all = cal_set.r, cal_set.x_ctx, cal_set.click
    model = init_mlplatt(cal_set.ctx_dim, config)

    ctx_state = init_optimizer(model.context_net, lr=config.lr) if model.context_net is not None else None
    mono_state = init_optimizer(model.mono_net, lr=config.lr)
    history = [training_loss(model, r_all, x_all, y_all)]
    n = len(cal_set)
    batch_idx = 0
    for epoch in range(config.epochs):
        perm = np.random.default_rng([config.seed, 3, epoch]).permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            _, ctx_g, mono_g = _batch_grads(model, r_all[idx], x_all[idx], y_all[idx], config.fd_step, batch_idx)
            mono_net, mono_state = optimizer_step(model.mono_net, mono_g, mono_state)
            context_net = model.context_net
            if context_net is not None:
                context_net, ctx_state = optimizer_step(context_net, ctx_g, ctx_state)
            model = MlplattModel(context_net=context_net, mono_net=mono_net, theta=model.theta, ctx_dim=model.ctx_dim)
            batch_idx += 1

        epoch_loss = training_loss(model, r_all, x_all, y_all)
        if not np.isfinite(epoch_loss):
            raise TrainingError(f"loss não finita ao fim da época {epoch + 1}", batch=batch_idx - 1)
        improvement = history[-1] - epoch_loss
        history.append(epoch_loss)
        logger.info("mlplatt época %s/%s: loss %.6f (lr %.2e)", epoch + 1, config.epochs, epoch_loss, mono_state.lr)
        if improvement < config.plateau_tol:
            mono_state.lr /= 2.0
            if ctx_state is not None:
                ctx_state.lr /= 2.0
            logger.info("mlplatt: melhora %.2e < %.0e, lr reduzido para %.2e", improvement, config.plateau_tol,
                        mono_state.lr)

    model.loss_history = history
    d = input_derivative(model, r_all, x_all)
    logger.info("mlplatt: loss inicial %.6f, final %.6f, d<0 em %.4f%% dos registros",
                history[0], history[-1], 100.0 * float(np.mean(d < 0)))
    return model


def mlplatt_from_bytes(data: bytes) -> MlplattModel:
    _, meta, arrays = decode(data, expected_kind='mlplatt')
    context_net = None
    if meta.get('context') is not None:
        context_net = mlp_from_parts(meta['context'], arrays, 'context')
    return MlplattModel(
        context_net=context_net,
        mono_net=mlp_from_parts(meta['mono'], arrays, 'mono'),
        theta=float(meta['theta']),
        ctx_dim=int(meta['ctx_dim']),
        loss_history=[float(v) for v in arrays.get('loss_history', [])],
    )


register_kind('mlplatt', fit_mlplatt, mlplatt_from_bytes)
