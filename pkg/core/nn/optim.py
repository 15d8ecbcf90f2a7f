# core/nn/optim.py
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from core.config import Config
from core.errors import ShapeError, TrainingError
from core.nn.mlp import Layer, MlpParams, ParamGrads


@dataclass
class OptimizerState:
    rule: str = 'adam'                   # 'sgd' | 'adam'
    step: int = 0
    m: Optional[MlpParams] = None        # primeiro momento (adam)
    v: Optional[MlpParams] = None        # segundo momento (adam)
    lr: float = Config.ADAM_LR
    beta1: float = Config.ADAM_BETA1
    beta2: float = Config.ADAM_BETA2
    eps: float = Config.ADAM_EPS

    def __post_init__(self):
        if self.rule not in ('sgd', 'adam'):
            raise ValueError(f"regra de otimização desconhecida: {self.rule!r}")
        if not self.lr > 0:
            raise ValueError("lr deve ser > 0")


def init_optimizer(params: MlpParams, rule: str = 'adam', lr: Optional[float] = None, config=Config) -> OptimizerState:
    lr = float(lr if lr is not None else getattr(config, 'ADAM_LR', 1e-3))
    return OptimizerState(
        rule=rule,
        step=0,
        m=params.zeros_like(),
        v=params.zeros_like(),
        lr=lr,
        beta1=float(getattr(config, 'ADAM_BETA1', 0.9)),
        beta2=float(getattr(config, 'ADAM_BETA2', 0.999)),
        eps=float(getattr(config, 'ADAM_EPS', 1e-8)),
    )


def _check(params: MlpParams, grads: ParamGrads, state: OptimizerState):
    if len(grads.layers) != len(params.layers):
        raise ShapeError(f"gradiente com {len(grads.layers)} camadas para rede com {len(params.layers)}")
    for k, (p, g) in enumerate(zip(params.layers, grads.layers)):
        if p.weight.shape != g.weight.shape or p.bias.shape != g.bias.shape:
            raise ShapeError("gradiente com shape diferente do parâmetro", layer=k)
        if not (np.all(np.isfinite(g.weight)) and np.all(np.isfinite(g.bias))):
            raise TrainingError("gradiente não finito", layer=f"camada {k}")
    if state.rule == 'adam' and (state.m is None or len(state.m.layers) != len(params.layers)):
        raise ShapeError("acumuladores do adam não espelham os parâmetros")


def optimizer_step(params: MlpParams, grads: ParamGrads, state: OptimizerState) -> Tuple[MlpParams, OptimizerState]:
    _check(params, grads, state)
    step = state.step + 1

    if state.rule == 'sgd':
        new_params = params.add(grads, scale=-state.lr)
        return new_params, replace(state, step=step)

    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** step
    corr2 = 1.0 - b2 ** step
    new_layers, m_layers, v_layers = [], [], []
    for p, g, m, v in zip(params.layers, grads.layers, state.m.layers, state.v.layers):
        mw = b1 * m.weight + (1.0 - b1) * g.weight
        mb = b1 * m.bias + (1.0 - b1) * g.bias
        vw = b2 * v.weight + (1.0 - b2) * g.weight ** 2
        vb = b2 * v.bias + (1.0 - b2) * g.bias ** 2
        w = p.weight - state.lr * (mw / corr1) / (np.sqrt(vw / corr2) + state.eps)
        b = p.bias - state.lr * (mb / corr1) / (np.sqrt(vb / corr2) + state.eps)
        new_layers.append(Layer(w, b, p.activation))
        m_layers.append(Layer(mw, mb, p.activation))
        v_layers.append(Layer(vw, vb, p.activation))
    return MlpParams(new_layers), replace(state, step=step, m=MlpParams(m_layers), v=MlpParams(v_layers))
