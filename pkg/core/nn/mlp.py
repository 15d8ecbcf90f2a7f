# core/nn/mlp.py
"""
Motor feed-forward mínimo: forward guarda o trace, backward devolve os
gradientes dos parâmetros E o gradiente em relação à entrada (a coordenada
do score do ranker nesse gradiente é o d = dc/dr usado na penalidade monotônica).

Tudo em float64. A entrada pode ser um vetor (1 amostra) ou uma matriz
(linhas = amostras); o resultado por linha é o mesmo nos dois casos.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from core.errors import ShapeError

ACTIVATIONS = ('relu', 'sigmoid', 'identity')

# limites para manter sigmoid estritamente em (0, 1)
_SIG_LO = np.nextafter(0.0, 1.0)
_SIG_HI = np.nextafter(1.0, 0.0)


@dataclass
class Layer:
    weight: np.ndarray          # (out, in)
    bias: np.ndarray            # (out,)
    activation: str = 'identity'

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[0])


@dataclass
class MlpParams:
    layers: List[Layer] = field(default_factory=list)

    def __post_init__(self):
        for k, layer in enumerate(self.layers):
            layer.weight = np.asarray(layer.weight, dtype=np.float64)
            layer.bias = np.asarray(layer.bias, dtype=np.float64)
            if layer.weight.ndim != 2:
                raise ShapeError(f"peso deve ser matriz, veio shape {layer.weight.shape}", layer=k)
            if layer.bias.shape != (layer.out_dim,):
                raise ShapeError(f"bias {layer.bias.shape} incompatível com peso {layer.weight.shape}", layer=k)
            if layer.activation not in ACTIVATIONS:
                raise ShapeError(f"ativação desconhecida: {layer.activation!r}", layer=k)
            if k > 0 and self.layers[k - 1].out_dim != layer.in_dim:
                raise ShapeError(
                    f"entrada {layer.in_dim} não encadeia com saída {self.layers[k - 1].out_dim} da camada anterior",
                    layer=k)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def activations(self) -> List[str]:
        return [layer.activation for layer in self.layers]

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(l.weight)) and np.all(np.isfinite(l.bias)) for l in self.layers)

    def copy(self) -> 'MlpParams':
        return MlpParams([Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers])

    def zeros_like(self) -> 'MlpParams':
        return MlpParams([Layer(np.zeros_like(l.weight), np.zeros_like(l.bias), l.activation) for l in self.layers])

    def add(self, other: 'MlpParams', scale: float = 1.0) -> 'MlpParams':
        if len(other.layers) != len(self.layers):
            raise ShapeError("número de camadas diferente")
        return MlpParams([
            Layer(a.weight + scale * b.weight, a.bias + scale * b.bias, a.activation)
            for a, b in zip(self.layers, other.layers)
        ])

    def scaled(self, factor: float) -> 'MlpParams':
        return MlpParams([Layer(l.weight * factor, l.bias * factor, l.activation) for l in self.layers])


# Gradientes têm exatamente o formato dos parâmetros
ParamGrads = MlpParams


@dataclass
class ForwardTrace:
    input: np.ndarray                 # (n, in)
    pre: List[np.ndarray]             # pré-ativações por camada
    post: List[np.ndarray]            # ativações por camada
    single: bool = False              # entrada original era vetor

    @property
    def output(self) -> np.ndarray:
        out = self.post[-1]
        return out[0] if self.single else out


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == 'relu':
        return np.maximum(z, 0.0)
    if activation == 'sigmoid':
        return np.clip(expit(z), _SIG_LO, _SIG_HI)
    return z


def _activation_grad(z: np.ndarray, a: np.ndarray, activation: str) -> np.ndarray:
    if activation == 'relu':
        return (z > 0.0).astype(np.float64)
    if activation == 'sigmoid':
        return a * (1.0 - a)
    return np.ones_like(z)


def forward(params: MlpParams, x) -> ForwardTrace:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.ndim != 2:
        raise ShapeError(f"entrada deve ser vetor ou matriz, veio ndim={x.ndim}", layer=0)
    inp = h
    pre, post = [], []
    for k, layer in enumerate(params.layers):
        if h.shape[1] != layer.in_dim:
            raise ShapeError(f"dimensão de entrada {h.shape[1]} != {layer.in_dim}", layer=k)
        z = h @ layer.weight.T + layer.bias
        h = _activate(z, layer.activation)
        pre.append(z)
        post.append(h)
    return ForwardTrace(input=inp, pre=pre, post=post, single=single)


def backward(params: MlpParams, trace: ForwardTrace, output_grad) -> Tuple[ParamGrads, np.ndarray]:
    """
    Reverse-mode exato. output_grad tem o formato da saída; os gradientes dos
    parâmetros são somados sobre as linhas do batch, o input_grad é por linha.
    """
    if len(trace.pre) != len(params.layers):
        raise ShapeError(f"trace com {len(trace.pre)} camadas para rede com {len(params.layers)}")
    g = np.asarray(output_grad, dtype=np.float64)
    if trace.single:
        g = g.reshape(1, -1)
    if g.shape != trace.post[-1].shape:
        raise ShapeError(f"output_grad {g.shape} != saída {trace.post[-1].shape}", layer=len(params.layers) - 1)

    grads: List[Optional[Layer]] = [None] * len(params.layers)
    for k in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[k]
        if trace.pre[k].shape[1] != layer.out_dim:
            raise ShapeError("trace não corresponde aos parâmetros", layer=k)
        dz = g * _activation_grad(trace.pre[k], trace.post[k], layer.activation)
        h_prev = trace.post[k - 1] if k > 0 else trace.input
        grads[k] = Layer(dz.T @ h_prev, dz.sum(axis=0), layer.activation)
        g = dz @ layer.weight
    input_grad = g[0] if trace.single else g
    return MlpParams(grads), input_grad


def init_mlp(sizes: Sequence[int], activations: Sequence[str], seed: int = 0) -> MlpParams:
    """Glorot uniforme em ±sqrt(6/(fan_in+fan_out)), bias zero. sizes inclui a entrada."""
    if len(sizes) < 2 or len(activations) != len(sizes) - 1:
        raise ShapeError(f"sizes={list(sizes)} incompatível com activations={list(activations)}")
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        layers.append(Layer(rng.uniform(-limit, limit, size=(fan_out, fan_in)), np.zeros(fan_out), act))
    return MlpParams(layers)


def mlp_from_spec(in_dim: int, layer_sizes: Sequence[int], hidden_activation: str = 'relu',
                  final_activation: str = 'identity', seed: int = 0) -> MlpParams:
    layer_sizes = list(layer_sizes)
    acts = [hidden_activation] * (len(layer_sizes) - 1) + [final_activation]
    return init_mlp([in_dim] + layer_sizes, acts, seed=seed)
