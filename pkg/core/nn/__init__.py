from core.nn.mlp import ForwardTrace, Layer, MlpParams, backward, forward, init_mlp, mlp_from_spec
from core.nn.optim import OptimizerState, init_optimizer, optimizer_step
from core.nn.losses import bce_loss, bce_with_logits
from core.nn.serialization import load_mlp, save_mlp

__all__ = [
    "ForwardTrace", "Layer", "MlpParams", "backward", "forward", "init_mlp", "mlp_from_spec",
    "OptimizerState", "init_optimizer", "optimizer_step", "bce_loss", "bce_with_logits",
    "load_mlp", "save_mlp",
]
