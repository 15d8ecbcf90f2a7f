# core/errors.py
from typing import Optional


class MlplattError(Exception):
    """Base de todos os erros do pacote."""


class ShapeError(MlplattError, ValueError):
    def __init__(self, msg: str, layer: Optional[int] = None):
        self.layer = layer
        if layer is not None:
            msg = f"camada {layer}: {msg}"
        super().__init__(msg)


class TrainingError(MlplattError, RuntimeError):
    def __init__(self, msg: str, layer: Optional[str] = None, batch: Optional[int] = None):
        self.layer = layer
        self.batch = batch
        if layer is not None:
            msg = f"{layer}: {msg}"
        if batch is not None:
            msg = f"batch {batch}: {msg}"
        super().__init__(msg)


class InputError(MlplattError, ValueError):
    pass


class FitError(MlplattError, ValueError):
    pass


class ConfigError(MlplattError, ValueError):
    pass


class SchemaError(MlplattError, ValueError):
    pass


class GenerationError(MlplattError, RuntimeError):
    pass


class SerializationError(MlplattError, ValueError):
    pass


class DatasetParseError(MlplattError, ValueError):
    def __init__(self, msg: str, line: int):
        self.line = line
        super().__init__(f"linha {line}: {msg}")


class StageError(MlplattError, RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage} failed: {cause}")


class ListingSkipped(MlplattError):
    """Sinal (não erro): listagem sem pares informativos (rótulos todos iguais)."""
