# core/nn/serialization.py
"""
Container versionado para todos os modelos:

    b'MLPC' | uint16 versão | uint32 tamanho do header | header JSON (utf-8) | blobs float64 LE

O header descreve o tipo (`kind`), campos escalares e a lista de arrays
(nome + shape); os blobs vêm na mesma ordem, row-major, '<f8'.
"""
import json
import struct
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np

from core.config import Config
from core.errors import SerializationError
from core.nn.mlp import Layer, MlpParams

MAGIC = b'MLPC'
_PREFIX = struct.Struct('<4sHI')


def encode(kind: str, meta: Dict[str, Any], arrays: List[Tuple[str, np.ndarray]]) -> bytes:
    header = {
        'kind': kind,
        'meta': meta,
        'arrays': [{'name': name, 'shape': list(np.shape(arr))} for name, arr in arrays],
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8')
    blobs = b''.join(np.ascontiguousarray(arr, dtype='<f8').tobytes(order='C') for _, arr in arrays)
    return _PREFIX.pack(MAGIC, int(Config.CONTAINER_VERSION), len(header_bytes)) + header_bytes + blobs


def decode(data: bytes, expected_kind: str = None) -> Tuple[str, Dict[str, Any], Dict[str, np.ndarray]]:
    if len(data) < _PREFIX.size:
        raise SerializationError("container truncado")
    magic, version, header_len = _PREFIX.unpack_from(data, 0)
    if magic != MAGIC:
        raise SerializationError(f"magic inválido: {magic!r}")
    if version != Config.CONTAINER_VERSION:
        raise SerializationError(f"versão de container não suportada: {version}")
    start = _PREFIX.size
    try:
        header = json.loads(data[start:start + header_len].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SerializationError(f"header ilegível: {e}") from e
    kind = header.get('kind')
    if expected_kind is not None and kind != expected_kind:
        raise SerializationError(f"esperado kind={expected_kind!r}, encontrado {kind!r}")

    offset = start + header_len
    arrays: Dict[str, np.ndarray] = {}
    for spec in header.get('arrays', []):
        shape = tuple(spec['shape'])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(data):
            raise SerializationError(f"blob {spec['name']!r} truncado")
        if count == 0:
            arrays[spec['name']] = np.zeros(shape, dtype=np.float64)
            continue
        arr = np.frombuffer(data, dtype='<f8', count=count, offset=offset).astype(np.float64)
        arrays[spec['name']] = arr.reshape(shape)
        offset += nbytes
    if offset != len(data):
        raise SerializationError("bytes sobrando após o último blob")
    return kind, header.get('meta', {}), arrays


def mlp_to_parts(params: MlpParams, prefix: str) -> Tuple[Dict[str, Any], List[Tuple[str, np.ndarray]]]:
    meta = {'activations': params.activations}
    arrays = []
    for k, layer in enumerate(params.layers):
        arrays.append((f"{prefix}.{k}.weight", layer.weight))
        arrays.append((f"{prefix}.{k}.bias", layer.bias))
    return meta, arrays


def mlp_from_parts(meta: Dict[str, Any], arrays: Dict[str, np.ndarray], prefix: str) -> MlpParams:
    layers = []
    for k, act in enumerate(meta['activations']):
        try:
            layers.append(Layer(arrays[f"{prefix}.{k}.weight"], arrays[f"{prefix}.{k}.bias"], act))
        except KeyError as e:
            raise SerializationError(f"camada {k} ausente no container ({prefix})") from e
    return MlpParams(layers)


def mlp_to_bytes(params: MlpParams) -> bytes:
    meta, arrays = mlp_to_parts(params, 'net')
    return encode('mlp', {'net': meta}, arrays)


def mlp_from_bytes(data: bytes) -> MlpParams:
    _, meta, arrays = decode(data, expected_kind='mlp')
    return mlp_from_parts(meta['net'], arrays, 'net')


def save_bytes(data: bytes, path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_bytes(data)
    return p


def peek_kind(data: bytes) -> str:
    kind, _, _ = decode(data)
    return kind


def save_mlp(params: MlpParams, path) -> Path:
    return save_bytes(mlp_to_bytes(params), path)


def load_mlp(path) -> MlpParams:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"modelo não encontrado: {p}")
    return mlp_from_bytes(p.read_bytes())
