# core/normalizers.py
"""
Normalização tolerante de payloads (YAML de experimento, JSON do serviço)
antes da validação pydantic. Aceita aliases e formatos alternativos; o que
não é reconhecido passa adiante para o pydantic reclamar.
"""
import json
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml
from pydantic import ValidationError

from core.errors import ConfigError
from core.models import CalibrateRequest, ExperimentConfig

CALIBRATOR_ALIASES = {
    'platt': 'platt',
    'platt scaling': 'platt',
    'isotonic': 'isotonic',
    'smoothed isotonic': 'isotonic',
    'smoothed_isotonic': 'isotonic',
    'confcalib': 'confcalib',
    'conf_calib': 'confcalib',
    'mlplatt': 'mlplatt',
    'ml_platt': 'mlplatt',
}

_MISSING = object()


def _pick_first(d: Dict[str, Any], keys: List[str], default=_MISSING):
    for k in keys:
        if k in d and d[k] is not None:
            return d[k]
    return default


def _safe_str(x: Any) -> str:
    try:
        return str(x or '')
    except Exception:
        return ''


def _as_list(value: Any) -> List[Any]:
    """Lista a partir de lista, escalar, JSON em string ou 'a, b, c'."""
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return list(value)
    if isinstance(value, str):
        s = value.strip()
        if not s:
            return []
        if s.startswith('['):
            try:
                parsed = json.loads(s)
                return parsed if isinstance(parsed, list) else [parsed]
            except json.JSONDecodeError:
                pass
        return [p.strip() for p in s.split(',') if p.strip()]
    return [value]


def _as_float_list(value: Any) -> List[Any]:
    out = []
    for v in _as_list(value):
        try:
            out.append(float(v))
        except (TypeError, ValueError):
            out.append(v)          # pydantic reporta o valor inválido
    return out


def normalize_dataset(raw: Any) -> Dict[str, Any]:
    if raw is None:
        return {}
    if isinstance(raw, str):
        s = raw.strip()
        if s.lower() == 'synthetic':
            return {'kind': 'synthetic'}
        if s.lower().startswith('aliexpress:'):
            return {'kind': 'aliexpress', 'path': s.split(':', 1)[1].strip()}
        return {'kind': 'file', 'path': s}
    if not isinstance(raw, dict):
        return raw

    d: Dict[str, Any] = {}
    kind = _pick_first(raw, ['kind', 'source', 'type'])
    path = _pick_first(raw, ['path', 'file', 'location'])
    if path is not _MISSING:
        d['path'] = _safe_str(path).strip()
    if kind is not _MISSING:
        d['kind'] = _safe_str(kind).strip().lower()
    elif 'path' in d:
        d['kind'] = 'file'
    generator = _pick_first(raw, ['generator', 'synthetic', 'params'])
    if generator is not _MISSING:
        d['generator'] = generator
    column_map = _pick_first(raw, ['column_map', 'columns'])
    if column_map is not _MISSING:
        d['column_map'] = column_map
    countries = _pick_first(raw, ['countries', 'keep_countries'])
    if countries is not _MISSING:
        d['countries'] = [str(c).strip().upper() for c in _as_list(countries)]
    return d


def normalize_calibrator(raw: Any) -> Any:
    if isinstance(raw, str):
        key = raw.strip().lower()
        return {'kind': CALIBRATOR_ALIASES.get(key, key)}
    if not isinstance(raw, dict):
        return raw
    kind = _safe_str(_pick_first(raw, ['kind', 'type', 'method'], '')).strip().lower()
    out: Dict[str, Any] = {'kind': CALIBRATOR_ALIASES.get(kind, kind)}
    name = _pick_first(raw, ['name', 'label'])
    if name is not _MISSING:
        out['name'] = name
    params = _pick_first(raw, ['params', 'hyperparameters', 'options'], {})
    out['params'] = dict(params) if isinstance(params, dict) else params
    return out


def normalize_experiment_payload(payload: Dict[str, Any]) -> Dict[str, Any]:
    if not isinstance(payload, dict):
        return payload

    mapping = {
        'M': 'bins',
        'ece_bins': 'bins',
        'theta': 'theta_grid',
        'thetas': 'theta_grid',
        'alpha': 'rcr_alphas',
        'alphas': 'rcr_alphas',
        'out': 'output_dir',
        'output': 'output_dir',
        'seed': 'seeds',
    }
    normalized: Dict[str, Any] = {}
    for k, v in payload.items():
        normalized[mapping.get(k, k)] = v

    if 'dataset' in normalized:
        normalized['dataset'] = normalize_dataset(normalized['dataset'])
    if 'calibrators' in normalized:
        normalized['calibrators'] = [normalize_calibrator(c) for c in _as_list(normalized['calibrators'])]
    for key in ('theta_grid', 'rcr_alphas'):
        if key in normalized:
            normalized[key] = _as_float_list(normalized[key])
    if 'seeds' in normalized:
        normalized['seeds'] = _as_list(normalized['seeds'])
    return normalized


def parse_experiment(payload: Optional[Dict[str, Any]]) -> ExperimentConfig:
    try:
        return ExperimentConfig(**normalize_experiment_payload(payload or {}))
    except ValidationError as e:
        raise ConfigError(f"config de experimento inválida: {e}") from e
    except TypeError as e:
        raise ConfigError(f"config de experimento inválida: {e}") from e


def load_experiment_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"arquivo de config não encontrado: {p}")
    try:
        payload = yaml.safe_load(p.read_text(encoding='utf-8'))
    except yaml.YAMLError as e:
        raise ConfigError(f"YAML inválido em {p}: {e}") from e
    if payload is not None and not isinstance(payload, dict):
        raise ConfigError(f"{p}: o documento deve ser um mapeamento chave/valor")
    return parse_experiment(payload)


def apply_overrides(config: ExperimentConfig, seed: Optional[int] = None, out: Optional[str] = None,
                    dataset: Optional[str] = None, bins: Optional[int] = None) -> ExperimentConfig:
    """Flags da CLI têm precedência sobre o YAML."""
    payload = config.model_dump()
    if seed is not None:
        payload['seeds'] = [seed]
    if out is not None:
        payload['output_dir'] = out
    if dataset is not None:
        ds = normalize_dataset(dataset)
        if ds.get('kind') == 'synthetic':
            payload['dataset']['kind'] = 'synthetic'
            payload['dataset']['path'] = None
        else:
            payload['dataset'].update(ds)
    if bins is not None:
        payload['bins'] = bins
    return parse_experiment(payload)


def normalize_calibrate_payload(payload: Dict[str, Any]) -> Dict[str, Any]:
    if not isinstance(payload, dict):
        return payload
    normalized: Dict[str, Any] = {}
    scores = _pick_first(payload, ['scores', 'r', 'ranker_scores'])
    if scores is not _MISSING:
        normalized['scores'] = _as_float_list(scores)
    context = _pick_first(payload, ['context', 'x_ctx', 'ctx'])
    if context is not _MISSING:
        normalized['context'] = _as_float_list(context)
    field = _pick_first(payload, ['field', 'z'])
    if field is not _MISSING:
        normalized['field'] = _safe_str(field).strip() or None
    return normalized


def parse_calibrate_request(payload: Dict[str, Any]) -> CalibrateRequest:
    return CalibrateRequest(**normalize_calibrate_payload(payload))
