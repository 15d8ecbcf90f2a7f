# core/utils.py
import hashlib
import json
import logging
import math
import os
from logging.handlers import RotatingFileHandler
from typing import Any, Optional

from core.config import Config

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(config=Config, name: str = 'core') -> logging.Logger:
    """
    Logger do pacote com arquivo rotativo + stream. Os módulos logam em
    logging.getLogger(__name__) (core.*) e herdam estes handlers.
    """
    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, str(getattr(config, 'LOG_LEVEL', 'INFO')).upper(), logging.INFO))

    # Evita adicionar handlers duplicados em múltiplas chamadas
    if logger.handlers:
        return logger

    log_path = getattr(config, 'LOG_PATH', None) or os.path.join(os.getcwd(), 'mlplatt.log')
    try:
        os.makedirs(os.path.dirname(os.path.abspath(log_path)), exist_ok=True)
        file_handler = RotatingFileHandler(
            log_path,
            maxBytes=int(getattr(config, 'LOG_MAX_BYTES', 10_000_000)),
            backupCount=int(getattr(config, 'LOG_BACKUP_COUNT', 5)),
            encoding='utf-8',
        )
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(file_handler)
    except OSError as e:
        # sem arquivo de log (ex.: diretório somente leitura) seguimos só com stream
        logger.warning("não foi possível abrir %s: %s", log_path, e)

    stream_handler = logging.StreamHandler()
    stream_handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))
    logger.addHandler(stream_handler)
    return logger


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(',', ':'), ensure_ascii=False)


def config_hash(obj: Any, length: int = 12) -> str:
    return hashlib.sha256(canonical_json(obj).encode('utf-8')).hexdigest()[:length]


def format_metric(value: Optional[float], digits: int = None) -> str:
    digits = int(digits if digits is not None else getattr(Config, 'METRIC_DIGITS', 4))
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return '-'
    return f"{value:.{digits}f}"


def format_percent(value: Optional[float], digits: int = 2) -> str:
    if value is None:
        return '-'
    return f"{100.0 * value:.{digits}f}%"


def alpha_label(alpha: float) -> str:
    """1e-3, 1e-2, 0.5 ... (mantissa omitida quando é 1)."""
    if alpha == 0:
        return '0'
    exp = math.floor(math.log10(abs(alpha)))
    mant = alpha / 10 ** exp
    if abs(mant - round(mant)) < 1e-9:
        mant_i = int(round(mant))
        if exp == 0:
            return str(mant_i)
        return f"{mant_i}e{exp}"
    return f"{alpha:g}"
