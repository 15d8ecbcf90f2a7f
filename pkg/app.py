import logging
import os
import sys
import traceback
from typing import Optional

from flask import Flask, got_request_exception, request

from core.calibrators import Calibrator, load_calibrator
from core.config import Config
from core.routes import init_routes
from core.utils import setup_logging


class MyFlask(Flask):
    # declara o atributo para o verificador estático
    calibrator: Optional[Calibrator]


def load_model(config, logger: logging.Logger) -> Optional[Calibrator]:
    """Modelo ausente ou corrompido não impede a criação do app; /calibrate responde 503."""
    path = getattr(config, 'MODEL_PATH', None)
    if not path:
        logger.warning("MODEL_PATH não configurado")
        return None
    try:
        calibrator = load_calibrator(path)
    except FileNotFoundError:
        logger.warning("modelo não encontrado em %s", path)
        return None
    except Exception as e:
        logger.exception("Falha ao carregar o modelo %s: %s", path, e)
        return None
    logger.info("modelo %s carregado de %s", calibrator.kind, path)
    return calibrator


def create_app(config=Config):
    app = MyFlask(__name__)

    # Carrega configuração
    app.config.from_object(config)

    logger = setup_logging(config)

    app.calibrator = load_model(config, logger)

    init_routes(app, logger)

    # Log completo das exceções não tratadas por requisição
    def _log_request_exception(sender, exception, **extra):
        try:
            rid = request.headers.get('X-Request-ID', '') or ''
        except RuntimeError:
            rid = ''
        logger.error("Unhandled exception (rid=%s): %s", rid, traceback.format_exc())
        sys.stderr.flush()

    got_request_exception.connect(_log_request_exception, app)

    return app


if __name__ == '__main__':
    # Execução local: Waitress no Windows, servidor do Flask nos demais; produção usa gunicorn (wsgi:app).
    app = create_app()
    port = int(getattr(Config, 'PORT', os.environ.get('PORT', 5000)))
    try:
        import platform
        if platform.system().lower().startswith('win'):
            try:
                from waitress import serve
                serve(app, host='0.0.0.0', port=port)
            except ImportError:
                app.run(host='0.0.0.0', port=port, debug=Config.DEBUG)
        else:
            app.run(host='0.0.0.0', port=port, debug=Config.DEBUG)
    except Exception as e:
        setup_logging().exception("Erro ao iniciar a app localmente: %s", e)
        raise
