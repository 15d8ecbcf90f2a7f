from functools import wraps

import numpy as np
from flask import jsonify, request
from pydantic import ValidationError

from core.errors import MlplattError
from core.normalizers import parse_calibrate_request


def handle_errors(logger):
    def decorator(f):
        @wraps(f)
        def decorated(*args, **kwargs):
            try:
                return f(*args, **kwargs)
            except ValidationError as e:
                logger.warning("payload inválido: %s", e)
                return jsonify({'error': 'Payload inválido', 'msg': str(e)}), 400
            except MlplattError as e:
                if isinstance(e, ValueError):
                    logger.warning("requisição rejeitada: %s", e)
                    return jsonify({'error': 'Entrada inválida', 'msg': str(e)}), 400
                logger.exception("Unexpected error")
                return jsonify({'error': 'Erro interno do servidor', 'msg': str(e)}), 500
            except Exception as e:
                logger.exception("Unexpected error")
                return jsonify({'error': 'Erro interno do servidor', 'msg': str(e)}), 500
        return decorated
    return decorator


def order_preserved(r, c) -> bool:
    """True se c não inverte nenhum par da ordem de r."""
    order = np.argsort(np.asarray(r, dtype=np.float64), kind='stable')
    return bool(np.all(np.diff(np.asarray(c, dtype=np.float64)[order]) >= 0.0))


def init_routes(app, logger):

    @app.route('/')
    def index():
        return "MLPlatt Calibration Service"

    @app.route('/health', methods=['GET'])
    def health():
        calibrator = app.calibrator
        return jsonify({
            'status': 'ok',
            'model_kind': calibrator.kind if calibrator is not None else None,
        })

    @app.route('/calibrate', methods=['POST'])
    @handle_errors(logger)
    def calibrate():
        payload = request.get_json(silent=True)
        if not payload:
            return jsonify({'error': 'Payload JSON inválido ou ausente'}), 400
        calibrator = app.calibrator
        if calibrator is None:
            return jsonify({'error': 'Nenhum modelo carregado', 'msg': str(app.config.get('MODEL_PATH'))}), 503

        req = parse_calibrate_request(payload)
        r = np.asarray(req.scores, dtype=np.float64)
        x_ctx = np.asarray(req.context, dtype=np.float64) if req.context else None
        calibrated = np.atleast_1d(calibrator.predict(r, x_ctx, req.field))
        return jsonify({
            'calibrated': [float(v) for v in calibrated],
            'monotone': order_preserved(r, calibrated),
            'model_kind': calibrator.kind,
        })
