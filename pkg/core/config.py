# config.py
import os

from dotenv import load_dotenv

load_dotenv()


class Config:
    """
    Arquivo central de configuração: TODOS os valores padrão usados pelo
    núcleo numérico, pelos calibradores, pelo benchmark e pelo serviço ficam aqui.
    Os módulos leem via getattr(config, 'NOME', fallback), então uma config
    parcial (ex.: subclasse em testes) continua funcionando.
    """

    # -------------------------
    # Diretórios / caminhos
    # -------------------------
    BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    RUNS_DIR = os.environ.get('MLPLATT_RUNS_DIR', os.path.join(BASE_DIR, 'runs'))
    # modelo servido pelo app Flask (qualquer tipo de calibrador serializado)
    MODEL_PATH = os.environ.get('MLPLATT_MODEL_PATH', os.path.join(BASE_DIR, 'models', 'calibrator.bin'))

    # -------------------------
    # Logging
    # -------------------------
    LOG_PATH = os.environ.get('MLPLATT_LOG_PATH', os.path.join(BASE_DIR, 'mlplatt.log'))
    LOG_LEVEL = os.environ.get('MLPLATT_LOG_LEVEL', 'INFO')
    LOG_MAX_BYTES = 10_000_000
    LOG_BACKUP_COUNT = 5

    # -------------------------
    # Numérico (nn_core)
    # -------------------------
    PROB_EPS = 1e-7            # clipping antes do log
    ADAM_LR = 1e-3
    ADAM_BETA1 = 0.9
    ADAM_BETA2 = 0.999
    ADAM_EPS = 1e-8
    CONTAINER_VERSION = 1

    # -------------------------
    # Ranker
    # -------------------------
    RANKER_HIDDEN = (32, 16)
    RANKER_EPOCHS = 5
    RANKER_LR = 1e-3
    RANKER_LISTINGS_PER_STEP = 1
    RCR_ALPHAS = (1e-3, 1e-2, 1e-1)

    # -------------------------
    # MLPlatt (cronograma de treino)
    # -------------------------
    MLPLATT_CONTEXT_LAYERS = (32, 16, 8)
    MLPLATT_MONO_LAYERS = (8, 8, 8, 1)
    MLPLATT_THETA = 1.0
    MLPLATT_EPOCHS = 20
    MLPLATT_BATCH_SIZE = 1024
    MLPLATT_LR = 1e-3
    MLPLATT_PLATEAU_TOL = 1e-5     # se a perda da época melhora menos que isso -> lr/2
    MLPLATT_FD_STEP = 1e-4         # passo em r para o termo de segunda ordem da penalidade

    # -------------------------
    # Baselines
    # -------------------------
    PLATT_GTOL = 1e-8
    PLATT_MAX_ITER = 10_000
    ISOTONIC_BINS = 100
    CONFCALIB_LEVEL = 0.95

    # -------------------------
    # Métricas
    # -------------------------
    ECE_BINS = 20
    MISORDER_THRESHOLD = 0.99

    # -------------------------
    # Dados sintéticos / divisão
    # -------------------------
    GENERATOR_NOISE = 0.1
    GENERATOR_MAX_ATTEMPTS = 100
    TEST_FRACTION = 1.0 / 3.0
    ALIEXPRESS_COUNTRIES = ('ES', 'FR', 'NL', 'US')

    # -------------------------
    # Benchmark
    # -------------------------
    BOOTSTRAP_RESAMPLES = 1000
    SIGNIFICANCE_LEVEL = 0.01
    THETA_SWEEP_LISTINGS = 100_000
    THETA_GRID = (0.0, 1e-4, 1e-3, 1e-2, 1.0)

    # -------------------------
    # Relatório PDF (pontos)
    # -------------------------
    TITLE_FONT_SIZE = 10.0
    LABEL_FONT_SIZE = 8.2
    VALUE_FONT_SIZE = 8.2
    MIN_FONT_SIZE = 6.0
    MAX_FONT_SIZE = 72.0
    PAGE_MARGIN_INCH = 0.6
    LINE_WIDTH = 0.6
    LINE_GRAY_HEX = '#D9D9D9'
    SMALL_PAD = 2
    MED_PAD = 3
    # TTF opcionais; sem eles fica Helvetica
    FONT_REGULAR_PATH = os.environ.get('MLPLATT_FONT_REGULAR_PATH')
    FONT_BOLD_PATH = os.environ.get('MLPLATT_FONT_BOLD_PATH')
    METRIC_DIGITS = 4

    # -------------------------
    # Serviço
    # -------------------------
    PORT = int(os.environ.get('PORT', 5000))

    # -------------------------
    # Outros
    # -------------------------
    DEBUG = False
    TESTING = False
