import os
import sys

import numpy as np
import pytest
from scipy.special import expit

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from core.calibrators import CalibrationSet  # noqa: E402
from core.config import Config  # noqa: E402
from core.datagen import generate  # noqa: E402
from core.models import GeneratorConfig  # noqa: E402
from core.normalizers import parse_experiment  # noqa: E402


def make_cal_set(n=2000, ctx_dim=2, n_fields=3, slope=1.5, offsets=None, seed=0, context_weight=0.0):
    """Registros de calibração com CTR conhecido: sigmoid(slope·r + offset_z + w·x_ctx)."""
    rng = np.random.default_rng(seed)
    offsets = np.linspace(-1.0, 1.0, n_fields) if offsets is None else np.asarray(offsets, dtype=float)
    r = rng.normal(size=n)
    z = rng.integers(n_fields, size=n)
    x = rng.normal(size=(n, ctx_dim))
    logit = slope * r + offsets[z] + context_weight * x[:, 0]
    click = (rng.random(n) < expit(logit)).astype(float)
    return CalibrationSet(
        r=r,
        x_ctx=x,
        field=np.array([f"z{k}" for k in z]),
        click=click,
        listing_id=np.arange(n) // 5,
    )


@pytest.fixture
def cal_set():
    return make_cal_set()


@pytest.fixture
def small_generator():
    return GeneratorConfig(listings=150, items_min=4, items_max=8, item_dim=3, ctx_dim=2,
                           field_cardinality=3, base_logit=-0.5, seed=0)


@pytest.fixture
def small_dataset(small_generator):
    return generate(small_generator)


@pytest.fixture
def tiny_experiment(tmp_path):
    """Experimento completo que roda em segundos."""
    return parse_experiment({
        'name': 'tiny',
        'dataset': {
            'kind': 'synthetic',
            'generator': {'listings': 150, 'items_min': 4, 'items_max': 8, 'item_dim': 3, 'ctx_dim': 2,
                          'field_cardinality': 3, 'base_logit': -0.5},
        },
        'ranker': {'hidden': [8], 'epochs': 1},
        'calibrators': ['platt', 'isotonic', 'confcalib', 'mlplatt'],
        'mlplatt': {'context_layers': [4], 'mono_layers': [4, 1], 'epochs': 2, 'batch_size': 256},
        'theta_grid': [0.0, 1.0],
        'rcr_alphas': [0.01],
        'bins': 5,
        'seeds': [0],
        'output_dir': str(tmp_path / 'runs'),
        'bootstrap_resamples': 20,
        'theta_sample_listings': 40,
    })


class TestConfig(Config):
    TESTING = True


@pytest.fixture
def test_config(tmp_path):
    class _Config(TestConfig):
        LOG_PATH = str(tmp_path / 'test.log')
        MODEL_PATH = str(tmp_path / 'models' / 'calibrator.mlpc')
    return _Config
