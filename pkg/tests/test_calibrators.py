import itertools

import numpy as np
import pytest
from scipy.special import expit

from conftest import make_cal_set
from core.calibrators import (
    CalibrationSet, Calibrator, MlplattModel, apply_confcalib, apply_platt, build_calibrator, fit_confcalib,
    fit_mlplatt, fit_platt, fit_smoothed_isotonic, input_derivative, load_calibrator, monotonicity_penalty, pava,
    training_loss, wilson_interval,
)
from core.calibrators.confcalib import dampen
from core.calibrators.mlplatt import _batch_grads, init_mlplatt
from core.errors import FitError, InputError, ShapeError
from core.metrics import log_loss
from core.models import CalibratorSpec, MlplattConfig
from core.nn import init_mlp


def _brute_isotonic(values, weights):
    """Melhor solução de blocos contíguos com médias não-decrescentes (busca exaustiva)."""
    n = len(values)
    best, best_err = None, np.inf
    for cuts in itertools.product([0, 1], repeat=n - 1):
        bounds = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [n]
        fitted = np.empty(n)
        means = []
        for s, e in zip(bounds[:-1], bounds[1:]):
            m = np.average(values[s:e], weights=weights[s:e])
            fitted[s:e] = m
            means.append(m)
        if np.any(np.diff(means) < -1e-12):
            continue
        err = float(np.sum(weights * (values - fitted) ** 2))
        if err < best_err - 1e-12:
            best, best_err = fitted, err
    return best


# ----------------------------------------------------------------------------
# Platt
# ----------------------------------------------------------------------------

def test_platt_recovers_generating_parameters():
    cal = make_cal_set(n=20000, n_fields=1, slope=1.5, offsets=[0.3], seed=2)
    model = fit_platt(cal)
    assert model.a == pytest.approx(1.5, abs=0.1)
    assert model.b == pytest.approx(0.3, abs=0.1)
    assert not model.degenerate


def test_platt_prediction_formula():
    model = fit_platt(make_cal_set(n=500))
    r = np.array([-1.0, 0.0, 2.0])
    np.testing.assert_allclose(apply_platt(model, r), expit(model.a * r + model.b))
    assert isinstance(apply_platt(model, 0.5), float)


def test_platt_constant_scores_is_degenerate():
    cal = CalibrationSet(r=np.full(8, 0.7), x_ctx=np.zeros((8, 1)), field=['a'] * 8,
                         click=[1, 0, 0, 0, 1, 0, 0, 0], listing_id=np.arange(8))
    model = fit_platt(cal)
    assert model.degenerate and model.a == 0.0
    assert apply_platt(model, 3.0) == pytest.approx(0.25)


def test_platt_needs_both_classes():
    cal = CalibrationSet(r=[0.1, 0.2], x_ctx=np.zeros((2, 1)), field=['a', 'a'], click=[1, 1], listing_id=[0, 0])
    with pytest.raises(FitError):
        fit_platt(cal)


# ----------------------------------------------------------------------------
# Smoothed Isotonic
# ----------------------------------------------------------------------------

@pytest.mark.parametrize('seed', range(40))
def test_pava_matches_exhaustive_search(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    values = rng.normal(size=n)
    weights = rng.integers(1, 4, size=n).astype(float)
    np.testing.assert_allclose(pava(values, weights), _brute_isotonic(values, weights), atol=1e-12)


def test_pava_examples():
    np.testing.assert_allclose(pava([1.0, 3.0, 2.0, 4.0]), [1.0, 2.5, 2.5, 4.0])
    np.testing.assert_allclose(pava([3.0, 2.0, 1.0]), [2.0, 2.0, 2.0])
    with pytest.raises(InputError):
        pava([])
    with pytest.raises(InputError):
        pava([1.0, 2.0], [1.0, 0.0])


def test_isotonic_is_monotone_and_clamped(cal_set):
    model = fit_smoothed_isotonic(cal_set, bins=20)
    grid = np.linspace(cal_set.r.min() - 2, cal_set.r.max() + 2, 500)
    pred = model.predict(grid)
    assert np.all(np.diff(pred) >= 0)
    assert np.all((pred >= 0) & (pred <= 1))
    assert pred[0] == model.knot_p[0] and pred[-1] == model.knot_p[-1]
    assert np.all(np.diff(model.knot_r) > 0)


def test_isotonic_reduces_bins_to_distinct_scores():
    r = np.repeat([0.1, 0.5, 0.9], 10)
    click = np.tile([1, 0, 0, 0, 0, 1, 1, 0, 0, 1], 3)
    cal = CalibrationSet(r=r, x_ctx=np.zeros((30, 1)), field=['a'] * 30, click=click, listing_id=np.arange(30))
    model = fit_smoothed_isotonic(cal, bins=100)
    assert len(model.knot_r) <= 3
    assert np.all(np.diff(model.predict([0.1, 0.5, 0.9])) >= 0)


def test_isotonic_anti_monotone_labels_collapse_to_global_rate():
    r = np.linspace(-2.0, 2.0, 200)
    click = (r < -1.0).astype(float)
    cal = CalibrationSet(r=r, x_ctx=np.zeros((200, 1)), field=['a'] * 200, click=click, listing_id=np.arange(200))
    model = fit_smoothed_isotonic(cal, bins=10)
    np.testing.assert_allclose(model.predict(np.linspace(-3.0, 3.0, 50)), click.mean(), atol=1e-12)


def test_isotonic_rejects_bad_bins(cal_set):
    with pytest.raises(InputError):
        fit_smoothed_isotonic(cal_set, bins=1)


# ----------------------------------------------------------------------------
# ConfCalib
# ----------------------------------------------------------------------------

def test_wilson_interval_known_value():
    lower, upper = wilson_interval(5, 10, 0.95)
    assert lower == pytest.approx(0.236594, abs=1e-4)
    assert upper == pytest.approx(0.763406, abs=1e-4)
    lower, upper = wilson_interval(0, 20, 0.95)
    assert lower == 0.0 and upper > 0.0
    with pytest.raises(InputError):
        wilson_interval(0, 0, 0.95)


def test_dampen_is_bounded():
    assert dampen(0.0) == 0.0
    assert dampen(0.5) == pytest.approx(1.0 / 3.0)
    assert abs(dampen(-50.0)) < 1.0


def test_confcalib_moves_fields_toward_their_rate():
    cal = make_cal_set(n=4000, n_fields=2, offsets=[-2.0, 2.0], seed=5)
    model = fit_confcalib(cal)
    assert model.entries['z0'].scale < 1.0 < model.entries['z1'].scale
    base = apply_platt(model.base, cal.r)
    out = model.predict(cal.r, cal.x_ctx, cal.field)
    mask = cal.field == 'z1'
    assert abs(out[mask].mean() - cal.click[mask].mean()) < abs(base[mask].mean() - cal.click[mask].mean())


def test_confcalib_leaves_field_inside_interval_unchanged():
    cal = make_cal_set(n=3000, n_fields=1, offsets=[0.0], seed=6)
    model = fit_confcalib(cal)
    entry = model.entries['z0']
    assert entry.scale == 1.0
    base = apply_platt(model.base, cal.r)
    np.testing.assert_allclose(model.predict(cal.r, cal.x_ctx, cal.field), np.clip(base, 1e-7, 1 - 1e-7))


def test_confcalib_unseen_field_uses_global_entry(cal_set):
    model = fit_confcalib(cal_set)
    base = apply_platt(model.base, np.array([0.0, 1.0]))
    out = apply_confcalib(model, base, ['never-seen', 'never-seen'])
    expected = np.clip(base * model.global_entry.scale, 1e-7, 1 - 1e-7)
    np.testing.assert_allclose(out, expected)


def test_confcalib_rejects_bad_level(cal_set):
    with pytest.raises(InputError):
        fit_confcalib(cal_set, level=1.0)


# ----------------------------------------------------------------------------
# MLPlatt
# ----------------------------------------------------------------------------

def test_monotonicity_penalty_examples():
    assert monotonicity_penalty([1.0, -2.0, 0.0, -1.0]) == pytest.approx(0.75)
    assert monotonicity_penalty([0.3, 0.1]) == 0.0
    with pytest.raises(InputError):
        monotonicity_penalty([])


def test_input_derivative_matches_finite_differences():
    model = init_mlplatt(2, MlplattConfig(context_layers=[4], mono_layers=[5, 1], seed=3))
    rng = np.random.default_rng(0)
    r = rng.normal(size=6)
    x = rng.normal(size=(6, 2))
    h = 1e-6
    num = (model.predict(r + h, x) - model.predict(r - h, x)) / (2 * h)
    np.testing.assert_allclose(input_derivative(model, r, x), num, rtol=1e-4, atol=1e-9)


def test_penalty_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    r = rng.normal(size=12)
    x = rng.normal(size=(12, 2))
    y = (rng.random(12) < 0.5).astype(float)
    checked = 0
    for seed in range(30):
        mono = init_mlp([3, 4, 1], ['sigmoid', 'sigmoid'], seed=seed)
        model = MlplattModel(context_net=None, mono_net=mono, theta=1.0, ctx_dim=2)
        d = input_derivative(model, r, x)
        if not np.any(d < 0) or np.min(np.abs(d)) < 1e-3:
            continue
        checked += 1
        _, _, grads = _batch_grads(model, r, x, y, fd_step=1e-4, batch=0)
        step = 1e-6
        for k, layer in enumerate(mono.layers):
            for idx in np.ndindex(*layer.weight.shape):
                plus, minus = mono.copy(), mono.copy()
                plus.layers[k].weight[idx] += step
                minus.layers[k].weight[idx] -= step
                lp = training_loss(MlplattModel(None, plus, 1.0, 2), r, x, y)
                lm = training_loss(MlplattModel(None, minus, 1.0, 2), r, x, y)
                assert grads.layers[k].weight[idx] == pytest.approx((lp - lm) / (2 * step), rel=1e-3, abs=1e-7)
    assert checked > 0


def test_identity_single_layer_mlplatt_collapses_to_platt():
    cal = make_cal_set(n=2000, ctx_dim=1, n_fields=1, slope=1.2, offsets=[-0.4], seed=8)
    cal = CalibrationSet(r=cal.r, x_ctx=np.zeros((len(cal), 0)), field=cal.field, click=cal.click,
                         listing_id=cal.listing_id)
    config = MlplattConfig(context_layers=None, mono_layers=[1], theta=0.0, epochs=300, batch_size=256, lr=1e-2)
    model = fit_mlplatt(cal, config)
    platt = fit_platt(cal)
    grid = np.linspace(-3, 3, 25)
    np.testing.assert_allclose(model.predict(grid, np.zeros((25, 0))), apply_platt(platt, grid), atol=0.02)


def test_mlplatt_uses_context():
    cal = make_cal_set(n=3000, ctx_dim=2, n_fields=1, offsets=[0.0], context_weight=2.0, seed=9)
    config = MlplattConfig(context_layers=None, mono_layers=[1], theta=0.0, epochs=100, batch_size=512, lr=1e-2)
    model = fit_mlplatt(cal, config)
    platt = fit_platt(cal)
    assert log_loss(model.predict(cal.r, cal.x_ctx), cal.click) < log_loss(apply_platt(platt, cal.r), cal.click)


def test_mlplatt_context_free_labels_give_base_rate():
    rng = np.random.default_rng(12)
    n = 20000
    cal = CalibrationSet(r=rng.normal(size=n), x_ctx=rng.normal(size=(n, 2)), field=['a'] * n,
                         click=(rng.random(n) < 0.3).astype(float), listing_id=np.arange(n) // 5)
    config = MlplattConfig(context_layers=[4], mono_layers=[4, 1], epochs=60, batch_size=1000, lr=1e-2)
    model = fit_mlplatt(cal, config)
    pred = model.predict(cal.r, cal.x_ctx)
    assert np.max(np.abs(pred - cal.click.mean())) < 0.02


def test_mlplatt_training_records_history(cal_set):
    config = MlplattConfig(context_layers=[4], mono_layers=[4, 1], epochs=3, batch_size=256, lr=1e-2)
    model = fit_mlplatt(cal_set, config)
    assert len(model.loss_history) == 4
    assert all(np.isfinite(model.loss_history))
    assert model.loss_history[-1] < model.loss_history[0]
    out = model.predict(cal_set.r, cal_set.x_ctx)
    assert np.all((out > 0) & (out < 1))


def test_mlplatt_training_is_deterministic(cal_set):
    config = MlplattConfig(context_layers=[3], mono_layers=[3, 1], epochs=2, batch_size=500, seed=4)
    a = fit_mlplatt(cal_set, config)
    b = fit_mlplatt(cal_set, config)
    assert a.to_bytes() == b.to_bytes()


def test_mlplatt_rejects_wrong_context_width(cal_set):
    model = init_mlplatt(cal_set.ctx_dim, MlplattConfig(context_layers=[3], mono_layers=[2, 1]))
    with pytest.raises(ShapeError):
        model.predict([0.1, 0.2], np.zeros((2, cal_set.ctx_dim + 1)))
    with pytest.raises(ShapeError):
        model.predict([0.1, 0.2])


def test_mlplatt_config_validation():
    with pytest.raises(ValueError):
        MlplattConfig(mono_layers=[4, 2])
    with pytest.raises(ValueError):
        MlplattConfig(theta=-1.0)


# ----------------------------------------------------------------------------
# envelope / serialização
# ----------------------------------------------------------------------------

@pytest.mark.parametrize('kind,params', [
    ('platt', {}),
    ('isotonic', {'bins': 10}),
    ('confcalib', {'level': 0.9}),
    ('mlplatt', {'context_layers': [3], 'mono_layers': [3, 1], 'epochs': 1, 'batch_size': 500}),
])
def test_calibrator_round_trip(tmp_path, cal_set, kind, params):
    calibrator = Calibrator(kind, params=params).fit(cal_set)
    path = tmp_path / f'{kind}.mlpc'
    path.write_bytes(calibrator.to_bytes())
    back = load_calibrator(path)
    assert back.kind == kind
    expected = calibrator.predict_set(cal_set)
    got = back.predict_set(cal_set)
    assert np.asarray(got).tobytes() == np.asarray(expected).tobytes()


def test_build_calibrator_spec_params_override_defaults():
    spec = CalibratorSpec(kind='isotonic', params={'bins': 10})
    calibrator = build_calibrator(spec, defaults={'isotonic': {'bins': 100}, 'platt': {'gtol': 1e-6}})
    assert calibrator.params == {'bins': 10}
    assert calibrator.name == 'Smoothed Isotonic'


def test_calibrator_errors(cal_set, tmp_path):
    with pytest.raises(InputError):
        Calibrator('nope')
    with pytest.raises(InputError):
        Calibrator('platt').predict([0.1])
    with pytest.raises(FileNotFoundError):
        load_calibrator(tmp_path / 'missing.mlpc')
