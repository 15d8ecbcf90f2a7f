from pathlib import Path

import pytest

from core.errors import ConfigError
from core.normalizers import (
    apply_overrides, load_experiment_config, normalize_calibrate_payload, normalize_calibrator, normalize_dataset,
    parse_calibrate_request, parse_experiment,
)


def test_dataset_shorthands():
    assert normalize_dataset('synthetic') == {'kind': 'synthetic'}
    assert normalize_dataset('aliexpress: /dados/ae.csv') == {'kind': 'aliexpress', 'path': '/dados/ae.csv'}
    assert normalize_dataset('/dados/train.tsv') == {'kind': 'file', 'path': '/dados/train.tsv'}
    assert normalize_dataset({'file': 'x.tsv'}) == {'kind': 'file', 'path': 'x.tsv'}
    assert normalize_dataset({'source': 'AliExpress', 'location': 'y.csv', 'countries': 'es, fr'}) == {
        'kind': 'aliexpress', 'path': 'y.csv', 'countries': ['ES', 'FR']}


def test_calibrator_aliases():
    assert normalize_calibrator('Smoothed Isotonic') == {'kind': 'isotonic'}
    assert normalize_calibrator({'type': 'ml_platt', 'label': 'MLPlatt θ=0', 'options': {'theta': 0.0}}) == {
        'kind': 'mlplatt', 'name': 'MLPlatt θ=0', 'params': {'theta': 0.0}}


def test_parse_experiment_accepts_aliases():
    config = parse_experiment({
        'M': 10,
        'seed': 3,
        'thetas': '0, 1e-3',
        'alphas': [0.1],
        'out': '/tmp/x',
        'calibrators': 'platt, conf_calib',
    })
    assert config.bins == 10
    assert config.seeds == [3]
    assert config.theta_grid == [0.0, 1e-3]
    assert config.rcr_alphas == [0.1]
    assert config.output_dir == '/tmp/x'
    assert [c.kind for c in config.calibrators] == ['platt', 'confcalib']
    assert [c.label for c in config.calibrators] == ['Platt', 'ConfCalib']


def test_parse_experiment_defaults():
    config = parse_experiment(None)
    assert config.bins == 20
    assert [c.kind for c in config.calibrators] == ['platt', 'isotonic', 'confcalib', 'mlplatt']
    assert config.mlplatt.mono_layers[-1] == 1


@pytest.mark.parametrize('payload', [
    {'bins': 0},
    {'calibrators': ['bogus']},
    {'rcr_alphas': [1.5]},
    {'theta_grid': [-1.0]},
    {'test_fraction': 1.0},
    {'ranker': {'loss': 'rcr'}},
    {'dataset': {'kind': 'file'}},
    {'seeds': []},
])
def test_invalid_experiments_raise_config_error(payload):
    with pytest.raises(ConfigError):
        parse_experiment(payload)


def test_load_experiment_config(tmp_path):
    path = tmp_path / 'exp.yaml'
    path.write_text('name: t\nbins: 7\ndataset:\n  kind: synthetic\n  generator:\n    listings: 10\n',
                    encoding='utf-8')
    config = load_experiment_config(path)
    assert config.name == 't' and config.bins == 7
    assert config.dataset.generator.listings == 10
    with pytest.raises(ConfigError):
        load_experiment_config(tmp_path / 'missing.yaml')
    bad = tmp_path / 'bad.yaml'
    bad.write_text('- a\n- b\n', encoding='utf-8')
    with pytest.raises(ConfigError):
        load_experiment_config(bad)


def test_load_shipped_desk_config():
    config = load_experiment_config(Path(__file__).resolve().parent.parent / 'configs' / 'desk.yaml')
    assert config.seeds == [0, 1, 2]
    assert [c.kind for c in config.calibrators] == ['platt', 'isotonic', 'confcalib', 'mlplatt']
    assert config.calibrators[1].params == {'bins': 100}


def test_cli_overrides_take_precedence():
    config = parse_experiment({'seeds': [0, 1], 'bins': 20, 'dataset': {'kind': 'file', 'path': 'a.tsv'}})
    out = apply_overrides(config, seed=5, out='/tmp/o', dataset='synthetic', bins=8)
    assert out.seeds == [5]
    assert out.output_dir == '/tmp/o'
    assert out.dataset.kind == 'synthetic' and out.dataset.path is None
    assert out.bins == 8
    assert apply_overrides(config, dataset='aliexpress:b.csv').dataset.path == 'b.csv'


def test_calibrate_payload_normalization():
    assert normalize_calibrate_payload({'r': '0.1, 0.2', 'x_ctx': [1, 2], 'z': ' US '}) == {
        'scores': [0.1, 0.2], 'context': [1.0, 2.0], 'field': 'US'}
    request = parse_calibrate_request({'scores': [0.5]})
    assert request.context == [] and request.field is None
    with pytest.raises(ValueError):
        parse_calibrate_request({'scores': []})
    with pytest.raises(ValueError):
        parse_calibrate_request({'scores': ['abc']})
