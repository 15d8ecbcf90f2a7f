import json

import numpy as np
import pytest

from core.bench import run_ablation, run_benchmark, run_rcr_comparison, run_theta_sweep, stage
from core.bench import cli
from core.bench.reports import ReportRow, ReportTable, render_text
from core.bench.runner import (
    LAMBDA_MLPLATT, NO_CONTEXT, NO_MONO, Cell, aggregate_rows, ablation_specs, rcr_row_name, run_directory,
    sample_listings, theta_row_name,
)
from core.bench.significance import ScoredPredictions, p_value, paired_bootstrap
from core.calibrators import load_calibrator
from core.config import Config
from core.dataio import read_dataset
from core.errors import StageError
from core.models import MetricsReport


@pytest.fixture
def quiet_log(tmp_path, monkeypatch):
    monkeypatch.setattr(Config, 'LOG_PATH', str(tmp_path / 'bench.log'))


def test_benchmark_writes_all_artifacts(tiny_experiment):
    result = run_benchmark(tiny_experiment)
    names = [r.name for r in result.table.rows]
    assert names == ['Platt', 'Smoothed Isotonic', 'ConfCalib', 'MLPlatt']
    for fname in ('config.json', 'report.txt', 'report.jsonl', 'report.pdf'):
        assert (result.run_dir / fname).exists()
    assert (result.run_dir / 'report.pdf').read_bytes().startswith(b'%PDF')
    for slug in ('platt', 'smoothed_isotonic', 'confcalib', 'mlplatt'):
        calibrator = load_calibrator(result.run_dir / 'models' / 'seed0' / f'{slug}.mlpc')
        assert calibrator.model is not None
    scored = read_dataset(result.run_dir / 'scored' / 'seed0.tsv')
    assert scored.r is not None and scored.true_ctr is not None

    records = [json.loads(line) for line in (result.run_dir / 'report.jsonl').read_text().splitlines()]
    assert [r['name'] for r in records] == names
    assert all('oracle_f_ece' in r and len(r['reliability']) == 5 for r in records)
    assert set(records[0]['p_values']) == {'F-ECE', 'LogLoss', 'NDCG', 'AUC'}
    assert records[-1]['p_values'] == {}
    assert 'DESC' in result.text


def test_benchmark_is_byte_reproducible(tiny_experiment, tmp_path):
    first = run_benchmark(tiny_experiment)
    other = tiny_experiment.model_copy(update={'output_dir': str(tmp_path / 'again')})
    second = run_benchmark(other)
    assert first.run_dir.name == second.run_dir.name
    for fname in ('report.txt', 'report.jsonl', 'report.pdf'):
        assert (first.run_dir / fname).read_bytes() == (second.run_dir / fname).read_bytes()


def test_single_calibrator_roster_has_no_significance(tiny_experiment):
    config = tiny_experiment.model_copy(update={
        'calibrators': [c for c in tiny_experiment.calibrators if c.kind == 'platt']})
    result = run_benchmark(config)
    assert not result.table.has_significance
    assert '*' not in result.text
    assert all(r['p_values'] == {} for r in result.records)


def test_holdout_calibration_split(tiny_experiment):
    config = tiny_experiment.model_copy(update={
        'calibration_split': 'holdout',
        'calibrators': [c for c in tiny_experiment.calibrators if c.kind in ('platt', 'isotonic')]})
    result = run_benchmark(config)
    assert len(result.table.rows) == 2


def test_ablation_rows(tiny_experiment):
    assert [s.label for s in ablation_specs()] == ['Platt', NO_CONTEXT, NO_MONO, 'MLPlatt']
    result = run_ablation(tiny_experiment)
    assert [r.name for r in result.table.rows] == ['Platt', NO_CONTEXT, NO_MONO, 'MLPlatt']
    no_ctx = load_calibrator(result.run_dir / 'models' / 'seed0' / 'mlplatt_no_context_model.mlpc')
    assert no_ctx.model.context_net is None
    no_mono = load_calibrator(result.run_dir / 'models' / 'seed0' / 'mlplatt_no_monomlp.mlpc')
    assert len(no_mono.model.mono_net.layers) == 1


def test_rcr_comparison_rows(tiny_experiment):
    result = run_rcr_comparison(tiny_experiment)
    assert [r.name for r in result.table.rows] == [rcr_row_name(0.01), LAMBDA_MLPLATT]
    assert rcr_row_name(0.001) == 'RCR (α=1e-3)'


def test_theta_sweep(tiny_experiment):
    result = run_theta_sweep(tiny_experiment)
    assert result.table.columns == ['Misordered']
    assert [r.name for r in result.table.rows] == [theta_row_name(0.0), theta_row_name(1.0)]
    for row in result.table.rows:
        assert 0.0 <= row.values['Misordered'] <= 1.0
    assert all(rec['sample_listings'] == 40 and len(rec['loss_history']) == 3 for rec in result.records)
    assert '%' in result.text


def test_theta_sweep_empty_grid_fails_in_config_stage(tiny_experiment):
    config = tiny_experiment.model_copy(update={'theta_grid': []})
    with pytest.raises(StageError) as exc:
        run_theta_sweep(config)
    assert exc.value.stage == 'config'


def test_stage_wraps_failures():
    with pytest.raises(StageError) as exc:
        with stage('ranker'):
            raise RuntimeError('boom')
    assert str(exc.value) == 'stage ranker failed: boom'
    with pytest.raises(StageError) as exc:
        with stage('outer'):
            with stage('inner'):
                raise ValueError('x')
    assert exc.value.stage == 'inner'


def test_run_directory_ignores_output_dir(tiny_experiment, tmp_path):
    moved = tiny_experiment.model_copy(update={'output_dir': str(tmp_path / 'elsewhere')})
    assert run_directory(tiny_experiment, 'bench').name == run_directory(moved, 'bench').name
    assert run_directory(tiny_experiment, 'bench').name != run_directory(tiny_experiment, 'ablation').name


def test_sample_listings_is_deterministic_and_bounded():
    ids = np.repeat(np.arange(30), 3)
    a = sample_listings(ids, 10, seed=1)
    assert len(a) == 10 and np.array_equal(a, sample_listings(ids, 10, seed=1))
    assert len(sample_listings(ids, 100, seed=1)) == 30


# ----------------------------------------------------------------------------
# significância / agregação / relatório
# ----------------------------------------------------------------------------

def test_p_value_definition():
    assert p_value(np.array([])) == 1.0
    assert p_value(np.array([1.0, 2.0, 3.0])) == 0.0
    assert p_value(np.array([-1.0, 1.0])) == 1.0
    assert p_value(np.array([-1.0, 1.0, 2.0, 3.0])) == pytest.approx(0.5)


def test_paired_bootstrap_identical_predictions_never_significant():
    rng = np.random.default_rng(0)
    p = rng.random(200)
    y = (rng.random(200) < p).astype(float)
    s = ScoredPredictions(p, p)
    out = paired_bootstrap(s, s, y, ['a'] * 200, np.arange(200) // 5, M=5, resamples=30, seed=0)
    assert out == {'F-ECE': 1.0, 'LogLoss': 1.0, 'NDCG': 1.0, 'AUC': 1.0}


def test_paired_bootstrap_detects_clearly_better_reference():
    rng = np.random.default_rng(1)
    true = rng.random(600)
    y = (rng.random(600) < true).astype(float)
    good = ScoredPredictions(true, true)
    bad = ScoredPredictions(np.clip(1.0 - true, 0.01, 0.99), 1.0 - true)
    out = paired_bootstrap(bad, good, y, ['a'] * 600, np.arange(600) // 6, M=10, resamples=200, seed=3)
    assert out['LogLoss'] < 0.01 and out['AUC'] < 0.01 and out['NDCG'] < 0.01


def _report(name, f_ece, p_values):
    return MetricsReport(name=name, f_ece=f_ece, per_field_ece={'a': f_ece}, field_counts={'a': 10},
                         log_loss=0.5, auc=0.7, ndcg=0.6, misordered_fraction=0.0, bins=5, p_values=p_values)


def test_aggregate_marks_significance_only_when_every_seed_agrees():
    per_seed = {
        0: [Cell('Platt', _report('Platt', 0.1, {'F-ECE': 0.001, 'AUC': 0.001})),
            Cell('MLPlatt', _report('MLPlatt', 0.05, {}))],
        1: [Cell('Platt', _report('Platt', 0.2, {'F-ECE': 0.001, 'AUC': 0.5})),
            Cell('MLPlatt', _report('MLPlatt', 0.07, {}))],
    }
    rows = aggregate_rows(per_seed, 'MLPlatt', 0.01)
    assert rows[0].values['F-ECE'] == pytest.approx(0.15)
    assert rows[0].significant['F-ECE'] is True
    assert rows[0].significant['AUC'] is False
    assert rows[0].significant['NDCG'] is False
    assert rows[1].significant == {}


def test_report_rendering_marks_best_and_significant():
    table = ReportTable(
        title='t', run_id='abc', columns=['F-ECE', 'AUC'], seeds=[0], bins=5, reference='B',
        rows=[
            ReportRow('A', {'F-ECE': 0.02, 'AUC': 0.71}, {'F-ECE': True, 'AUC': False}),
            ReportRow('B', {'F-ECE': 0.01, 'AUC': 0.71}),
            ReportRow('C', {'F-ECE': 0.03, 'AUC': None}),
        ],
    )
    assert table.best_rows('F-ECE') == {1}
    assert table.best_rows('AUC') == {0, 1}
    assert table.cell(0, 'F-ECE') == '*0.0200'
    assert table.cell(1, 'F-ECE') == '[0.0100]'
    assert table.cell(2, 'AUC') == '-'
    text = render_text(table)
    assert text.splitlines()[0] == 't'
    assert 'Method' in text and '[0.7100]' in text


# ----------------------------------------------------------------------------
# CLI
# ----------------------------------------------------------------------------

def test_cli_runs_bench(tiny_experiment, tmp_path, capsys, quiet_log):
    config_path = tmp_path / 'tiny.yaml'
    config_path.write_text(json.dumps(tiny_experiment.model_dump()), encoding='utf-8')
    code = cli.main(['bench', '--config', str(config_path), '--out', str(tmp_path / 'cli'), '--bins', '4'])
    assert code == 0
    out = capsys.readouterr().out
    assert 'M=4' in out and 'artefatos em' in out


def test_cli_stage_failure_exits_with_2(tiny_experiment, tmp_path, capsys, quiet_log):
    config_path = tmp_path / 'tiny.yaml'
    payload = tiny_experiment.model_dump()
    payload['theta_grid'] = []
    config_path.write_text(json.dumps(payload), encoding='utf-8')
    assert cli.main(['theta-sweep', '--config', str(config_path)]) == 2
    assert 'stage config failed' in capsys.readouterr().err


def test_cli_invalid_config_exits_with_2(tmp_path, capsys, quiet_log):
    config_path = tmp_path / 'bad.yaml'
    config_path.write_text('bins: 0\n', encoding='utf-8')
    assert cli.main(['bench', '--config', str(config_path)]) == 2
    assert 'stage config failed' in capsys.readouterr().err


def test_cli_missing_dataset_fails_in_data_stage(tmp_path, capsys, quiet_log):
    code = cli.main(['bench', '--dataset', str(tmp_path / 'nope.tsv'), '--out', str(tmp_path / 'o')])
    assert code == 2
    assert 'stage data failed' in capsys.readouterr().err
