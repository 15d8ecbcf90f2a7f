# core/bench/runner.py
"""
Pipelines do benchmark: benchmark completo, ablação, varredura de θ e
comparação com rankers RCR.

Por seed: dados -> split treino/teste por listagem -> ranker -> scores ->
calibradores -> métricas no teste -> bootstrap contra a referência.
Métricas são a média entre seeds; a estrela só aparece quando p < nível
em todas as seeds.
"""
import logging
import re
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from core.bench.reports import (
    METRIC_COLUMNS, ReportRow, ReportTable, render_text, write_jsonl, write_pdf_report, write_text_report,
)
from core.bench.significance import ScoredPredictions, paired_bootstrap
from core.calibrators import CalibrationSet, Calibrator, build_calibrator
from core.config import Config
from core.datagen import generate, oracle_f_ece
from core.dataio import Dataset, build_calibration_set, load_aliexpress, read_dataset, split, write_dataset
from core.errors import ConfigError, StageError
from core.metrics import evaluate, misordered_fraction, reliability_curve
from core.models import CalibratorSpec, DatasetSource, ExperimentConfig, MetricsReport, RankerConfig
from core.nn.serialization import save_bytes
from core.ranker import RankerModel, score_dataset, train_ranker
from core.utils import alpha_label, config_hash

logger = logging.getLogger(__name__)

MLPLATT = 'MLPlatt'
NO_CONTEXT = 'MLPlatt (No Context Model)'
NO_MONO = 'MLPlatt (No MonoMLP)'
LAMBDA_MLPLATT = 'LambdaLoss + MLPlatt'
DESC_FOOTNOTE = "DESC: não implementado (sem linha na tabela)."


@contextmanager
def stage(name: str):
    """Qualquer falha dentro do bloco vira StageError(name), logada com traceback."""
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        logger.exception("stage %s falhou", name)
        raise StageError(name, e) from e


# ----------------------------------------------------------------------------
# dados / ranker por seed
# ----------------------------------------------------------------------------

@dataclass
class SeedData:
    seed: int
    ranker_train: Dataset        # treino do ranker
    calibration: Dataset         # onde o calibrador é ajustado (== ranker_train no modo 'train')
    test: Dataset


@dataclass
class ScoredSeed:
    data: SeedData
    ranker: RankerModel
    cal_set: CalibrationSet
    test_set: CalibrationSet

    @property
    def field_name(self) -> str:
        return self.data.test.field_name


@dataclass
class Cell:
    """Uma linha da tabela em uma seed."""
    name: str
    report: Optional[MetricsReport] = None
    scored: Optional[ScoredPredictions] = None
    calibrator: Optional[Calibrator] = None
    extra: Dict[str, Any] = field(default_factory=dict)


@dataclass
class RunResult:
    table: ReportTable
    run_dir: Path
    records: List[Dict[str, Any]]

    @property
    def text(self) -> str:
        return render_text(self.table)


def load_dataset(source: DatasetSource, seed: int) -> Dataset:
    if source.kind == 'synthetic':
        return generate(source.generator.model_copy(update={'seed': seed}))
    if source.kind == 'aliexpress':
        return load_aliexpress(source.path, countries=source.countries, column_map=source.column_map)
    return read_dataset(source.path)


def load_seed_data(config: ExperimentConfig, seed: int) -> SeedData:
    with stage('data'):
        dataset = load_dataset(config.dataset, seed)
        train, test = split(dataset, config.test_fraction, seed)
        if config.calibration_split == 'holdout':
            ranker_train, calibration = split(train, config.calibration_fraction, seed)
        else:
            ranker_train = calibration = train
        logger.info("seed %s: %s listagens de treino do ranker, %s de calibração, %s de teste",
                    seed, ranker_train.n_listings, calibration.n_listings, test.n_listings)
    return SeedData(seed=seed, ranker_train=ranker_train, calibration=calibration, test=test)


def score_seed(config: ExperimentConfig, data: SeedData, ranker_config: Optional[RankerConfig] = None) -> ScoredSeed:
    ranker_config = ranker_config or config.ranker
    with stage('ranker'):
        ranker = train_ranker(data.ranker_train, ranker_config, seed=data.seed)
    with stage('scoring'):
        cal_set = build_calibration_set(ranker, data.calibration, config.context_source)
        test_set = build_calibration_set(ranker, data.test, config.context_source)
    return ScoredSeed(data=data, ranker=ranker, cal_set=cal_set, test_set=test_set)


def prepare_seed(config: ExperimentConfig, seed: int, ranker_config: Optional[RankerConfig] = None) -> ScoredSeed:
    return score_seed(config, load_seed_data(config, seed), ranker_config)


def lambda_ranker_config(config: ExperimentConfig) -> RankerConfig:
    if config.ranker.loss == 'lambda':
        return config.ranker
    return config.ranker.model_copy(update={'loss': 'lambda', 'alpha': None})


# ----------------------------------------------------------------------------
# calibradores / células
# ----------------------------------------------------------------------------

def calibrator_defaults(config: ExperimentConfig, seed: int) -> Dict[str, Dict[str, Any]]:
    mlplatt = config.mlplatt.model_dump()
    mlplatt['seed'] = config.mlplatt.seed + seed
    return {
        'mlplatt': mlplatt,
        'isotonic': {'bins': getattr(Config, 'ISOTONIC_BINS', 100)},
        'confcalib': {'level': getattr(Config, 'CONFCALIB_LEVEL', 0.95)},
    }


def evaluate_predictions(config: ExperimentConfig, name: str, preds, scored: ScoredSeed) -> Cell:
    t = scored.test_set
    preds = np.asarray(preds, dtype=np.float64)
    report = evaluate(name, preds, t.click, t.field, t.listing_id, ranking_scores=preds, raw_scores=t.r,
                      M=config.bins, field_name=scored.field_name)
    extra = {'reliability': reliability_curve(preds, t.click, config.bins)}
    if scored.data.test.has_ground_truth:
        extra['oracle_f_ece'] = oracle_f_ece(preds, scored.data.test, config.bins)
    return Cell(name=name, report=report, scored=ScoredPredictions(preds, preds), extra=extra)


def fit_cell(config: ExperimentConfig, spec: CalibratorSpec, scored: ScoredSeed) -> Cell:
    calibrator = build_calibrator(spec, calibrator_defaults(config, scored.data.seed))
    with stage(f"calibrator:{calibrator.name}"):
        calibrator.fit(scored.cal_set)
    with stage('evaluate'):
        cell = evaluate_predictions(config, calibrator.name, calibrator.predict_set(scored.test_set), scored)
    cell.calibrator = calibrator
    return cell


def _slug(name: str) -> str:
    return re.sub(r'[^a-z0-9]+', '_', name.lower()).strip('_') or 'model'


def save_seed_artifacts(run_dir: Path, scored: ScoredSeed, cells: List[Cell]):
    seed = scored.data.seed
    with stage('artifacts'):
        for cell in cells:
            if cell.calibrator is not None:
                save_bytes(cell.calibrator.to_bytes(), run_dir / 'models' / f"seed{seed}" / f"{_slug(cell.name)}.mlpc")
        write_dataset(scored.data.test.with_scores(scored.test_set.r), run_dir / 'scored' / f"seed{seed}.tsv")


def attach_significance(config: ExperimentConfig, cells: List[Cell], reference: str, scored: ScoredSeed):
    ref = next((c for c in cells if c.name == reference), None)
    if ref is None:
        return
    t = scored.test_set
    with stage('significance'):
        for cell in cells:
            if cell is ref:
                continue
            p = paired_bootstrap(cell.scored, ref.scored, t.click, t.field, t.listing_id, M=config.bins,
                                 resamples=config.bootstrap_resamples, seed=scored.data.seed)
            cell.report = cell.report.model_copy(update={'p_values': p})


# ----------------------------------------------------------------------------
# agregação / relatórios
# ----------------------------------------------------------------------------

def _mean(values: List[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def aggregate_rows(per_seed: Dict[int, List[Cell]], reference: Optional[str], level: float) -> List[ReportRow]:
    names: List[str] = []
    for cells in per_seed.values():
        for c in cells:
            if c.name not in names:
                names.append(c.name)
    rows = []
    for name in names:
        reports = [c.report for cells in per_seed.values() for c in cells if c.name == name]
        values = {
            'F-ECE': _mean([r.f_ece for r in reports]),
            'LogLoss': _mean([r.log_loss for r in reports]),
            'NDCG': _mean([r.ndcg for r in reports]),
            'AUC': _mean([r.auc for r in reports]),
        }
        significant = {}
        if reference is not None and name != reference:
            for m in METRIC_COLUMNS:
                ps = [r.p_values.get(m) for r in reports]
                significant[m] = bool(ps) and all(p is not None and p < level for p in ps)
        rows.append(ReportRow(name=name, values=values, significant=significant))
    return rows


def run_directory(config: ExperimentConfig, command: str) -> Path:
    """<out>/<hash(config sem output_dir + comando)>."""
    payload = config.model_dump(exclude={'output_dir'})
    payload['command'] = command
    return Path(config.output_dir) / config_hash(payload)


def _significance_note(config: ExperimentConfig, reference: str) -> str:
    return (f"* p < {config.significance_level:g} contra {reference} em todas as seeds "
            f"(bootstrap pareado por listagem, {config.bootstrap_resamples} reamostras). "
            f"[valor] = melhor da coluna.")


def write_run(config: ExperimentConfig, command: str, table: ReportTable, records: List[Dict[str, Any]],
              run_dir: Path) -> RunResult:
    with stage('report'):
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / 'config.json').write_text(
            config.model_dump_json(indent=2) + '\n', encoding='utf-8')
        write_text_report(table, run_dir / 'report.txt')
        write_jsonl(records, run_dir / 'report.jsonl')
        write_pdf_report(table, run_dir / 'report.pdf')
    logger.info("%s: relatórios em %s", command, run_dir)
    return RunResult(table=table, run_dir=run_dir, records=records)


def _records(table_name: str, seed: int, cells: List[Cell]) -> List[Dict[str, Any]]:
    out = []
    for c in cells:
        rec = c.report.model_dump()
        rec.update({'seed': seed, 'table': table_name})
        rec.update(c.extra)
        out.append(rec)
    return out


def _run_rows(config: ExperimentConfig, command: str, title: str, reference: Optional[str],
              seed_cells: Callable[[ScoredSeed], List[Cell]], footnotes: Optional[List[str]] = None,
              ranker_config: Optional[RankerConfig] = None) -> RunResult:
    run_dir = run_directory(config, command)
    per_seed: Dict[int, List[Cell]] = {}
    records: List[Dict[str, Any]] = []
    for seed in config.seeds:
        logger.info("%s: seed %s", command, seed)
        scored = prepare_seed(config, seed, ranker_config)
        cells = seed_cells(scored)
        if reference is not None:
            attach_significance(config, cells, reference, scored)
        save_seed_artifacts(run_dir, scored, cells)
        per_seed[seed] = cells
        records.extend(_records(command, seed, cells))

    has_reference = reference is not None and any(c.name == reference for cells in per_seed.values() for c in cells)
    ref = reference if has_reference and len(per_seed[config.seeds[0]]) > 1 else None
    notes = list(footnotes or [])
    if ref is not None:
        notes.insert(0, _significance_note(config, ref))
    table = ReportTable(
        title=title,
        run_id=run_dir.name,
        columns=list(METRIC_COLUMNS),
        rows=aggregate_rows(per_seed, ref, config.significance_level),
        seeds=list(config.seeds),
        bins=config.bins,
        reference=ref,
        footnotes=notes,
    )
    return write_run(config, command, table, records, run_dir)


# ----------------------------------------------------------------------------
# subcomandos
# ----------------------------------------------------------------------------

def run_benchmark(config: ExperimentConfig) -> RunResult:
    """Um ranker por seed, todos os calibradores do roster nos mesmos scores."""
    reference = next((s.label for s in config.calibrators if s.kind == 'mlplatt'), None)

    def cells(scored: ScoredSeed) -> List[Cell]:
        return [fit_cell(config, spec, scored) for spec in config.calibrators]

    return _run_rows(config, 'bench', f"{config.name}: calibração de scores de ranking", reference, cells,
                     footnotes=[DESC_FOOTNOTE])


def ablation_specs() -> List[CalibratorSpec]:
    return [
        CalibratorSpec(kind='platt', name='Platt'),
        CalibratorSpec(kind='mlplatt', name=NO_CONTEXT, params={'context_layers': None}),
        CalibratorSpec(kind='mlplatt', name=NO_MONO, params={'mono_layers': [1]}),
        CalibratorSpec(kind='mlplatt', name=MLPLATT),
    ]


def run_ablation(config: ExperimentConfig) -> RunResult:
    specs = ablation_specs()

    def cells(scored: ScoredSeed) -> List[Cell]:
        return [fit_cell(config, spec, scored) for spec in specs]

    return _run_rows(config, 'ablation', f"{config.name}: influência dos componentes do MLPlatt", MLPLATT, cells)


def rcr_row_name(alpha: float) -> str:
    return f"RCR (α={alpha_label(alpha)})"


def run_rcr_comparison(config: ExperimentConfig) -> RunResult:
    """Rankers RCR (predição = sigmoid(r)) contra LambdaLoss + MLPlatt, no mesmo split."""
    with stage('config'):
        if not config.rcr_alphas:
            raise ConfigError("rcr_alphas vazio")

    def cells(scored: ScoredSeed) -> List[Cell]:
        out = []
        for alpha in config.rcr_alphas:
            rcr_config = config.ranker.model_copy(update={'loss': 'rcr', 'alpha': float(alpha)})
            with stage('ranker'):
                ranker = train_ranker(scored.data.ranker_train, rcr_config, seed=scored.data.seed)
            with stage('scoring'):
                preds = ranker.predict_proba(score_dataset(ranker, scored.data.test))
            with stage('evaluate'):
                out.append(evaluate_predictions(config, rcr_row_name(alpha), preds, scored))
        out.append(fit_cell(config, CalibratorSpec(kind='mlplatt', name=LAMBDA_MLPLATT), scored))
        return out

    return _run_rows(config, 'rcr', f"{config.name}: rankers RCR x LambdaLoss + MLPlatt", LAMBDA_MLPLATT, cells,
                     ranker_config=lambda_ranker_config(config))


def theta_row_name(theta: float) -> str:
    return f"θ={alpha_label(theta)}"


def sample_listings(listing_ids: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Amostra sem reposição de min(k, disponíveis) listagens, determinística pelo seed."""
    ids = np.unique(listing_ids)
    k = min(int(k), len(ids))
    return np.sort(np.random.default_rng([seed, 5]).choice(ids, size=k, replace=False))


def run_theta_sweep(config: ExperimentConfig) -> RunResult:
    """Fração de listagens desordenadas por θ, numa amostra de listagens do teste."""
    with stage('config'):
        if not config.theta_grid:
            raise ConfigError("theta_grid vazio")

    run_dir = run_directory(config, 'theta-sweep')
    fractions: Dict[float, List[float]] = {float(t): [] for t in config.theta_grid}
    records: List[Dict[str, Any]] = []
    for seed in config.seeds:
        scored = prepare_seed(config, seed)
        t = scored.test_set
        sampled = sample_listings(t.listing_id, config.theta_sample_listings, seed)
        mask = np.isin(t.listing_id, sampled)
        cells = []
        for theta in config.theta_grid:
            spec = CalibratorSpec(kind='mlplatt', name=theta_row_name(theta), params={'theta': float(theta)})
            calibrator = build_calibrator(spec, calibrator_defaults(config, seed))
            with stage(f"calibrator:{calibrator.name}"):
                calibrator.fit(scored.cal_set)
            with stage('evaluate'):
                c = calibrator.predict(t.r[mask], t.x_ctx[mask], t.field[mask])
                frac = misordered_fraction(t.r[mask], c, t.listing_id[mask])
            fractions[float(theta)].append(frac)
            records.append({'table': 'theta-sweep', 'seed': seed, 'theta': float(theta),
                            'misordered_fraction': frac, 'sample_listings': int(len(sampled)),
                            'loss_history': list(calibrator.model.loss_history)})
            cells.append(Cell(name=calibrator.name, calibrator=calibrator))
            logger.info("θ=%s seed %s: fração desordenada %.6f", theta, seed, frac)
        save_seed_artifacts(run_dir, scored, cells)

    table = ReportTable(
        title=f"{config.name}: penalidade de monotonicidade θ",
        run_id=run_dir.name,
        columns=['Misordered'],
        rows=[ReportRow(name=theta_row_name(th), values={'Misordered': float(np.mean(v))})
              for th, v in fractions.items()],
        seeds=list(config.seeds),
        bins=config.bins,
        footnotes=[f"Amostra de até {config.theta_sample_listings} listagens do teste por seed; "
                   f"desordenada = Spearman(r, c) < {getattr(Config, 'MISORDER_THRESHOLD', 0.99)}."],
    )
    return write_run(config, 'theta-sweep', table, records, run_dir)


COMMANDS: Dict[str, Callable[[ExperimentConfig], RunResult]] = {
    'bench': run_benchmark,
    'theta-sweep': run_theta_sweep,
    'ablation': run_ablation,
    'rcr': run_rcr_comparison,
}
