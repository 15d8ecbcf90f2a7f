import math
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from core.config import Config


class GeneratorConfig(BaseModel):
    listings: int = 10_000
    items_min: int = 5
    items_max: int = 15
    item_dim: int = 6
    ctx_dim: int = 4
    field_cardinality: int = 4
    field_name: str = 'field'
    field_offsets: Optional[List[float]] = None      # None -> linspace(-1, 1, |Z|)
    context_weights: Optional[List[float]] = None    # None -> sorteados pelo seed
    item_weights: Optional[List[float]] = None       # None -> sorteados pelo seed
    base_logit: float = 0.0
    noise: float = Config.GENERATOR_NOISE
    require_click: bool = True
    max_attempts: int = Config.GENERATOR_MAX_ATTEMPTS
    seed: int = 0

    @field_validator('listings', 'item_dim', 'ctx_dim', 'field_cardinality', 'items_min', 'max_attempts')
    @classmethod
    def validate_positive(cls, v):
        if v is None or v <= 0:
            raise ValueError('deve ser > 0')
        return v

    @field_validator('noise')
    @classmethod
    def validate_noise(cls, v):
        if v < 0 or not math.isfinite(v):
            raise ValueError('noise deve ser finito e >= 0')
        return v

    @model_validator(mode='after')
    def check_dims(self):
        if self.items_max < self.items_min:
            raise ValueError('items_max < items_min')
        if self.field_offsets is not None:
            if len(self.field_offsets) != self.field_cardinality:
                raise ValueError('field_offsets deve ter um valor por campo')
            if not all(math.isfinite(o) for o in self.field_offsets):
                raise ValueError('field_offsets deve ser finito')
        if self.context_weights is not None and len(self.context_weights) != self.ctx_dim:
            raise ValueError('context_weights deve ter ctx_dim valores')
        if self.item_weights is not None and len(self.item_weights) != self.item_dim:
            raise ValueError('item_weights deve ter item_dim valores')
        return self


class RcrConfig(BaseModel):
    alpha: float

    @field_validator('alpha')
    @classmethod
    def validate_alpha(cls, v):
        if not (0.0 <= v <= 1.0):
            raise ValueError('alpha deve estar em [0, 1]')
        return v


class RankerConfig(BaseModel):
    hidden: List[int] = Field(default_factory=lambda: list(Config.RANKER_HIDDEN))
    epochs: int = Config.RANKER_EPOCHS
    lr: float = Config.RANKER_LR
    loss: Literal['lambda', 'rcr'] = 'lambda'
    alpha: Optional[float] = None
    listings_per_step: int = Config.RANKER_LISTINGS_PER_STEP

    @model_validator(mode='after')
    def check_loss(self):
        if self.loss == 'rcr':
            if self.alpha is None:
                raise ValueError('loss=rcr exige alpha')
            RcrConfig(alpha=self.alpha)
        if self.epochs <= 0 or self.listings_per_step <= 0 or self.lr <= 0:
            raise ValueError('epochs, listings_per_step e lr devem ser > 0')
        return self


class MlplattConfig(BaseModel):
    context_layers: Optional[List[int]] = Field(default_factory=lambda: list(Config.MLPLATT_CONTEXT_LAYERS))
    mono_layers: List[int] = Field(default_factory=lambda: list(Config.MLPLATT_MONO_LAYERS))
    theta: float = Config.MLPLATT_THETA
    epochs: int = Config.MLPLATT_EPOCHS
    batch_size: int = Config.MLPLATT_BATCH_SIZE
    lr: float = Config.MLPLATT_LR
    plateau_tol: float = Config.MLPLATT_PLATEAU_TOL
    fd_step: float = Config.MLPLATT_FD_STEP
    seed: int = 0

    @model_validator(mode='after')
    def check_layers(self):
        if not self.mono_layers or self.mono_layers[-1] != 1:
            raise ValueError('mono_layers deve terminar em 1 (saída sigmoid)')
        if any(n <= 0 for n in self.mono_layers) or any(n <= 0 for n in (self.context_layers or [])):
            raise ValueError('tamanhos de camada devem ser > 0')
        if self.theta < 0:
            raise ValueError('theta deve ser >= 0')
        if self.epochs <= 0 or self.batch_size <= 0 or self.lr <= 0 or self.fd_step <= 0:
            raise ValueError('epochs, batch_size, lr e fd_step devem ser > 0')
        return self


class CalibratorSpec(BaseModel):
    kind: Literal['platt', 'isotonic', 'confcalib', 'mlplatt']
    name: Optional[str] = None
    params: Dict[str, Any] = Field(default_factory=dict)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        return {
            'platt': 'Platt',
            'isotonic': 'Smoothed Isotonic',
            'confcalib': 'ConfCalib',
            'mlplatt': 'MLPlatt',
        }[self.kind]


class DatasetSource(BaseModel):
    kind: Literal['synthetic', 'file', 'aliexpress'] = 'synthetic'
    path: Optional[str] = None
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    column_map: Dict[str, str] = Field(default_factory=dict)
    countries: List[str] = Field(default_factory=lambda: list(Config.ALIEXPRESS_COUNTRIES))

    @model_validator(mode='after')
    def check_path(self):
        if self.kind != 'synthetic' and not (self.path and self.path.strip()):
            raise ValueError(f'dataset kind={self.kind} exige path')
        return self


class ExperimentConfig(BaseModel):
    name: str = 'desk'
    dataset: DatasetSource = Field(default_factory=DatasetSource)
    ranker: RankerConfig = Field(default_factory=RankerConfig)
    calibrators: List[CalibratorSpec] = Field(default_factory=lambda: [
        CalibratorSpec(kind='platt'),
        CalibratorSpec(kind='isotonic'),
        CalibratorSpec(kind='confcalib'),
        CalibratorSpec(kind='mlplatt'),
    ])
    mlplatt: MlplattConfig = Field(default_factory=MlplattConfig)
    theta_grid: List[float] = Field(default_factory=lambda: list(Config.THETA_GRID))
    rcr_alphas: List[float] = Field(default_factory=lambda: list(Config.RCR_ALPHAS))
    bins: int = Config.ECE_BINS
    seeds: List[int] = Field(default_factory=lambda: [0])
    output_dir: str = Config.RUNS_DIR
    test_fraction: float = Config.TEST_FRACTION
    calibration_split: Literal['train', 'holdout'] = 'train'
    calibration_fraction: float = 0.25
    context_source: Literal['raw', 'ranker_embedding'] = 'raw'
    bootstrap_resamples: int = Config.BOOTSTRAP_RESAMPLES
    significance_level: float = Config.SIGNIFICANCE_LEVEL
    theta_sample_listings: int = Config.THETA_SWEEP_LISTINGS

    @field_validator('calibrators')
    @classmethod
    def validate_calibrators(cls, v):
        if not v:
            raise ValueError('é preciso ao menos um calibrador')
        return v

    @field_validator('seeds')
    @classmethod
    def validate_seeds(cls, v):
        if not v:
            raise ValueError('seeds não pode ser vazio')
        return v

    @field_validator('bins')
    @classmethod
    def validate_bins(cls, v):
        if v < 1:
            raise ValueError('bins deve ser >= 1')
        return v

    @model_validator(mode='after')
    def check_fractions(self):
        for name in ('test_fraction', 'calibration_fraction'):
            f = getattr(self, name)
            if not (0.0 < f < 1.0):
                raise ValueError(f'{name} deve estar em (0, 1)')
        for a in self.rcr_alphas:
            RcrConfig(alpha=a)
        if any(t < 0 for t in self.theta_grid):
            raise ValueError('theta_grid deve ser >= 0')
        return self


class MetricsReport(BaseModel):
    name: str
    f_ece: float
    per_field_ece: Dict[str, float]
    field_counts: Dict[str, int]
    log_loss: float
    auc: Optional[float]            # None quando os rótulos têm uma só classe
    ndcg: float
    misordered_fraction: float
    bins: int
    ndcg_excluded: int = 0
    p_values: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode='after')
    def check_values(self):
        values = [self.f_ece, self.log_loss, self.ndcg, self.misordered_fraction] + list(self.per_field_ece.values())
        if self.auc is not None:
            values.append(self.auc)
        if not all(math.isfinite(v) for v in values):
            raise ValueError('métricas devem ser finitas')
        total = sum(self.field_counts.get(z, 0) for z in self.per_field_ece)
        if total > 0:
            weighted = sum(self.field_counts[z] * e for z, e in self.per_field_ece.items()) / total
            if abs(weighted - self.f_ece) > 1e-9:
                raise ValueError('f_ece difere da média ponderada do ECE por campo')
        return self


class CalibrateRequest(BaseModel):
    scores: List[float]
    context: List[float] = Field(default_factory=list)
    field: Optional[str] = None

    @field_validator('scores')
    @classmethod
    def validate_scores(cls, v):
        if not v:
            raise ValueError('scores não pode ser vazio')
        if not all(math.isfinite(s) for s in v):
            raise ValueError('scores devem ser finitos')
        return v

    @field_validator('context')
    @classmethod
    def validate_context(cls, v):
        if not all(math.isfinite(s) for s in v):
            raise ValueError('context deve ser finito')
        return v
