"""
Experiment configuration read from TOML (or from a resolved JSON echo).

Every section is optional; an empty file yields the documented defaults.
"""
import json
import logging
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from retina.model import REFERENCE_MEAN, AbsorptionScale, GridConfig, LayerStack, Material, ParameterDomain

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

# Set up global logger for experiment configuration
logger = logging.getLogger(__name__)

RESOLVED_CONFIG_NAME = 'resolved_config.json'


class ConfigError(ValueError):
    """Unreadable or invalid experiment configuration"""


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')


class ExcitationSettings(_Section):
    """Laser power signal used by simulate, synth-data, estimate and cohort"""
    kind: Literal['constant', 'piecewise'] = 'constant'
    power: float = Field(0.03, ge=0, description='constant power in W')
    steps: int = Field(720, ge=2)
    levels: List[float] = Field(default_factory=list)
    durations: List[int] = Field(default_factory=list)

    @model_validator(mode='after')
    def _piecewise_shape(self):
        if self.kind == 'piecewise':
            if not self.levels or len(self.levels) != len(self.durations):
                raise ValueError('piecewise excitation needs levels and durations of equal, non-zero length')
            if sum(self.durations) < 2:
                raise ValueError('piecewise excitation must span at least 2 samples')
        return self


class EstimationSettings(_Section):
    mode: Literal['two-param', 'rpe-only'] = 'two-param'
    alpha_true: AbsorptionScale = REFERENCE_MEAN
    alpha0: AbsorptionScale = AbsorptionScale(rpe=1.0, ch=1.0)
    alpha_ch_fixed: Optional[float] = Field(None, ge=0)
    noise_std: float = Field(0.01, ge=0, description='measurement noise in K')
    seed: int = 0
    p_level: float = Field(0.95, gt=0, lt=1)
    max_iter: int = Field(100, ge=1)
    cohort_size: int = Field(20, ge=2)
    horizons: List[int] = Field(default_factory=list)


class SensitivitySettings(_Section):
    power: float = Field(0.03, ge=0)
    perturbation_steps: int = Field(3000, ge=1)


class MorSettings(_Section):
    method: Literal['deim_gb', 'taylor'] = 'deim_gb'
    study: Literal['rpe-only', 'two-param'] = 'rpe-only'
    d: int = Field(6, ge=1)
    k: int = Field(3, ge=1, description='DEIM dimension or Taylor order')
    alpha_ch: float = Field(REFERENCE_MEAN.ch, ge=0, description='held choroid value in the rpe-only study')
    n_snapshots: int = Field(20, ge=1)
    dims: List[int] = Field(default_factory=lambda: [5, 6, 7, 8])
    deim_orders: List[int] = Field(default_factory=lambda: [3])
    taylor_orders: List[int] = Field(default_factory=lambda: [3])
    studies: List[Literal['rpe-only', 'two-param']] = Field(default_factory=lambda: ['rpe-only', 'two-param'])
    scan_n: int = Field(5, ge=2)
    scan_horizon: int = Field(1000, ge=2)
    irka_max_iter: int = Field(50, ge=1)
    irka_tol: float = Field(1e-4, gt=0)


class MpcSettings(_Section):
    horizon: int = Field(20, ge=2)
    y_ref: float = 30.0
    y_max: float = 32.0
    u_max: float = Field(0.1, ge=0)
    rho: float = Field(5e4, gt=0)
    u_ref: Optional[float] = None
    horizons: List[int] = Field(default_factory=lambda: [2, 5, 10, 15, 20])
    steps: int = Field(20, ge=1)
    plant: Literal['reduced', 'full'] = 'reduced'
    warm_start: bool = True
    seed_first: bool = True
    compare_cold: bool = False

    @field_validator('horizons')
    @classmethod
    def _valid_horizons(cls, value):
        if any(h < 2 for h in value):
            raise ValueError('every prediction horizon must be at least 2')
        return value


class ExperimentConfig(_Section):
    material: Material = Material()
    layers: LayerStack = LayerStack()
    grid: GridConfig = GridConfig()
    alpha_domain: ParameterDomain = ParameterDomain()
    excitation: ExcitationSettings = ExcitationSettings()
    estimation: EstimationSettings = EstimationSettings()
    sensitivity: SensitivitySettings = SensitivitySettings()
    mor: MorSettings = MorSettings()
    mpc: MpcSettings = MpcSettings()
    output_dir: str = 'out'

    @model_validator(mode='after')
    def _material_in_one_place(self):
        if self.layers.material != Material() and self.layers.material != self.material:
            raise ValueError('set material properties in the [material] section, not under [layers]')
        return self

    @property
    def layer_stack(self) -> LayerStack:
        """Layers carrying the [material] section"""
        return self.layers.model_copy(update={'material': self.material})


def _validation_message(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        location = '.'.join(str(part) for part in item['loc']) or '<root>'
        lines.append(f"{location}: {item['msg']}")
    return '; '.join(lines)


def parse_config(path) -> ExperimentConfig:
    """
    Strictly parse a TOML file (or a JSON resolved-config echo).

    Raises:
        ConfigError: missing file, syntax error (with line) or invalid field (with path)
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file not found: {path}")
    text = path.read_text()
    try:
        raw = json.loads(text) if path.suffix == '.json' else tomllib.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: JSON syntax error at line {e.lineno}, column {e.colno}: {e.msg}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: TOML syntax error: {e}") from e
    try:
        config = ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"{path}: {_validation_message(e)}") from e
    logger.info(f"Loaded configuration from {path}")
    return config


def dump_config(config: ExperimentConfig, directory) -> Path:
    """Write the fully resolved configuration next to the outputs"""
    target = Path(directory) / RESOLVED_CONFIG_NAME
    target.write_text(json.dumps(config.model_dump(mode='json'), indent=2, sort_keys=True) + '\n')
    return target
