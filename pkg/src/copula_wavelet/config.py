"""Configuration models for copula-wavelet."""

import sys
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .wavelets import DEFAULT_CASCADE_LEVEL, WAVELET_IDS, FatherWavelet, get_wavelet

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# 2^{jd} coefficients must fit in memory.
MAX_LEVEL_DIM = 26


def _check_wavelet(name: str) -> str:
    key = name.lower()
    if key not in WAVELET_IDS:
        raise ValueError(f"Unknown wavelet '{name}'. Available: {', '.join(WAVELET_IDS)}.")
    return key


class EstimatorConfig(BaseModel):
    """Settings of one linear wavelet estimator."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    wavelet: str = "haar"
    level: int = Field(ge=0)
    dim: int = Field(1, ge=1)
    rank_scaling: Literal["n", "n+1"] = "n"
    ties: Literal["break", "reject"] = "break"
    regularity: float = Field(1.0, gt=0)
    cascade_level: int = Field(DEFAULT_CASCADE_LEVEL, ge=1, le=16)
    truncate: bool = False

    @field_validator("wavelet")
    @classmethod
    def _known_wavelet(cls, v: str) -> str:
        return _check_wavelet(v)

    @model_validator(mode="after")
    def _memory_guard(self) -> "EstimatorConfig":
        if self.level * self.dim > MAX_LEVEL_DIM:
            raise ValueError(
                f"Level {self.level} in dimension {self.dim} needs 2^{self.level * self.dim} "
                f"coefficients; the limit is 2^{MAX_LEVEL_DIM}. Choose a smaller --level."
            )
        return self

    def father(self) -> FatherWavelet:
        return get_wavelet(self.wavelet, self.cascade_level)


class ModelSpec(BaseModel):
    """Which copula family generates the data."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["independence", "fgm", "frank", "clayton", "gaussian"] = "independence"
    theta: Optional[float] = None


class LevelPolicy(BaseModel):
    """How the resolution level j_n is chosen for each sample size."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["rule", "explicit", "h4"] = "h4"
    levels: List[int] = Field(default_factory=list)
    # Regularity for the rule; defaults to the model/wavelet effective value.
    t: Optional[float] = Field(None, gt=0)

    @field_validator("levels")
    @classmethod
    def _non_negative(cls, v: List[int]) -> List[int]:
        if any(j < 0 for j in v):
            raise ValueError("Explicit levels must be non-negative.")
        return v


class GridSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    # G points per axis on [1/(G+1), G/(G+1)]; Haar switches to dyadic points.
    points: int = Field(101, ge=2, le=1001)


class OutputSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dir: Path = Path("results")
    curves: bool = True


class Criteria(BaseModel):
    """Acceptance bands evaluated into summary.json."""

    model_config = ConfigDict(extra="forbid")

    prop1_band: Tuple[float, float] = (0.6, 1.5)
    trend_violations: int = Field(1, ge=0)
    slope_tolerance: float = Field(0.12, gt=0)
    ratio_max: float = Field(0.5, gt=0)
    bias_slope_tolerance: float = Field(0.2, gt=0)


class ExperimentConfig(BaseModel):
    """A Monte Carlo experiment, usually loaded from TOML."""

    model_config = ConfigDict(extra="forbid")

    model: ModelSpec = Field(default_factory=ModelSpec)
    wavelet: str = "haar"
    dim: int = Field(2, ge=1, le=3)
    n_list: List[int] = Field(default_factory=list)
    replications: int = Field(50, ge=1)
    seed: int = Field(0, ge=0)
    levels: LevelPolicy = Field(default_factory=LevelPolicy)
    grid: GridSpec = Field(default_factory=GridSpec)
    output: OutputSpec = Field(default_factory=OutputSpec)
    criteria: Criteria = Field(default_factory=Criteria)
    cascade_level: int = Field(DEFAULT_CASCADE_LEVEL, ge=1, le=16)
    workers: int = Field(1, ge=1)
    force: bool = False

    @field_validator("wavelet")
    @classmethod
    def _known_wavelet(cls, v: str) -> str:
        return _check_wavelet(v)

    @field_validator("n_list")
    @classmethod
    def _increasing(cls, v: List[int]) -> List[int]:
        if any(n < 3 for n in v):
            raise ValueError("Every sample size in n_list must be at least 3.")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"n_list must be strictly increasing, got {v}.")
        return v

    @model_validator(mode="after")
    def _consistent(self) -> "ExperimentConfig":
        if self.model.kind != "independence" and self.dim != 2:
            raise ValueError(f"The {self.model.kind} copula is bivariate; set dim = 2.")
        if self.levels.kind == "explicit":
            if not self.levels.levels:
                raise ValueError("An explicit level policy needs a non-empty 'levels' list.")
            if self.n_list and len(self.levels.levels) != len(self.n_list):
                raise ValueError(
                    f"Explicit levels ({len(self.levels.levels)}) must match n_list ({len(self.n_list)})."
                )
            if max(self.levels.levels) * self.dim > MAX_LEVEL_DIM:
                raise ValueError(f"Explicit levels exceed the 2^{MAX_LEVEL_DIM} coefficient limit.")
        return self

    def father(self) -> FatherWavelet:
        return get_wavelet(self.wavelet, self.cascade_level)


def load_experiment_config(path: Path) -> ExperimentConfig:
    """Load and validate an experiment TOML file.

    Raises:
        ConfigError: If the file cannot be read, parsed or validated
    """
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"Could not read config {path}: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Config {path} is not valid TOML: {e}") from e
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}:\n{e}") from e
