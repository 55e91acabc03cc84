"""Rank-based linear wavelet estimator of a copula density.

The estimator replaces the unknown margins by ranks, averages tensor scaling
functions over the pseudo-observations to get the coefficients α̂_{j,k}, and
expands them back at the evaluation points. The same numbers can be written as
an empirical average of the projection kernel; both forms are provided so they
can be checked against each other.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .config import EstimatorConfig
from .errors import ConfigError, TieError
from .kernels import ProjectionKernel, expand_translates, ktilde, tensor_terms
from .wavelets import FatherWavelet, left_limit

logger = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 101
# Pairs (observation, evaluation point) processed at once by the kernel form.
_KERNEL_CHUNK = 2 ** 16


@dataclass(frozen=True, eq=False)
class Sample:
    """Raw observations, one row per draw."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise ValueError(f"Sample must be an n x d matrix, got shape {data.shape}.")
        if data.shape[0] < 2:
            raise ValueError(f"Sample needs at least 2 observations, got {data.shape[0]}.")
        if np.isnan(data).any():
            raise ValueError("Sample contains NaN values.")
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class PseudoSample:
    """Points of the unit cube: rank pseudo-observations or true copula draws."""

    points: np.ndarray

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if points.shape[0] < 1:
            raise ValueError("Pseudo-sample is empty.")
        if not np.all((points >= 0.0) & (points <= 1.0)):
            raise ValueError("Pseudo-sample entries must lie in [0, 1].")
        object.__setattr__(self, "points", points)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Scaling coefficients α_{j,k} over k in {1..2^j}^d (stored 0-based).

    Held as the raw sums S_k = Σ_i Π_m φ_per(2^j U_im - k_m) and the sample
    size, so that α_k = 2^{jd/2} S_k / n. For Haar S_k are the cell counts.
    """

    wavelet: FatherWavelet
    level: int
    dim: int
    sums: np.ndarray
    n: int

    @property
    def alpha(self) -> np.ndarray:
        return 2.0 ** (self.level * self.dim / 2.0) * self.sums / self.n

    @property
    def mass(self) -> float:
        """Σ_k α_k 2^{-jd/2} = Σ_k S_k / n, the integral of the expansion."""
        return float(self.sums.sum() / self.n)


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    config: EstimatorConfig
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("Density estimate has non-finite values.")
        if not np.all((self.grid > 0.0) & (self.grid < 1.0)):
            raise ValueError("Evaluation grid must be strictly inside the unit cube.")


@dataclass(frozen=True)
class ErrorTerms:
    """Sup-norms of the rank, stochastic and bias parts of the error."""

    sup_r: float
    sup_d: float
    sup_b: float


@dataclass(frozen=True)
class H4Diagnostic:
    n: int
    level: int
    capacity: float  # n / (j 2^{(d+1) j})
    growth: float  # j / ln ln n


def pseudo_observations(s: Sample, scaling: str = "n", ties: str = "break") -> PseudoSample:
    """Rank each column and divide by n (or n + 1).

    Ties are broken by input order. With ``ties="reject"`` any tie raises.

    Raises:
        TieError: If a column has tied values and ties are rejected
        ValueError: If ``scaling`` or ``ties`` is unknown
    """
    if scaling not in ("n", "n+1"):
        raise ValueError(f"Unknown rank scaling '{scaling}'; use 'n' or 'n+1'.")
    if ties not in ("break", "reject"):
        raise ValueError(f"Unknown tie policy '{ties}'; use 'break' or 'reject'.")
    if ties == "reject":
        ordered = np.sort(s.data, axis=0)
        tied = np.nonzero((np.diff(ordered, axis=0) == 0).any(axis=0))[0]
        if tied.size:
            raise TieError(f"Tied observations in column(s) {', '.join(str(c + 1) for c in tied)}.")
    ranks = rankdata(s.data, method="ordinal", axis=0)
    denominator = s.n if scaling == "n" else s.n + 1
    return PseudoSample(ranks / denominator)


def _accumulate(points: np.ndarray, wavelet: FatherWavelet, level: int) -> np.ndarray:
    dim = points.shape[1]
    size = (2 ** level) ** dim
    sums = np.zeros(size)
    for flat, weight in tensor_terms(wavelet, level, points):
        sums += np.bincount(flat, weights=weight, minlength=size)
    return sums.reshape((2 ** level,) * dim)


def scaling_coefficients(ps: PseudoSample, cfg: EstimatorConfig) -> CoefficientField:
    """α̂_{j,k} = (1/n) Σ_i Π_m φ_{j,k_m}(Û_im)."""
    if ps.dim != cfg.dim:
        raise ValueError(f"Sample has {ps.dim} columns but the estimator expects dim={cfg.dim}.")
    wavelet = cfg.father()
    sums = _accumulate(ps.points, wavelet, cfg.level)
    return CoefficientField(wavelet=wavelet, level=cfg.level, dim=cfg.dim, sums=sums, n=ps.n)


def oracle_coefficients(us: PseudoSample, cfg: EstimatorConfig) -> CoefficientField:
    """The same average taken over true copula observations U_i."""
    return scaling_coefficients(us, cfg)


def estimate_linear(cf: CoefficientField, u):
    """ĉ(u) = Σ_k α_k φ_{j,k}(u); a float for one point, an array for rows.

    Evaluated as 2^{jd} Σ_k S_k Π_m φ_per / n, so Haar reproduces the
    histogram count * 2^{jd} / n exactly.
    """
    u = np.asarray(u, dtype=float)
    points = u.reshape(-1, cf.dim)
    raw = expand_translates(cf.wavelet, cf.level, cf.sums, points)
    values = raw * float(2 ** (cf.level * cf.dim)) / cf.n
    return float(values[0]) if u.ndim <= 1 and u.size == points.shape[1] else values


def estimate_kernel_form(ps: PseudoSample, cfg: EstimatorConfig, u):
    """ĉ(u) = (2^{dj} / n) Σ_i Π_m K̃(2^j Û_im, 2^j u_m)."""
    u = np.asarray(u, dtype=float)
    points = u.reshape(-1, cfg.dim)
    pk = ProjectionKernel(cfg.father(), cfg.level, cfg.dim)
    sources = pk.period * left_limit(ps.points)
    scaled = pk.period * left_limit(points)
    step = max(1, _KERNEL_CHUNK // ps.n)
    out = np.empty(points.shape[0])
    for start in range(0, points.shape[0], step):
        block = scaled[start : start + step]
        product = np.ones((ps.n, block.shape[0]))
        for m in range(cfg.dim):
            product *= ktilde(pk, sources[:, None, m], block[None, :, m])
        out[start : start + step] = product.sum(axis=0)
    values = out * 2.0 ** (cfg.dim * cfg.level) / ps.n
    return float(values[0]) if u.ndim <= 1 and u.size == points.shape[1] else values


def resolution_rule(n: int, t: float, d: int) -> int:
    """j_n with 2^{j_n} closest to (n / ln n)^{1/(2t+d)}, at least 1."""
    if n < 3:
        raise ValueError(f"The resolution rule needs n >= 3, got {n}.")
    if t <= 0:
        raise ValueError(f"Regularity t must be positive, got {t}.")
    if d < 1:
        raise ValueError(f"Dimension must be at least 1, got {d}.")
    x = math.log2(n / math.log(n)) / (2.0 * t + d)
    return max(1, math.floor(x + 0.5))


def with_rule_level(cfg: EstimatorConfig, n: int) -> EstimatorConfig:
    """Copy of ``cfg`` whose level comes from the resolution rule at its regularity."""
    level = resolution_rule(n, cfg.regularity, cfg.dim)
    return EstimatorConfig.model_validate({**cfg.model_dump(), "level": level})


def h4_level(n: int, d: int) -> int:
    """Default level sequence j_n = max(1, ceil(log2 n / (d + 2)))."""
    if n < 3:
        raise ValueError(f"The h4 policy needs n >= 3, got {n}.")
    return max(1, math.ceil(math.log2(n) / (d + 2)))


def h4_diagnostics(n_list: Sequence[int], levels: Sequence[int], d: int) -> List[H4Diagnostic]:
    return [
        H4Diagnostic(
            n=n,
            level=j,
            capacity=n / (j * 2.0 ** ((d + 1) * j)) if j > 0 else math.inf,
            growth=j / math.log(math.log(n)),
        )
        for n, j in zip(n_list, levels)
    ]


def validate_h4(diagnostics: Sequence[H4Diagnostic]) -> None:
    """Check that a level sequence can satisfy the growth conditions.

    Levels must be non-decreasing and positive, and both diagnostics must grow
    from the first to the last sample size. Dips between neighbours, which
    integer levels cannot avoid, are only logged.

    Raises:
        ConfigError: If the sequence fails the checks
    """
    if len(diagnostics) < 2:
        return
    levels = [row.level for row in diagnostics]
    if min(levels) < 1:
        raise ConfigError("Levels must be at least 1 for the growth conditions.")
    if any(b < a for a, b in zip(levels, levels[1:])):
        raise ConfigError(f"Levels must be non-decreasing in n, got {levels}.")
    first, last = diagnostics[0], diagnostics[-1]
    if not last.capacity > first.capacity:
        raise ConfigError(
            f"n / (j 2^((d+1) j)) must grow with n; it goes from {first.capacity:.4g} to {last.capacity:.4g}."
        )
    if not last.growth > first.growth:
        raise ConfigError(f"j / ln ln n must grow with n; it goes from {first.growth:.4g} to {last.growth:.4g}.")
    for a, b in zip(diagnostics, diagnostics[1:]):
        if b.capacity <= a.capacity or b.growth <= a.growth:
            logger.warning("level step %d -> %d dips a growth diagnostic between n=%d and n=%d", a.level, b.level, a.n, b.n)


def decompose_error(c_hat, c_tilde, projected, c_true) -> ErrorTerms:
    """Sup-norms of ĉ - c̃, c̃ - E c̃ and E c̃ - c from their values on a common grid."""
    c_hat, c_tilde, projected, c_true = (np.asarray(a, dtype=float) for a in (c_hat, c_tilde, projected, c_true))
    return ErrorTerms(
        sup_r=float(np.abs(c_hat - c_tilde).max()),
        sup_d=float(np.abs(c_tilde - projected).max()),
        sup_b=float(np.abs(projected - c_true).max()),
    )


def _product_grid(axis: np.ndarray, dim: int) -> np.ndarray:
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, dim)


def evaluation_grid(wavelet: FatherWavelet, level: int, dim: int, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Haar: the 2^{jd} cell centers. Otherwise G^d points i/(G+1), i = 1..G."""
    if wavelet.piecewise_constant:
        axis = (np.arange(2 ** level) + 0.5) / 2 ** level
    else:
        axis = np.arange(1, points + 1) / (points + 1)
    return _product_grid(axis, dim)


def sup_grid(wavelet: FatherWavelet, level: int, dim: int, points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """Grid for sup-norms; Haar uses i/2^{j+1} so every center and inner corner is hit."""
    if wavelet.piecewise_constant:
        axis = np.arange(1, 2 ** (level + 1)) / 2 ** (level + 1)
        return _product_grid(axis, dim)
    return evaluation_grid(wavelet, level, dim, points)


def histogram_density(points: np.ndarray, level: int) -> np.ndarray:
    """Dyadic histogram 2^{jd} count / n, by direct bin counting."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n, dim = points.shape
    period = 2 ** level
    bins = np.minimum(np.floor(points * period).astype(np.int64), period - 1)
    flat = np.ravel_multi_index(tuple(bins.T), (period,) * dim)
    counts = np.bincount(flat, minlength=period ** dim).astype(float)
    return (counts * float(2 ** (level * dim)) / n).reshape((period,) * dim)


def estimate_density(ps: PseudoSample, cfg: EstimatorConfig, grid: Optional[np.ndarray] = None) -> DensityEstimate:
    """Fit the coefficients and evaluate ĉ on ``grid`` (default: evaluation_grid)."""
    cf = scaling_coefficients(ps, cfg)
    if grid is None:
        grid = evaluation_grid(cf.wavelet, cfg.level, cfg.dim)
    grid = np.asarray(grid, dtype=float).reshape(-1, cfg.dim)
    estimate = DensityEstimate(config=cfg, grid=grid, values=estimate_linear(cf, grid))
    logger.debug("estimated %s j=%d on %d points from n=%d", cfg.wavelet, cfg.level, grid.shape[0], ps.n)
    return truncate_and_normalize(estimate) if cfg.truncate else estimate


def truncate_and_normalize(estimate: DensityEstimate) -> DensityEstimate:
    """Clip negative values and rescale so the grid average (the mass) is 1."""
    clipped = np.maximum(estimate.values, 0.0)
    mass = clipped.mean()
    if mass <= 0.0:
        raise ValueError("Estimate is non-positive everywhere on the grid; cannot normalize.")
    return DensityEstimate(config=estimate.config, grid=estimate.grid, values=clipped / mass)
