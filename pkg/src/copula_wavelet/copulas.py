"""Copula families with exact samplers and closed-form densities.

These are the ground truth for the experiments: every model can draw i.i.d.
uniform vectors, evaluate its density and distribution function, and report
the sup-norm of its density when that is finite.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import integrate, optimize
from scipy.special import ndtr, ndtri
from scipy.stats import multivariate_normal

from .errors import UnboundedDensityError
from .wavelets import FatherWavelet

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.Generator]


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based Philox generator for the stream (seed, *stream)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=tuple(stream))))


def _as_rng(rng: SeedLike) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else make_rng(int(rng))


def _as_points(u, dim: int) -> np.ndarray:
    return np.asarray(u, dtype=float).reshape(-1, dim)


def _scalar_or_array(u, values: np.ndarray, dim: int):
    u = np.asarray(u)
    return float(values[0]) if u.ndim <= 1 and u.size == dim else values


class CopulaModel(ABC):
    """Interface shared by every copula family."""

    kind: str = ""
    dim: int = 2
    bounded_density: bool = True
    # Besov/Hölder smoothness of the density; inf for analytic densities.
    regularity_t: float = math.inf

    def density(self, u):
        """c(u) for a point of shape (d,) or rows of shape (M, d)."""
        points = _as_points(u, self.dim)
        if not self.bounded_density and np.any((points <= 0.0) | (points >= 1.0)):
            raise UnboundedDensityError(f"{self} has no finite density on the boundary of the cube.")
        return _scalar_or_array(u, self._density(points), self.dim)

    def cdf(self, u):
        """C(u), with the boundary values of a copula imposed exactly."""
        points = np.clip(_as_points(u, self.dim), 0.0, 1.0)
        out = np.zeros(points.shape[0])
        zero = np.any(points == 0.0, axis=1)
        u_one, v_one = points[:, 0] == 1.0, points[:, 1] == 1.0
        out[~zero & v_one] = points[~zero & v_one, 0]
        out[~zero & u_one] = points[~zero & u_one, 1]
        inner = ~zero & ~u_one & ~v_one
        if inner.any():
            out[inner] = self._cdf(points[inner])
        return _scalar_or_array(u, out, self.dim)

    def cell_average(self, lo, hi) -> np.ndarray:
        """Mean of c over each rectangle [lo, hi], from the rectangle measure of C."""
        lo, hi = _as_points(lo, self.dim), _as_points(hi, self.dim)
        measure = (
            self.cdf(hi)
            - self.cdf(np.column_stack([lo[:, 0], hi[:, 1]]))
            - self.cdf(np.column_stack([hi[:, 0], lo[:, 1]]))
            + self.cdf(lo)
        )
        return np.atleast_1d(measure) / np.prod(hi - lo, axis=1)

    def sample(self, n: int, rng: SeedLike) -> np.ndarray:
        """Draw n i.i.d. vectors; ``rng`` is a Generator or an integer seed."""
        if n < 1:
            raise ValueError(f"Sample size must be at least 1, got {n}.")
        return self._sample(n, _as_rng(rng))

    def sup_norm(self) -> float:
        if not self.bounded_density:
            raise UnboundedDensityError(f"{self} has an unbounded density; its sup-norm is infinite.")
        return self._sup_norm()

    @abstractmethod
    def _density(self, points: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _cdf(self, points: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _sample(self, n: int, rng: np.random.Generator) -> np.ndarray: ...

    def _sup_norm(self) -> float:
        return _search_sup(self)


def _search_sup(model: CopulaModel, points: int = 201) -> float:
    """Grid search over the closed square, refined with L-BFGS-B from the best node."""
    axis = np.linspace(0.0, 1.0, points)
    mesh = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    values = model.density(mesh)
    start = mesh[int(np.argmax(values))]
    result = optimize.minimize(
        lambda x: -model.density(x), start, method="L-BFGS-B", bounds=[(0.0, 1.0)] * 2, options={"ftol": 1e-12}
    )
    best = max(float(values.max()), -float(result.fun))
    logger.debug("sup-norm search for %s: grid %.8g, refined %.8g", model, values.max(), -result.fun)
    return best


@dataclass(frozen=True)
class Independence(CopulaModel):
    dim: int = 2
    kind = "independence"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"Dimension must be at least 1, got {self.dim}.")

    def __str__(self):
        return f"Independence(d={self.dim})"

    def _density(self, points):
        return np.ones(points.shape[0])

    def cdf(self, u):
        points = np.clip(_as_points(u, self.dim), 0.0, 1.0)
        return _scalar_or_array(u, np.prod(points, axis=1), self.dim)

    def _cdf(self, points):
        return np.prod(points, axis=1)

    def cell_average(self, lo, hi):
        return np.ones(_as_points(lo, self.dim).shape[0])

    def _sample(self, n, rng):
        return rng.random((n, self.dim))

    def _sup_norm(self):
        return 1.0


@dataclass(frozen=True)
class FGM(CopulaModel):
    """Farlie-Gumbel-Morgenstern: c = 1 + θ(1 - 2u)(1 - 2v), |θ| ≤ 1."""

    theta: float = 0.5
    kind = "fgm"

    def __post_init__(self):
        if not -1.0 <= self.theta <= 1.0:
            raise ValueError(f"FGM requires |theta| <= 1, got {self.theta}.")

    def __str__(self):
        return f"FGM(theta={self.theta:g})"

    def _density(self, points):
        u, v = points[:, 0], points[:, 1]
        return 1.0 + self.theta * (1.0 - 2.0 * u) * (1.0 - 2.0 * v)

    def _cdf(self, points):
        u, v = points[:, 0], points[:, 1]
        return u * v * (1.0 + self.theta * (1.0 - u) * (1.0 - v))

    def cell_average(self, lo, hi):
        # Bilinear density: the average is the value at the center.
        lo, hi = _as_points(lo, 2), _as_points(hi, 2)
        return self._density(0.5 * (lo + hi))

    def _sample(self, n, rng):
        u, w = rng.random(n), rng.random(n)
        a = self.theta * (1.0 - 2.0 * u)
        # Root in [0, 1] of a v^2 - (1 + a) v + w = 0, written without cancellation.
        v = 2.0 * w / ((1.0 + a) + np.sqrt((1.0 + a) ** 2 - 4.0 * a * w))
        return np.column_stack([u, v])

    def _sup_norm(self):
        return 1.0 + abs(self.theta)


@dataclass(frozen=True)
class Frank(CopulaModel):
    theta: float = 5.0
    kind = "frank"

    def __post_init__(self):
        if self.theta == 0.0 or not math.isfinite(self.theta):
            raise ValueError(f"Frank requires a finite theta != 0, got {self.theta}.")

    def __str__(self):
        return f"Frank(theta={self.theta:g})"

    def _density(self, points):
        t = self.theta
        u, v = points[:, 0], points[:, 1]
        d = -math.expm1(-t)
        a, b = -np.expm1(-t * u), -np.expm1(-t * v)
        return t * d * np.exp(-t * (u + v)) / (d - a * b) ** 2

    def _cdf(self, points):
        t = self.theta
        u, v = points[:, 0], points[:, 1]
        return -np.log1p(np.expm1(-t * u) * np.expm1(-t * v) / math.expm1(-t)) / t

    def _sample(self, n, rng):
        t = self.theta
        u, w = rng.random(n), rng.random(n)
        v = -np.log1p(w * math.expm1(-t) / (w + (1.0 - w) * np.exp(-t * u))) / t
        return np.column_stack([u, np.clip(v, 0.0, 1.0)])


@dataclass(frozen=True)
class Clayton(CopulaModel):
    theta: float = 1.0
    kind = "clayton"
    bounded_density = False
    regularity_t = 0.0

    def __post_init__(self):
        if not self.theta > 0.0:
            raise ValueError(f"Clayton requires theta > 0, got {self.theta}.")

    def __str__(self):
        return f"Clayton(theta={self.theta:g})"

    def _density(self, points):
        t = self.theta
        logs = np.log(points)
        inner = np.log(np.exp(-t * logs).sum(axis=1) - 1.0)
        return np.exp(math.log1p(t) - (t + 1.0) * logs.sum(axis=1) - (1.0 / t + 2.0) * inner)

    def _cdf(self, points):
        t = self.theta
        return (np.power(points, -t).sum(axis=1) - 1.0) ** (-1.0 / t)

    def _sample(self, n, rng):
        # Marshall-Olkin: gamma frailty and independent exponentials.
        frailty = rng.gamma(1.0 / self.theta, 1.0, size=n)
        e = rng.exponential(1.0, size=(n, 2))
        return (1.0 + e / frailty[:, None]) ** (-1.0 / self.theta)


@dataclass(frozen=True)
class Gaussian(CopulaModel):
    rho: float = 0.5
    kind = "gaussian"

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"Gaussian copula requires |rho| < 1, got {self.rho}.")

    def __str__(self):
        return f"Gaussian(rho={self.rho:g})"

    @property
    def bounded_density(self) -> bool:
        return self.rho == 0.0

    @property
    def regularity_t(self) -> float:
        return math.inf if self.rho == 0.0 else 0.0

    def _density(self, points):
        r = self.rho
        if r == 0.0:
            return np.ones(points.shape[0])
        x, y = ndtri(points[:, 0]), ndtri(points[:, 1])
        q = (r * r * (x * x + y * y) - 2.0 * r * x * y) / (2.0 * (1.0 - r * r))
        return np.exp(-q) / math.sqrt(1.0 - r * r)

    def _cdf(self, points):
        cov = [[1.0, self.rho], [self.rho, 1.0]]
        values = multivariate_normal.cdf(ndtri(points), mean=[0.0, 0.0], cov=cov, abseps=1e-11, releps=1e-11)
        return np.atleast_1d(values)

    def _sample(self, n, rng):
        z = rng.standard_normal((n, 2))
        y = self.rho * z[:, 0] + math.sqrt(1.0 - self.rho ** 2) * z[:, 1]
        return np.column_stack([ndtr(z[:, 0]), ndtr(y)])

    def _sup_norm(self):
        return 1.0


MODELS = {
    "independence": Independence,
    "fgm": FGM,
    "frank": Frank,
    "clayton": Clayton,
    "gaussian": Gaussian,
}


def build_model(kind: str, theta: Optional[float] = None, dim: int = 2) -> CopulaModel:
    """Instantiate a family by name; ``theta`` is ρ for the Gaussian copula."""
    key = kind.lower()
    if key not in MODELS:
        raise ValueError(f"Unknown copula '{kind}'. Available: {', '.join(MODELS)}.")
    if key == "independence":
        return Independence(dim=dim)
    if dim != 2:
        raise ValueError(f"The {key} copula is only available in dimension 2, got {dim}.")
    if theta is None:
        raise ValueError(f"The {key} copula needs a parameter; pass --theta.")
    return MODELS[key](theta)


def effective_regularity(model: CopulaModel, wavelet: FatherWavelet) -> float:
    """Smoothness usable by the estimator: min(model tag, wavelet vanishing moments)."""
    return float(min(model.regularity_t, wavelet.vanishing_moments))


def spearman_rho(model: CopulaModel) -> float:
    """12 ∫∫ C(u, v) du dv - 3 by adaptive quadrature."""
    value, _ = integrate.dblquad(
        lambda v, u: model.cdf(np.array([u, v])), 0.0, 1.0, 0.0, 1.0, epsabs=1e-10, epsrel=1e-10
    )
    return 12.0 * value - 3.0
