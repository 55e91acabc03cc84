"""Projection kernels of the scale-j approximation space.

``ktilde`` is the univariate kernel Σ_l φ_per(x - l) φ_per(y - l) in kernel
argument scale (period 2^j); ``kernel_tensor_j`` is the tensor product of its
scaled form on the unit cube. Integrals over the real line are taken over one
period, which is where all the mass of a periodized kernel lives.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterator, List, Tuple

import numpy as np

from .errors import QuadratureError
from .wavelets import (
    FatherWavelet,
    InvariantCheck,
    left_limit,
    local_terms,
    sup_abs,
    theta_bound,
)

logger = logging.getLogger(__name__)

QUADRATURE_TOLERANCE = 1e-6
QUADRATURE_MAX_DEPTH = 12
QUADRATURE_MAX_MESH = 2 ** 26
_SLAB_POINTS = 2 ** 20


@dataclass(frozen=True, eq=False)
class ProjectionKernel:
    """The level-j, dimension-d tensor kernel built from a father wavelet."""

    wavelet: FatherWavelet
    level: int
    dim: int = 1

    def __post_init__(self):
        if self.level < 0:
            raise ValueError(f"Kernel level must be non-negative, got {self.level}.")
        if self.dim < 1:
            raise ValueError(f"Kernel dimension must be at least 1, got {self.dim}.")

    @property
    def period(self) -> int:
        return 2 ** self.level

    @cached_property
    def autocorrelation(self) -> np.ndarray:
        """Periodic trapezoid Gram of integer translates, indexed by shift mod period."""
        values = self.wavelet.table.values
        scale = self.wavelet.table.scale
        circ = np.zeros(self.period)
        for delta in range(-(self.wavelet.support_end - 1), self.wavelet.support_end):
            lag = abs(delta) * scale
            circ[delta % self.period] += np.dot(values[lag:], values[: values.size - lag]) / scale
        return circ


def tensor_terms(
    wavelet: FatherWavelet, level: int, points: np.ndarray
) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
    """Yield (flat translate index, Π_m φ_per value) for every active shift combination.

    ``points`` has shape (M, d) in the unit cube. Each point touches at most B^d
    translates; indices repeating modulo the period are yielded separately and
    must be summed by the caller.
    """
    period = 2 ** level
    count, dim = points.shape
    shifts, values = local_terms(wavelet, period * left_limit(points))
    cells = np.mod(shifts, period)
    for combo in itertools.product(range(wavelet.support_end), repeat=dim):
        flat = np.zeros(count, dtype=np.int64)
        weight = np.ones(count)
        for m, s in enumerate(combo):
            flat = flat * period + cells[:, m, s]
            weight = weight * values[:, m, s]
        yield flat, weight


def expand_translates(wavelet: FatherWavelet, level: int, weights: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate Σ_k w_k Π_m φ_per(2^j u_m - k_m) at each row of ``points``, without the 2^{jd/2} factor."""
    flat_weights = weights.reshape(-1)
    total = np.zeros(points.shape[0])
    for flat, weight in tensor_terms(wavelet, level, points):
        total += flat_weights[flat] * weight
    return total


def expand_coefficients(wavelet: FatherWavelet, level: int, alpha: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate Σ_k alpha_k φ_{j,k}(u) at each row of ``points``."""
    return 2.0 ** (level * points.shape[1] / 2.0) * expand_translates(wavelet, level, alpha, points)


def ktilde(pk: ProjectionKernel, x, y):
    """K̃(x, y) in kernel argument scale; x and y broadcast against each other."""
    sx, vx = local_terms(pk.wavelet, x)
    sy, vy = local_terms(pk.wavelet, y)
    match = np.mod(sx, pk.period)[..., :, None] == np.mod(sy, pk.period)[..., None, :]
    result = np.sum(vx[..., :, None] * vy[..., None, :] * match, axis=(-2, -1))
    return float(result) if result.ndim == 0 else result


def kernel_tensor_j(pk: ProjectionKernel, x, y):
    """K_j(x, y) = Π_m 2^j K̃(2^j x_m, 2^j y_m) for points in the unit cube."""
    x = left_limit(np.asarray(x, dtype=float))
    y = left_limit(np.asarray(y, dtype=float))
    factors = pk.period * ktilde(pk, pk.period * x, pk.period * y)
    result = np.prod(factors, axis=-1)
    return float(result) if np.ndim(result) == 0 else result


def kernel_l1(pk: ProjectionKernel, y: float) -> float:
    """∫ K̃(x, y) dx over one period, periodic trapezoid at the table spacing."""
    scale = pk.wavelet.table.scale
    x = np.arange(pk.period * scale) / scale
    return float(np.sum(ktilde(pk, x, y)) / scale)


def kernel_l2(pk: ProjectionKernel, u):
    """∫ K²(x, 2^j u) dx as the product of the univariate ∫ K̃² factors."""
    u = np.asarray(u, dtype=float)
    B = pk.wavelet.support_end
    offsets = np.arange(B)
    gram = pk.autocorrelation[np.mod(offsets[None, :] - offsets[:, None], pk.period)]
    _, values = local_terms(pk.wavelet, pk.period * left_limit(u))
    per_dim = np.einsum("...a,ab,...b->...", values, gram, values)
    result = np.prod(per_dim, axis=-1)
    return float(result) if np.ndim(result) == 0 else result


def basis_matrix(wavelet: FatherWavelet, level: int, nodes: np.ndarray) -> np.ndarray:
    """Rows φ_{j,k}(nodes) for k = 1..2^j."""
    period = 2 ** level
    shifts, values = local_terms(wavelet, period * left_limit(nodes))
    matrix = np.zeros((period, nodes.size))
    columns = np.broadcast_to(np.arange(nodes.size)[:, None], shifts.shape)
    np.add.at(matrix, (np.mod(shifts, period), columns), values)
    return 2.0 ** (level / 2.0) * matrix


def true_coefficients(pk: ProjectionKernel, density: Callable, depth: int) -> np.ndarray:
    """α_{j,k} = ∫ c φ_{j,k} by the midpoint rule with 2^{j+depth} nodes per axis.

    The density is evaluated in slabs along the first axis so the full mesh is
    never held in memory.
    """
    count = 2 ** (pk.level + depth)
    nodes = (np.arange(count) + 0.5) / count
    basis = basis_matrix(pk.wavelet, pk.level, nodes)
    rest = np.meshgrid(*([nodes] * (pk.dim - 1)), indexing="ij")
    rest = np.stack(rest, axis=-1).reshape(-1, pk.dim - 1) if pk.dim > 1 else np.empty((1, 0))
    rows = max(1, _SLAB_POINTS // rest.shape[0])
    coeffs = np.zeros((pk.period,) * pk.dim)
    for start in range(0, count, rows):
        head = nodes[start : start + rows]
        mesh = np.column_stack([np.repeat(head, rest.shape[0]), np.tile(rest, (head.size, 1))])
        values = np.broadcast_to(np.asarray(density(mesh), dtype=float), (mesh.shape[0],))
        slab = values.reshape((head.size,) + (count,) * (pk.dim - 1))
        part = np.tensordot(slab, basis[:, start : start + rows], axes=([0], [1]))
        for _ in range(pk.dim - 1):
            part = np.tensordot(part, basis, axes=([0], [1]))
        coeffs += part
    return coeffs / float(count) ** pk.dim


def project_density(pk: ProjectionKernel, c, u, tolerance: float = QUADRATURE_TOLERANCE):
    """E c̃(u) = ∫ K_j(v, u) c(v) dv at each point of ``u``.

    ``c`` is either a callable on (M, d) arrays or an object with a
    ``density`` method. For Haar, objects that also provide ``cell_average``
    are projected exactly as cell averages.

    Raises:
        QuadratureError: If the quadrature does not settle within its depth
            or mesh limits
    """
    u = np.asarray(u, dtype=float)
    points = np.atleast_2d(u)
    if pk.wavelet.piecewise_constant and hasattr(c, "cell_average"):
        cells = np.floor(pk.period * left_limit(points))
        result = np.asarray(c.cell_average(cells / pk.period, (cells + 1.0) / pk.period), dtype=float)
    else:
        density = c.density if hasattr(c, "density") else c
        result = _project_by_quadrature(pk, density, points, tolerance)
    return float(result[0]) if u.ndim == 1 else result


def _project_by_quadrature(pk: ProjectionKernel, density: Callable, points: np.ndarray, tolerance: float) -> np.ndarray:
    previous = None
    for depth in range(2, QUADRATURE_MAX_DEPTH + 1):
        if (2 ** (pk.level + depth)) ** pk.dim > QUADRATURE_MAX_MESH:
            break
        alpha = true_coefficients(pk, density, depth)
        current = expand_coefficients(pk.wavelet, pk.level, alpha, points)
        if previous is not None:
            change = np.abs(current - previous).max()
            if change <= tolerance * max(1.0, np.abs(current).max()):
                logger.debug("projection settled at depth %d (change %.3g)", depth, change)
                return current
        previous = current
    raise QuadratureError(
        f"Projection at level {pk.level} did not converge to relative {tolerance:g} "
        f"before the quadrature limit; the density may be unbounded or irregular."
    )


def check_kernel(pk: ProjectionKernel, samples: int = 25, seed: int = 0) -> List[InvariantCheck]:
    """Run the kernel invariant suite: normalization, symmetry, bounds and reproduction."""
    rng = np.random.default_rng(seed)
    w = pk.wavelet
    checks = []

    ys = rng.random(samples) * pk.period
    normalization = max(abs(kernel_l1(pk, y) - 1.0) for y in ys)
    checks.append(InvariantCheck.within("kernel l1 - 1", normalization, 1e-6))

    pairs = rng.random((100, 2)) * pk.period
    forward = ktilde(pk, pairs[:, 0], pairs[:, 1])
    backward = ktilde(pk, pairs[:, 1], pairs[:, 0])
    checks.append(InvariantCheck.within("symmetry", np.abs(forward - backward).max(), 1e-12))

    envelope = sup_abs(w) * theta_bound(w)
    peak = float(np.abs(forward).max())
    checks.append(InvariantCheck("|K| within envelope", peak, envelope, peak <= envelope))

    axis = np.arange(1, 10) / 10.0
    grid = np.stack(np.meshgrid(*([axis] * pk.dim), indexing="ij"), axis=-1).reshape(-1, pk.dim)
    ones = project_density(pk, lambda v: np.ones(len(v)), grid)
    checks.append(InvariantCheck.within("constant reproduction", np.abs(ones - 1.0).max(), 1e-9))

    squares = kernel_l2(pk, grid)
    lower, upper = float(squares.min()), float(squares.max())
    checks.append(InvariantCheck("kernel l2 lower bound D1", lower, 0.0, bool(lower > 0.0)))
    checks.append(InvariantCheck("kernel l2 upper bound D2", upper, math.inf, bool(np.isfinite(upper))))

    checks.extend(_polynomial_reproduction(w, pk.level))
    logger.debug("kernel checks for %s j=%d d=%d: %s", w.name, pk.level, pk.dim, checks)
    return checks


def _polynomial_reproduction(w: FatherWavelet, level: int) -> List[InvariantCheck]:
    # Stay clear of translates that wrap around the period.
    level = max(level, math.ceil(math.log2(4 * w.support_end)))
    pk = ProjectionKernel(w, level, 1)
    margin = w.support_end / pk.period
    u = np.linspace(margin, 1.0 - margin, 17)[:, None]
    checks = []
    for degree in range(w.vanishing_moments):
        projected = project_density(pk, lambda v, p=degree: v[:, 0] ** p, u)
        error = np.abs(projected - u[:, 0] ** degree).max()
        checks.append(InvariantCheck.within(f"reproduces u^{degree}", error, 1e-4))
    return checks
