"""Compactly supported father wavelets tabulated on dyadic grids.

A father wavelet is stored as its refinement filter plus a table of exact
values at the dyadic points ``m / 2**L`` of its support ``[0, B]``. The table is
built by the cascade: values at the integers come from the eigenvector of the
refinement matrix, then each refinement pass fills the next dyadic level from
the two-scale relation. Between nodes the function is read by linear
interpolation (Daubechies) or as a right-open step (Haar).

Translates on ``[0, 1]`` are periodized with period ``2**j``; the external
translate index ``k`` runs over ``1..2**j`` and addresses the integer shift
``k - 1``.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, List, Tuple

import numpy as np
import pywt
from scipy.integrate import trapezoid

from .errors import InvalidFilterError

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
DEFAULT_CASCADE_LEVEL = 12
WAVELET_IDS = ("haar", "db2", "db3", "db4")
DAUBECHIES_ORDERS = (2, 3, 4)

# u = 1 is read as a left limit so that it lands in the last dyadic cell.
_BELOW_ONE = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True, eq=False)
class DyadicTable:
    """Values of a scaling function at spacing ``2**-level`` on ``[0, B]``."""

    level: int
    values: np.ndarray

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def scale(self) -> int:
        return 2 ** self.level

    @property
    def spacing(self) -> float:
        return 1.0 / self.scale

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(len(self.values)) * self.spacing


@dataclass(frozen=True, eq=False)
class FatherWavelet:
    """A compactly supported scaling function φ with support ``[0, support_end]``."""

    name: str
    filter: np.ndarray
    support_end: int
    vanishing_moments: int
    table: DyadicTable
    piecewise_constant: bool = False

    def __post_init__(self):
        self.filter.setflags(write=False)

    def eval(self, x):
        """Evaluate φ at ``x`` (scalar or array); zero outside the support."""
        x = np.asarray(x, dtype=float)
        values = self.table.values
        pos = x * self.table.scale
        idx = np.clip(np.floor(pos), 0, len(values) - 2).astype(np.int64)
        if self.piecewise_constant:
            inside = (x >= 0.0) & (x < self.support_end)
            out = values[idx]
        else:
            inside = (x >= 0.0) & (x <= self.support_end)
            frac = pos - idx
            out = values[idx] * (1.0 - frac) + values[idx + 1] * frac
        result = np.where(inside, out, 0.0)
        return float(result) if result.ndim == 0 else result

    __call__ = eval


def cascade_refine(filter: Iterable[float], L: int = DEFAULT_CASCADE_LEVEL) -> DyadicTable:
    """Tabulate the scaling function of a refinement filter at spacing ``2**-L``.

    Args:
        filter: Refinement coefficients h_0..h_B, normalized to sum to sqrt(2)
        L: Number of dyadic refinement passes after the integer values

    Returns:
        A DyadicTable of length ``B * 2**L + 1``

    Raises:
        ValueError: If ``L`` is below 1
        InvalidFilterError: If the filter is not normalized or its refinement
            matrix has no eigenvector at eigenvalue 1
    """
    h = np.asarray(list(filter), dtype=float)
    if L < 1:
        raise ValueError(f"Cascade level must be at least 1, got {L}.")
    if h.size < 2 or abs(h.sum() - SQRT2) > 1e-12:
        raise InvalidFilterError(
            f"Refinement filter must have at least two taps summing to sqrt(2); got sum {h.sum():.6g}."
        )
    B = h.size - 1

    # Integer values on 0..B-1; phi(B) = 0 under the right-open convention.
    rows = np.arange(B)[:, None]
    cols = np.arange(B)[None, :]
    taps = 2 * rows - cols
    matrix = np.where((taps >= 0) & (taps <= B), SQRT2 * h[np.clip(taps, 0, B)], 0.0)
    eigvals, eigvecs = np.linalg.eig(matrix)
    pick = int(np.argmin(np.abs(eigvals - 1.0)))
    if abs(eigvals[pick] - 1.0) > 1e-8:
        raise InvalidFilterError("Refinement matrix has no eigenvector at eigenvalue 1.")
    at_integers = np.real(eigvecs[:, pick])
    total = at_integers.sum()
    if abs(total) < 1e-12:
        raise InvalidFilterError("Refinement eigenvector cannot be normalized to sum 1.")
    at_integers = at_integers / total

    scale = 2 ** L
    last = B * scale
    values = np.zeros(last + 1)
    values[0:last:scale] = at_integers
    for level in range(1, L + 1):
        step = 2 ** (L - level)
        targets = np.arange(step, last, 2 * step)
        acc = np.zeros(targets.size)
        for k, hk in enumerate(h):
            src = 2 * targets - k * scale
            ok = (src >= 0) & (src <= last)
            acc[ok] += SQRT2 * hk * values[src[ok]]
        values[targets] = acc
    return DyadicTable(level=L, values=values)


def haar_father(L: int = DEFAULT_CASCADE_LEVEL) -> FatherWavelet:
    """The Haar scaling function, the indicator of [0, 1)."""
    h = np.array([1.0 / SQRT2, 1.0 / SQRT2])
    return FatherWavelet(
        name="haar",
        filter=h,
        support_end=1,
        vanishing_moments=1,
        table=cascade_refine(h, L),
        piecewise_constant=True,
    )


def daubechies_father(order: int, L: int = DEFAULT_CASCADE_LEVEL) -> FatherWavelet:
    """Extremal-phase Daubechies scaling function with ``order`` vanishing moments."""
    if order not in DAUBECHIES_ORDERS:
        raise ValueError(
            f"Unsupported Daubechies order {order}; choose one of {DAUBECHIES_ORDERS}."
        )
    h = np.array(pywt.Wavelet(f"db{order}").rec_lo, dtype=float)
    return FatherWavelet(
        name=f"db{order}",
        filter=h,
        support_end=2 * order - 1,
        vanishing_moments=order,
        table=cascade_refine(h, L),
    )


@lru_cache(maxsize=None)
def get_wavelet(name: str, L: int = DEFAULT_CASCADE_LEVEL) -> FatherWavelet:
    """Look up a wavelet by id ('haar', 'db2', 'db3', 'db4')."""
    key = name.lower()
    if key == "haar":
        return haar_father(L)
    if key.startswith("db") and key[2:].isdigit():
        return daubechies_father(int(key[2:]), L)
    raise ValueError(f"Unknown wavelet '{name}'. Available: {', '.join(WAVELET_IDS)}.")


def left_limit(u):
    """Replace u = 1 by the largest double below 1."""
    u = np.asarray(u, dtype=float)
    return np.where(u == 1.0, _BELOW_ONE, u)


def periodize(w: FatherWavelet, t, period: int):
    """Sum of φ(t + m * period) over all integers m."""
    r = np.mod(np.asarray(t, dtype=float), period)
    total = np.zeros_like(r)
    for m in range(w.support_end // period + 1):
        total = total + w.eval(r + m * period)
    return total


def local_terms(w: FatherWavelet, t) -> Tuple[np.ndarray, np.ndarray]:
    """Integer shifts l with t - l in the support, and the values φ(t - l).

    Returns two arrays with a trailing axis of length B. Shifts are raw
    integers; callers reduce them modulo the period. Shifts that coincide
    modulo the period must be summed, which reproduces the periodization.
    """
    t = np.asarray(t, dtype=float)
    base = np.floor(t)
    frac = t - base
    offsets = np.arange(w.support_end)
    values = w.eval(frac[..., None] + offsets)
    shifts = base.astype(np.int64)[..., None] - offsets
    return shifts, values


def phi_jk(w: FatherWavelet, j: int, k: int, u):
    """Periodized φ_{j,k}(u) = 2^{j/2} φ_per(2^j u - (k - 1)), k in 1..2^j."""
    period = 2 ** j
    if not 1 <= k <= period:
        raise ValueError(f"Translate k={k} is outside 1..{period} for level {j}.")
    t = period * left_limit(u) - (k - 1)
    result = 2.0 ** (j / 2.0) * periodize(w, t, period)
    return float(result) if np.ndim(result) == 0 else result


def theta_phi(w: FatherWavelet, x):
    """θ_φ(x) = Σ_k |φ(x - k)| over the integer shifts meeting the support."""
    x = np.asarray(x, dtype=float)
    frac = x - np.floor(x)
    offsets = np.arange(w.support_end + 1)
    result = np.abs(w.eval(frac[..., None] + offsets)).sum(axis=-1)
    return float(result) if result.ndim == 0 else result


def partition_of_unity(w: FatherWavelet, x):
    """Σ_k φ(x - k); identically 1 for a valid scaling function."""
    x = np.asarray(x, dtype=float)
    frac = x - np.floor(x)
    offsets = np.arange(w.support_end + 1)
    result = w.eval(frac[..., None] + offsets).sum(axis=-1)
    return float(result) if result.ndim == 0 else result


def theta_bound(w: FatherWavelet) -> float:
    """Maximum of θ_φ over the table nodes."""
    scale = w.table.scale
    body = np.abs(w.table.values[: w.support_end * scale])
    return float(body.reshape(w.support_end, scale).sum(axis=0).max())


def sup_abs(w: FatherWavelet) -> float:
    return float(np.abs(w.table.values).max())


def integral(w: FatherWavelet) -> float:
    """∫φ by the rule that is exact on the table representation."""
    values = w.table.values
    if w.piecewise_constant:
        return float(values[:-1].sum() * w.table.spacing)
    return float(trapezoid(values, dx=w.table.spacing))


def two_scale_residual(w: FatherWavelet) -> float:
    """max |φ(x) - √2 Σ_k h_k φ(2x - k)| over the tabulated x."""
    x = w.table.nodes
    rhs = np.zeros_like(x)
    for k, hk in enumerate(w.filter):
        rhs += SQRT2 * hk * w.eval(2.0 * x - k)
    return float(np.abs(w.table.values - rhs).max())


def gram_matrix(w: FatherWavelet, j: int) -> np.ndarray:
    """Gram matrix ∫_0^1 φ_{j,k} φ_{j,k'} du by periodic trapezoid at spacing 2^{-(L+j)}."""
    period = 2 ** j
    scale = w.table.scale
    t = np.arange(period * scale) / scale
    basis = np.stack([periodize(w, t - l, period) for l in range(period)])
    # 2^j * 2^{-(L+j)} folds into a single 2^{-L}.
    return basis @ basis.T / scale


@dataclass(frozen=True)
class InvariantCheck:
    """Outcome of one numerical invariant."""

    name: str
    value: float
    tolerance: float
    passed: bool

    @classmethod
    def within(cls, name: str, value: float, tolerance: float) -> "InvariantCheck":
        return cls(name=name, value=float(value), tolerance=tolerance, passed=bool(abs(value) <= tolerance))


def check_basis(w: FatherWavelet, levels: Iterable[int] = (2, 3)) -> List[InvariantCheck]:
    """Run the basis invariant suite for one wavelet."""
    exact = w.piecewise_constant
    checks = [
        InvariantCheck.within("filter sum - sqrt(2)", w.filter.sum() - SQRT2, 1e-12),
        InvariantCheck.within("two-scale residual", two_scale_residual(w), 0.0 if exact else 1e-8),
        InvariantCheck.within("integral - 1", integral(w) - 1.0, 1e-6),
    ]
    outside = np.concatenate([np.linspace(-3.0, -1e-9, 50), np.linspace(w.support_end + 1e-9, w.support_end + 3.0, 50)])
    checks.append(InvariantCheck.within("max |phi| outside support", np.abs(w.eval(outside)).max(), 0.0))

    grid = np.linspace(0.0, 1.0, 10_001)
    unity = np.abs(partition_of_unity(w, grid) - 1.0).max()
    checks.append(InvariantCheck.within("partition of unity", unity, 0.0 if exact else 1e-6))

    for j in levels:
        gram = gram_matrix(w, j)
        deviation = np.abs(gram - np.eye(gram.shape[0])).max()
        checks.append(InvariantCheck.within(f"gram j={j} - identity", deviation, 0.0 if exact else 5e-4))

    # Dyadic grids of roughly 10^4 and 2*10^4 points containing every table node.
    coarse = theta_phi(w, np.linspace(0.0, 1.0, 2 ** 13 + 1)).max()
    fine = theta_phi(w, np.linspace(0.0, 1.0, 2 ** 14 + 1)).max()
    checks.append(InvariantCheck.within("theta_phi grid stability", abs(fine - coarse) / coarse, 1e-3))
    logger.debug("basis checks for %s: %s", w.name, checks)
    return checks
