import math

import numpy as np
import pytest
from scipy import integrate, stats

from copula_wavelet.copulas import (
    FGM,
    Clayton,
    Frank,
    Gaussian,
    Independence,
    build_model,
    effective_regularity,
    make_rng,
    spearman_rho,
)
from copula_wavelet.errors import UnboundedDensityError
from copula_wavelet.wavelets import get_wavelet

BOUNDED = [Independence(2), FGM(0.75), FGM(-1.0), Frank(5.0), Frank(-3.0), Gaussian(0.0)]
ALL = BOUNDED + [Clayton(2.0), Gaussian(0.5)]
# Significance level for the seeded goodness-of-fit checks.
ALPHA = 0.01
SEED = 2024


def test_independence_density_is_one():
    assert Independence(3).density([0.2, 0.5, 0.9]) == 1.0


def test_fgm_density_at_corner():
    assert FGM(1.0).density([0.0, 0.0]) == 2.0
    assert FGM(1.0).density([0.0, 1.0]) == 0.0


@pytest.mark.parametrize("model", [FGM(0.75), Frank(5.0), Frank(-3.0), Clayton(2.0)], ids=str)
def test_density_is_mixed_derivative_of_cdf(model):
    u, v, h = 0.3, 0.6, 1e-3
    mixed = (
        model.cdf([u + h, v + h]) - model.cdf([u + h, v - h]) - model.cdf([u - h, v + h]) + model.cdf([u - h, v - h])
    ) / (4 * h * h)
    assert mixed == pytest.approx(model.density([u, v]), rel=1e-4)


@pytest.mark.parametrize("model", BOUNDED, ids=str)
def test_bounded_densities_integrate_to_one(model):
    mass, _ = integrate.dblquad(lambda v, u: model.density(np.array([u, v])), 0.0, 1.0, 0.0, 1.0, epsabs=1e-10)
    assert mass == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("model", ALL, ids=str)
def test_cdf_boundary_conditions(model):
    assert model.cdf([0.0, 0.4]) == 0.0
    assert model.cdf([0.3, 0.0]) == 0.0
    assert model.cdf([1.0, 0.4]) == pytest.approx(0.4)
    assert model.cdf([0.3, 1.0]) == pytest.approx(0.3)


@pytest.mark.parametrize("model", ALL, ids=str)
def test_margins_are_uniform(model):
    u = model.sample(10_000, SEED)
    assert u.shape == (10_000, 2)
    assert np.all((u >= 0.0) & (u <= 1.0))
    for m in range(2):
        assert stats.kstest(u[:, m], "uniform").pvalue > ALPHA


def test_independence_margins_pass_ks_band():
    n = 10_000
    u = Independence(2).sample(n, 0)
    for m in range(2):
        assert stats.kstest(u[:, m], "uniform").statistic < 1.63 / math.sqrt(n)


@pytest.mark.parametrize("model", BOUNDED + [Gaussian(0.5)], ids=str)
def test_cell_frequencies_match_rectangle_measure(model):
    n = 100_000
    u = model.sample(n, SEED + 1)
    cells = np.minimum(np.floor(u * 8).astype(int), 7)
    observed = np.bincount(cells[:, 0] * 8 + cells[:, 1], minlength=64)
    edges = np.arange(8) / 8
    lo = np.stack(np.meshgrid(edges, edges, indexing="ij"), axis=-1).reshape(-1, 2)
    expected = model.cell_average(lo, lo + 0.125) * n / 64
    expected *= n / expected.sum()
    assert stats.chisquare(observed, expected).pvalue > ALPHA


def test_fgm_spearman(fgm):
    n = 10_000
    u = fgm.sample(n, 12)
    rho = stats.spearmanr(u[:, 0], u[:, 1])[0]
    assert abs(rho - 0.25) <= 3 / math.sqrt(n - 1)
    assert spearman_rho(fgm) == pytest.approx(0.25, abs=1e-8)


def test_fgm_cell_average_closed_form(fgm):
    assert fgm.cell_average([0.0, 0.0], [0.5, 0.5])[0] == pytest.approx(1.0 + 0.75 / 4)


def test_frank_cell_average_matches_quadrature():
    model = Frank(5.0)
    value, _ = integrate.dblquad(
        lambda v, u: model.density(np.array([u, v])), 0.25, 0.5, 0.5, 0.75, epsabs=1e-13, epsrel=1e-13
    )
    assert model.cell_average([0.25, 0.5], [0.5, 0.75])[0] == pytest.approx(value / 0.0625, abs=1e-8)


@pytest.mark.parametrize(
    "model,expected",
    [(Independence(2), 1.0), (FGM(0.75), 1.75), (Frank(5.0), 5.0 / (1.0 - math.exp(-5.0))), (Gaussian(0.0), 1.0)],
    ids=str,
)
def test_sup_norm(model, expected):
    assert model.sup_norm() == pytest.approx(expected, rel=1e-6)


@pytest.mark.parametrize("model", [Clayton(1.0), Gaussian(0.5)], ids=str)
def test_unbounded_models(model):
    assert not model.bounded_density
    with pytest.raises(UnboundedDensityError):
        model.sup_norm()
    with pytest.raises(UnboundedDensityError):
        model.density([0.0, 0.5])


def test_sampling_is_deterministic(fgm):
    np.testing.assert_array_equal(fgm.sample(50, 9), fgm.sample(50, 9))
    np.testing.assert_array_equal(fgm.sample(50, make_rng(9, 1, 2)), fgm.sample(50, make_rng(9, 1, 2)))
    assert not np.array_equal(fgm.sample(50, make_rng(9, 1, 2)), fgm.sample(50, make_rng(9, 2, 1)))


def test_sample_size_must_be_positive(fgm):
    with pytest.raises(ValueError):
        fgm.sample(0, 1)


@pytest.mark.parametrize(
    "kind,theta,dim",
    [("fgm", 2.0, 2), ("frank", 0.0, 2), ("clayton", -1.0, 2), ("gaussian", 1.0, 2), ("fgm", 0.5, 3), ("fgm", None, 2), ("gumbel", 2.0, 2)],
)
def test_build_model_rejects(kind, theta, dim):
    with pytest.raises(ValueError):
        build_model(kind, theta, dim)


def test_build_model():
    assert build_model("FGM", 0.75) == FGM(0.75)
    assert build_model("independence", dim=3) == Independence(3)
    assert build_model("gaussian", 0.3) == Gaussian(0.3)


def test_effective_regularity():
    assert effective_regularity(FGM(0.5), get_wavelet("haar")) == 1.0
    assert effective_regularity(FGM(0.5), get_wavelet("db3")) == 3.0
    assert effective_regularity(Clayton(1.0), get_wavelet("db2")) == 0.0


@pytest.mark.parametrize("model", BOUNDED, ids=str)
def test_bounded_densities_are_non_negative(model):
    axis = np.linspace(0.0, 1.0, 101)
    grid = np.stack(np.meshgrid(axis, axis, indexing="ij"), axis=-1).reshape(-1, 2)
    assert model.density(grid).min() >= 0.0
