"""Seeded Monte Carlo experiments on the linear wavelet estimator.

Each experiment draws R replications per sample size from a copula model,
evaluates the estimator on a fixed grid and summarizes sup-norm statistics by
their median and quartiles. Replication (n_index, rep_index) always uses the
RNG stream (seed, n_index, rep_index), and results are gathered in key order,
so reports do not depend on the number of workers.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.stats import linregress

from .config import EstimatorConfig, ExperimentConfig
from .copulas import CopulaModel, build_model, effective_regularity, make_rng
from .errors import ConfigError
from .estimator import (
    PseudoSample,
    Sample,
    decompose_error,
    estimate_linear,
    h4_diagnostics,
    h4_level,
    oracle_coefficients,
    pseudo_observations,
    resolution_rule,
    scaling_coefficients,
    sup_grid,
    validate_h4,
)
from .kernels import ProjectionKernel, kernel_l2, project_density
from .wavelets import FatherWavelet

logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = ("prop1", "rate", "decompose", "bias")


class ReportRow(BaseModel):
    n: Optional[int] = None
    level: int
    statistic: str
    median: float
    q25: float
    q75: float


class H4Row(BaseModel):
    n: int
    level: int
    capacity: float
    growth: float


class CurveRow(BaseModel):
    n: Optional[int] = None
    level: int
    name: str
    value: float


class CriterionResult(BaseModel):
    name: str
    passed: bool
    value: Optional[float] = None
    expected: str = ""


class ExperimentSummary(BaseModel):
    kind: str
    model: str
    wavelet: str
    dim: int
    seed: int
    replications: int
    n_list: List[int]
    levels: List[int]
    regularity: Optional[float] = None
    target: Optional[float] = None
    slope: Optional[float] = None
    slope_stderr: Optional[float] = None
    expected_slope: Optional[float] = None
    theory_slope: Optional[float] = None
    criteria: List[CriterionResult] = Field(default_factory=list)
    h4: List[H4Row] = Field(default_factory=list)
    config: ExperimentConfig

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)


class ExperimentReport(BaseModel):
    summary: ExperimentSummary
    rows: List[ReportRow] = Field(default_factory=list)
    curves: List[CurveRow] = Field(default_factory=list)
    # Kept off the files so that they are reproducible byte for byte.
    wall_time: float = Field(0.0, exclude=True)


@dataclass(frozen=True)
class ReplicationTask:
    n_index: int
    rep_index: int
    n: int
    level: int


@dataclass(frozen=True, eq=False)
class LevelContext:
    """Everything a replication at one sample size reads but does not change."""

    config: ExperimentConfig
    n: int
    level: int
    grid: np.ndarray
    projected: np.ndarray
    truth: np.ndarray
    l2_root: np.ndarray
    rate: float
    ranks: bool


@dataclass(frozen=True)
class ReplicationResult:
    n_index: int
    rep_index: int
    statistic: float
    sup_r: float
    sup_d: float
    sup_b: float
    sup_error: float


def rate_constant(n: int, j: int, d: int) -> float:
    """r_n = sqrt(n / ((2 d ln 2) j 2^{dj}))."""
    if n < 1 or j < 1 or d < 1:
        raise ValueError(f"rate_constant needs n, j, d >= 1, got n={n}, j={j}, d={d}.")
    return math.sqrt(n / (2.0 * d * math.log(2.0) * j * 2.0 ** (d * j)))


def fit_slope(points: Sequence[Tuple[float, float]]) -> Tuple[float, float]:
    """Ordinary least squares slope of y on x, with its standard error."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise ValueError("fit_slope needs at least two (x, y) points.")
    if not np.all(np.isfinite(pts)):
        raise ValueError("fit_slope received non-finite values.")
    if np.ptp(pts[:, 1]) == 0.0:
        return 0.0, 0.0
    fit = linregress(pts[:, 0], pts[:, 1])
    return float(fit.slope), float(fit.stderr)


def _model(cfg: ExperimentConfig) -> CopulaModel:
    return build_model(cfg.model.kind, cfg.model.theta, cfg.dim)


def _require_bounded(model: CopulaModel, cfg: ExperimentConfig) -> None:
    if model.bounded_density:
        return
    if not cfg.force:
        raise ConfigError(f"{model} has an unbounded density; the sup-norm theory does not apply. Use --force to run anyway.")
    logger.warning("running with unbounded %s because force is set", model)


def _regularity(cfg: ExperimentConfig, model: CopulaModel, wavelet: FatherWavelet) -> float:
    return cfg.levels.t if cfg.levels.t is not None else effective_regularity(model, wavelet)


def resolve_levels(cfg: ExperimentConfig, model: CopulaModel, wavelet: FatherWavelet) -> List[int]:
    """Resolution level for every n in the config, following its level policy."""
    policy = cfg.levels
    if policy.kind == "explicit":
        return list(policy.levels)
    if policy.kind == "h4":
        return [h4_level(n, cfg.dim) for n in cfg.n_list]
    t = _regularity(cfg, model, wavelet)
    if not t > 0.0:
        raise ConfigError(f"{model} has no positive regularity; set levels.t for the rule policy.")
    return [resolution_rule(n, t, cfg.dim) for n in cfg.n_list]


def _level_context(cfg: ExperimentConfig, model: CopulaModel, wavelet: FatherWavelet, n: int, level: int, ranks: bool) -> LevelContext:
    grid = sup_grid(wavelet, level, cfg.dim, cfg.grid.points)
    pk = ProjectionKernel(wavelet, level, cfg.dim)
    return LevelContext(
        config=cfg,
        n=n,
        level=level,
        grid=grid,
        projected=project_density(pk, model, grid),
        truth=model.density(grid),
        l2_root=np.sqrt(kernel_l2(pk, grid)),
        rate=rate_constant(n, max(level, 1), cfg.dim),
        ranks=ranks,
    )


def _run_replication(task: ReplicationTask, ctx: LevelContext) -> ReplicationResult:
    cfg = ctx.config
    model = _model(cfg)
    rng = make_rng(cfg.seed, task.n_index, task.rep_index)
    draws = model.sample(task.n, rng)
    est = EstimatorConfig(wavelet=cfg.wavelet, level=task.level, dim=cfg.dim, cascade_level=cfg.cascade_level)

    oracle = estimate_linear(oracle_coefficients(PseudoSample(draws), est), ctx.grid)
    statistic = ctx.rate * float(np.max(np.abs(oracle - ctx.projected) / ctx.l2_root))
    if ctx.ranks:
        ranked = pseudo_observations(Sample(draws), ties="break")
        c_hat = estimate_linear(scaling_coefficients(ranked, est), ctx.grid)
    else:
        c_hat = oracle
    terms = decompose_error(c_hat, oracle, ctx.projected, ctx.truth)
    return ReplicationResult(
        n_index=task.n_index,
        rep_index=task.rep_index,
        statistic=statistic,
        sup_r=terms.sup_r,
        sup_d=terms.sup_d,
        sup_b=terms.sup_b,
        sup_error=float(np.abs(c_hat - ctx.truth).max()),
    )


def _execute(contexts: List[LevelContext], replications: int, workers: int) -> List[ReplicationResult]:
    results: List[ReplicationResult] = []
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for n_index, ctx in enumerate(contexts):
            tasks = [ReplicationTask(n_index, r, ctx.n, ctx.level) for r in range(replications)]
            if pool is None:
                batch = [_run_replication(t, ctx) for t in tasks]
            else:
                batch = list(pool.map(_run_replication, tasks, [ctx] * len(tasks)))
            results.extend(batch)
            logger.info("n=%d j=%d: %d replications done", ctx.n, ctx.level, len(batch))
    finally:
        if pool is not None:
            pool.shutdown()
    return sorted(results, key=lambda r: (r.n_index, r.rep_index))


def _quantiles(values: Sequence[float]) -> Tuple[float, float, float]:
    median, q25, q75 = np.percentile(np.asarray(values, dtype=float), [50, 25, 75])
    return float(median), float(q25), float(q75)


def _row(n: Optional[int], level: int, statistic: str, values: Sequence[float]) -> ReportRow:
    median, q25, q75 = _quantiles(values)
    return ReportRow(n=n, level=level, statistic=statistic, median=median, q25=q25, q75=q75)


def count_increases(values: Sequence[float]) -> int:
    """Number of steps where the sequence goes up."""
    return sum(1 for a, b in zip(values, values[1:]) if b > a)


def _simulate(cfg: ExperimentConfig, kind: str, ranks: bool):
    model = _model(cfg)
    _require_bounded(model, cfg)
    wavelet = cfg.father()
    if not cfg.n_list:
        raise ConfigError(f"The {kind} experiment needs a non-empty n_list.")
    levels = resolve_levels(cfg, model, wavelet)
    diagnostics = h4_diagnostics(cfg.n_list, levels, cfg.dim)
    if kind == "prop1":
        validate_h4(diagnostics)
    contexts = [_level_context(cfg, model, wavelet, n, j, ranks) for n, j in zip(cfg.n_list, levels)]
    results = _execute(contexts, cfg.replications, cfg.workers)
    per_n: Dict[int, List[ReplicationResult]] = {}
    for r in results:
        per_n.setdefault(r.n_index, []).append(r)
    h4 = [H4Row(n=d.n, level=d.level, capacity=d.capacity, growth=d.growth) for d in diagnostics]
    return model, wavelet, levels, h4, per_n


def _summary(cfg: ExperimentConfig, kind: str, model: CopulaModel, levels: List[int], h4: List[H4Row], **fields) -> ExperimentSummary:
    return ExperimentSummary(
        kind=kind,
        model=str(model),
        wavelet=cfg.wavelet,
        dim=cfg.dim,
        seed=cfg.seed,
        replications=cfg.replications,
        n_list=list(cfg.n_list),
        levels=list(levels),
        h4=h4,
        config=cfg,
        **fields,
    )


def run_prop1(cfg: ExperimentConfig) -> ExperimentReport:
    """Normalized oracle deviation S_n against its limit sqrt(||c||_inf)."""
    model, wavelet, levels, h4, per_n = _simulate(cfg, "prop1", ranks=False)
    target = math.sqrt(model.sup_norm()) if model.bounded_density else None

    rows, curves, medians = [], [], []
    for i, (n, j) in enumerate(zip(cfg.n_list, levels)):
        stats = [r.statistic for r in per_n[i]]
        rows.append(_row(n, j, "S", stats))
        rows.append(_row(n, j, "supD", [r.sup_d for r in per_n[i]]))
        medians.append(rows[-2].median)
        curves.append(CurveRow(n=n, level=j, name="r_n", value=rate_constant(n, max(j, 1), cfg.dim)))

    criteria = []
    if target is not None:
        low, high = cfg.criteria.prop1_band
        criteria.append(
            CriterionResult(
                name="S_n band at largest n",
                passed=bool(low * target <= medians[-1] <= high * target),
                value=medians[-1],
                expected=f"[{low * target:.4g}, {high * target:.4g}]",
            )
        )
        distance = [abs(m - target) for m in medians]
        increases = count_increases(distance)
        criteria.append(
            CriterionResult(
                name="|S_n - target| non-increasing",
                passed=increases <= cfg.criteria.trend_violations,
                value=float(increases),
                expected=f"<= {cfg.criteria.trend_violations} violations",
            )
        )
    return ExperimentReport(
        summary=_summary(cfg, "prop1", model, levels, h4, target=target, criteria=criteria),
        rows=rows,
        curves=curves,
    )


def run_rate(cfg: ExperimentConfig) -> ExperimentReport:
    """Log-log slope of the median sup error of the rank estimator in n."""
    model, wavelet, levels, h4, per_n = _simulate(cfg, "rate", ranks=True)
    t = _regularity(cfg, model, wavelet)
    expected = -t / (2.0 * t + cfg.dim)

    rows, curves, fit_points, theory_points = [], [], [], []
    for i, (n, j) in enumerate(zip(cfg.n_list, levels)):
        errors = [r.sup_error for r in per_n[i]]
        rows.append(_row(n, j, "sup_error", errors))
        for name, attr in (("supR", "sup_r"), ("supD", "sup_d"), ("supB", "sup_b")):
            rows.append(_row(n, j, name, [getattr(r, attr) for r in per_n[i]]))
        theory = math.sqrt(j * 2.0 ** (cfg.dim * j) / n) + 2.0 ** (-j * t)
        curves.append(CurveRow(n=n, level=j, name="theory", value=theory))
        fit_points.append((math.log(n), math.log(_quantiles(errors)[0])))
        theory_points.append((math.log(n), math.log(theory)))

    slope, stderr = fit_slope(fit_points) if len(fit_points) >= 2 else (None, None)
    theory_slope = fit_slope(theory_points)[0] if len(theory_points) >= 2 else None
    tolerance = cfg.criteria.slope_tolerance
    criteria = [
        CriterionResult(
            name="log-log slope",
            passed=slope is not None and abs(slope - expected) <= tolerance,
            value=slope,
            expected=f"{expected:.4g} +/- {tolerance:g}",
        )
    ]
    logger.info("rate slope %.4f (expected %.4f, composite theory %s)", slope if slope is not None else math.nan, expected, theory_slope)
    return ExperimentReport(
        summary=_summary(
            cfg,
            "rate",
            model,
            levels,
            h4,
            regularity=t,
            slope=slope,
            slope_stderr=stderr,
            expected_slope=expected,
            theory_slope=theory_slope,
            criteria=criteria,
        ),
        rows=rows,
        curves=curves,
    )


def run_decomposition(cfg: ExperimentConfig) -> ExperimentReport:
    """Medians of sup R_n, sup D_n, sup B_n and the ratio sup R_n / sup D_n."""
    model, wavelet, levels, h4, per_n = _simulate(cfg, "decompose", ranks=True)

    rows, ratios = [], []
    for i, (n, j) in enumerate(zip(cfg.n_list, levels)):
        sup_r = [r.sup_r for r in per_n[i]]
        sup_d = [r.sup_d for r in per_n[i]]
        rows.append(_row(n, j, "supR", sup_r))
        rows.append(_row(n, j, "supD", sup_d))
        rows.append(_row(n, j, "supB", [r.sup_b for r in per_n[i]]))
        median_d = _quantiles(sup_d)[0]
        ratio = _quantiles(sup_r)[0] / median_d if median_d > 0 else math.inf
        ratios.append(ratio)
        rows.append(ReportRow(n=n, level=j, statistic="ratio", median=ratio, q25=ratio, q75=ratio))

    increases = count_increases(ratios)
    criteria = [
        CriterionResult(
            name="supR/supD at largest n",
            passed=bool(ratios[-1] < cfg.criteria.ratio_max),
            value=ratios[-1],
            expected=f"< {cfg.criteria.ratio_max:g}",
        ),
        CriterionResult(
            name="ratio non-increasing",
            passed=increases <= cfg.criteria.trend_violations,
            value=float(increases),
            expected=f"<= {cfg.criteria.trend_violations} violations",
        ),
    ]
    return ExperimentReport(summary=_summary(cfg, "decompose", model, levels, h4, criteria=criteria), rows=rows)


def run_bias(cfg: ExperimentConfig) -> ExperimentReport:
    """Deterministic bias sup|E c̃ - c| per level and its slope in log2 against j."""
    if cfg.levels.kind != "explicit":
        raise ConfigError("The bias experiment needs levels.kind = 'explicit' with the list of levels.")
    model = _model(cfg)
    _require_bounded(model, cfg)
    wavelet = cfg.father()
    levels = list(cfg.levels.levels)
    t = _regularity(cfg, model, wavelet)
    grid = sup_grid(wavelet, max(levels), cfg.dim, cfg.grid.points)
    truth = model.density(grid)

    rows, fit_points = [], []
    for j in levels:
        projected = project_density(ProjectionKernel(wavelet, j, cfg.dim), model, grid)
        bias = float(np.abs(projected - truth).max())
        rows.append(ReportRow(level=j, statistic="bias", median=bias, q25=bias, q75=bias))
        if bias > 0.0:
            fit_points.append((float(j), math.log2(bias)))
        logger.info("bias at j=%d: %.6g", j, bias)

    slope, stderr = fit_slope(fit_points) if len(fit_points) == len(levels) and len(levels) >= 2 else (None, None)
    tolerance = cfg.criteria.bias_slope_tolerance
    criteria = [
        CriterionResult(
            name="log2 bias slope",
            passed=slope is not None and abs(slope + t) <= tolerance,
            value=slope,
            expected=f"{-t:.4g} +/- {tolerance:g}",
        )
    ]
    curves = [CurveRow(level=j, name="2^-jt", value=2.0 ** (-j * t)) for j in levels]
    summary = _summary(
        cfg, "bias", model, levels, [], regularity=t, slope=slope, slope_stderr=stderr, expected_slope=-t, criteria=criteria
    )
    return ExperimentReport(summary=summary, rows=rows, curves=curves)


RUNNERS: Dict[str, Callable[[ExperimentConfig], ExperimentReport]] = {
    "prop1": run_prop1,
    "rate": run_rate,
    "decompose": run_decomposition,
    "bias": run_bias,
}


def run_experiment(kind: str, cfg: ExperimentConfig) -> ExperimentReport:
    """Dispatch to the runner for ``kind`` and record the wall time."""
    if kind not in RUNNERS:
        raise ValueError(f"Unknown experiment '{kind}'. Available: {', '.join(EXPERIMENT_KINDS)}.")
    started = time.perf_counter()
    report = RUNNERS[kind](cfg)
    report.wall_time = time.perf_counter() - started
    logger.info("%s experiment finished in %.1f s", kind, report.wall_time)
    return report
