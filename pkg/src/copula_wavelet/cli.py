"""Command line interface for copula-wavelet."""

import logging
import sys
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.progress import Progress, SpinnerColumn, TextColumn

from . import __version__
from .config import EstimatorConfig, ExperimentConfig, load_experiment_config
from .copulas import build_model
from .estimator import (
    Sample,
    estimate_density,
    evaluation_grid,
    h4_diagnostics,
    h4_level,
    pseudo_observations,
    with_rule_level,
)
from .experiments import run_experiment
from .formatters import console, format_checks, format_report, read_sample_csv, write_density_csv, write_report, write_sample_csv
from .kernels import ProjectionKernel, check_kernel
from .wavelets import WAVELET_IDS, check_basis, get_wavelet

logger = logging.getLogger(__name__)

app = typer.Typer(help="Rank-based linear wavelet estimation of copula densities.")
err_console = Console(stderr=True)


class ExperimentKind(str, Enum):
    prop1 = "prop1"
    rate = "rate"
    decompose = "decompose"
    bias = "bias"


@contextmanager
def _reported():
    """Turn library errors into a red message and an exit code (1 invalid input, 2 failure)."""
    try:
        yield
    except typer.Exit:
        raise
    except ValueError as e:
        err_console.print(f"[bold red]Error:[/bold red] {escape(str(e))}")
        raise typer.Exit(code=1)
    except Exception as e:
        logger.debug("unexpected failure", exc_info=True)
        err_console.print(f"[bold red]Error:[/bold red] {type(e).__name__}: {escape(str(e))}")
        raise typer.Exit(code=2)


def _version(value: bool):
    if value:
        console.print(f"copwave {__version__}")
        raise typer.Exit()


@app.callback()
def callback(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Show debug logging"),
    version: bool = typer.Option(False, "--version", callback=_version, is_eager=True, help="Show the version and exit"),
):
    """Estimate copula densities with linear wavelet projections and verify their sup-norm behaviour."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


@app.command()
def simulate(
    model: str = typer.Option("fgm", "--model", "-m", help="Copula family: independence, fgm, frank, clayton, gaussian"),
    theta: Optional[float] = typer.Option(None, "--theta", "-t", help="Family parameter (rho for gaussian)"),
    n: int = typer.Option(1000, "--n", "-n", help="Number of observations"),
    dim: int = typer.Option(2, "--dim", "-d", help="Dimension (only independence supports d != 2)"),
    seed: int = typer.Option(0, "--seed", "-s", help="Random seed"),
    out: Path = typer.Option(..., "--out", "-o", help="Output CSV (headerless)"),
):
    """Draw a sample from a copula model.

    Examples:
        copwave simulate --model fgm --theta 0.75 --n 4096 --seed 7 --out sample.csv
    """
    with _reported():
        copula = build_model(model, theta, dim)
        data = copula.sample(n, seed)
        write_sample_csv(out, data)
        console.print(f"Wrote {n} draws from {copula} to [bold]{out}[/bold]")


@app.command()
def estimate(
    sample_csv: Path = typer.Argument(..., metavar="IN.CSV", help="Headerless CSV, one observation per row"),
    wavelet: str = typer.Option("haar", "--wavelet", "-w", help=f"Father wavelet: {', '.join(WAVELET_IDS)}"),
    level: Optional[int] = typer.Option(None, "--level", "-j", help="Resolution level j"),
    auto_level: Optional[float] = typer.Option(None, "--auto-level", help="Choose j from the resolution rule with regularity t"),
    dim: int = typer.Option(2, "--dim", "-d", help="Number of columns in the input"),
    grid: int = typer.Option(101, "--grid", "-g", help="Grid points per axis (Haar uses cell centers)"),
    rank_scaling: str = typer.Option("n", "--rank-scaling", help="Divide ranks by 'n' or 'n+1'"),
    ties: str = typer.Option("break", "--ties", help="Tie policy: 'break' by input order or 'reject'"),
    truncate: bool = typer.Option(False, "--truncate", help="Clip negative values and renormalize to mass 1"),
    out: Path = typer.Option(..., "--out", "-o", help="Output CSV with u1..ud,value columns"),
):
    """Estimate the copula density of a sample on a grid.

    Examples:
        copwave estimate sample.csv --level 3 --out density.csv
        copwave estimate sample.csv --wavelet db2 --auto-level 1 --out density.csv
    """
    with _reported():
        if (level is None) == (auto_level is None):
            raise ValueError("Pass exactly one of --level or --auto-level.")
        sample = Sample(read_sample_csv(sample_csv, dim))
        cfg = EstimatorConfig(
            wavelet=wavelet,
            level=0 if level is None else level,
            dim=dim,
            rank_scaling=rank_scaling,
            ties=ties,
            regularity=auto_level if auto_level is not None else 1.0,
            truncate=truncate,
        )
        if auto_level is not None:
            cfg = with_rule_level(cfg, sample.n)
            diag = h4_diagnostics([sample.n], [cfg.level], dim)[0]
            console.print(
                f"Chose j={cfg.level} from the resolution rule 2^j ~ (n/ln n)^(1/(2t+d)) "
                f"with n={sample.n}, t={cfg.regularity:g}, d={dim}"
            )
            console.print(
                f"  h4 policy would give j={h4_level(sample.n, dim)}; "
                f"n/(j 2^((d+1)j)) = {diag.capacity:.4g}, j/ln ln n = {diag.growth:.4g}"
            )
        ps = pseudo_observations(sample, cfg.rank_scaling, cfg.ties)
        points = evaluation_grid(cfg.father(), cfg.level, cfg.dim, grid)
        result = estimate_density(ps, cfg, points)
        write_density_csv(out, result)
        console.print(f"Wrote {len(result.values)} values ({cfg.wavelet}, j={cfg.level}) to [bold]{out}[/bold]")


@app.command("check-basis")
def check_basis_command(
    wavelet: Optional[str] = typer.Option(None, "--wavelet", "-w", help="Wavelet to check (default: all)"),
    levels: List[int] = typer.Option([2, 3], "--level", "-j", help="Levels for the Gram check (repeatable)"),
    cascade_level: int = typer.Option(12, "--cascade-level", "-L", help="Dyadic refinement passes of the table"),
):
    """Run the wavelet basis invariant suite."""
    with _reported():
        names = [wavelet] if wavelet else list(WAVELET_IDS)
        ok = True
        for name in names:
            w = get_wavelet(name, cascade_level)
            ok = format_checks(f"Basis checks: {w.name}", check_basis(w, levels)) and ok
    if not ok:
        raise typer.Exit(code=2)


@app.command("check-kernel")
def check_kernel_command(
    wavelet: Optional[str] = typer.Option(None, "--wavelet", "-w", help="Wavelet to check (default: all)"),
    level: int = typer.Option(3, "--level", "-j", help="Kernel level j"),
    dim: int = typer.Option(1, "--dim", "-d", help="Kernel dimension"),
    samples: int = typer.Option(25, "--samples", help="Random points for the normalization check"),
    seed: int = typer.Option(0, "--seed", "-s", help="Seed for the random points"),
):
    """Run the projection kernel invariant suite."""
    with _reported():
        names = [wavelet] if wavelet else list(WAVELET_IDS)
        ok = True
        for name in names:
            pk = ProjectionKernel(get_wavelet(name), level, dim)
            title = f"Kernel checks: {pk.wavelet.name}, j={level}, d={dim}"
            ok = format_checks(title, check_kernel(pk, samples=samples, seed=seed)) and ok
    if not ok:
        raise typer.Exit(code=2)


@app.command()
def experiment(
    kind: ExperimentKind = typer.Argument(..., help="Which experiment to run"),
    config: Path = typer.Option(..., "--config", "-c", help="Experiment TOML file"),
    seed: Optional[int] = typer.Option(None, "--seed", "-s", help="Override the config seed"),
    workers: Optional[int] = typer.Option(None, "--workers", "-w", help="Worker processes for replications"),
    force: bool = typer.Option(False, "--force", help="Run even when the model density is unbounded"),
    out_dir: Optional[Path] = typer.Option(None, "--out-dir", "-o", help="Override the output directory"),
):
    """Run a Monte Carlo experiment and write report.csv and summary.json.

    Examples:
        copwave experiment prop1 --config configs/prop1_indep.toml
        copwave experiment rate --config configs/rate_fgm.toml --workers 4
    """
    with _reported():
        cfg = load_experiment_config(config)
        overrides = {}
        if seed is not None:
            overrides["seed"] = seed
        if workers is not None:
            overrides["workers"] = workers
        if force:
            overrides["force"] = True
        if out_dir is not None:
            overrides["output"] = {**cfg.output.model_dump(), "dir": out_dir}
        if overrides:
            cfg = ExperimentConfig.model_validate({**cfg.model_dump(), **overrides})

        with Progress(
            SpinnerColumn(),
            TextColumn(f"[bold blue]Running {kind.value} experiment...[/bold blue]"),
            transient=True,
            console=console,
        ) as progress:
            progress.add_task("experiment", total=None)
            report = run_experiment(kind.value, cfg)
        paths = write_report(report, cfg.output.dir, curves=cfg.output.curves)
        format_report(report)
        console.print(f"Wrote {', '.join(str(p) for p in paths)}")


def _click_errors() -> Tuple[type, type]:
    """ClickException and Abort from the click package typer dispatches through.

    Recent typer releases bundle their own copy of click, so the classes are
    looked up on the command's base classes rather than imported.
    """
    command = typer.main.get_command(app)
    for cls in type(command).__mro__:
        package = cls.__module__.rpartition(".")[0]
        for name in (cls.__module__, f"{package}.exceptions"):
            module = sys.modules.get(name)
            if hasattr(module, "ClickException") and hasattr(module, "Abort"):
                return module.ClickException, module.Abort
    raise RuntimeError(f"Cannot locate click exceptions for {type(command).__name__}.")


def main() -> None:
    """Console entry point; usage errors exit with code 1."""
    click_exception, abort = _click_errors()
    try:
        code = app(standalone_mode=False)
    except click_exception as e:
        e.show()
        sys.exit(1)
    except abort:
        err_console.print("Aborted.")
        sys.exit(1)
    sys.exit(code or 0)


if __name__ == "__main__":
    main()
