"""Console output and file formats for copula-wavelet."""

import csv
import io
import logging
from pathlib import Path
from typing import Iterable, List

import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from .estimator import DensityEstimate
from .experiments import ExperimentReport
from .wavelets import InvariantCheck

logger = logging.getLogger(__name__)

console = Console(highlight=True)
FLOAT_FORMAT = "%.17g"


def format_checks(title: str, checks: Iterable[InvariantCheck]) -> bool:
    """Print a table of invariant checks.

    Args:
        title: Table heading
        checks: Results from check_basis or check_kernel

    Returns:
        True when every check passed
    """
    table = Table(title=title, show_header=True)
    table.add_column("Check", style="cyan")
    table.add_column("Value", justify="right")
    table.add_column("Tolerance", justify="right", style="dim")
    table.add_column("Status")
    ok = True
    for check in checks:
        ok = ok and check.passed
        status = "[bold green]pass[/bold green]" if check.passed else "[bold red]FAIL[/bold red]"
        table.add_row(check.name, f"{check.value:.3e}", f"{check.tolerance:.1e}", status)
    console.print(table)
    return ok


def format_report(report: ExperimentReport) -> None:
    """Print the per-n medians and the acceptance criteria of an experiment."""
    summary = report.summary
    console.print(
        Panel(
            f"{summary.model}, {summary.wavelet}, d={summary.dim}, R={summary.replications}, seed={summary.seed}",
            title=f"[bold blue]{summary.kind} experiment[/bold blue]",
            expand=False,
        )
    )
    table = Table(show_header=True)
    table.add_column("n", style="cyan", justify="right")
    table.add_column("j", style="cyan", justify="right")
    table.add_column("statistic", style="yellow")
    table.add_column("median", justify="right")
    table.add_column("q25", style="dim", justify="right")
    table.add_column("q75", style="dim", justify="right")
    for row in report.rows:
        table.add_row(
            "" if row.n is None else str(row.n),
            str(row.level),
            row.statistic,
            f"{row.median:.5g}",
            f"{row.q25:.5g}",
            f"{row.q75:.5g}",
        )
    console.print(table)

    if summary.target is not None:
        console.print(f"[bold]Target[/bold] sqrt(||c||_inf) = {summary.target:.5g}")
    if summary.slope is not None:
        console.print(
            f"[bold]Slope[/bold] {summary.slope:.4f} (stderr {summary.slope_stderr:.4f}), expected {summary.expected_slope:.4f}"
        )
    for criterion in summary.criteria:
        mark = "[bold green]pass[/bold green]" if criterion.passed else "[bold red]FAIL[/bold red]"
        value = "n/a" if criterion.value is None else f"{criterion.value:.4g}"
        console.print(f"  {mark} {criterion.name}: {value} (expected {criterion.expected})")
    console.print(f"[dim]Finished in {report.wall_time:.1f} s[/dim]")


def read_sample_csv(path: Path, dim: int) -> np.ndarray:
    """Read a headerless numeric CSV with ``dim`` columns.

    Raises:
        ValueError: If the file is empty, malformed or has the wrong width
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ValueError(f"Could not read {path}: {e}") from e
    if not text.strip():
        raise ValueError(f"{path} is empty; expected {dim} comma-separated columns per row.")
    try:
        data = np.loadtxt(io.StringIO(text), delimiter=",", ndmin=2)
    except ValueError as e:
        raise ValueError(f"{path} is not a numeric CSV: {e}") from e
    if data.shape[1] != dim:
        raise ValueError(f"{path} has {data.shape[1]} columns but --dim is {dim}.")
    return data


def write_sample_csv(path: Path, data: np.ndarray) -> None:
    np.savetxt(path, np.atleast_2d(data), delimiter=",", fmt=FLOAT_FORMAT)


def write_density_csv(path: Path, estimate: DensityEstimate) -> None:
    """Write u1..ud and value columns, one row per grid point."""
    dim = estimate.grid.shape[1]
    header = ",".join([f"u{m + 1}" for m in range(dim)] + ["value"])
    np.savetxt(
        path,
        np.column_stack([estimate.grid, estimate.values]),
        delimiter=",",
        fmt=FLOAT_FORMAT,
        header=header,
        comments="",
    )


def _format_float(value: float) -> str:
    return FLOAT_FORMAT % value


def write_report(report: ExperimentReport, out_dir: Path, curves: bool = True) -> List[Path]:
    """Write report.csv, summary.json and (optionally) curves.csv into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    report_path = out_dir / "report.csv"
    with open(report_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["n", "level", "statistic", "median", "q25", "q75"])
        for row in report.rows:
            writer.writerow(
                ["" if row.n is None else row.n, row.level, row.statistic]
                + [_format_float(v) for v in (row.median, row.q25, row.q75)]
            )
    written.append(report_path)

    summary_path = out_dir / "summary.json"
    summary_path.write_text(report.summary.model_dump_json(indent=2) + "\n", encoding="utf-8")
    written.append(summary_path)

    if curves and report.curves:
        curves_path = out_dir / "curves.csv"
        with open(curves_path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["n", "level", "name", "value"])
            for row in report.curves:
                writer.writerow(["" if row.n is None else row.n, row.level, row.name, _format_float(row.value)])
        written.append(curves_path)

    logger.info("wrote %s", ", ".join(str(p) for p in written))
    return written
