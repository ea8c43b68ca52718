import functools
import logging
import sys
from pathlib import Path
from typing import Optional

import click
from rich.console import Console
from rich.padding import Padding
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn
from rich.table import Table

from . import __version__
from .config import load_config
from .enums import CoefficientSource, SolverMethod
from .exceptions import BoundViolationError, ConfigError, NumericalError, RBHomError
from .experiments import run_audit, run_bench, run_convergence, run_homogenize, run_offline
from .logs import setup_logging
from .types import RunConfig

CONTEXT_SETTINGS = dict(help_option_names=["-h", "--help"])
console = Console()
logger = logging.getLogger("rbhom")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_BOUND_VIOLATION = 4

OVERRIDE_OPTIONS = [
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="key=value run file"),
    click.option("--seed", type=int, help="Training sample seed (test sample uses seed+1)"),
    click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory"),
    click.option("--n-per-side", type=int, help="Cell mesh subdivisions per side (multiple of 4)"),
    click.option("--delta", type=float, help="Half-width of the inclusion-corner box"),
    click.option("--theta0", type=float, help="Contrast range: theta in [-theta0, 0]"),
    click.option("--p", "p", type=int, help="Training / test sample size"),
    click.option("--n-max", type=int, help="Maximal basis size"),
    click.option("--rel-tol", type=float, help="Greedy stopping tolerance on the relative bound"),
    click.option("--h-hom", type=float, help="Macroscopic mesh size"),
    click.option("--epsilon", type=float, help="Microstructure period for the corrector"),
    click.option("--field", help="default | constant | constant:b1,c1,b2,c2,theta | custom:module:function"),
    click.option("--solver", type=click.Choice([m.value for m in SolverMethod]), help="Truth linear solver"),
    click.option("--workers", type=int, help="Threads for parameter sweeps"),
    click.option("-v", "--verbose", is_flag=True, help="Debug logging"),
]


def run_options(fn):
    for option in reversed(OVERRIDE_OPTIONS):
        fn = option(fn)
    return fn


def resolve_config(config_path: Optional[str], verbose: bool, **overrides) -> RunConfig:
    setup_logging(verbose)
    return load_config(config_path, overrides)


def handle_errors(fn):
    """Map the exception hierarchy onto exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except BoundViolationError as exc:
            console.print(f"[bold red]Certified bound violated[/] :: {exc}")
            sys.exit(EXIT_BOUND_VIOLATION)
        except ConfigError as exc:
            console.print(f"Configuration error :: [bold red]{exc}[/]")
            sys.exit(EXIT_CONFIG)
        except NumericalError as exc:
            where = getattr(exc, "stage", None)
            prefix = f"Numerical failure during {where}" if where else "Numerical failure"
            console.print(f"{prefix} :: [bold red]{exc}[/]")
            sys.exit(EXIT_NUMERICAL)
        except RBHomError as exc:
            console.print(f"Error :: [bold red]{exc}[/]")
            sys.exit(EXIT_NUMERICAL)

    return wrapper


def spinner():
    return Progress(
        SpinnerColumn(spinner_name="clock"),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(pulse_style="yellow"),
        console=console,
        transient=True,
    )


def print_config(config: RunConfig):
    grid = Table.grid(expand=False)
    grid.add_column(justify="right")
    grid.add_column(justify="left")
    spacing = (0, 1)
    for key in ("n_per_side", "delta", "theta0", "p", "n_max", "seed", "out_dir"):
        grid.add_row(Padding(f"{key} :", spacing), f"[bold]{getattr(config, key)}[/]")
    console.print(grid)


def fmt(value) -> str:
    return "-" if value is None else f"{value:.3e}"


@click.group(name="rbhom", context_settings=CONTEXT_SETTINGS)
@click.version_option(__version__, prog_name="rbhom")
def cli():
    """Certified reduced-basis homogenization experiments."""


@cli.command()
@run_options
@click.option("--basis", "basis_path", type=click.Path(dir_okay=False), help="Where to write the basis file")
@handle_errors
def offline(config_path, verbose, basis_path, **overrides):
    """Greedy basis construction on the seeded training sample."""
    config = resolve_config(config_path, verbose, **overrides)
    print_config(config)
    with spinner() as progress:
        task = progress.add_task("Building reduced basis", start=False)
        outcome = run_offline(config, basis_path, status=lambda text: progress.update(task, description=text))
    basis = outcome.basis
    if basis.size == 0:
        console.print("[bold yellow]Warning:[/] every training snapshot vanishes; the basis is empty")
    else:
        console.print(
            f"Basis size [bold]{basis.size}[/] on {basis.dofs} dofs, "
            f"final max relative bound [bold green]{basis.trace[-1]:.3e}[/]"
        )
    console.print(f"Basis saved : [bold]{outcome.basis_path}[/] (fingerprint {outcome.fingerprint[:12]})")
    console.print(f"File saved : [bold]{outcome.csv_path}[/]")


@cli.command()
@run_options
@click.option("--basis", "basis_path", type=click.Path(exists=True, dir_okay=False), help="Basis file to audit")
@handle_errors
def audit(config_path, verbose, basis_path, **overrides):
    """Bound decay and effectivities on the seed+1 test sample."""
    config = resolve_config(config_path, verbose, **overrides)
    with spinner() as progress:
        task = progress.add_task("Auditing basis", start=False)
        outcome = run_audit(config, basis_path, status=lambda text: progress.update(task, description=text))
    report = outcome.report

    table = Table(title="Audit", show_lines=False)
    for header in ("N", "max rel bound", "max rel err", "max rel s err", "effectivity", "box effectivity"):
        table.add_column(header, justify="right")
    for row in report.summaries():
        table.add_row(
            str(row.n),
            fmt(row.max_rel_bound),
            fmt(row.max_rel_true_err),
            fmt(row.max_rel_s_err),
            f"{row.effectivity_min:.2f} .. {row.effectivity_max:.2f}",
            f"{row.box_effectivity_min:.2f} .. {row.box_effectivity_max:.2f}",
        )
    console.print(table)
    console.print(f"File saved : [bold]{outcome.decay_path}[/]")
    console.print(f"File saved : [bold]{outcome.effectivity_path}[/]")
    report.check()
    console.print("[bold green]All certified bounds hold[/]")


@cli.command()
@run_options
@click.option("--basis", "basis_path", type=click.Path(exists=True, dir_okay=False), help="Basis file for the rb provider")
@click.option(
    "--provider",
    type=click.Choice([source.value for source in CoefficientSource] + ["both"]),
    default=None,
    help="Source of homogenized tensors (default: both when a basis is available, else truth)",
)
@handle_errors
def homogenize(config_path, verbose, basis_path, provider, **overrides):
    """Homogenized macro solve with corrector reconstruction."""
    config = resolve_config(config_path, verbose, **overrides)
    if provider is None:
        default_basis = Path(config.out_dir) / "basis.rbhom"
        provider = "both" if basis_path or default_basis.exists() else CoefficientSource.TRUTH.value
    sources = list(CoefficientSource) if provider == "both" else [CoefficientSource(provider)]
    with spinner() as progress:
        task = progress.add_task("Homogenizing", start=False)
        outcome = run_homogenize(
            config, sources, basis_path, status=lambda text: progress.update(task, description=text)
        )

    table = Table(title="Homogenized runs", show_lines=False)
    for header in ("provider", "cell solves", "max delta_s", "assembly [s]", "solve [s]"):
        table.add_column(header, justify="right")
    for source, run in outcome.runs.items():
        table.add_row(
            source.value,
            str(run.fe_solves),
            fmt(run.max_delta_s),
            f"{run.timings['assembly']:.3f}",
            f"{run.timings['solve']:.3f}",
        )
    console.print(table)
    comparison = outcome.comparison
    if comparison is not None:
        console.print(f"{'H1 difference':20s}: [bold]{comparison.h1_err:.3e}[/]")
        console.print(f"{'L2 difference':20s}: [bold]{comparison.l2_err:.3e}[/]")
        console.print(f"{'Indicator':20s}: [bold green]{fmt(comparison.indicator)}[/]")
        console.print(f"{'Rigorous bound':20s}: [bold green]{fmt(comparison.rigorous_bound)}[/]")
    console.print(f"File saved : [bold]{outcome.summary_path}[/]")
    for path in outcome.field_paths.values():
        console.print(f"File saved : [bold]{path}[/]")


@cli.command()
@run_options
@click.option("--basis", "basis_path", type=click.Path(exists=True, dir_okay=False), help="Basis whose size fixes N")
@handle_errors
def bench(config_path, verbose, basis_path, **overrides):
    """Offline and per-query timings across cell mesh sizes."""
    config = resolve_config(config_path, verbose, **overrides)
    with spinner() as progress:
        task = progress.add_task("Benchmarking", start=False)
        rows, path = run_bench(config, basis_path, status=lambda text: progress.update(task, description=text))

    table = Table(title="Timings (median seconds)", show_lines=False)
    for header in ("n_per_side", "dofs", "N", "offline", "truth query", "rb query", "rb bound", "speedup"):
        table.add_column(header, justify="right")
    for row in rows:
        table.add_row(
            str(row.n_per_side),
            str(row.dofs),
            str(row.N),
            f"{row.offline_time:.3f}",
            f"{row.truth_query:.2e}",
            f"{row.rb_query:.2e}",
            f"{row.rb_bound:.2e}",
            f"{row.speedup:.1f}x",
        )
    console.print(table)
    console.print(f"File saved : [bold]{path}[/]")


@cli.command()
@run_options
@handle_errors
def convergence(config_path, verbose, **overrides):
    """Cell mesh refinement of homogenized tensors with Richardson limits."""
    config = resolve_config(config_path, verbose, **overrides)
    with spinner() as progress:
        task = progress.add_task("Refining", start=False)
        rows, path = run_convergence(config, status=lambda text: progress.update(task, description=text))

    table = Table(title="Homogenized tensor under refinement", show_lines=False)
    for header in ("case", "n_per_side", "a11", "a12", "a22"):
        table.add_column(header, justify="right")
    for row in rows:
        table.add_row(
            row["case"], str(row["n_per_side"]), f"{row['a11']:.8f}", f"{row['a12']:.2e}", f"{row['a22']:.8f}"
        )
    console.print(table)
    console.print(f"File saved : [bold]{path}[/]")


if __name__ == "__main__":
    cli(prog_name="rbhom")
