"""Experiment drivers behind the command line: each one computes, writes its CSVs and returns the data."""
import logging
import math
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from rbhom.cell_problem import AffineSystem, build_affine_system, homogenized_tensor, solve_cell, solve_cell_with
from rbhom.enums import CoefficientSource
from rbhom.exceptions import RBHomError
from rbhom.fe import build_macro_mesh, build_periodic_mesh
from rbhom.macro import (
    CorrectorField,
    HomogenizedRun,
    MacroComparison,
    compare_macro,
    field_from_spec,
    make_provider,
    reconstruct_corrector,
    run_homogenized,
)
from rbhom.parametrization import affine_coeffs, laminate_coeffs
from rbhom.rb import AuditReport, ReducedBasis, basis_fingerprint, effectivity_audit, greedy_build, load_basis, save_basis
from rbhom.rb.online import online_solve, reduced_solve, residual_norms
from rbhom.reports import (
    AUDIT_DECAY_COLUMNS,
    BENCH_COLUMNS,
    CONVERGENCE_COLUMNS,
    EFFECTIVITY_COLUMNS,
    FINE_FIELD_COLUMNS,
    OFFLINE_COLUMNS,
    SUMMARY_COLUMNS,
    header_block,
    write_csv,
)
from rbhom.sampling import draw_sample
from rbhom.types import CellParam, RunConfig
from rbhom.utils import loglog_slope, median_time, timed

logger = logging.getLogger(__name__)

BASIS_FILE = "basis.rbhom"
CONVERGENCE_SIZES = (8, 16, 32, 64)
ROUNDOFF_DIFFERENCE = 1e-13

StatusCallback = Callable[[str], None]


def _noop(_: str):
    pass


@contextmanager
def stage(name: str):
    """Tag library errors with the pipeline stage they came from."""
    try:
        yield
    except RBHomError as exc:
        if not hasattr(exc, "stage"):
            exc.stage = name
        raise


def build_system(config: RunConfig, n_per_side: Optional[int] = None) -> AffineSystem:
    return build_affine_system(build_periodic_mesh(n_per_side or config.n_per_side), method=config.solver)


def default_basis_path(config: RunConfig) -> Path:
    return Path(config.out_dir) / BASIS_FILE


@dataclass
class OfflineOutcome:
    basis: ReducedBasis
    basis_path: Path
    csv_path: Path
    fingerprint: str


def offline_rows(basis: ReducedBasis) -> List[dict]:
    """
    One row per basis size with the snapshot picked next.

    Row N=0 carries the first pick and no relative bound, since the empty basis has no reduced solution.
    """
    if not basis.provenance:
        return []
    rows = []
    for n in range(len(basis.trace) + 1):
        selected = basis.provenance[n] if n < len(basis.provenance) else None
        rows.append(
            {
                "N": n,
                "max_rel_bound": basis.trace[n - 1] if n else None,
                "selected_param_id": selected.param_id if selected else None,
                "selected_dir": selected.direction if selected else None,
            }
        )
    return rows


def run_offline(config: RunConfig, basis_path: Optional[Path] = None, status: StatusCallback = _noop) -> OfflineOutcome:
    with stage("offline setup"):
        system = build_system(config)
        sample = draw_sample(config.train_spec())
    with stage("greedy"):
        basis = greedy_build(
            system,
            sample,
            n_max=min(config.n_max, 2 * config.p),
            rel_tol=config.rel_tol,
            seed=config.seed,
            box=config.box,
            progress=lambda n, bound: status(f"Greedy N={n}, max relative bound {bound:.2e}"),
        )
    basis_path = Path(basis_path or default_basis_path(config))
    save_basis(basis, basis_path)
    fingerprint = basis_fingerprint(basis)
    csv_path = write_csv(
        Path(config.out_dir) / "offline_decay.csv",
        OFFLINE_COLUMNS,
        offline_rows(basis),
        header_block(config, fingerprint),
    )
    return OfflineOutcome(basis=basis, basis_path=basis_path, csv_path=csv_path, fingerprint=fingerprint)


@dataclass
class AuditOutcome:
    report: AuditReport
    decay_path: Path
    effectivity_path: Path
    fingerprint: str


def run_audit(
    config: RunConfig, basis_path: Optional[Path] = None, sizes: Optional[Sequence[int]] = None, status: StatusCallback = _noop
) -> AuditOutcome:
    with stage("load basis"):
        system = build_system(config)
        basis = load_basis(basis_path or default_basis_path(config), system)
    test_sample = draw_sample(config.test_spec())
    sizes = list(range(1, basis.size + 1)) if sizes is None else list(sizes)
    status(f"Auditing {len(test_sample)} parameters at {len(sizes)} basis sizes")
    with stage("audit"):
        report = effectivity_audit(basis, system, test_sample, sizes=sizes, workers=config.workers)
    fingerprint = basis_fingerprint(basis)
    header = header_block(config, fingerprint, box_alpha=report.box_alpha)
    decay_rows = [asdict(summary) for summary in report.summaries()]
    for row in decay_rows:
        row["N"] = row.pop("n")
    decay_path = write_csv(Path(config.out_dir) / "audit_decay.csv", AUDIT_DECAY_COLUMNS, decay_rows, header)
    effectivity_rows = [
        {
            "N": entry.n,
            "param_id": entry.param_id,
            **entry.param.model_dump(),
            "dir": entry.direction,
            "true_err": entry.true_err,
            "bound": entry.bound,
            "effectivity": entry.effectivity,
            "s_err": entry.s_err,
            "s_bound": entry.s_bound,
            "alpha": entry.alpha,
            "gamma": entry.gamma,
            "box_effectivity": entry.box_effectivity,
            "resolved": entry.resolved,
        }
        for entry in report.entries
    ]
    effectivity_path = write_csv(
        Path(config.out_dir) / "audit_effectivity.csv", EFFECTIVITY_COLUMNS, effectivity_rows, header
    )
    return AuditOutcome(report=report, decay_path=decay_path, effectivity_path=effectivity_path, fingerprint=fingerprint)


@dataclass
class HomogenizeOutcome:
    runs: Dict[CoefficientSource, HomogenizedRun]
    correctors: Dict[CoefficientSource, CorrectorField]
    comparison: Optional[MacroComparison]
    summary_path: Path
    field_paths: Dict[CoefficientSource, Path] = field(default_factory=dict)


def run_homogenize(
    config: RunConfig,
    sources: Sequence[CoefficientSource],
    basis_path: Optional[Path] = None,
    status: StatusCallback = _noop,
) -> HomogenizeOutcome:
    sources = [CoefficientSource(source) for source in sources]
    with stage("setup"):
        system = build_system(config)
        param_field = field_from_spec(config.field, config.box)
        macro_mesh = build_macro_mesh(config.n_hom)
    basis = None
    if CoefficientSource.RB in sources:
        with stage("load basis"):
            basis = load_basis(basis_path or default_basis_path(config), system)
    fingerprint = basis_fingerprint(basis) if basis is not None else None

    runs: Dict[CoefficientSource, HomogenizedRun] = {}
    correctors: Dict[CoefficientSource, CorrectorField] = {}
    for source in sources:
        provider = make_provider(source, system, basis)
        status(f"Homogenized solve ({source.value}) on {macro_mesh.element_count} elements")
        with stage(f"{source.value} macro solve"):
            runs[source] = run_homogenized(macro_mesh, param_field, provider, config.workers, config.solver)
        with stage(f"{source.value} corrector"):
            correctors[source] = reconstruct_corrector(
                runs[source], provider, system.mesh, config.epsilon, config.corrector_resolution
            )

    comparison = None
    if CoefficientSource.TRUTH in runs and CoefficientSource.RB in runs:
        with stage("compare"):
            comparison = compare_macro(
                macro_mesh, runs[CoefficientSource.TRUTH].u_star, runs[CoefficientSource.RB].u_star, runs[CoefficientSource.RB]
            )

    header = header_block(config, fingerprint)
    summary_rows = []
    for source, run in runs.items():
        summary_rows.append(
            {
                "provider": source.value,
                "h_hom": 1.0 / macro_mesh.n_per_side,
                "h_Y": system.mesh.h,
                "N": basis.size if source == CoefficientSource.RB else None,
                "epsilon": config.epsilon,
                "l2_err": comparison.l2_err if comparison else None,
                "h1_err": comparison.h1_err if comparison else None,
                "max_delta_s": run.max_delta_s,
                "indicator": comparison.indicator if comparison and source == CoefficientSource.RB else None,
                "rigorous_bound": comparison.rigorous_bound if comparison and source == CoefficientSource.RB else None,
                "assembly_time": run.timings["assembly"],
                "solve_time": run.timings["solve"],
            }
        )
    out_dir = Path(config.out_dir)
    summary_path = write_csv(out_dir / "homogenize_summary.csv", SUMMARY_COLUMNS, summary_rows, header)
    field_paths = {
        source: write_csv(
            out_dir / f"fine_field_{source.value}.csv",
            FINE_FIELD_COLUMNS,
            corrector.rows(),
            header_block(config, fingerprint, provider=source.value, coarse=int(corrector.coarse)),
        )
        for source, corrector in correctors.items()
    }
    return HomogenizeOutcome(
        runs=runs, correctors=correctors, comparison=comparison, summary_path=summary_path, field_paths=field_paths
    )


@dataclass
class BenchRow:
    n_per_side: int
    dofs: int
    N: int
    offline_time: float
    truth_query: float
    rb_query: float
    rb_solve: float
    rb_bound: float

    @property
    def speedup(self) -> float:
        return self.truth_query / self.rb_query if self.rb_query > 0 else float("inf")

    def as_row(self) -> dict:
        row = dict(vars(self))
        row.update(dof_ratio=self.N / self.dofs, speedup=self.speedup)
        return row


@dataclass(frozen=True)
class BenchScaling:
    """How per-query costs move across the bench sizes."""

    rb_variation: float  # max / min rb query time
    truth_growing: bool
    truth_slope: float  # log-log slope of truth query time against n_per_side
    speedup: float  # at the largest size

    @classmethod
    def from_rows(cls, rows: Sequence[BenchRow]) -> "BenchScaling":
        rb = [row.rb_query for row in rows]
        truth = [row.truth_query for row in rows]
        return cls(
            rb_variation=max(rb) / min(rb),
            truth_growing=all(later > earlier for earlier, later in zip(truth, truth[1:])),
            truth_slope=loglog_slope([row.n_per_side for row in rows], truth),
            speedup=rows[-1].speedup,
        )

    def online_independent(self, max_variation: float = 2.0, min_speedup: float = 3.0) -> bool:
        """True when rb cost stays flat while truth cost grows faster than n_per_side."""
        return (
            self.rb_variation < max_variation
            and self.truth_growing
            and self.truth_slope > 1.0
            and self.speedup > min_speedup
        )


def run_bench(
    config: RunConfig, basis_path: Optional[Path] = None, status: StatusCallback = _noop
) -> Tuple[List[BenchRow], Path]:
    """
    Time offline build and per-query work on every bench size.

    The offline build runs once per size; per-query times are medians of warm repetitions.
    A given basis file fixes the target basis size for all meshes.
    """
    target = min(config.n_max, 2 * config.p)
    if basis_path is not None:
        target = load_basis(basis_path).size or target
    sample = draw_sample(config.train_spec())
    query = draw_sample(config.test_spec().model_copy(update={"count": 1}))[0]
    rows = []
    for n_per_side in config.bench_sizes:
        status(f"Benchmark n_per_side={n_per_side}")
        system = build_system(config, n_per_side)
        basis, offline_time = timed(
            lambda: greedy_build(system, sample, n_max=target, rel_tol=0.0, seed=config.seed, box=config.box)
        )
        coeffs = affine_coeffs(query)
        truth_query = median_time(lambda: homogenized_tensor(system, solve_cell(system, query)), config.bench_repeats)
        rb_query = median_time(lambda: online_solve(basis, query), config.bench_repeats)
        rb_solve = median_time(lambda: reduced_solve(basis, coeffs), config.bench_repeats)
        w, _ = reduced_solve(basis, coeffs)
        rb_bound = median_time(lambda: residual_norms(basis, coeffs, w), config.bench_repeats)
        rows.append(
            BenchRow(
                n_per_side=n_per_side,
                dofs=system.size,
                N=basis.size,
                offline_time=offline_time,
                truth_query=truth_query,
                rb_query=rb_query,
                rb_solve=rb_solve,
                rb_bound=rb_bound,
            )
        )
        logger.info(f"bench n_per_side={n_per_side}: speedup {rows[-1].speedup:.1f}x at N={basis.size}")
    if len(rows) > 1:
        scaling = BenchScaling.from_rows(rows)
        logger.info(
            f"rb query variation {scaling.rb_variation:.2f}x, truth query slope {scaling.truth_slope:.2f} in n_per_side"
        )
    path = write_csv(
        Path(config.out_dir) / "bench.csv", BENCH_COLUMNS, [row.as_row() for row in rows], header_block(config)
    )
    return rows, path


def richardson(values: Sequence[float]) -> Tuple[float, float]:
    """
    Extrapolated limit and observed order from the last three levels of a halving sequence.

    Falls back to order 2 when the differences are at round-off level or inconsistent.
    """
    if len(values) < 3:
        return float(values[-1]), float("nan")
    coarse, mid, fine = values[-3:]
    first, second = mid - coarse, fine - mid
    order = 2.0
    if abs(first) > ROUNDOFF_DIFFERENCE and abs(second) > ROUNDOFF_DIFFERENCE and first * second > 0:
        observed = math.log2(abs(first) / abs(second))
        if math.isfinite(observed) and observed > 0:
            order = observed
    return fine + second / (2.0**order - 1.0), order


LAMINATE_THETA = -0.5


def convergence_cases(config: RunConfig) -> Dict[str, Optional[CellParam]]:
    """Cell parameters per refinement case; the laminate case (None) is solved from its own coefficients."""
    configured = field_from_spec(config.field, config.box)((0.5, 0.5))
    return {
        "homogeneous": CellParam.reference(theta=0.0),
        "laminate": None,
        "centered": CellParam.reference(theta=LAMINATE_THETA),
        "configured": configured,
    }


def run_convergence(
    config: RunConfig, sizes: Sequence[int] = CONVERGENCE_SIZES, status: StatusCallback = _noop
) -> Tuple[List[dict], Path]:
    cases = convergence_cases(config)
    tensors: Dict[str, List[np.ndarray]] = {name: [] for name in cases}
    for n_per_side in sizes:
        status(f"Refinement level n_per_side={n_per_side}")
        system = build_system(config, n_per_side)
        for name, param in cases.items():
            if param is None:
                solution = solve_cell_with(system, laminate_coeffs(LAMINATE_THETA))
            else:
                solution = solve_cell(system, param)
            tensors[name].append(homogenized_tensor(system, solution).a_star)

    rows = []
    for name, sequence in tensors.items():
        for n_per_side, a_star in zip(sizes, sequence):
            rows.append(_tensor_row(name, n_per_side, a_star))
        limits = np.zeros((2, 2))
        orders = {}
        for i in range(2):
            for j in range(2):
                limits[i, j], order = richardson([a[i, j] for a in sequence])
                if i == j:
                    orders[f"order_{i + 1}{j + 1}"] = order
        rows.append({**_tensor_row(name, "richardson", limits), **orders})
    path = write_csv(Path(config.out_dir) / "convergence.csv", CONVERGENCE_COLUMNS, rows, header_block(config))
    return rows, path


def _tensor_row(name: str, n_per_side, a_star: np.ndarray) -> dict:
    return {
        "case": name,
        "n_per_side": n_per_side,
        "a11": a_star[0, 0],
        "a12": a_star[0, 1],
        "a21": a_star[1, 0],
        "a22": a_star[1, 1],
    }
