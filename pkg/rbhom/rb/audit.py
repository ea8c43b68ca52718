"""
Effectivity audit of a reduced basis against the truth solver.

Entries whose true error sits below the round-off floor of the Gram quadratic form
are reported as unresolved and are not held to the effectivity bracket.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from rbhom.cell_problem import AffineSystem, CellSolution, homogenized_tensor, solve_cell
from rbhom.exceptions import BoundViolationError
from rbhom.parametrization import box_coercivity_bounds
from rbhom.rb.basis import ReducedBasis
from rbhom.rb.online import online_solve
from rbhom.types import CellParam
from rbhom.utils import loglog_slope, parallel_map

logger = logging.getLogger(__name__)

EFFECTIVITY_SLACK = 1e-6
RESOLUTION_FLOOR = 1e-7
OUTPUT_SLACK = 1e-10


@dataclass(frozen=True)
class AuditEntry:
    n: int
    param_id: int
    param: CellParam
    direction: int
    true_err: float
    bound: float
    effectivity: float
    box_effectivity: float
    s_err: float
    s_bound: float
    rel_bound: float
    rel_true_err: float
    rel_s_err: float
    alpha: float
    gamma: float
    resolved: bool

    @property
    def upper_effectivity(self) -> float:
        return self.gamma / self.alpha


@dataclass(frozen=True)
class AuditSummary:
    n: int
    max_rel_bound: float
    max_rel_true_err: float
    max_rel_s_err: float
    effectivity_min: float
    effectivity_median: float
    effectivity_max: float
    box_effectivity_min: float
    box_effectivity_max: float


@dataclass
class AuditReport:
    entries: List[AuditEntry] = field(default_factory=list)
    violations: List[Tuple[str, AuditEntry]] = field(default_factory=list)
    box_alpha: float = float("nan")

    def summaries(self) -> List[AuditSummary]:
        rows = []
        for n in sorted({entry.n for entry in self.entries}):
            group = [entry for entry in self.entries if entry.n == n]
            resolved = [entry for entry in group if entry.resolved]
            eff = np.array([entry.effectivity for entry in resolved]) if resolved else np.array([np.nan])
            box_eff = np.array([entry.box_effectivity for entry in resolved]) if resolved else np.array([np.nan])
            rows.append(
                AuditSummary(
                    n=n,
                    max_rel_bound=max(entry.rel_bound for entry in group),
                    max_rel_true_err=max(entry.rel_true_err for entry in group),
                    max_rel_s_err=max(entry.rel_s_err for entry in group),
                    effectivity_min=float(np.min(eff)),
                    effectivity_median=float(np.median(eff)),
                    effectivity_max=float(np.max(eff)),
                    box_effectivity_min=float(np.min(box_eff)),
                    box_effectivity_max=float(np.max(box_eff)),
                )
            )
        return rows

    def output_slope(self, sizes: Optional[Sequence[int]] = None) -> float:
        """Log-log slope of the max relative output error against the max relative solution error."""
        rows = [row for row in self.summaries() if sizes is None or row.n in sizes]
        return loglog_slope([row.max_rel_true_err for row in rows], [row.max_rel_s_err for row in rows])

    def check(self):
        if self.violations:
            for message, _ in self.violations:
                logger.error(message)
            message, entry = self.violations[0]
            raise BoundViolationError(f"{len(self.violations)} certified bound violation(s); first: {message}", entry)


def _relative(value: float, scale: float) -> float:
    return value / scale if scale > 0 else 0.0


def effectivity_audit(
    basis: ReducedBasis,
    system: AffineSystem,
    test_sample: Sequence[CellParam],
    sizes: Optional[Sequence[int]] = None,
    workers: int = 1,
    truths: Optional[Sequence[CellSolution]] = None,
) -> AuditReport:
    """
    Compare online results with truth solutions on a test sample.

    :param sizes: basis sizes to audit through nested truncation, default the full basis
    :param truths: precomputed truth solutions for the sample, solved here otherwise
    """
    basis.check_system(system)
    report = AuditReport(box_alpha=box_coercivity_bounds(basis.box)[0])
    if not test_sample:
        return report
    sizes = [basis.size] if sizes is None else list(sizes)
    if truths is None:
        truths = parallel_map(lambda param: solve_cell(system, param), list(test_sample), workers)
    outputs = [homogenized_tensor(system, truth).s for truth in truths]

    for n in sizes:
        if n == 0:
            continue
        reduced = basis.truncated(n)
        for param_id, (param, truth, s) in enumerate(zip(test_sample, truths, outputs)):
            result = online_solve(reduced, param)
            full = reduced.reconstruct(result.w)
            s_scale = float(np.abs(s).max())
            s_diff = np.abs(s - result.s)
            resolved_dirs: Dict[int, bool] = {}
            for axis in range(2):
                direction = axis + 1
                w_norm = system.seminorm(truth.w[axis])
                true_err = system.seminorm(truth.w[axis] - full[axis])
                bound = float(result.delta_w[axis])
                resolved = true_err > RESOLUTION_FLOOR * w_norm
                resolved_dirs[direction] = resolved
                effectivity = bound / true_err if true_err > 0 else float("nan")
                box_bound = float(result.residual_norms[axis]) / report.box_alpha
                entry = AuditEntry(
                    n=n,
                    param_id=param_id,
                    param=param,
                    direction=direction,
                    true_err=true_err,
                    bound=bound,
                    effectivity=effectivity,
                    box_effectivity=box_bound / true_err if true_err > 0 else float("nan"),
                    s_err=float(s_diff[axis, axis]),
                    s_bound=float(result.delta_s[axis, axis]),
                    rel_bound=_relative(bound, float(result.w_norms[axis])) if result.w_norms[axis] > 0 else bound,
                    rel_true_err=_relative(true_err, w_norm),
                    rel_s_err=_relative(float(s_diff[axis].max()), s_scale),
                    alpha=result.alpha,
                    gamma=result.gamma,
                    resolved=resolved,
                )
                report.entries.append(entry)
                if resolved and not (
                    1.0 - EFFECTIVITY_SLACK <= effectivity <= entry.upper_effectivity + EFFECTIVITY_SLACK
                ):
                    report.violations.append(
                        (
                            f"N={n} param {param_id} direction {direction}: effectivity {effectivity:.6f} "
                            f"outside [1, {entry.upper_effectivity:.6f}] (true {true_err:.3e}, bound {bound:.3e})",
                            entry,
                        )
                    )
            for i in range(2):
                for j in range(2):
                    if not (resolved_dirs[i + 1] and resolved_dirs[j + 1]):
                        continue
                    allowed = result.delta_s[i, j] + OUTPUT_SLACK * max(1.0, s_scale)
                    if s_diff[i, j] > allowed:
                        report.violations.append(
                            (
                                f"N={n} param {param_id}: output error {s_diff[i, j]:.3e} exceeds bound "
                                f"{result.delta_s[i, j]:.3e} at ({i + 1},{j + 1})",
                                report.entries[-2 + i],
                            )
                        )
    logger.info(f"audited {len(test_sample)} parameters at {len(sizes)} basis size(s): {len(report.violations)} violation(s)")
    return report
