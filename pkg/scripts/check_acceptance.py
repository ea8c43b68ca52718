#!/usr/bin/env python3
"""Run the desk-scale acceptance experiments and report pass/fail per criterion."""

from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path
from typing import Callable, List, Tuple

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from rbhom.cell_problem import build_affine_system, check_voigt_reuss, homogenized_tensor, solve_cell, solve_cell_with
from rbhom.enums import CoefficientSource
from rbhom.exceptions import BoundViolationError
from rbhom.experiments import BenchScaling, run_bench, run_homogenize
from rbhom.fe import build_periodic_mesh
from rbhom.parametrization import affine_coeffs, laminate_coeffs
from rbhom.rb import effectivity_audit, greedy_build, save_basis
from rbhom.rb.online import reduced_solve, residual_norms
from rbhom.sampling import draw_sample
from rbhom.types import CellParam, RunConfig

Check = Tuple[str, Callable[[argparse.Namespace], Tuple[bool, str]]]


def greedy_setup(args):
    config = RunConfig(n_per_side=args.n_per_side, p=args.p, n_max=args.n_max, rel_tol=0.0, seed=args.seed)
    system = build_affine_system(build_periodic_mesh(config.n_per_side))
    basis = greedy_build(system, draw_sample(config.train_spec()), config.n_max, 0.0, config.seed, config.box)
    return config, system, basis


def check_greedy_decay(args):
    _, _, basis = greedy_setup(args)
    trace = np.asarray(basis.trace)
    last = min(25, len(trace))
    drop = trace[0] / max(trace[last - 1], np.finfo(float).tiny)
    window = np.arange(min(5, last), last + 1)
    slope = np.polyfit(window, np.log(np.maximum(trace[window - 1], 1e-300)), 1)[0] if len(window) > 1 else -1.0
    return drop >= 1e3 and slope < 0, f"drop {drop:.2e} over N=1..{last}, log-linear slope {slope:.3f}"


def check_effectivity(args):
    config, system, basis = greedy_setup(args)
    report = effectivity_audit(basis, system, draw_sample(config.test_spec()), sizes=[4, 8, 12, 16, 20])
    eff = [entry.effectivity for entry in report.entries if entry.resolved]
    slope = report.output_slope()
    detail = f"effectivity band [{min(eff):.2f}, {max(eff):.2f}], output slope {slope:.2f}"
    try:
        report.check()
    except BoundViolationError as exc:
        return False, f"{detail}; {exc}"
    return abs(slope - 2.0) <= 0.4, detail


def check_oracles(args):
    messages = []
    ok = True
    for n in (4, 8, 16):
        system = build_affine_system(build_periodic_mesh(n))
        tensor = homogenized_tensor(system, solve_cell(system, CellParam.reference(theta=0.0)))
        error = np.abs(tensor.a_star - np.eye(2)).max()
        ok &= error <= 1e-10
        messages.append(f"homogeneous n={n}: {error:.1e}")
    system = build_affine_system(build_periodic_mesh(64))
    laminate = homogenized_tensor(system, solve_cell_with(system, laminate_coeffs(-0.5))).a_star
    error = np.abs(laminate - np.diag([0.75, 2.0 / 3.0])).max()
    ok &= error <= 1e-3
    messages.append(f"laminate n=64: {error:.1e}")
    system = build_affine_system(build_periodic_mesh(16))
    sample = draw_sample(RunConfig(p=200, seed=args.seed).train_spec())
    bracket = all(check_voigt_reuss(homogenized_tensor(system, solve_cell(system, x)), affine_coeffs(x)) for x in sample)
    ok &= bracket
    messages.append(f"voigt-reuss on 200 params: {bracket}")
    return ok, "; ".join(messages)


def check_full_space(args):
    config = RunConfig(n_per_side=8, p=5, n_max=10, rel_tol=0.0, seed=args.seed)
    system = build_affine_system(build_periodic_mesh(config.n_per_side))
    sample = draw_sample(config.train_spec())
    basis = greedy_build(system, sample, 2 * config.p, 0.0, config.seed, config.box)
    worst = 0.0
    for param in sample:
        truth = solve_cell(system, param).w
        w, _ = reduced_solve(basis, affine_coeffs(param))
        for axis in range(2):
            worst = max(worst, system.seminorm(truth[axis] - basis.reconstruct(w[axis])))
    return worst <= 1e-10, f"max seminorm gap {worst:.2e} at N={basis.size}"


def check_riesz(args):
    config, system, basis = greedy_setup(args)
    worst = 0.0
    for param in draw_sample(config.test_spec())[:10]:
        coeffs = affine_coeffs(param)
        w, _ = reduced_solve(basis, coeffs)
        online = residual_norms(basis, coeffs, w)
        stiffness = system.stiffness_with(coeffs.stiffness_terms)
        loads = system.loads_with(coeffs.load)
        for axis in range(2):
            direct = system.dual_norm(loads[axis] - stiffness @ basis.reconstruct(w[axis]))
            worst = max(worst, abs(online[axis] - direct) / max(direct, 1e-300))
    return worst <= 1e-10, f"max relative gap {worst:.2e}"


def check_online_scaling(args):
    with tempfile.TemporaryDirectory() as out:
        config = RunConfig(p=args.p, n_max=20, seed=args.seed, out_dir=out, bench_sizes=(8, 16, 32))
        rows, _ = run_bench(config)
    scaling = BenchScaling.from_rows(rows)
    return scaling.online_independent(), (
        f"rb query variation {scaling.rb_variation:.2f}x, truth query slope {scaling.truth_slope:.2f} in n_per_side, "
        f"speedup at n=32 {scaling.speedup:.1f}x"
    )


def check_macro(args):
    with tempfile.TemporaryDirectory() as out:
        config = RunConfig(n_per_side=args.n_per_side, p=args.p, n_max=20, seed=args.seed, out_dir=out, h_hom=0.1)
        system = build_affine_system(build_periodic_mesh(config.n_per_side))
        basis = greedy_build(system, draw_sample(config.train_spec()), 20, 0.0, config.seed, config.box)
        save_basis(basis, Path(out) / "basis.rbhom")
        outcome = run_homogenize(config, list(CoefficientSource))
    comparison = outcome.comparison
    return (
        comparison.h1_err <= comparison.indicator,
        f"h1 difference {comparison.h1_err:.2e}, indicator {comparison.indicator:.2e}",
    )


CHECKS: List[Check] = [
    ("greedy decay", check_greedy_decay),
    ("effectivity and output gain", check_effectivity),
    ("homogeneous, laminate and bracket oracles", check_oracles),
    ("full-space equivalence", check_full_space),
    ("riesz consistency", check_riesz),
    ("online cost independence", check_online_scaling),
    ("macro transport", check_macro),
]


def main() -> int:
    parser = argparse.ArgumentParser(description="Run desk-scale acceptance experiments.")
    parser.add_argument("--n-per-side", type=int, default=12)
    parser.add_argument("--p", type=int, default=50)
    parser.add_argument("--n-max", type=int, default=25)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--only", action="append", default=[], help="Run only checks whose name contains this")
    args = parser.parse_args()

    failures = 0
    for name, check in CHECKS:
        if args.only and not any(part in name for part in args.only):
            continue
        passed, detail = check(args)
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        failures += not passed
    if failures:
        print(f"{failures} acceptance check(s) failed")
        return 1
    print("All acceptance checks passed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
