import dataclasses
import os
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np

from rbhom.cell_problem import build_affine_system, homogenized_tensor, solve_cell
from rbhom.exceptions import (
    BasisFileError,
    BoundViolationError,
    ConfigError,
    EmptyBasisError,
    FingerprintMismatchError,
    MeshMismatchError,
    ReducedSystemError,
)
from rbhom.fe import build_periodic_mesh
from rbhom.parametrization import affine_coeffs
from rbhom.rb import (
    AuditReport,
    BasisBuilder,
    basis_fingerprint,
    effectivity_audit,
    error_bound,
    greedy_build,
    load_basis,
    online_solve,
    save_basis,
)
from rbhom.rb.basis import gram_size
from rbhom.rb.online import reduced_solve, residual_norms
from rbhom.rb.storage import MAGIC
from rbhom.sampling import draw_sample
from rbhom.types import CellParam, ParameterBox, RunConfig, SampleSpec

BOX = ParameterBox(delta=0.1, theta0=0.9)


def riesz_gap(system, basis, params):
    """Largest relative gap between online dual norms and direct Riesz solves."""
    worst = 0.0
    for param in params:
        coeffs = affine_coeffs(param)
        w, _ = reduced_solve(basis, coeffs)
        online = residual_norms(basis, coeffs, w)
        stiffness = system.stiffness_with(coeffs.stiffness_terms)
        loads = system.loads_with(coeffs.load)
        for axis in range(2):
            direct = system.dual_norm(loads[axis] - stiffness @ basis.reconstruct(w[axis]))
            worst = max(worst, abs(online[axis] - direct) / direct)
    return worst


class GreedyCase(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.system = build_affine_system(build_periodic_mesh(8))
        cls.sample = draw_sample(SampleSpec(seed=0, count=4, box=BOX))
        cls.test_sample = draw_sample(SampleSpec(seed=1, count=5, box=BOX))
        cls.basis = greedy_build(cls.system, cls.sample, n_max=8, rel_tol=0.0, seed=0, box=BOX)


class TestGreedy(GreedyCase):
    def test_full_space_reproduces_snapshots(self):
        self.assertEqual(self.basis.size, 8)
        for param in self.sample:
            truth = solve_cell(self.system, param).w
            w, _ = reduced_solve(self.basis, affine_coeffs(param))
            for axis in range(2):
                gap = self.system.seminorm(truth[axis] - self.basis.reconstruct(w[axis]))
                self.assertLess(gap, 1e-9 * max(1.0, self.system.seminorm(truth[axis])))

    def test_basis_is_orthonormal(self):
        self.assertLess(self.basis.orthonormality_error(self.system), 1e-10)

    def test_reduced_blocks_match_projection(self):
        vectors = self.basis.vectors
        for q, block in enumerate(self.system.stiffness_blocks):
            np.testing.assert_allclose(self.basis.reduced_stiffness[q], vectors @ (block @ vectors.T), atol=1e-12)
        np.testing.assert_allclose(self.basis.reduced_loads, self.system.load_blocks @ vectors.T, atol=1e-12)
        self.assertEqual(self.basis.gram.shape, (gram_size(8), gram_size(8)))

    def test_provenance_and_trace(self):
        self.assertEqual(len(self.basis.provenance), 8)
        self.assertEqual(len(self.basis.trace), 8)
        picks = {(s.param_id, s.direction) for s in self.basis.provenance}
        self.assertEqual(len(picks), 8)
        trace = self.basis.trace
        self.assertTrue(all(bound <= trace[0] for bound in trace), trace)
        self.assertLess(trace[-1], 1e-4 * trace[0])
        self.assertTrue(all(s.bound >= 0 for s in self.basis.provenance))

    def test_truth_solves_are_cached(self):
        with patch("rbhom.rb.greedy.solve_cell", wraps=solve_cell) as solver:
            greedy_build(self.system, self.sample, n_max=4, rel_tol=0.0, box=BOX)
        self.assertLessEqual(solver.call_count, len(self.sample))

    def test_stops_at_tolerance(self):
        basis = greedy_build(self.system, self.sample, n_max=8, rel_tol=float("inf"), box=BOX)
        self.assertEqual(basis.size, 1)

    def test_degenerate_sample(self):
        flat = draw_sample(SampleSpec(seed=0, count=2, box=ParameterBox(theta0=0.0)))
        with self.assertLogs("rbhom.rb.greedy", level="WARNING") as logs:
            basis = greedy_build(self.system, flat, n_max=2, rel_tol=0.0)
        self.assertEqual(basis.size, 0)
        self.assertIn("degenerate", logs.output[0])
        with self.assertRaises(EmptyBasisError):
            online_solve(basis, flat[0])

    def test_invalid_requests(self):
        with self.assertRaises(ConfigError):
            greedy_build(self.system, [], n_max=1, rel_tol=0.0)
        with self.assertRaises(ConfigError):
            greedy_build(self.system, self.sample, n_max=9, rel_tol=0.0)

    def test_builder_skips_dependent_snapshots(self):
        builder = BasisBuilder(self.system)
        snapshot = solve_cell(self.system, self.sample[0]).w[0]
        builder.append(builder.orthogonalize(snapshot))
        self.assertIsNone(builder.orthogonalize(2.0 * snapshot))
        self.assertIsNone(builder.orthogonalize(np.zeros(self.system.size)))


class TestOnline(GreedyCase):
    def test_homogeneous_query(self):
        result = online_solve(self.basis, CellParam.reference(theta=0.0))
        np.testing.assert_allclose(result.w, 0.0, atol=1e-10)
        np.testing.assert_allclose(result.a_star, np.eye(2), atol=1e-10)

    def test_outputs_are_symmetric(self):
        for param in self.test_sample:
            result = online_solve(self.basis, param)
            self.assertAlmostEqual(result.s[0, 1], result.s[1, 0], places=12)
            self.assertTrue(np.all(result.delta_w >= 0))
            np.testing.assert_allclose(result.delta_s, np.outer(result.residual_norms, result.residual_norms) / result.alpha)

    def test_bounds_hold_against_truth(self):
        for param in self.test_sample:
            result = online_solve(self.basis.truncated(3), param)
            truth = solve_cell(self.system, param)
            s_truth = homogenized_tensor(self.system, truth).s
            full = self.basis.truncated(3).reconstruct(result.w)
            for axis in range(2):
                self.assertLessEqual(self.system.seminorm(truth.w[axis] - full[axis]), result.delta_w[axis] * (1 + 1e-8))
            self.assertTrue(np.all(np.abs(s_truth - result.s) <= result.delta_s + 1e-10))

    def test_riesz_norms_match_direct_computation(self):
        for size in (2, self.basis.size):
            basis = self.basis.truncated(size)
            self.assertLessEqual(riesz_gap(self.system, basis, self.test_sample), 1e-10)

    def test_riesz_factor_reproduces_the_gram_matrix(self):
        factor = self.basis.riesz_factor
        np.testing.assert_array_equal(factor, np.triu(factor))
        scale = np.abs(self.basis.gram).max()
        np.testing.assert_allclose(factor.T @ factor, self.basis.gram, rtol=0, atol=1e-12 * scale)
        np.testing.assert_array_equal(self.basis.truncated(3).riesz_factor, factor[: gram_size(3), : gram_size(3)])

    def test_error_bound_matches_online_solve(self):
        param = self.test_sample[0]
        result = online_solve(self.basis, param)
        delta_w, delta_s = error_bound(self.basis, param, result.w)
        np.testing.assert_allclose(delta_w, result.delta_w)
        np.testing.assert_allclose(delta_s, result.delta_s)

    def test_truncation_is_nested(self):
        small = self.basis.truncated(3)
        self.assertEqual(small.size, 3)
        self.assertEqual(small.gram.shape, (gram_size(3), gram_size(3)))
        np.testing.assert_array_equal(small.vectors, self.basis.vectors[:3])
        with self.assertRaises(ValueError):
            self.basis.truncated(9)

    def test_indefinite_reduced_system(self):
        broken = dataclasses.replace(self.basis, reduced_stiffness=-self.basis.reduced_stiffness)
        with self.assertRaises(ReducedSystemError):
            online_solve(broken, self.test_sample[0])


class TestRieszAtDefaultScale(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        config = RunConfig()
        cls.system = build_affine_system(build_periodic_mesh(config.n_per_side))
        sample = draw_sample(config.train_spec())
        cls.basis = greedy_build(cls.system, sample, config.n_max, config.rel_tol, config.seed, config.box)
        cls.test_sample = draw_sample(config.test_spec())[:10]

    def test_dual_norms_at_every_size(self):
        for size in sorted({10, 25, self.basis.size}):
            if size > self.basis.size:
                continue
            with self.subTest(N=size):
                gap = riesz_gap(self.system, self.basis.truncated(size), self.test_sample)
                self.assertLessEqual(gap, 1e-10)


class TestAudit(GreedyCase):
    def test_no_violations_and_bracketed_effectivities(self):
        report = effectivity_audit(self.basis, self.system, self.test_sample, sizes=range(1, 9))
        self.assertEqual(report.violations, [])
        report.check()
        self.assertEqual(len(report.entries), 8 * len(self.test_sample) * 2)
        for entry in report.entries:
            if entry.resolved:
                self.assertGreaterEqual(entry.effectivity, 1.0 - 1e-6)
                self.assertLessEqual(entry.effectivity, entry.upper_effectivity + 1e-6)
                self.assertGreaterEqual(entry.box_effectivity, entry.effectivity * (1 - 1e-12))
        summaries = report.summaries()
        self.assertEqual([row.n for row in summaries], list(range(1, 9)))
        self.assertLess(summaries[-1].max_rel_bound, summaries[0].max_rel_bound)

    def test_check_raises_on_recorded_violation(self):
        report = effectivity_audit(self.basis, self.system, self.test_sample[:1], sizes=[2])
        violated = AuditReport(entries=report.entries, violations=[("forced", report.entries[0])])
        with self.assertRaises(BoundViolationError) as ctx:
            violated.check()
        self.assertIs(ctx.exception.entry, report.entries[0])

    def test_mesh_mismatch(self):
        other = build_affine_system(build_periodic_mesh(4))
        with self.assertRaises(MeshMismatchError):
            effectivity_audit(self.basis, other, self.test_sample)


class TestStorage(GreedyCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / "basis.rbhom"
        save_basis(self.basis, self.path)

    def tearDown(self):
        self.tmp.cleanup()

    def test_load_restores_everything(self):
        loaded = load_basis(self.path, self.system)
        np.testing.assert_array_equal(loaded.vectors, self.basis.vectors)
        np.testing.assert_array_equal(loaded.gram, self.basis.gram)
        np.testing.assert_array_equal(loaded.riesz_factor, self.basis.riesz_factor)
        np.testing.assert_array_equal(loaded.reduced_stiffness, self.basis.reduced_stiffness)
        self.assertEqual(loaded.provenance, self.basis.provenance)
        self.assertEqual(loaded.trace, self.basis.trace)
        self.assertEqual(loaded.box, BOX)
        self.assertEqual(loaded.seed, 0)
        self.assertEqual(basis_fingerprint(loaded), basis_fingerprint(self.basis))

    def test_wrong_mesh(self):
        with self.assertRaises(FingerprintMismatchError):
            load_basis(self.path, build_affine_system(build_periodic_mesh(4)))

    def test_corrupt_files(self):
        data = self.path.read_bytes()
        cases = {
            "magic": b"NOTBASIS" + data[len(MAGIC):],
            "truncated": data[:-8],
            "trailing": data + b"\0" * 8,
            "version": MAGIC + (99).to_bytes(4, "little") + data[len(MAGIC) + 4:],
            "header": data[: len(MAGIC) + 4],
        }
        for name, payload in cases.items():
            with self.subTest(name):
                broken = Path(self.tmp.name) / f"{name}.rbhom"
                broken.write_bytes(payload)
                with self.assertRaises(BasisFileError):
                    load_basis(broken)

    def test_missing_file(self):
        with self.assertRaises(BasisFileError):
            load_basis(os.path.join(self.tmp.name, "absent.rbhom"))


if __name__ == "__main__":
    unittest.main()
