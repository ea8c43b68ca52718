import unittest

import numpy as np

from rbhom.cell_problem import (
    TERM_COUNT,
    assemble_at,
    build_affine_system,
    check_voigt_reuss,
    homogenized_tensor,
    solve_cell,
    solve_cell_with,
    term_index,
    truth_tensor,
)
from rbhom.exceptions import MeshMismatchError
from rbhom.fe import build_periodic_mesh
from rbhom.parametrization import affine_coeffs, laminate_coeffs
from rbhom.sampling import draw_sample
from rbhom.types import CellParam, ParameterBox, SampleSpec


def swap_permutation(n: int) -> np.ndarray:
    """Node index of (j, i) for every node (i, j)."""
    index = np.arange(n * n)
    return (index // n) + n * (index % n)


class TestAffineSystem(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.system = build_affine_system(build_periodic_mesh(8))

    def test_term_layout(self):
        self.assertEqual(TERM_COUNT, 18)
        self.assertEqual(term_index(4, 1), 8)
        self.assertEqual(term_index(8, 2), 17)
        self.assertEqual(len(self.system.stiffness_blocks), TERM_COUNT)
        self.assertEqual(self.system.load_blocks.shape, (TERM_COUNT, 64))

    def test_blocks_partition_the_laplacian(self):
        total = self.system.stiffness_with(np.ones(TERM_COUNT))
        self.assertLess(abs(total - self.system.laplacian).max(), 1e-14)

    def test_homogeneous_assembly(self):
        stiffness, load_1, load_2 = assemble_at(self.system, CellParam.reference(theta=0.0))
        self.assertLess(abs(stiffness - self.system.laplacian).max(), 1e-14)
        np.testing.assert_allclose(load_1, 0.0, atol=1e-14)
        np.testing.assert_allclose(load_2, 0.0, atol=1e-14)

    def test_loads_are_mean_free_and_on_inclusion_edges(self):
        _, load_1, load_2 = assemble_at(self.system, CellParam.reference(theta=-0.5))
        self.assertLess(abs(load_1.sum()), 1e-12)
        self.assertLess(abs(load_2.sum()), 1e-12)
        support = np.flatnonzero(np.abs(load_1) > 1e-12)
        xs = self.system.mesh.nodes[support, 0]
        self.assertTrue(np.all(np.isclose(xs, 0.25) | np.isclose(xs, 0.75)))

    def test_assembly_is_affine_in_theta(self):
        geometry = dict(b1=0.2, c1=0.7, b2=0.3, c2=0.8)
        middle = assemble_at(self.system, CellParam(**geometry, theta=-0.3))
        left = assemble_at(self.system, CellParam(**geometry, theta=0.0))
        right = assemble_at(self.system, CellParam(**geometry, theta=-0.6))
        self.assertLess(abs(middle[0] - 0.5 * (left[0] + right[0])).max(), 1e-13)
        np.testing.assert_allclose(middle[1], 0.5 * (left[1] + right[1]), atol=1e-14)


    def test_eliminated_stiffness_is_positive_definite(self):
        params = draw_sample(SampleSpec(seed=2, count=3, box=ParameterBox()))
        for n in (4, 8):
            system = build_affine_system(build_periodic_mesh(n))
            for param in (*params, CellParam.reference(theta=-0.9)):
                stiffness = assemble_at(system, param)[0].toarray()
                np.testing.assert_allclose(stiffness, stiffness.T, atol=1e-13)
                eliminated = stiffness[1:, 1:]
                with self.subTest(n=n, param=param):
                    self.assertGreater(np.linalg.eigvalsh(eliminated).min(), 1e-8)


class TestCellSolutions(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.system = build_affine_system(build_periodic_mesh(8))
        cls.sample = draw_sample(SampleSpec(seed=5, count=20, box=ParameterBox()))

    def test_homogeneous_medium(self):
        for param in (CellParam.reference(theta=0.0), CellParam(b1=0.2, c1=0.8, b2=0.3, c2=0.7, theta=0.0)):
            solution = solve_cell(self.system, param)
            tensor = homogenized_tensor(self.system, solution)
            np.testing.assert_allclose(solution.w, 0.0, atol=1e-10)
            np.testing.assert_allclose(tensor.s, 0.0, atol=1e-10)
            np.testing.assert_allclose(tensor.a_star, np.eye(2), atol=1e-10)

    def test_square_symmetric_inclusion(self):
        solution = solve_cell(self.system, CellParam.reference(theta=-0.5))
        self.assertEqual(solution.w[0, 0], 0.0)
        self.assertGreater(self.system.seminorm(solution.w[0]), 1e-3)
        perm = swap_permutation(8)
        np.testing.assert_allclose(solution.w[1][perm], solution.w[0], atol=1e-10)
        a_star = homogenized_tensor(self.system, solution).a_star
        self.assertAlmostEqual(a_star[0, 0], a_star[1, 1], places=10)
        self.assertAlmostEqual(a_star[0, 1], a_star[1, 0], places=10)

    def test_galerkin_residual(self):
        param = self.sample[0]
        stiffness, load_1, load_2 = assemble_at(self.system, param)
        solution = solve_cell(self.system, param)
        for w, load in zip(solution.w, (load_1, load_2)):
            self.assertLess(np.linalg.norm(stiffness @ w - load), 1e-9 * max(1.0, np.linalg.norm(load)))

    def test_tensor_invariants_on_random_parameters(self):
        for param in self.sample:
            tensor = truth_tensor(self.system, param)
            coeffs = affine_coeffs(param)
            self.assertAlmostEqual(tensor.a_star[0, 1], tensor.a_star[1, 0], places=10)
            self.assertLessEqual(np.linalg.eigvalsh(tensor.s).max(), 1e-10)
            self.assertGreaterEqual(np.linalg.eigvalsh(tensor.a_star).min(), 1.0 + param.theta - 1e-10)
            self.assertTrue(check_voigt_reuss(tensor, coeffs))

    def test_stiffening_with_contrast(self):
        values = [
            truth_tensor(self.system, CellParam.reference(theta=theta)).a_star[0, 0]
            for theta in (0.0, -0.2, -0.4, -0.6, -0.9)
        ]
        self.assertTrue(all(a > b for a, b in zip(values, values[1:])))

    def test_laminate_is_exact(self):
        solution = solve_cell_with(self.system, laminate_coeffs(-0.5))
        tensor = homogenized_tensor(self.system, solution)
        np.testing.assert_allclose(tensor.a_star, np.diag([0.75, 2.0 / 3.0]), atol=1e-10)
        self.assertTrue(check_voigt_reuss(tensor, laminate_coeffs(-0.5)))

    def test_refinement_toward_a_fine_mesh(self):
        param = CellParam.reference(theta=-0.5)
        coarse_system = build_affine_system(build_periodic_mesh(16))
        fine_system = build_affine_system(build_periodic_mesh(64))
        coarse, fine = solve_cell(coarse_system, param), solve_cell(fine_system, param)
        coarse_norm, fine_norm = coarse_system.seminorm(coarse.w[0]), fine_system.seminorm(fine.w[0])
        self.assertGreater(coarse_norm, 1e-3)
        self.assertLessEqual(abs(coarse_norm - fine_norm), fine_norm / 16)
        # nested Galerkin spaces: the coarse tensor sits above the fine one
        coarse_a = homogenized_tensor(coarse_system, coarse).a_star[0, 0]
        fine_a = homogenized_tensor(fine_system, fine).a_star[0, 0]
        self.assertGreaterEqual(coarse_a, fine_a - 1e-12)

    def test_mesh_mismatch(self):
        solution = solve_cell(self.system, CellParam.reference(theta=-0.5))
        other = build_affine_system(build_periodic_mesh(4))
        with self.assertRaises(MeshMismatchError):
            homogenized_tensor(other, solution)
        with self.assertRaises(MeshMismatchError):
            self.system.check_compatible(other)


if __name__ == "__main__":
    unittest.main()
