import unittest

import numpy as np

from rbhom.enums import Orientation, SolverMethod
from rbhom.exceptions import IncompatibleRhsError, MeshError
from rbhom.fe import (
    CENTER_BLOCK,
    QuotientConstraint,
    SpdSolver,
    assemble_block_load,
    assemble_block_stiffness,
    assemble_laplacian,
    assemble_mass,
    assemble_neumann_load,
    assemble_tensor_stiffness,
    build_macro_mesh,
    build_periodic_mesh,
    element_gradients,
    h1_semi_inner,
    solve_spd,
)


def mean_free(rng, size):
    values = rng.standard_normal(size)
    return values - values.mean()


class TestPeriodicMesh(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.mesh = build_periodic_mesh(8)

    def test_counts_and_numbering(self):
        mesh = self.mesh
        self.assertEqual(mesh.node_count, 64)
        self.assertEqual(mesh.element_count, 128)
        # square (i, j) = (1, 2): lower triangle then upper triangle
        lower, upper = 2 * (1 + 8 * 2), 2 * (1 + 8 * 2) + 1
        self.assertEqual(list(mesh.elements[lower]), [1 + 8 * 2, 2 + 8 * 2, 1 + 8 * 3])
        self.assertEqual(list(mesh.elements[upper]), [2 + 8 * 2, 2 + 8 * 3, 1 + 8 * 3])
        self.assertEqual(mesh.orientation(lower), Orientation.LOWER)
        self.assertEqual(mesh.orientation(upper), Orientation.UPPER)

    def test_elements_wrap_around_the_torus(self):
        last_square = 2 * (7 + 8 * 7)
        self.assertEqual(list(self.mesh.elements[last_square]), [63, 56, 7])

    def test_block_partition(self):
        blocks = self.mesh.block_of_element
        self.assertEqual(int(np.sum(blocks == CENTER_BLOCK)), 32)
        self.assertEqual(int(np.sum(np.isin(blocks, [1, 4, 7]))), 64)
        self.assertEqual(set(np.unique(blocks)), set(range(9)))

    def test_areas_cover_the_cell(self):
        self.assertAlmostEqual(float(self.mesh.areas.sum()), 1.0, places=14)

    def test_rejects_sizes_not_aligned_with_block_lines(self):
        for n in (0, 2, 6, 10):
            with self.assertRaises(MeshError):
                build_periodic_mesh(n)

    def test_every_node_has_six_triangles(self):
        for n in (4, 8, 12):
            mesh = build_periodic_mesh(n)
            np.testing.assert_array_equal(np.bincount(mesh.elements.ravel(), minlength=mesh.node_count), 6)

    def test_fingerprint_depends_on_resolution(self):
        self.assertEqual(self.mesh.fingerprint, build_periodic_mesh(8).fingerprint)
        self.assertNotEqual(self.mesh.fingerprint, build_periodic_mesh(4).fingerprint)

    def test_interpolation_reproduces_linear_data_and_wraps(self):
        values = self.mesh.nodes[:, 0] + 2.0 * self.mesh.nodes[:, 1]
        points = np.array([[0.3, 0.4], [0.51, 0.12]])
        np.testing.assert_allclose(self.mesh.interpolate(values, points), [1.1, 0.75], atol=1e-14)
        np.testing.assert_allclose(
            self.mesh.interpolate(values, points + 1.0), self.mesh.interpolate(values, points), atol=1e-14
        )


class TestAssembly(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.mesh = build_periodic_mesh(8)
        cls.laplacian = assemble_laplacian(cls.mesh)

    def test_block_forms_sum_to_laplacian(self):
        total = sum(assemble_block_stiffness(self.mesh, k, d) for k in range(9) for d in (1, 2))
        self.assertLess(abs(total - self.laplacian).max(), 1e-14)

    def test_constants_in_the_kernel(self):
        np.testing.assert_allclose(self.laplacian @ np.ones(self.mesh.node_count), 0.0, atol=1e-13)

    def test_energy_matches_gradient_quadrature(self):
        rng = np.random.default_rng(3)
        values = rng.standard_normal(self.mesh.node_count)
        gradients = element_gradients(self.mesh, values)
        quadrature = float(np.sum(self.mesh.areas * np.sum(gradients**2, axis=1)))
        self.assertAlmostEqual(h1_semi_inner(values, values, self.laplacian), quadrature, places=10)

    def test_block_loads_cancel_over_the_cell(self):
        for direction in (1, 2):
            total = sum(assemble_block_load(self.mesh, k, direction) for k in range(9))
            np.testing.assert_allclose(total, 0.0, atol=1e-14)

    def test_center_load_lives_on_the_inclusion_edges(self):
        load = assemble_block_load(self.mesh, CENTER_BLOCK, 1)
        support = np.flatnonzero(np.abs(load) > 1e-12)
        self.assertTrue(len(support) > 0)
        for x in self.mesh.nodes[support, 0]:
            self.assertTrue(np.isclose(x, 0.25) or np.isclose(x, 0.75))

    def test_manufactured_solution_converges_at_first_order(self):
        errors = []
        for n in (8, 16, 32):
            mesh = build_periodic_mesh(n)
            x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
            exact = np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)
            load = assemble_mass(mesh) @ (8 * np.pi**2 * exact)
            approx = solve_spd(assemble_laplacian(mesh), load)
            # centroid of the lower or upper triangle of square (i, j), unwrapped
            square = np.arange(mesh.element_count) // 2
            shift = np.where(mesh.upper, 2.0 / 3.0, 1.0 / 3.0)
            cx, cy = (square % n + shift) / n, (square // n + shift) / n
            sx, sy = np.sin(2 * np.pi * cx), np.sin(2 * np.pi * cy)
            exact_gradient = 2 * np.pi * np.stack([np.cos(2 * np.pi * cx) * sy, sx * np.cos(2 * np.pi * cy)], axis=1)
            gap = element_gradients(mesh, approx) - exact_gradient
            errors.append(np.sqrt(np.sum(mesh.areas * np.sum(gap**2, axis=1))))
        for coarse, fine in zip(errors, errors[1:]):
            self.assertGreater(coarse / fine, 1.7)

    def test_mass_integrates_to_area(self):
        self.assertAlmostEqual(float(assemble_mass(self.mesh).sum()), 1.0, places=14)

    def test_bad_block_or_direction(self):
        with self.assertRaises(MeshError):
            assemble_block_stiffness(self.mesh, 9, 1)
        with self.assertRaises(MeshError):
            assemble_block_load(self.mesh, 0, 3)

    def test_identity_tensors_give_the_laplacian(self):
        tensors = np.tile(np.eye(2), (self.mesh.element_count, 1, 1))
        stiffness = assemble_tensor_stiffness(self.mesh, tensors)
        self.assertLess(abs(stiffness - self.laplacian).max(), 1e-14)
        with self.assertRaises(MeshError):
            assemble_tensor_stiffness(self.mesh, tensors[:-1])


class TestMacroMesh(unittest.TestCase):
    def test_boundary_bookkeeping(self):
        mesh = build_macro_mesh(4)
        self.assertEqual(mesh.node_count, 25)
        self.assertEqual(mesh.element_count, 32)
        self.assertEqual(int(mesh.dirichlet.sum()), 9)
        self.assertEqual(len(mesh.free_nodes), 16)
        self.assertEqual(len(mesh.neumann_edges), 8)
        self.assertAlmostEqual(float(assemble_neumann_load(mesh, 1.0).sum()), 2.0, places=14)

    def test_linear_field_gradient(self):
        mesh = build_macro_mesh(3)
        gradients = element_gradients(mesh, 2.0 * mesh.nodes[:, 0] - mesh.nodes[:, 1])
        np.testing.assert_allclose(gradients, np.tile([2.0, -1.0], (mesh.element_count, 1)), atol=1e-13)

    def test_rejects_empty_mesh(self):
        with self.assertRaises(MeshError):
            build_macro_mesh(0)


class TestSolvers(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.mesh = build_periodic_mesh(8)
        cls.laplacian = assemble_laplacian(cls.mesh)
        cls.rng = np.random.default_rng(11)

    def test_direct_solve_meets_contract(self):
        rhs = mean_free(self.rng, self.mesh.node_count)
        solution = solve_spd(self.laplacian, rhs)
        self.assertEqual(solution[0], 0.0)
        self.assertLess(np.linalg.norm(self.laplacian @ solution - rhs), 1e-10 * np.linalg.norm(rhs))

    def test_cg_agrees_with_direct(self):
        rhs = mean_free(self.rng, self.mesh.node_count)
        direct = solve_spd(self.laplacian, rhs)
        iterative = solve_spd(self.laplacian, rhs, method=SolverMethod.CG, rel_tol=1e-12)
        np.testing.assert_allclose(iterative, direct, atol=1e-8)

    def test_batch_and_pinned_node(self):
        rhs = np.stack([mean_free(self.rng, self.mesh.node_count) for _ in range(3)], axis=1)
        solver = SpdSolver.for_quotient(self.laplacian, QuotientConstraint(pinned_node=5))
        solution = solver.solve(rhs)
        self.assertEqual(solution.shape, rhs.shape)
        np.testing.assert_array_equal(solution[5], 0.0)

    def test_zero_rhs(self):
        np.testing.assert_array_equal(solve_spd(self.laplacian, np.zeros(self.mesh.node_count)), 0.0)

    def test_incompatible_rhs(self):
        with self.assertRaises(IncompatibleRhsError):
            solve_spd(self.laplacian, np.ones(self.mesh.node_count))

    def test_dimension_checks(self):
        with self.assertRaises(MeshError):
            solve_spd(self.laplacian, np.zeros(5))
        with self.assertRaises(MeshError):
            h1_semi_inner(np.zeros(3), np.zeros(3), self.laplacian)


if __name__ == "__main__":
    unittest.main()
