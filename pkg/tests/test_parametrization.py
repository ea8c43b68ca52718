import unittest

import numpy as np
from pydantic import ValidationError

from rbhom.exceptions import ParameterError
from rbhom.parametrization import (
    affine_coeffs,
    block_map,
    box_coercivity_bounds,
    coercivity_bounds,
    harmonic_mean,
    laminate_coeffs,
    mean_coefficient,
)
from rbhom.sampling import draw_sample
from rbhom.types import CellParam, ParameterBox, SampleSpec

REFERENCE_BLOCK_AREAS = np.outer([0.25, 0.5, 0.25], [0.25, 0.5, 0.25]).ravel()


class TestCellParam(unittest.TestCase):
    def test_degenerate_geometry(self):
        with self.assertRaises(ParameterError):
            CellParam(b1=0.5, c1=0.4, b2=0.25, c2=0.75, theta=-0.5)
        with self.assertRaises(ParameterError):
            CellParam(b1=0.0, c1=0.75, b2=0.25, c2=0.75, theta=-0.5)

    def test_contrast_range(self):
        with self.assertRaises(ParameterError):
            CellParam.reference(theta=-1.0)
        with self.assertRaises(ParameterError):
            CellParam.reference(theta=0.1)
        self.assertEqual(CellParam.reference(theta=-0.99).theta, -0.99)

    def test_array_order(self):
        param = CellParam(b1=0.2, c1=0.7, b2=0.3, c2=0.8, theta=-0.4)
        np.testing.assert_array_equal(param.as_array(), [0.2, 0.7, 0.3, 0.8, -0.4])
        self.assertEqual(CellParam.from_array(param.as_array()), param)
        self.assertAlmostEqual(param.inclusion_area, 0.25)


class TestParameterBox(unittest.TestCase):
    def test_validation(self):
        with self.assertRaises(ValidationError):
            ParameterBox(delta=0.25)
        with self.assertRaises(ValidationError):
            ParameterBox(theta0=1.0)

    def test_corners_are_inside(self):
        box = ParameterBox(delta=0.1, theta0=0.9)
        corners = box.corners()
        self.assertEqual(len(corners), 32)
        self.assertTrue(all(box.contains(corner) for corner in corners))
        self.assertFalse(box.contains(CellParam(b1=0.1, c1=0.75, b2=0.25, c2=0.75, theta=0.0)))


class TestBlockMap(unittest.TestCase):
    def test_reference_is_identity(self):
        mapping = block_map(CellParam.reference())
        np.testing.assert_allclose(mapping.scales, 1.0)
        np.testing.assert_allclose(mapping.offsets, 0.0, atol=1e-15)

    def test_block_lines_move_to_the_inclusion_corners(self):
        param = CellParam(b1=0.2, c1=0.7, b2=0.3, c2=0.8, theta=-0.4)
        mapping = block_map(param)
        np.testing.assert_allclose(mapping.forward([[0.25, 0.25], [0.75, 0.75]]), [[0.2, 0.3], [0.7, 0.8]])
        points = np.array([[0.1, 0.9], [0.5, 0.5], [0.8, 0.2]])
        np.testing.assert_allclose(mapping.inverse(mapping.forward(points)), points, atol=1e-14)
        self.assertAlmostEqual(float(np.sum(mapping.det * REFERENCE_BLOCK_AREAS)), 1.0, places=14)


class TestAffineCoeffs(unittest.TestCase):
    def test_centered_inclusion(self):
        param = CellParam.reference(theta=-0.5)
        coeffs = affine_coeffs(param)
        expected = np.ones((9, 2))
        expected[4] = 0.5
        np.testing.assert_allclose(coeffs.stiffness, expected)
        np.testing.assert_allclose(coeffs.load, expected)
        self.assertEqual(coercivity_bounds(param), (0.5, 1.0))
        self.assertAlmostEqual(coeffs.arithmetic_mean, 0.875)
        self.assertAlmostEqual(coeffs.harmonic_mean, 0.8)
        np.testing.assert_allclose(mean_coefficient(param), coeffs.mean)

    def test_stretched_geometry(self):
        param = CellParam(b1=0.2, c1=0.7, b2=0.25, c2=0.75, theta=0.0)
        coeffs = affine_coeffs(param)
        # block 0 is stretched by 0.8 along y1 only
        np.testing.assert_allclose(coeffs.stiffness[0], [1.0 / 0.8, 0.8])
        np.testing.assert_allclose(coeffs.load[0], [1.0, 0.8])
        self.assertAlmostEqual(coeffs.volume[0], 0.8)

    def test_affine_in_theta(self):
        geometry = dict(b1=0.2, c1=0.7, b2=0.3, c2=0.8)
        middle = affine_coeffs(CellParam(**geometry, theta=-0.3))
        ends = [affine_coeffs(CellParam(**geometry, theta=t)) for t in (0.0, -0.6)]
        np.testing.assert_allclose(middle.stiffness, 0.5 * (ends[0].stiffness + ends[1].stiffness))
        np.testing.assert_allclose(middle.load, 0.5 * (ends[0].load + ends[1].load))

    def test_means_are_ordered(self):
        sample = draw_sample(SampleSpec(seed=7, count=20, box=ParameterBox()))
        for param in sample:
            self.assertLessEqual(harmonic_mean(param), affine_coeffs(param).arithmetic_mean + 1e-15)

    def test_laminate(self):
        coeffs = laminate_coeffs(-0.5)
        self.assertAlmostEqual(coeffs.arithmetic_mean, 0.75)
        self.assertAlmostEqual(coeffs.harmonic_mean, 2.0 / 3.0)
        np.testing.assert_allclose(coeffs.stiffness[3:6], 0.5)
        np.testing.assert_allclose(coeffs.stiffness[:3], 1.0)

    def test_box_bounds_cover_every_sample(self):
        box = ParameterBox(delta=0.1, theta0=0.9)
        alpha, gamma = box_coercivity_bounds(box)
        for param in draw_sample(SampleSpec(seed=1, count=30, box=box)):
            a, g = coercivity_bounds(param)
            self.assertLessEqual(alpha, a + 1e-14)
            self.assertGreaterEqual(gamma, g - 1e-14)


if __name__ == "__main__":
    unittest.main()
