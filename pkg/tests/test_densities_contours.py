import unittest
import numpy as np
from scipy.integrate import quad

from pyhurwitz.components.contours import Contour, contour_from_document
from pyhurwitz.components.densities import (
    ConstantDensity, FourierDensity, LinearCombination, SampledDensity, density_from_document,
)
from pyhurwitz.core.covering import critical_data, dnu_dlambda
from pyhurwitz.core.deformation import flow_to
from pyhurwitz.systems.rank1 import CauchySolution, prepare_state
from pyhurwitz.utils.exceptions import ConfigParse, CriticalPointHit, OnContour, PoleHit, QuadratureDegraded


class TestDensities(unittest.TestCase):
    """
    Unit tests for the density classes.
    """

    def test_fourier_mode(self):
        t = np.linspace(0.0, 2.0 * np.pi, 7)
        np.testing.assert_allclose(FourierDensity.mode(2, 3.0)(t), 3.0 * np.exp(2j * t), atol=1e-14)
        np.testing.assert_allclose(FourierDensity.mode(-1)(t), np.exp(-1j * t), atol=1e-14)
        with self.assertRaises(ValueError):
            FourierDensity([1.0, 2.0])

    def test_sampled_density_interpolates_trigonometric_polynomials(self):
        print("\n--- Running Test: test_sampled_density_interpolates_trigonometric_polynomials ---")

        # 1. Sample cos t + 2i sin 2t on 16 nodes
        nodes = 2.0 * np.pi * np.arange(16) / 16

        def h(t):
            return np.cos(t) + 2j * np.sin(2 * t)

        density = SampledDensity(h(nodes))

        # 2. Nodes are reproduced exactly and off-node values interpolated
        np.testing.assert_array_equal(density(nodes), h(nodes))
        t = np.array([0.3, 1.7, 4.4])
        np.testing.assert_allclose(density(t), h(t), atol=1e-12)

        print("Sampled density interpolation is exact for low modes.")

    def test_combinations(self):
        t = np.array([0.0, 1.0, 2.5])
        a, b = FourierDensity.mode(1), ConstantDensity(2.0)
        combined = 2.0 * a - b
        self.assertIsInstance(combined, LinearCombination)
        np.testing.assert_allclose(combined(t), 2.0 * np.exp(1j * t) - 2.0, atol=1e-14)
        np.testing.assert_allclose((-a)(t), -np.exp(1j * t), atol=1e-14)

    def test_density_documents(self):
        self.assertIsInstance(density_from_document({"fourier": [[0, 0], [1, 0], [0, 0]]}), FourierDensity)
        self.assertIsInstance(density_from_document({"constant": 1.5}), ConstantDensity)
        self.assertIsInstance(density_from_document({"samples": [1, 2, 3, 4]}), SampledDensity)
        combined = density_from_document({"combination": [
            {"coefficient": [2, 0], "density": {"constant": 1}},
            {"density": {"fourier": [0, 1, 0]}},
        ]})
        np.testing.assert_allclose(combined(np.array([0.0])), [3.0], atol=1e-14)
        with self.assertRaises(ConfigParse):
            density_from_document({"fourier": [1, 2]})
        with self.assertRaises(ConfigParse):
            density_from_document({"spline": [1, 2, 3]})
        with self.assertRaises(ConfigParse):
            density_from_document("constant")


class TestContours(unittest.TestCase):
    """
    Unit tests for contours and the Cauchy integral on them.
    """

    def setUp(self):
        self.cov = critical_data([2.0], [1.0])

    def test_circle_velocity(self):
        """
        On the covering it was built on, dλ/dt · ∂ν/∂λ is the γ-velocity of the circle.
        """
        contour = Contour.circle_on(self.cov, 5.0, 0.5, nodes=64)
        expected = 0.5j * np.exp(1j * contour.t)
        np.testing.assert_allclose(contour.velocity(self.cov), expected, atol=1e-12)
        np.testing.assert_allclose(contour.dlambda_dt / expected,
                                   1.0 / dnu_dlambda(self.cov, contour.initial_nodes), atol=1e-12)

    def test_circle_through_singularities(self):
        with self.assertRaises(PoleHit):
            Contour.circle_on(self.cov, 1.0, 1.0, nodes=64)
        with self.assertRaises(CriticalPointHit):
            Contour.circle_on(self.cov, 2.0, 1.0, nodes=64)

    def test_cauchy_integral_against_adaptive_quadrature(self):
        """
        ψ(z) on a circle of the covering agrees with scipy's adaptive quadrature
        of h(t) γ'(t)/(γ(t) − z).
        """
        print("\n--- Running Test: test_cauchy_integral_against_adaptive_quadrature ---")

        # 1. Define the contour, the density and the solution
        center, radius = 5.0 + 0.5j, 0.5
        contour = Contour.circle_on(self.cov, center, radius, nodes=256)
        density = FourierDensity([0.3 - 0.1j, 1.0, 0.5j])
        sol = CauchySolution(contour, density)
        state = prepare_state(self.cov, sol, p0=7.0)

        # 2. Reference integral with scipy
        z = 7.0 + 0.4j

        def integrand(t):
            gamma = center + radius * np.exp(1j * t)
            return complex(density(np.array([t]))[0] * 1j * radius * np.exp(1j * t) / (gamma - z))

        real, _ = quad(lambda t: integrand(t).real, 0.0, 2.0 * np.pi, epsabs=1e-13, limit=200)
        imag, _ = quad(lambda t: integrand(t).imag, 0.0, 2.0 * np.pi, epsabs=1e-13, limit=200)

        # 3. Compare
        self.assertAlmostEqual(abs(sol.psi(state, z) - complex(real, imag)), 0.0, delta=1e-10)

        print("Trapezoid Cauchy integral agrees with adaptive quadrature.")

    def test_contour_rides_along_flows(self):
        """
        After a flow the nodes have moved but still lie over the same λ values.
        """
        contour = Contour.circle_on(self.cov, 5.0, 0.5, nodes=64)
        start = prepare_state(self.cov, CauchySolution(contour, ConstantDensity()))
        state = flow_to(start, [0.1 + 0.05j, 4.1])
        moved = contour.nodes(state)
        self.assertGreater(float(np.max(np.abs(moved - contour.initial_nodes))), 1e-4)
        mu, sqrt_r = state.poles[0], (state.lambdas[1] - state.lambdas[0]) / 4.0
        lam = moved + sqrt_r ** 2 / (moved - mu)
        lam0 = contour.initial_nodes + 1.0 / (contour.initial_nodes - 2.0)
        np.testing.assert_allclose(lam, lam0, atol=1e-8)

    def test_quadrature_margins(self):
        print("\n--- Running Test: test_quadrature_margins ---")

        # 1. A coarse contour
        contour = Contour.circle_on(self.cov, 5.0, 0.5, nodes=32)
        sol = CauchySolution(contour, ConstantDensity())
        state = prepare_state(self.cov, sol, p0=7.0)

        # 2. Points close to the contour degrade the rule
        with self.assertRaises(QuadratureDegraded):
            sol.psi(state, 5.52)
        with self.assertRaises(OnContour):
            sol.psi(state, contour.initial_nodes[3])

        # 3. The check can be skipped for near-contour evaluations
        inside = sol.psi(state, 5.0 + 0.0j, check=False)
        self.assertAlmostEqual(abs(inside - 2j * np.pi), 0.0, delta=1e-12)

        print("Quadrature margins are enforced.")

    def test_contour_documents(self):
        contour = contour_from_document({"circle": {"center": [5, 0], "radius": 0.5, "nodes": 64}}, self.cov)
        self.assertEqual(contour.count, 64)
        self.assertEqual(contour.to_document()["circle"]["radius"], 0.5)
        with self.assertRaises(ConfigParse):
            contour_from_document({"circle": {"center": [5, 0], "radius": -1.0}}, self.cov)
        with self.assertRaises(ConfigParse):
            contour_from_document({"square": {}}, self.cov)


if __name__ == '__main__':
    unittest.main()
