import unittest
import numpy as np

from pyhurwitz.components.contours import Contour
from pyhurwitz.components.densities import ConstantDensity, FourierDensity
from pyhurwitz.core.covering import random_covering
from pyhurwitz.systems.rank1 import (
    AnchorSolution, CauchySolution, ElementarySolution, euler_darboux_check, fd_gradient, grad_f,
    lsscal_residual, pde_residuals, plemelj_jump, prepare_state, solve_f, square_loop, tau_grad,
    tau_grad_residue, tau_hessian, tau_hessian_check, tau_integrate,
)
from pyhurwitz.utils.exceptions import OnContour

MARKED = {"p0": -4.0j, "p": -4.0 + 1.0j, "q": 4.0 + 4.0j, "r": -3.5 - 3.0j}


def cauchy_setup(seed: int = 3, nodes: int = 256):
    """Degree-three covering with a circle well clear of its critical points and poles."""
    cov = random_covering(3, seed=seed, min_separation_ratio=0.2)
    contour = Contour.circle_on(cov, 6.0, 1.0, nodes)
    sol = CauchySolution(contour, FourierDensity.random(2, seed=seed))
    return cov, sol, prepare_state(cov, sol, **MARKED)


def relative(difference, reference) -> float:
    return float(np.max(np.abs(difference))) / max(float(np.max(np.abs(reference))), 1e-300)


class TestCauchySolution(unittest.TestCase):
    """
    Unit tests for the Cauchy-integral solutions of the scalar system.
    """

    def setUp(self):
        self.cov, self.sol, self.state = cauchy_setup()

    def test_gradient_matches_differences(self):
        """
        The analytic gradient α_m/(γ_m − γ₀)·I_m agrees with central differences
        of f over short flows.
        """
        print("\n--- Running Test: test_gradient_matches_differences ---")

        # 1. Analytic gradient
        analytic = grad_f(self.sol, self.state)

        # 2. Finite differences over flows
        measured = fd_gradient(self.sol, self.state)

        # 3. Compare
        self.assertLess(relative(analytic - measured, analytic), 1e-7)
        self.assertTrue(np.isfinite(solve_f(self.sol, self.state)))

        print("Analytic gradient agrees with differences.")

    def test_scalar_system_holds(self):
        print("\n--- Running Test: test_scalar_system_holds ---")

        # 1. Relative residuals of every pair
        residuals = pde_residuals(self.sol, self.state)

        # 2. All pairs are present and small
        self.assertEqual(len(residuals), 6)
        self.assertLess(max(abs(r) for r in residuals.values()), 1e-6)

        print("Scalar system residuals are small.")

    def test_linear_system(self):
        """
        ∂ψ(P)/∂λ_m = (γ₀ − γ_m)/(ν(P) − γ_m)·∂f/∂λ_m at a marked point P.
        """
        residual = lsscal_residual(self.sol, self.state, "p")
        self.assertLess(relative(residual, grad_f(self.sol, self.state)), 1e-6)

    def test_tau_gradient_is_a_residue(self):
        direct = tau_grad(self.sol, self.state)
        residue = tau_grad_residue(self.sol, self.state)
        self.assertLess(relative(direct - residue, direct), 1e-10)

    def test_tau_hessian(self):
        """
        Mixed partials of ln τ are symmetric and equal α_mα_n I_m I_n/(γ_m − γ_n)².
        """
        print("\n--- Running Test: test_tau_hessian ---")

        # 1. Analytic Hessian
        hessian = tau_hessian(self.sol, self.state)
        np.testing.assert_allclose(hessian, hessian.T, atol=1e-14)

        # 2. Differences in both orders
        report = tau_hessian_check(self.sol, self.state, [(0, 1), (1, 3)])

        # 3. Compare
        self.assertLess(report["max_residual"] / float(np.max(np.abs(hessian))), 1e-5)

        print("Tau Hessian agrees with differences.")

    def test_tau_is_single_valued_on_loops(self):
        loop = square_loop(self.state.lambdas, 0, 2, 0.05)
        increment, end = tau_integrate(self.sol, self.state, loop)
        scale = float(np.max(np.abs(tau_grad(self.sol, self.state)))) * 0.05
        self.assertLess(abs(increment) / scale, 1e-7)
        np.testing.assert_allclose(end.gammas, self.state.gammas, atol=1e-8)

    def test_plemelj_jump(self):
        """
        ψ jumps by 2πi·h across the contour.
        """
        print("\n--- Running Test: test_plemelj_jump ---")

        # 1. Constant and first-mode densities on the same contour
        contour = self.sol.contour
        eps = 20.0 * contour.spacing(self.cov)
        for density in (ConstantDensity(1.0), FourierDensity.mode(1, 0.5 - 0.2j)):
            sol = CauchySolution(contour, density)

            # 2. Jump at a few nodes
            for node in (0, 37, 200):
                result = plemelj_jump(sol, self.state, node, eps=eps)
                self.assertLess(result["residual"], 1e-9)

        print("Plemelj jump matches the density.")

    def test_on_contour(self):
        with self.assertRaises(OnContour):
            self.sol.psi(self.state, self.sol.contour.nodes(self.state)[5])


class TestDegenerateSolutions(unittest.TestCase):
    """
    Unit tests for the point-mass and logarithmic solutions.
    """

    def setUp(self):
        cov = random_covering(3, seed=8, min_separation_ratio=0.2)
        self.elementary = ElementarySolution("q")
        self.state = prepare_state(cov, self.elementary, **MARKED)

    def test_elementary_solution(self):
        print("\n--- Running Test: test_elementary_solution ---")

        # 1. Gradient against differences
        analytic = grad_f(self.elementary, self.state)
        measured = fd_gradient(self.elementary, self.state)
        self.assertLess(relative(analytic - measured, analytic), 1e-7)

        # 2. The scalar system
        residuals = pde_residuals(self.elementary, self.state)
        self.assertLess(max(abs(r) for r in residuals.values()), 1e-6)

        # 3. The value is ν_λ(Q)/(ν(Q) − γ₀)
        with self.assertRaises(OnContour):
            self.elementary.psi(self.state, self.state.point("q"))

        print("Elementary solution satisfies the scalar system.")

    def test_anchor_solution(self):
        sol = AnchorSolution(["q", "r"], [1.0, -0.5 + 0.25j])
        analytic = grad_f(sol, self.state)
        measured = fd_gradient(sol, self.state)
        self.assertLess(relative(analytic - measured, analytic), 1e-7)
        residuals = pde_residuals(sol, self.state, [(0, 1), (2, 3)])
        self.assertLess(max(abs(r) for r in residuals.values()), 1e-6)

    def test_anchor_amplitudes_must_match(self):
        with self.assertRaises(ValueError):
            AnchorSolution(["q"], [1.0, 2.0])


class TestEulerDarboux(unittest.TestCase):

    def test_classical_equation_and_oracle(self):
        """
        On the degree-two covering the scalar system reduces to the
        Euler-Darboux equation, and f agrees with the direct integral in λ.
        """
        print("\n--- Running Test: test_classical_equation_and_oracle ---")

        # 1. Run the check
        density = FourierDensity.random(3, seed=4) + ConstantDensity(1.0)
        result = euler_darboux_check(1.0 + 0.5j, -0.5 - 0.3j, density, nodes=256)

        # 2. Compare
        self.assertLess(result["relative_residual"], 1e-6)
        size = max(1.0, abs(result["f"]))
        self.assertLess(abs(result["f"] - result["oracle_f"]) / size, 1e-8)
        self.assertLess(abs(result["f_xi"] - result["oracle_f_xi"]) / size, 1e-8)
        self.assertLess(abs(result["f_xibar"] - result["oracle_f_xibar"]) / size, 1e-8)

        print("Euler-Darboux equation and oracle agree.")


if __name__ == '__main__':
    unittest.main()
