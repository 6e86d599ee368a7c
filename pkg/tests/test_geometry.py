import csv
import os
import tempfile
import unittest
import warnings

import numpy as np

from pyhurwitz.analysis.geometry import (
    MetricData, bergmann_branch_matrix, beta_derivatives_fd, beta_diagonal_derivatives, beta_grid, christoffel,
    differential_B, egoroff_report, genus_formalism_consistency, integral_Omega, kernel_value, rauch_check,
    write_beta_csv,
)
from pyhurwitz.core.covering import critical_data, random_covering
from pyhurwitz.core.deformation import FlowState
from pyhurwitz.systems.rank1 import all_pairs
from pyhurwitz.utils.exceptions import BranchAmbiguity, CriticalPointHit

from tests.test_rank1 import cauchy_setup


class TestBergmannKernel(unittest.TestCase):
    """
    Unit tests for the genus-zero Bergmann kernel and its branch-point values.
    """

    def test_degree_two_closed_form(self):
        """
        For the covering branched over 0 and 4, β₁₂² = −1/64.
        """
        print("\n--- Running Test: test_degree_two_closed_form ---")

        # 1. Build the covering
        cov = critical_data([2.0], [1.0])

        # 2. Compute β
        data = bergmann_branch_matrix(cov)

        # 3. Compare with the closed form
        self.assertAlmostEqual(abs(data.beta[0, 1] ** 2 + 1.0 / 64.0), 0.0, delta=1e-14)
        self.assertAlmostEqual(abs(data.beta[0, 1]), 0.125, delta=1e-14)
        self.assertEqual(data.symmetry_defect(), 0.0)
        np.testing.assert_array_equal(np.diag(data.beta), [0.0, 0.0])

        print("β matches the degree-two closed form.")

    def test_differentials(self):
        cov = critical_data([2.0], [1.0])
        gamma = 5.0 + 1.0j
        # dΩ_m/dν = B_m/dν
        h = 1e-5
        derivative = (integral_Omega(cov, 0, gamma + h) - integral_Omega(cov, 0, gamma - h)) / (2 * h)
        self.assertAlmostEqual(abs(derivative - differential_B(cov, 0, gamma)), 0.0, delta=1e-8)
        self.assertEqual(integral_Omega(cov, 0, complex(np.inf)), 0j)
        with self.assertRaises(CriticalPointHit):
            differential_B(cov, 1, 3.0)

    def test_kernel_symmetry(self):
        cov = random_covering(3, seed=2)
        p, q = 3.0 + 1.0j, -2.0 - 2.5j
        self.assertAlmostEqual(abs(kernel_value(cov, p, q) - kernel_value(cov, q, p)), 0.0, delta=1e-15)

    def test_genus_formalism_consistency(self):
        cov = random_covering(4, seed=6, min_separation_ratio=0.2)
        self.assertLess(genus_formalism_consistency(cov, 4.0 - 3.0j), 1e-12)


class TestVariationalFormulas(unittest.TestCase):
    """
    Unit tests for the Rauch formulas and the derivatives of β.
    """

    def setUp(self):
        cov = random_covering(3, seed=13, min_separation_ratio=0.2)
        self.state = FlowState.from_covering(cov, {"p": 4.0 + 3.0j, "q": -3.5 - 1.0j})

    def test_rauch_formulas(self):
        print("\n--- Running Test: test_rauch_formulas ---")

        # 1. Every pair of branch points
        for pair in all_pairs(self.state.branch_count):
            result = rauch_check(self.state, pair)

            # 2. Residuals are small
            self.assertLess(abs(result["kernel"]), 1e-8)
            self.assertLess(abs(result["differential"]), 1e-8)
            self.assertLess(abs(result["translation"]), 1e-7)

        print("Rauch formulas hold.")

    def test_beta_derivatives(self):
        """
        The closed-form derivatives of β_mn, including l ∈ {m, n}, agree with
        differences over flows.
        """
        print("\n--- Running Test: test_beta_derivatives ---")

        # 1. Closed form and differences
        closed = beta_diagonal_derivatives(self.state)
        measured = beta_derivatives_fd(self.state)

        # 2. Compare the off-diagonal entries
        off = ~np.eye(self.state.branch_count, dtype=bool)
        size = float(np.max(np.abs(closed[:, off])))
        self.assertLess(float(np.max(np.abs(closed[:, off] - measured[:, off]))) / size, 1e-6)

        print("β derivatives agree with differences.")


class TestDarbouxEgoroff(unittest.TestCase):

    def test_egoroff_report(self):
        print("\n--- Running Test: test_egoroff_report ---")

        # 1. A Cauchy solution on a degree-three covering
        _, sol, state = cauchy_setup(seed=5)

        # 2. Run the checks
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BranchAmbiguity)
            report = egoroff_report(state, sol)

        # 3. Residuals, scaled by the size of β and of the Hessian
        beta_size = max(1.0, float(np.max(np.abs(report["beta"]))))
        hessian_size = max(1.0, float(np.max(np.abs(report["tau_hessian_fd"]))))
        residuals = report["residuals"]
        self.assertLess(residuals["flatness"] / beta_size ** 2, 1e-6)
        self.assertLess(residuals["translation"] / beta_size ** 2, 1e-6)
        self.assertLess(residuals["dilatation"] / beta_size, 1e-6)
        self.assertLess(residuals["inversion"] / (beta_size * state.scale), 1e-6)
        self.assertLess(residuals["egoroff"] / hessian_size, 1e-6)
        self.assertLess(residuals["rotation_up_to_sign"] / beta_size, 1e-6)
        self.assertLess(residuals["rotation_squared"] / beta_size ** 2, 1e-6)

        # 4. The metric is g_mm = (√g_mm)²
        np.testing.assert_allclose(report["sqrt_g"] ** 2, report["g"], rtol=1e-12)

        print("Darboux-Egoroff checks pass.")

    def test_christoffel(self):
        _, sol, state = cauchy_setup(seed=5)
        metric = MetricData.from_solution(sol, state)
        gamma = christoffel(state, metric)
        beta = bergmann_branch_matrix(state).beta
        self.assertAlmostEqual(abs(gamma[0, 1] - beta[0, 1] * metric.sqrt_g[1] / metric.sqrt_g[0]), 0.0,
                               delta=1e-12 * max(1.0, abs(gamma[0, 1])))
        np.testing.assert_array_equal(np.diag(gamma), np.zeros(state.branch_count))


class TestBetaGrid(unittest.TestCase):

    def test_grid_and_csv(self):
        print("\n--- Running Test: test_grid_and_csv ---")

        # 1. β over a 3x3 grid of λ₁ values around the start
        cov = critical_data([2.0], [1.0])
        records = beta_grid(cov, 0, [-0.1, 0.0, 0.1], [-0.1, 0.0, 0.1])
        self.assertEqual(len(records), 9)

        # 2. The centre record is the closed form at λ = (0, 4)
        centre = [r for r in records if r["re"] == 0.0 and r["im"] == 0.0][0]
        beta = bergmann_branch_matrix(cov).beta[0, 1]
        self.assertAlmostEqual(centre["re_beta_12"], beta.real, delta=1e-12)
        self.assertAlmostEqual(centre["im_beta_12"], beta.imag, delta=1e-12)

        # 3. Every record satisfies β² = −1/(4(λ₁−λ₂)²)
        for r in records:
            lam1 = complex(r["re"], r["im"])
            value = complex(r["re_beta_12"], r["im_beta_12"])
            self.assertAlmostEqual(abs(value ** 2 + 0.25 / (lam1 - 4.0) ** 2), 0.0, delta=1e-9)

        # 4. Write and read back the CSV
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "beta.csv")
            write_beta_csv(records, path)
            with open(path, newline="", encoding="utf-8") as handle:
                rows = list(csv.DictReader(handle))
        self.assertEqual(len(rows), 9)
        self.assertEqual(list(rows[0]), ["re", "im", "re_beta_12", "im_beta_12"])

        print("β grid and CSV are correct.")


if __name__ == '__main__':
    unittest.main()
