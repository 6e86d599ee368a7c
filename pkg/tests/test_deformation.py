import unittest
import numpy as np

from pyhurwitz.core.covering import critical_data, eval_map, random_covering
from pyhurwitz.core.deformation import (
    BMZSplit, FlowState, ModuliPath, bmz_realize, flow, flow_to, partial_derivative, path_from_document,
    reconstruct_map, resolve_covering,
)
from pyhurwitz.utils.exceptions import ConfigParse, CriticalCollision


class TestFlow(unittest.TestCase):
    """
    Unit tests for the transport of critical data along moduli paths.
    """

    def test_degree_two_flow_matches_closed_form(self):
        """
        For targets (a, b) the degree-two map has pole (a+b)/2, √r = (b−a)/4,
        critical points μ ∓ √r and residues ∓√r/2.
        """
        print("\n--- Running Test: test_degree_two_flow_matches_closed_form ---")

        # 1. Start from the covering branched over 0 and 4
        cov = critical_data([2.0], [1.0])

        # 2. Flow to (0.5, 4.2)
        state = flow_to(cov, [0.5, 4.2])

        # 3. Compare with the closed form
        np.testing.assert_allclose(state.lambdas, [0.5, 4.2], atol=1e-12)
        np.testing.assert_allclose(state.gammas, [1.425, 3.275], atol=1e-8)
        np.testing.assert_allclose(state.alphas, [-0.4625, 0.4625], atol=1e-8)
        np.testing.assert_allclose(state.poles, [2.35], atol=1e-8)
        np.testing.assert_allclose(state.residues, [0.925 ** 2], atol=1e-8)
        np.testing.assert_allclose(state.kappas ** 2, 2.0 * state.alphas, atol=1e-8)

        print("Flowed degree-two data match the closed form.")

    def test_path_order_independence(self):
        print("\n--- Running Test: test_path_order_independence ---")

        # 1. A generic degree-three covering and two corner paths to the same target
        cov = random_covering(3, seed=4, min_separation_ratio=0.2)
        start = cov.lambdas
        first, second = start.copy(), start.copy()
        first[0] += 0.03 + 0.02j
        second[2] += -0.01 + 0.04j
        both = first.copy()
        both[2] += -0.01 + 0.04j

        # 2. Flow both ways
        one = flow(cov, ModuliPath([start, first, both]))
        other = flow(cov, ModuliPath([start, second, both]))

        # 3. The end data agree
        np.testing.assert_allclose(one.gammas, other.gammas, atol=1e-8)
        np.testing.assert_allclose(one.alphas, other.alphas, atol=1e-8)
        np.testing.assert_allclose(one.kappas, other.kappas, atol=1e-8)

        print("Flow end point does not depend on the path.")

    def test_reconstructed_map_matches_flow(self):
        print("\n--- Running Test: test_reconstructed_map_matches_flow ---")

        # 1. Flow a covering carrying a marked point
        cov = random_covering(3, seed=9, min_separation_ratio=0.2)
        marked = 4.0 + 3.0j
        lam_marked = eval_map(cov, marked)
        target = cov.lambdas + 0.04 * np.exp(1j * np.arange(cov.branch_count))
        state = flow_to(FlowState.from_covering(cov, points={"p": marked}), target)

        # 2. Rebuild the rational map at the end point
        rebuilt = reconstruct_map(state)

        # 3. Critical data agree, and the marked point still lies over the same λ
        np.testing.assert_allclose(rebuilt.lambdas, target, atol=1e-9)
        np.testing.assert_allclose(rebuilt.gammas, state.gammas, atol=1e-8)
        np.testing.assert_allclose(rebuilt.alphas, state.alphas, atol=1e-8)
        np.testing.assert_allclose(rebuilt.kappas, state.kappas, atol=1e-8)
        self.assertAlmostEqual(abs(eval_map(rebuilt, state.point("p")) - lam_marked), 0.0, delta=1e-8)

        print("Reconstructed map agrees with the transported data.")

    def test_partial_derivatives_of_critical_points(self):
        """
        ∂γ_m/∂λ_n = α_n/(γ_n−γ_m) for m ≠ n and ∂γ_n/∂λ_n = 1 + Σ_k α_k/(γ_n−γ_k).
        """
        cov = random_covering(3, seed=21, min_separation_ratio=0.2)
        state = FlowState.from_covering(cov)
        g, a = state.gammas, state.alphas
        for n in range(state.branch_count):
            measured = partial_derivative(state, n, lambda s: s.gammas)
            others = np.arange(state.branch_count) != n
            expected = np.zeros(state.branch_count, dtype=complex)
            expected[others] = a[n] / (g[n] - g[others])
            expected[n] = 1.0 + np.sum(a[others] / (g[n] - g[others]))
            np.testing.assert_allclose(measured, expected, rtol=1e-6, atol=1e-8)

    def test_collision_is_reported(self):
        cov = critical_data([2.0], [1.0])
        with self.assertRaises(CriticalCollision):
            flow(cov, ModuliPath.straight(cov.lambdas, [4.0, 4.0]))

    def test_path_must_start_at_state(self):
        cov = critical_data([2.0], [1.0])
        with self.assertRaises(ValueError):
            flow(cov, ModuliPath.straight([0.1, 4.0], [0.2, 4.0]))

    def test_trivial_path_returns_copy(self):
        cov = critical_data([2.0], [1.0])
        state = flow(cov, ModuliPath([cov.lambdas, cov.lambdas]))
        np.testing.assert_array_equal(state.gammas, cov.gammas)


class TestBMZSplit(unittest.TestCase):

    def test_two_family_equations_hold(self):
        """
        Moving λ₁ along x and λ₂ along y on the degree-two covering satisfies
        the two-family deformation equations.
        """
        print("\n--- Running Test: test_two_family_equations_hold ---")

        # 1. Define the splitting
        cov = critical_data([2.0], [1.0])
        split = BMZSplit(index_x=[0], index_y=[1],
                         curve_x=lambda x: [x], curve_y=lambda y: [4.0 + y],
                         derivative_x=lambda x: [1.0], derivative_y=lambda y: [1.0])

        # 2. Realize it near the start
        result = bmz_realize(cov, split, 0.1 + 0.05j, 0.2 - 0.1j)

        # 3. Every residual is small
        self.assertLess(result["max_residual"], 1e-6)

        print("Two-family equations are satisfied.")

    def test_split_must_partition_indices(self):
        split = BMZSplit(index_x=[0], index_y=[0], curve_x=lambda x: [x], curve_y=lambda y: [y])
        with self.assertRaises(ValueError):
            split.validate(2)


class TestDocuments(unittest.TestCase):

    def test_path_documents(self):
        start = np.array([0.0, 4.0], dtype=complex)
        single = path_from_document({"targets": [[0.5, 0.0], [4.2, 0.0]]}, start)
        self.assertEqual(single.vertices.shape, (2, 2))
        np.testing.assert_allclose(single.end, [0.5, 4.2])
        several = path_from_document({"targets": [[[0.5, 0.0], [4.0, 0.0]], [[0.5, 0.0], [4.2, 0.0]]]}, start)
        self.assertEqual(several.vertices.shape, (3, 2))
        with self.assertRaises(ConfigParse):
            path_from_document({"targets": [[1.0, 0.0]]}, start)
        with self.assertRaises(ConfigParse):
            path_from_document({"direction": 1}, start)
        with self.assertRaises(ConfigParse):
            path_from_document([1, 2], start)

    def test_resolve_covering(self):
        print("\n--- Running Test: test_resolve_covering ---")

        # 1. Explicit poles and residues
        cov = resolve_covering({"degree": 2, "poles": [[2, 0]], "residues": [1]})
        np.testing.assert_allclose(cov.lambdas, [0.0, 4.0], atol=1e-12)

        # 2. Target branch points reached from a seed covering
        moved = resolve_covering({"target_branch_points": [0.5, 4.2],
                                  "seed_covering": {"poles": [2], "residues": [1]}})
        np.testing.assert_allclose(moved.lambdas, [0.5, 4.2], atol=1e-9)
        np.testing.assert_allclose(moved.poles, [2.35], atol=1e-8)

        # 3. Malformed documents
        with self.assertRaises(ConfigParse):
            resolve_covering({"degree": 3, "poles": [2], "residues": [1]})
        with self.assertRaises(ConfigParse):
            resolve_covering({"poles": [2]})
        with self.assertRaises(ConfigParse):
            resolve_covering("not a covering")

        print("Covering documents are resolved correctly.")


if __name__ == '__main__':
    unittest.main()
