import unittest
import numpy as np

from pyhurwitz.core.covering import critical_data
from pyhurwitz.core.deformation import FlowState, ModuliPath
from pyhurwitz.solvers.differences import central_difference
from pyhurwitz.systems.isomonodromy import (
    HurwitzPullback, SchlesingerState, check_generic_spectrum, conservation_monitors, hierarchy_Jm, jm_tau_grad,
    monodromy_probe, pullback_flow, random_schlesinger_state, scalar_reduction, schlesinger_rhs, tau_relation_check,
    verify_hierarchy,
)
from pyhurwitz.utils.exceptions import LoopThroughPole, PoleCollision, ResonantSpectrum

ANCHORS = {"q1": 5.0 + 2.0j, "q2": -2.0 + 3.0j, "q3": 1.0 - 4.0j, "p0": 6.0 - 3.0j}


def pullback_setup(normalize_at_base: bool = False, seed: int = 1):
    cov = critical_data([2.0], [1.0])
    state = FlowState.from_covering(cov, ANCHORS)
    pb = HurwitzPullback(state, ["q1", "q2", "q3"], normalize_at_base=normalize_at_base)
    gamma0 = ANCHORS["p0"] if normalize_at_base else complex(np.inf)
    initial = random_schlesinger_state(pb.poles(), rank=2, seed=seed, gamma0=gamma0)
    path = ModuliPath.straight(cov.lambdas, cov.lambdas + np.array([0.03, 0.03j]))
    return pb, initial, path


def loop_monodromy(state: SchlesingerState, j: int, radius: float) -> np.ndarray:
    for angle in np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False):
        try:
            return monodromy_probe(state, state.z[j], radius, angle)
        except LoopThroughPole:
            continue
    raise LoopThroughPole(f"No loop direction around pole {j + 1} avoids the other poles.")


class TestSchlesingerPullback(unittest.TestCase):
    """
    Unit tests for the Schlesinger system driven by covering flows.
    """

    def test_conservation_laws(self):
        """
        Σ_j A_j = 0 and tr A_j² are preserved by the pullback flow.
        """
        print("\n--- Running Test: test_conservation_laws ---")

        # 1. Set up the pullback and flow it
        pb, initial, path = pullback_setup()
        final, moved = pullback_flow(pb, initial, path)

        # 2. Conservation monitors
        monitors = conservation_monitors(initial, final)
        self.assertLess(monitors["constraint"], 1e-9)
        self.assertLess(monitors["trace_square_drift"], 1e-9)

        # 3. The poles moved with the anchors
        self.assertGreater(float(np.max(np.abs(final.z - initial.z))), 1e-4)
        np.testing.assert_allclose(final.z, moved.poles(), atol=1e-14)

        print("Constraint and traces are conserved.")

    def test_monodromy_is_preserved(self):
        print("\n--- Running Test: test_monodromy_is_preserved ---")

        # 1. Flow the system
        pb, initial, path = pullback_setup()
        final, _ = pullback_flow(pb, initial, path)

        # 2. Loop monodromies before and after
        for j in range(initial.count):
            radius = 0.3 * float(np.min(np.abs(np.delete(initial.z, j) - initial.z[j])))
            before = loop_monodromy(initial, j, radius)
            after = loop_monodromy(final, j, radius)
            self.assertLess(float(np.max(np.abs(before - after))), 1e-6)

        print("Monodromy is preserved by the flow.")

    def test_local_monodromy_spectrum(self):
        """
        A small loop around z_j has monodromy conjugate to exp(2πi A_j).
        """
        _, initial, _ = pullback_setup()
        for j in range(initial.count):
            radius = 0.3 * float(np.min(np.abs(np.delete(initial.z, j) - initial.z[j])))
            M = loop_monodromy(initial, j, radius)
            eigenvalues = np.linalg.eigvals(initial.A[j])
            self.assertAlmostEqual(abs(np.linalg.det(M) - 1.0), 0.0, delta=1e-8)
            self.assertAlmostEqual(abs(np.trace(M) - np.sum(np.exp(2j * np.pi * eigenvalues))), 0.0, delta=1e-8)

    def test_finite_normalization_keeps_conjugacy_class(self):
        print("\n--- Running Test: test_finite_normalization_keeps_conjugacy_class ---")

        # 1. Normalize at P₀ and flow
        pb, initial, path = pullback_setup(normalize_at_base=True)
        final, _ = pullback_flow(pb, initial, path)
        self.assertFalse(final.normalized_at_infinity)
        self.assertLess(conservation_monitors(initial, final)["constraint"], 1e-9)

        # 2. Traces of loop monodromies are unchanged
        for j in range(initial.count):
            radius = 0.3 * float(np.min(np.abs(np.delete(initial.z, j) - initial.z[j])))
            before = loop_monodromy(initial, j, radius)
            after = loop_monodromy(final, j, radius)
            self.assertAlmostEqual(abs(np.trace(before) - np.trace(after)), 0.0, delta=1e-6)

        print("Conjugacy class of the monodromy is preserved.")

    def test_hierarchy(self):
        """
        J_m = α_m/(γ_m − γ₀) A(γ_m) satisfies the zero-curvature and
        hierarchy equations.
        """
        print("\n--- Running Test: test_hierarchy ---")

        # 1. Currents at the start
        pb, initial, _ = pullback_setup()
        J = hierarchy_Jm(pb, pb.state, initial.A)
        size = float(np.max(np.abs(J)))

        # 2. Residuals by differences over pullback flows
        results = verify_hierarchy(pb, initial.A)

        # 3. Every pair is small
        self.assertEqual(len(results), 1)
        for result in results.values():
            self.assertLess(result["zero_curvature"] / size ** 2, 1e-6)
            self.assertLess(result["hierarchy"] / size, 1e-6)

        print("Hierarchy equations hold.")

    def test_hierarchy_needs_normalization_at_infinity(self):
        pb, initial, _ = pullback_setup(normalize_at_base=True)
        with self.assertRaises(ValueError):
            verify_hierarchy(pb, initial.A)

    def test_tau_relation(self):
        pb, initial, path = pullback_setup()
        relation = tau_relation_check(pb, initial, path)
        self.assertLess(abs(relation["residual"]) / max(1.0, abs(relation["lhs"])), 1e-7)
        self.assertGreater(abs(relation["lhs"]), 0.0)


class TestSchlesingerState(unittest.TestCase):
    """
    Unit tests for the Fuchsian system itself.
    """

    def test_commuting_residues(self):
        """
        Diagonal residues do not move, and the tau function is
        Π_{k<l} (z_k − z_l)^{tr A_k A_l}.
        """
        print("\n--- Running Test: test_commuting_residues ---")

        # 1. Diagonal residues summing to zero
        a, b = 0.3 + 0.1j, -0.2 + 0.25j
        A = np.array([np.diag([a, -a]), np.diag([b, -b]), -np.diag([a + b, -(a + b)])], dtype=complex)
        z = np.array([0.0, 1.0 + 0.5j, -0.7 + 1.1j])
        state = SchlesingerState(z, A)

        # 2. The Schlesinger derivatives vanish
        D, E = schlesinger_rhs(state)
        self.assertEqual(float(np.max(np.abs(D))), 0.0)
        self.assertEqual(float(np.max(np.abs(E))), 0.0)

        # 3. The tau gradient matches the closed form
        products = np.einsum("jab,kba->jk", A, A)

        def log_tau(shift, j):
            w = z.copy()
            w[j] += shift
            return sum(products[k, l] * np.log(w[k] - w[l]) for k in range(3) for l in range(k + 1, 3))

        exact = np.array([central_difference(lambda s, j=j: log_tau(s, j), 1e-3) for j in range(3)])
        np.testing.assert_allclose(jm_tau_grad(state), exact, atol=1e-10)

        print("Commuting residues give the closed-form tau function.")

    def test_scalar_reduction(self):
        A = scalar_reduction([0.2, -0.5, 0.3])
        self.assertEqual(A.shape, (3, 1, 1))
        D, _ = schlesinger_rhs(SchlesingerState([0.0, 1.0, 2.0j], A))
        self.assertEqual(float(np.max(np.abs(D))), 0.0)

    def test_random_state_satisfies_constraint(self):
        state = random_schlesinger_state([0.0, 1.0, 1.0j, -1.0], rank=3, seed=4)
        self.assertLess(state.constraint_defect(), 1e-14)
        self.assertTrue(np.allclose([np.trace(a) for a in state.A], 0.0))

    def test_error_conditions(self):
        A = scalar_reduction([0.2, -0.2])
        with self.assertRaises(PoleCollision):
            schlesinger_rhs(SchlesingerState([1.0, 1.0], A))
        resonant = SchlesingerState([0.0, 1.0], np.array([np.diag([0.5, -0.5]), np.diag([-0.5, 0.5])]))
        with self.assertRaises(ResonantSpectrum):
            check_generic_spectrum(resonant)
        with self.assertRaises(LoopThroughPole):
            monodromy_probe(SchlesingerState([0.0, 1.0], A), 0.0, 1.0)
        with self.assertRaises(ValueError):
            SchlesingerState([0.0, 1.0, 2.0], A)


if __name__ == '__main__':
    unittest.main()
