"""
Schlesinger sector pulled back to the Hurwitz moduli.

A Fuchsian system dΨ/dγ = A(γ)Ψ, A(γ) = Σ_j A_j/(γ − z_j) with Σ_j A_j = 0,
deforms isomonodromically when the poles move. Normalized at infinity:

    ∂A_j/∂z_k = [A_j, A_k]/(z_j − z_k)              (k ≠ j)
    ∂A_j/∂z_j = −Σ_{k≠j} [A_j, A_k]/(z_j − z_k)

Normalizing at a finite point γ₀ instead adds −[A_j, A_k]/(γ₀ − z_k) to
the off-diagonal terms and makes γ₀ a time of its own with
∂A_j/∂γ₀ = [A_j, A(γ₀)]. On a covering the poles are z_j = ν(Q_j) for
points Q_j carried at fixed λ, so every branch-point flow drives the system.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from ..config import DEFAULT_TOLERANCES, Tolerances, complex_pair, complex_pairs
from ..core.deformation import CoupledSystem, FlowState, ModuliPath, flow, partial_derivative
from ..core.covering import dnu_dlambda
from ..solvers.differences import gauss_legendre_unit
from ..solvers.ode import final_state, integrate_segment
from ..utils.exceptions import AnchorAtBranchPoint, LoopThroughPole, PoleCollision, ResonantSpectrum

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


def _commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


@dataclass
class SchlesingerState:
    """
    Pole positions z_j, residue matrices A_j (shape L×r×r) and the
    normalization point γ₀ (infinity allowed).
    """
    z: np.ndarray
    A: np.ndarray
    gamma0: complex = complex(np.inf)

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=complex)
        self.A = np.asarray(self.A, dtype=complex)
        if self.A.ndim != 3 or self.A.shape[1] != self.A.shape[2]:
            raise ValueError(f"Residues must have shape (L, r, r), got {self.A.shape}.")
        if len(self.z) != self.A.shape[0]:
            raise ValueError(f"Got {len(self.z)} poles but {self.A.shape[0]} residue matrices.")
        self.gamma0 = complex(self.gamma0)

    @property
    def count(self) -> int:
        return len(self.z)

    @property
    def rank(self) -> int:
        return self.A.shape[1]

    @property
    def normalized_at_infinity(self) -> bool:
        return bool(np.isinf(self.gamma0))

    def residue_sum(self) -> np.ndarray:
        return self.A.sum(axis=0)

    def constraint_defect(self) -> float:
        return float(np.max(np.abs(self.residue_sum())))

    def trace_squares(self) -> np.ndarray:
        return np.einsum("jab,jba->j", self.A, self.A)

    def A_at(self, gamma) -> np.ndarray:
        """A(γ) = Σ_j A_j/(γ − z_j); gamma may be an array, giving a stack of matrices."""
        g = np.asarray(gamma, dtype=complex)
        return np.tensordot(1.0 / (g[..., None] - self.z), self.A, axes=1)

    def copy(self) -> "SchlesingerState":
        return SchlesingerState(self.z.copy(), self.A.copy(), self.gamma0)

    def to_document(self) -> Dict[str, object]:
        return {
            "poles": complex_pairs(self.z),
            "residues": [[complex_pairs(row) for row in a] for a in self.A],
            "gamma0": "inf" if self.normalized_at_infinity else complex_pair(self.gamma0),
        }


def check_poles(state: SchlesingerState, margin: float = 1e-8):
    if state.count > 1:
        d = np.abs(state.z[:, None] - state.z[None, :])
        d[np.diag_indices_from(d)] = np.inf
        if float(d.min()) < margin:
            raise PoleCollision(f"Fuchsian poles collide (separation {float(d.min()):.3e}).")
    if not state.normalized_at_infinity and float(np.min(np.abs(state.z - state.gamma0))) < margin:
        raise PoleCollision("A Fuchsian pole hits the normalization point γ₀.")


def check_generic_spectrum(state: SchlesingerState, tol: float = 1e-8):
    """ResonantSpectrum when two eigenvalues of some A_j differ by a nonzero integer."""
    for j, a in enumerate(state.A):
        eigenvalues = np.linalg.eigvals(a)
        differences = eigenvalues[:, None] - eigenvalues[None, :]
        nearest = np.round(differences.real)
        resonant = (nearest != 0) & (np.abs(differences - nearest) < tol)
        if np.any(resonant):
            raise ResonantSpectrum(f"Eigenvalues of A_{j + 1} differ by an integer: {eigenvalues}.")


def schlesinger_rhs(state: SchlesingerState) -> Tuple[np.ndarray, np.ndarray]:
    """
    D[j, k] = ∂A_j/∂z_k (shape L×L×r×r) and, for a finite γ₀,
    E[j] = ∂A_j/∂γ₀ (zero at infinity).
    """
    check_poles(state)
    L = state.count
    A = state.A
    D = np.zeros((L, L) + A.shape[1:], dtype=complex)
    for j in range(L):
        for k in range(L):
            if k == j:
                continue
            bracket = _commutator(A[j], A[k])
            D[j, k] = bracket / (state.z[j] - state.z[k])
            if not state.normalized_at_infinity:
                D[j, k] -= bracket / (state.gamma0 - state.z[k])
        D[j, j] = -sum((_commutator(A[j], A[k]) / (state.z[j] - state.z[k]) for k in range(L) if k != j),
                       np.zeros_like(A[j]))
    E = np.zeros_like(A)
    if not state.normalized_at_infinity:
        A0 = state.A_at(state.gamma0)
        for j in range(L):
            E[j] = _commutator(A[j], A0)
    return D, E


def schlesinger_velocity(state: SchlesingerState, dz: np.ndarray, dgamma0: complex = 0j) -> np.ndarray:
    """dA_j/ds for pole velocities dz_j/ds and dγ₀/ds."""
    D, E = schlesinger_rhs(state)
    return np.einsum("jkab,k->jab", D, np.asarray(dz, dtype=complex)) + E * dgamma0


class SchlesingerCoupling(CoupledSystem):
    """
    Integrates the residues together with a covering flow. The residues
    live in FlowState.extra, flattened.
    """
    def __init__(self, anchors: Sequence[str], residues: np.ndarray, normalization: Optional[str] = None):
        self.anchors = list(anchors)
        self.residues = np.asarray(residues, dtype=complex)
        self.normalization = normalization

    def unpack(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=complex).reshape(self.residues.shape)

    def initial(self, state: FlowState) -> np.ndarray:
        return self.residues.ravel().copy()

    def derivative(self, positions: Dict[str, complex], velocities: Dict[str, complex],
                   y: np.ndarray) -> np.ndarray:
        z = np.array([positions[a] for a in self.anchors], dtype=complex)
        dz = np.array([velocities[a] for a in self.anchors], dtype=complex)
        if self.normalization is None:
            gamma0, dgamma0 = complex(np.inf), 0j
        else:
            gamma0, dgamma0 = positions[self.normalization], velocities[self.normalization]
        state = SchlesingerState(z, self.unpack(y), gamma0)
        return schlesinger_velocity(state, dz, dgamma0).ravel()


class HurwitzPullback:
    """
    Anchors Q_j and the point P₀ as named marked points of a flow state.

    :param state: Flow state carrying the anchors and the base point.
    :param anchors: Names of the marked points Q_1..Q_L.
    :param base_point: Name of P₀, used by the hierarchy (γ₀ = ν(P₀)).
    :param normalize_at_base: Normalize Ψ at γ₀ instead of at infinity.
    """
    def __init__(self, state: FlowState, anchors: Sequence[str], base_point: str = "p0",
                 normalize_at_base: bool = False):
        self.state = state
        self.anchors = list(anchors)
        self.base_point = base_point
        self.normalize_at_base = normalize_at_base
        for name in self.anchors + [base_point]:
            state.point(name)

    @property
    def normalization(self) -> Optional[str]:
        return self.base_point if self.normalize_at_base else None

    def poles(self, state: Optional[FlowState] = None) -> np.ndarray:
        state = state or self.state
        return np.array([state.point(a) for a in self.anchors], dtype=complex)

    def gamma0(self, state: Optional[FlowState] = None) -> complex:
        return (state or self.state).point(self.base_point)

    def schlesinger_state(self, residues: np.ndarray, state: Optional[FlowState] = None) -> SchlesingerState:
        state = state or self.state
        gamma0 = self.gamma0(state) if self.normalize_at_base else complex(np.inf)
        return SchlesingerState(self.poles(state), residues, gamma0)

    def coupling(self, residues: np.ndarray) -> SchlesingerCoupling:
        return SchlesingerCoupling(self.anchors, residues, self.normalization)

    def with_residues(self, residues: np.ndarray) -> FlowState:
        state = self.state.copy()
        state.extra = np.asarray(residues, dtype=complex).ravel().copy()
        return state

    def at(self, state: FlowState) -> "HurwitzPullback":
        return HurwitzPullback(state, self.anchors, self.base_point, self.normalize_at_base)

    def __repr__(self):
        return f"HurwitzPullback(anchors={self.anchors}, base_point='{self.base_point}')"


def pullback_flow(pb: HurwitzPullback, initial: SchlesingerState, path: ModuliPath,
                  tolerances: Tolerances = DEFAULT_TOLERANCES) -> Tuple[SchlesingerState, HurwitzPullback]:
    """
    Co-integrates the covering flow and the Schlesinger equations along the
    induced motion z_j = ν(Q_j), γ₀ = ν(P₀).
    """
    check_poles(initial)
    check_generic_spectrum(initial)
    coupling = pb.coupling(initial.A)
    end = flow(pb.with_residues(initial.A), path, tolerances, coupling)
    result = pb.at(end).schlesinger_state(coupling.unpack(end.extra), end)
    check_poles(result)
    logger.debug("pullback flow: constraint %.3e, trace drift %.3e", result.constraint_defect(),
                 float(np.max(np.abs(result.trace_squares() - initial.trace_squares()))) if initial.count else 0.0)
    return result, pb.at(end)


def conservation_monitors(initial: SchlesingerState, final: SchlesingerState) -> Dict[str, float]:
    return {
        "constraint": final.constraint_defect(),
        "trace_square_drift": float(np.max(np.abs(final.trace_squares() - initial.trace_squares())))
        if initial.count else 0.0,
    }


def _residues(pb: HurwitzPullback, state: FlowState, shape: Tuple[int, ...]) -> np.ndarray:
    return np.asarray(state.extra, dtype=complex).reshape(shape)


def hierarchy_Jm(pb: HurwitzPullback, state: FlowState, residues: np.ndarray,
                 tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """J_m = α_m/(γ_m − γ₀) A(γ_m), shape M×r×r."""
    z = pb.poles(state)
    gamma0 = pb.gamma0(state)
    distance = np.abs(state.gammas[:, None] - z[None, :])
    if distance.size and float(distance.min()) < tolerances.pole_margin * state.scale:
        raise AnchorAtBranchPoint("A critical point coincides with a Fuchsian pole.")
    A_gamma = np.tensordot(1.0 / (state.gammas[:, None] - z[None, :]), np.asarray(residues, dtype=complex), axes=1)
    return (state.alphas / (state.gammas - gamma0))[:, None, None] * A_gamma


def verify_hierarchy(pb: HurwitzPullback, residues: np.ndarray, pairs: Optional[Iterable[Pair]] = None,
                     tolerances: Tolerances = DEFAULT_TOLERANCES) -> Dict[Pair, Dict[str, float]]:
    """
    For J_m = G_{λ_m} G⁻¹ with G = Ψ(γ₀) normalized at infinity, checks by
    differences over pullback flows

        ∂_n J_m − ∂_m J_n − [J_n, J_m] = 0,
        ∂_n[(γ₀−γ_m) J_m] − ∂_m[(γ₀−γ_n) J_n] = 0.

    The currents are gauge dependent. When Ψ is normalized at γ₀ instead,
    G(γ₀) = I and J_m picks up the gauge term ∂_{λ_m} of the normalizing
    factor, so both identities fail. A pullback with normalize_at_base set
    raises ValueError.
    """
    if pb.normalize_at_base:
        raise ValueError("The hierarchy is built from the solution normalized at infinity.")
    residues = np.asarray(residues, dtype=complex)
    state = pb.with_residues(residues)
    coupling = pb.coupling(residues)
    M = state.branch_count
    pairs = list(pairs) if pairs is not None else [(m, n) for m in range(M) for n in range(m + 1, M)]

    def currents(s: FlowState) -> np.ndarray:
        J = hierarchy_Jm(pb, s, _residues(pb, s, residues.shape), tolerances)
        weighted = (pb.gamma0(s) - s.gammas)[:, None, None] * J
        return np.stack([J, weighted])

    J = currents(state)[0]
    derivatives = {n: partial_derivative(state, n, currents, tolerances, coupling)
                   for n in sorted({k for pair in pairs for k in pair})}
    results = {}
    for m, n in pairs:
        zero_curvature = derivatives[n][0, m] - derivatives[m][0, n] - _commutator(J[n], J[m])
        hierarchy = derivatives[n][1, m] - derivatives[m][1, n]
        results[(m, n)] = {"zero_curvature": float(np.max(np.abs(zero_curvature))),
                           "hierarchy": float(np.max(np.abs(hierarchy)))}
    return results


def jm_tau_grad(state: SchlesingerState) -> np.ndarray:
    """∂lnτ_JM/∂z_j = Σ_{k≠j} tr(A_j A_k)/(z_j − z_k)."""
    check_poles(state)
    products = np.einsum("jab,kba->jk", state.A, state.A)
    d = state.z[:, None] - state.z[None, :]
    np.fill_diagonal(d, 1.0)
    terms = products / d
    np.fill_diagonal(terms, 0.0)
    return terms.sum(axis=1)


def hurwitz_tau_grad(pb: HurwitzPullback, state: FlowState, residues: np.ndarray) -> np.ndarray:
    """∂lnτ/∂λ_m = (γ₀−γ_m)²/(2α_m) tr J_m² = (α_m/2) tr A(γ_m)²."""
    z = pb.poles(state)
    A_gamma = np.tensordot(1.0 / (state.gammas[:, None] - z[None, :]), residues, axes=1)
    return 0.5 * state.alphas * np.einsum("mab,mba->m", A_gamma, A_gamma)


def tau_relation_check(pb: HurwitzPullback, initial: SchlesingerState, path: ModuliPath, order: int = 16,
                       tolerances: Tolerances = DEFAULT_TOLERANCES) -> Dict[str, complex]:
    """
    Integrates both sides of

        d lnτ = d[Σ_j (tr A_j²/2) ln ν_λ(Q_j)] + Σ_j ∂lnτ_JM/∂z_j dz_j

    along path (Gauss-Legendre on every segment) and returns their difference.
    The logarithm is taken of the ratio of end and start values, so paths
    should be short enough that ν_λ(Q_j) does not wind around zero.
    """
    coupling = pb.coupling(initial.A)
    state = pb.with_residues(initial.A)
    nodes, weights = gauss_legendre_unit(order)
    lhs, rhs = 0j, 0j
    current = state
    for a, b in path.segments():
        delta = b - a
        if np.all(delta == 0):
            continue
        for s, w in zip(nodes, weights):
            current = flow(current, ModuliPath.straight(current.lambdas, a + s * delta), tolerances, coupling)
            residues = coupling.unpack(current.extra)
            lhs += w * complex(np.sum(hurwitz_tau_grad(pb, current, residues) * delta))
            schlesinger = pb.at(current).schlesinger_state(residues, current)
            z = schlesinger.z
            dz = -(current.alphas[None, :] * delta[None, :] / (z[:, None] - current.gammas[None, :])).sum(axis=1)
            rhs += w * complex(np.sum(jm_tau_grad(schlesinger) * dz))
        current = flow(current, ModuliPath.straight(current.lambdas, b), tolerances, coupling)
    start_nu = dnu_dlambda(state, pb.poles(state))
    end_nu = dnu_dlambda(current, pb.poles(current))
    rhs += complex(np.sum(0.5 * initial.trace_squares() * np.log(end_nu / start_nu)))
    return {"lhs": lhs, "rhs": rhs, "residual": lhs - rhs}


def _transport(A_of: Callable[[float], np.ndarray], y0: np.ndarray, tolerances: Tolerances) -> np.ndarray:
    r = y0.shape[0]

    def rhs(s, y):
        return (A_of(s) @ y.reshape(r, r)).ravel()

    return final_state(integrate_segment(rhs, y0.ravel(), tolerances)).reshape(r, r)


def _segment_distance(points: np.ndarray, start: complex, end: complex) -> float:
    direction = end - start
    length2 = abs(direction) ** 2
    s = np.clip(((points - start) * np.conj(direction)).real / length2, 0.0, 1.0)
    return float(np.min(np.abs(points - (start + s * direction))))


def monodromy_probe(state: SchlesingerState, center: complex, radius: float, angle: float = 0.0,
                    tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    Monodromy of the normalized solution along the counterclockwise circle
    |γ − center| = radius, based at b = center + radius·e^{i·angle} and joined to the
    normalization point by a straight leg (a radial ray when γ₀ = ∞).
    """
    center = complex(center)
    base = center + radius * np.exp(1j * angle)
    margin = 1e-3 * radius
    if float(np.min(np.abs(np.abs(state.z - center) - radius))) < margin:
        raise LoopThroughPole("The monodromy loop passes through a Fuchsian pole.")
    r = state.rank
    identity = np.eye(r, dtype=complex)

    if state.normalized_at_infinity:
        if abs(base) < margin:
            raise LoopThroughPole("The loop base point must not be the origin for a leg from infinity.")
        ray = np.abs(state.z - base * np.clip((state.z * np.conj(base)).real / abs(base) ** 2, 1.0, None))
        if state.count and float(ray.min()) < margin:
            raise LoopThroughPole("The leg from infinity passes through a Fuchsian pole.")
        weighted = state.A * state.z[:, None, None]

        def leg(s):
            return -np.tensordot(1.0 / (1.0 - s * state.z / base), weighted, axes=1) / base
    else:
        if _segment_distance(state.z, state.gamma0, base) < margin:
            raise LoopThroughPole("The leg from γ₀ passes through a Fuchsian pole.")
        if abs(abs(state.gamma0 - center) - radius) < margin:
            raise LoopThroughPole("The loop passes through the normalization point.")

        def leg(s):
            gamma = state.gamma0 + s * (base - state.gamma0)
            return state.A_at(gamma) * (base - state.gamma0)

    def loop(s):
        phase = np.exp(1j * (angle + 2.0 * np.pi * s))
        return state.A_at(center + radius * phase) * (2j * np.pi * radius * phase)

    T = _transport(leg, identity, tolerances)
    C = _transport(loop, identity, tolerances)
    return np.linalg.solve(T, C @ T)


def random_schlesinger_state(poles: Sequence[complex], rank: int = 2, seed=None, scale: float = 0.3,
                             gamma0: complex = complex(np.inf)) -> SchlesingerState:
    """
    Fixed-seed traceless residues with ‖A_j‖ ≤ 1; the last residue is
    fixed by Σ_j A_j = 0.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    poles = np.asarray(poles, dtype=complex)
    L = len(poles)
    if L < 2:
        raise ValueError("A Fuchsian system with Σ A_j = 0 needs at least two poles.")
    A = np.zeros((L, rank, rank), dtype=complex)
    for j in range(L - 1):
        a = rng.normal(size=(rank, rank)) + 1j * rng.normal(size=(rank, rank))
        a -= np.trace(a) / rank * np.eye(rank)
        A[j] = scale * a / np.linalg.norm(a, 2)
    A[-1] = -A[:-1].sum(axis=0)
    if np.linalg.norm(A[-1], 2) > 1.0:
        A *= 1.0 / np.linalg.norm(A[-1], 2)
    state = SchlesingerState(poles, A, gamma0)
    check_generic_spectrum(state)
    return state


def scalar_reduction(amplitudes: Sequence[complex]) -> np.ndarray:
    """Rank-one residues a_j as 1×1 matrices."""
    return np.asarray(amplitudes, dtype=complex).reshape(-1, 1, 1)
