"""
Scalar (rank-one) hierarchy on a genus-zero covering.

A solution is a function ψ(P) of the uniformizer coordinate z = ν(P) whose
λ-dependence comes only through the transported data; f = ψ(P₀) with
γ₀ = ν(P₀). Every solution here has the Cauchy form

    ψ(P) = ∮ h(Q) dν(Q)/(ν(Q) − ν(P)),

or a degenerate case of it (a point mass, a sum of logarithms), and satisfies

    ∂f/∂λ_m = α_m/(γ_m − γ₀) · I_m,      I_m = ∂ψ/∂ν at ν = γ_m,
    ∂lnτ/∂λ_m = α_m I_m²/2.
"""
import logging
from abc import ABC, abstractmethod
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..components.base import Density
from ..components.contours import Contour
from ..config import DEFAULT_TOLERANCES, Tolerances, complex_pair
from ..core.covering import RationalCovering, critical_data, dnu_dlambda, map_derivatives
from ..core.deformation import (
    FlowState, ModuliPath, flow, partial_derivative,
)
from ..solvers.differences import gauss_legendre_unit, richardson_limit
from ..utils.exceptions import NonGenericCovering, OnContour

logger = logging.getLogger(__name__)

Pair = Tuple[int, int]


class ScalarSolution(ABC):
    """
    Base class for solutions of the scalar system.

    :param base_point: Name of the marked point P₀ in the flow state ("pole:k" is allowed).
    :param name: Label used in reports.
    """
    def __init__(self, base_point: str = "p0", name: str = "f"):
        self.base_point = base_point
        self.name = name

    @abstractmethod
    def psi(self, state: FlowState, z: complex, check: bool = True) -> complex:
        """ψ at the point with uniformizer coordinate z."""
        pass

    @abstractmethod
    def psi_derivative(self, state: FlowState, z: np.ndarray) -> np.ndarray:
        """∂ψ/∂ν at the coordinates z (vectorized)."""
        pass

    @abstractmethod
    def singularities(self, state: FlowState) -> np.ndarray:
        """Coordinates where ψ is not analytic (contour nodes, point masses, anchors)."""
        pass

    @abstractmethod
    def to_document(self) -> Dict[str, object]:
        pass

    def prepare(self, state: FlowState) -> FlowState:
        """Returns a state carrying everything this solution transports."""
        return state

    def validate(self, state: FlowState, tolerances: Tolerances = DEFAULT_TOLERANCES):
        pass

    def gamma0(self, state: FlowState) -> complex:
        gamma0 = state.point(self.base_point)
        if np.isinf(gamma0):
            raise ValueError("The base point P₀ must have a finite uniformizer coordinate.")
        return gamma0

    def value(self, state: FlowState, tolerances: Tolerances = DEFAULT_TOLERANCES) -> complex:
        self.validate(state, tolerances)
        return self.psi(state, self.gamma0(state))

    def moments(self, state: FlowState) -> np.ndarray:
        """I_m = ∂ψ/∂ν(γ_m)."""
        return self.psi_derivative(state, state.gammas)

    def gradient(self, state: FlowState, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
        self.validate(state, tolerances)
        return state.alphas / (state.gammas - self.gamma0(state)) * self.moments(state)

    def __repr__(self):
        return f"{self.__class__.__name__}(name='{self.name}', base_point='{self.base_point}')"


class CauchySolution(ScalarSolution):
    """
    ψ(P) = ∮ h dν(Q)/(ν(Q) − ν(P)) over a contour carried at fixed λ.

    :param contour: The contour l; its nodes ride along in FlowState.contours.
    :param density: The λ-independent density h(t).
    """
    def __init__(self, contour: Contour, density: Density, base_point: str = "p0", name: str = "f"):
        super().__init__(base_point, name)
        self.contour = contour
        self.density = density

    def prepare(self, state: FlowState) -> FlowState:
        if self.contour.name in state.contours:
            return state
        return state.with_contour(self.contour.name, self.contour.initial_nodes)

    def validate(self, state: FlowState, tolerances: Tolerances = DEFAULT_TOLERANCES):
        self.contour.check_margin(state, [self.gamma0(state)], "base point P₀", tolerances)
        self.contour.check_margin(state, state.gammas, "critical point", tolerances)

    def weights(self, state: FlowState) -> np.ndarray:
        return self.contour.weights(state, self.density)

    def psi(self, state: FlowState, z: complex, check: bool = True,
            tolerances: Tolerances = DEFAULT_TOLERANCES) -> complex:
        z = complex(z)
        if np.isinf(z):
            return 0j
        nodes = self.contour.nodes(state)
        distance = float(np.min(np.abs(nodes - z)))
        if distance < tolerances.pole_margin * state.scale:
            raise OnContour(f"ψ requested on the contour '{self.contour.name}' at {z}.")
        if check:
            self.contour.check_margin(state, [z], "evaluation point", tolerances)
        return complex(np.sum(self.weights(state) / (nodes - z)))

    def psi_derivative(self, state: FlowState, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        nodes = self.contour.nodes(state)
        return np.sum(self.weights(state) / (nodes - z[..., None]) ** 2, axis=-1)

    def singularities(self, state: FlowState) -> np.ndarray:
        return self.contour.nodes(state)

    def to_document(self) -> Dict[str, object]:
        return {"kind": "cauchy", "contour": self.contour.to_document(),
                "density": self.density.to_document(), "base_point": self.base_point}


class ElementarySolution(ScalarSolution):
    """
    The point-mass solution f = ν_λ(Q)/(ν(Q) − γ₀) for a marked point Q
    carried at fixed λ(Q).
    """
    def __init__(self, point: str = "q", base_point: str = "p0", name: str = "f"):
        super().__init__(base_point, name)
        self.point = point

    def _mass(self, state: FlowState) -> Tuple[complex, complex]:
        q = state.point(self.point)
        return q, complex(dnu_dlambda(state, q))

    def psi(self, state: FlowState, z: complex, check: bool = True) -> complex:
        z = complex(z)
        if np.isinf(z):
            return 0j
        q, mass = self._mass(state)
        if abs(q - z) < DEFAULT_TOLERANCES.pole_margin * state.scale:
            raise OnContour(f"ψ requested at the point mass {self.point}.")
        return mass / (q - z)

    def psi_derivative(self, state: FlowState, z: np.ndarray) -> np.ndarray:
        q, mass = self._mass(state)
        return mass / (q - np.asarray(z, dtype=complex)) ** 2

    def singularities(self, state: FlowState) -> np.ndarray:
        return np.array([state.point(self.point)], dtype=complex)

    def to_document(self) -> Dict[str, object]:
        return {"kind": "elementary", "point": self.point, "base_point": self.base_point}


class AnchorSolution(ScalarSolution):
    """
    f = Σ_j a_j ln(ν(Q_j) − γ₀) for marked anchors Q_j; the gradient does
    not depend on the branch of the logarithms.
    """
    def __init__(self, anchors: Sequence[str], amplitudes: Sequence[complex],
                 base_point: str = "p0", name: str = "f"):
        super().__init__(base_point, name)
        if len(anchors) != len(amplitudes):
            raise ValueError(f"Got {len(anchors)} anchors but {len(amplitudes)} amplitudes.")
        self.anchors = list(anchors)
        self.amplitudes = np.asarray(amplitudes, dtype=complex)

    def _positions(self, state: FlowState) -> np.ndarray:
        return np.array([state.point(a) for a in self.anchors], dtype=complex)

    def psi(self, state: FlowState, z: complex, check: bool = True) -> complex:
        return complex(np.sum(self.amplitudes * np.log(self._positions(state) - complex(z))))

    def psi_derivative(self, state: FlowState, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.sum(self.amplitudes / (z[..., None] - self._positions(state)), axis=-1)

    def singularities(self, state: FlowState) -> np.ndarray:
        return self._positions(state)

    def to_document(self) -> Dict[str, object]:
        return {"kind": "anchor", "anchors": self.anchors,
                "amplitudes": [complex_pair(a) for a in self.amplitudes], "base_point": self.base_point}


def prepare_state(cov: Union[RationalCovering, FlowState], sol: ScalarSolution,
                  **points: complex) -> FlowState:
    """Flow state at cov carrying the marked points and what sol transports."""
    state = cov if isinstance(cov, FlowState) else FlowState.from_covering(cov)
    if points:
        state = state.with_points(**points)
    return sol.prepare(state)


def solve_f(sol: ScalarSolution, state: FlowState, tolerances: Tolerances = DEFAULT_TOLERANCES) -> complex:
    return sol.value(state, tolerances)


def psi_at(sol: ScalarSolution, state: FlowState, gamma: complex) -> complex:
    return sol.psi(state, gamma)


def grad_f(sol: ScalarSolution, state: FlowState, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    return sol.gradient(state, tolerances)


def fd_gradient(sol: ScalarSolution, state: FlowState, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """∂f/∂λ_m by central differences over short flows."""
    return np.array([complex(partial_derivative(state, m, lambda s: sol.value(s, tolerances), tolerances))
                     for m in range(state.branch_count)])


def all_pairs(count: int) -> List[Pair]:
    return [(m, n) for m in range(count) for n in range(m + 1, count)]


def pde_residual(sol: ScalarSolution, state: FlowState, pair: Pair, relative: bool = False,
                 tolerances: Tolerances = DEFAULT_TOLERANCES) -> complex:
    """
    (γ_m−γ_n)² f_mn − α_n (γ_m−γ₀)/(γ_n−γ₀) f_m − α_m (γ_n−γ₀)/(γ_m−γ₀) f_n,
    with f_mn from differences of the analytic gradient over flows. The
    relative residual divides by the largest of the three terms.
    """
    m, n = pair
    if m == n:
        raise ValueError("The scalar system couples distinct indices only.")
    gradient = sol.gradient(state, tolerances)
    mixed = complex(partial_derivative(state, n, lambda s: sol.gradient(s, tolerances)[m], tolerances))
    g, a, g0 = state.gammas, state.alphas, sol.gamma0(state)
    terms = np.array([
        (g[m] - g[n]) ** 2 * mixed,
        -a[n] * (g[m] - g0) / (g[n] - g0) * gradient[m],
        -a[m] * (g[n] - g0) / (g[m] - g0) * gradient[n],
    ])
    residual = complex(terms.sum())
    if not relative:
        return residual
    size = float(np.max(np.abs(terms)))
    return residual / size if size > 0.0 else 0j


def pde_residuals(sol: ScalarSolution, state: FlowState, pairs: Optional[Iterable[Pair]] = None,
                  relative: bool = True, tolerances: Tolerances = DEFAULT_TOLERANCES) -> Dict[Pair, complex]:
    pairs = list(pairs) if pairs is not None else all_pairs(state.branch_count)
    return {pair: pde_residual(sol, state, pair, relative, tolerances) for pair in pairs}


def lsscal_residual(sol: ScalarSolution, state: FlowState, point: str,
                    tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    ∂ψ(P)/∂λ_m (by differences over flows, P carried at fixed λ) minus
    (γ₀−γ_m)/(ν(P)−γ_m) · ∂f/∂λ_m, for every m.
    """
    z = state.point(point)
    gradient = sol.gradient(state, tolerances)
    expected = (sol.gamma0(state) - state.gammas) / (z - state.gammas) * gradient
    measured = np.array([complex(partial_derivative(state, m, lambda s: sol.psi(s, s.point(point)), tolerances))
                         for m in range(state.branch_count)])
    return measured - expected


def tau_grad(sol: ScalarSolution, state: FlowState, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """∂lnτ/∂λ_m = (γ₀−γ_m)²/(2α_m) (∂f/∂λ_m)², in the form α_m I_m²/2."""
    sol.validate(state, tolerances)
    return 0.5 * state.alphas * sol.moments(state) ** 2


def _residue_radius(state: FlowState, sol: ScalarSolution, m: int) -> float:
    others = np.concatenate([np.delete(state.gammas, m), sol.singularities(state), state.poles])
    return 0.3 * float(np.min(np.abs(others - state.gammas[m])))


def tau_grad_residue(sol: ScalarSolution, state: FlowState, nodes: int = 128) -> np.ndarray:
    """½ res at P_m of (dψ)²/dλ, by the trapezoid rule on a small circle around γ_m."""
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    result = np.zeros(state.branch_count, dtype=complex)
    for m, gamma in enumerate(state.gammas):
        offsets = _residue_radius(state, sol, m) * np.exp(1j * theta)
        z = gamma + offsets
        integrand = sol.psi_derivative(state, z) ** 2 * dnu_dlambda(state, z)
        result[m] = 0.5 * np.mean(integrand * offsets)
    return result


def tau_hessian(sol: ScalarSolution, state: FlowState, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Off-diagonal (lnτ)_mn = α_mα_n I_m I_n/(γ_m−γ_n)²; the diagonal is left at zero."""
    sol.validate(state, tolerances)
    I = sol.moments(state)
    weighted = state.alphas * I
    d = state.gammas[:, None] - state.gammas[None, :]
    np.fill_diagonal(d, 1.0)
    hessian = np.outer(weighted, weighted) / d ** 2
    np.fill_diagonal(hessian, 0.0)
    return hessian


def tau_hessian_check(sol: ScalarSolution, state: FlowState, pairs: Optional[Iterable[Pair]] = None,
                      tolerances: Tolerances = DEFAULT_TOLERANCES) -> Dict[str, object]:
    """Mixed partials of lnτ in both orders by differences over flows, against tau_hessian."""
    pairs = list(pairs) if pairs is not None else all_pairs(state.branch_count)
    analytic = tau_hessian(sol, state, tolerances)
    entries = {}
    for m, n in pairs:
        d_nm = complex(partial_derivative(state, n, lambda s: tau_grad(sol, s, tolerances)[m], tolerances))
        d_mn = complex(partial_derivative(state, m, lambda s: tau_grad(sol, s, tolerances)[n], tolerances))
        entries[(m, n)] = {"d_n_of_m": d_nm, "d_m_of_n": d_mn, "analytic": complex(analytic[m, n]),
                           "symmetry": abs(d_nm - d_mn), "residual": abs(d_nm - analytic[m, n])}
    worst = max((max(e["symmetry"], e["residual"]) for e in entries.values()), default=0.0)
    return {"entries": entries, "max_residual": worst}


def tau_integrate(sol: ScalarSolution, state: FlowState, path: ModuliPath, order: int = 16,
                  tolerances: Tolerances = DEFAULT_TOLERANCES) -> Tuple[complex, FlowState]:
    """
    ln τ(end) − ln τ(start) along path, by Gauss-Legendre quadrature of
    Σ_m ∂lnτ/∂λ_m dλ_m on every segment. Returns the increment and the end state.
    """
    nodes, weights = gauss_legendre_unit(order)
    total = 0j
    current = state
    for a, b in path.segments():
        delta = b - a
        if np.all(delta == 0):
            continue
        for s, w in zip(nodes, weights):
            current = flow(current, ModuliPath.straight(current.lambdas, a + s * delta), tolerances)
            total += w * complex(np.sum(tau_grad(sol, current, tolerances) * delta))
        current = flow(current, ModuliPath.straight(current.lambdas, b), tolerances)
    return total, current


def square_loop(lambdas: Sequence[complex], first: int, second: int, size: float) -> ModuliPath:
    """Closed square loop moving λ_first and then λ_second by ±size."""
    start = np.asarray(lambdas, dtype=complex)
    corners = [start.copy() for _ in range(5)]
    corners[1][first] += size
    corners[2][first] += size
    corners[2][second] += size
    corners[3][second] += size
    return ModuliPath(corners)


def plemelj_jump(sol: CauchySolution, state: FlowState, node: int, eps: Optional[float] = None,
                 levels: int = 2) -> Dict[str, complex]:
    """
    ψ just inside minus ψ just outside the contour at one node, extrapolated
    to zero offset, against 2πi·h there.
    """
    contour = sol.contour
    z0 = contour.nodes(state)[node]
    normal = contour.outward_normals(state)[node]
    eps = eps if eps is not None else 10.0 * contour.spacing(state)

    def jump(e):
        return sol.psi(state, z0 - e * normal, check=False) - sol.psi(state, z0 + e * normal, check=False)

    measured = richardson_limit(jump, eps, levels)
    expected = 2j * np.pi * complex(sol.density.values(contour.t[node:node + 1])[0])
    return {"jump": measured, "expected": expected, "residual": abs(measured - expected)}


def euler_darboux_covering(xi: complex, xibar: complex,
                           tolerances: Tolerances = DEFAULT_TOLERANCES) -> Tuple[RationalCovering, int, int]:
    """
    Degree-two covering branched over ξ and ξ̄, with the indices of the two
    branch points in its critical data.
    """
    xi, xibar = complex(xi), complex(xibar)
    delta = xi - xibar
    if abs(delta) <= tolerances.genericity * max(1.0, abs(xi), abs(xibar)):
        raise NonGenericCovering("The two branch points ξ and ξ̄ must be distinct.")
    cov = critical_data([0.5 * (xi + xibar)], [(delta / 4.0) ** 2], tolerances)
    i_xi = int(np.argmin(np.abs(cov.lambdas - xi)))
    return cov, i_xi, 1 - i_xi


def euler_darboux_oracle(cov: RationalCovering, contour: Contour, density: Density,
                         xi: complex, xibar: complex) -> Tuple[complex, complex, complex]:
    """
    f, ∂f/∂ξ and ∂f/∂ξ̄ of ∮ h dλ/√((λ−ξ)(λ−ξ̄)) computed in the λ-parametrization
    of the contour, with the root taken on the branch of the contour's sheet.
    """
    mu = cov.poles[0]
    r = cov.residues[0]
    w = contour.initial_nodes - mu
    lam, _, _ = map_derivatives(cov.poles, cov.residues, contour.initial_nodes)
    root = np.sqrt((lam - xi) * (lam - xibar))
    branch = (w ** 2 - r) / w
    root = np.where(np.abs(root + branch) < np.abs(root - branch), -root, root)
    weights = density.values(contour.t) * contour.dlambda_dt * (2.0 * np.pi / contour.count)
    value = complex(np.sum(weights / root))
    d_xi = complex(np.sum(weights * 0.5 * (lam - xibar) / root ** 3))
    d_xibar = complex(np.sum(weights * 0.5 * (lam - xi) / root ** 3))
    return value, d_xi, d_xibar


def euler_darboux_check(xi: complex, xibar: complex, density: Density, radius_ratio: float = 3.0,
                        nodes: int = 512, tolerances: Tolerances = DEFAULT_TOLERANCES) -> Dict[str, object]:
    """
    f_ξξ̄ − (f_ξ − f_ξ̄)/(2(ξ − ξ̄)) for f = ∮ h dλ/√((λ−ξ)(λ−ξ̄)), realized on
    the degree-two covering with P₀ the second point over infinity. The
    contour is a circle around the pole enclosing both critical points.
    """
    cov, i_xi, i_xibar = euler_darboux_covering(xi, xibar, tolerances)
    radius = radius_ratio * abs(complex(xi) - complex(xibar)) / 4.0
    contour = Contour.circle_on(cov, cov.poles[0], radius, nodes, "l", tolerances=tolerances)
    sol = CauchySolution(contour, density, base_point="pole:1")
    state = prepare_state(cov, sol)
    value = sol.value(state, tolerances)
    gradient = sol.gradient(state, tolerances)
    mixed = complex(partial_derivative(state, i_xibar, lambda s: sol.gradient(s, tolerances)[i_xi], tolerances))
    first = (gradient[i_xi] - gradient[i_xibar]) / (2.0 * (complex(xi) - complex(xibar)))
    residual = mixed - first
    size = max(abs(mixed), abs(first))
    oracle = euler_darboux_oracle(cov, contour, density, complex(xi), complex(xibar))
    return {
        "f": value,
        "f_xi": gradient[i_xi],
        "f_xibar": gradient[i_xibar],
        "f_xi_xibar": mixed,
        "residual": residual,
        "relative_residual": abs(residual) / size if size > 0.0 else 0.0,
        "oracle_f": oracle[0],
        "oracle_f_xi": oracle[1],
        "oracle_f_xibar": oracle[2],
    }
