"""
Genus-zero Bergmann kernel, the differentials built from it, and the
Darboux-Egoroff structure of the metric ds² = Σ ∂_m lnτ dλ_m².

On the sphere the kernel is B(P,Q) = dν_P dν_Q/(ν_P − ν_Q)²; near P_m the
local parameter x_m = √(λ−λ_m) satisfies dν/dx_m = κ_m, which gives

    b(P_m, P_n) = κ_m κ_n/(γ_m − γ_n)²,   β_mn = b(P_m, P_n)/2.
"""
import csv
import logging
import warnings
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import DEFAULT_TOLERANCES, Tolerances
from ..core.covering import RationalCovering, dnu_dlambda
from ..core.deformation import FlowState, directional_derivative, flow_to, partial_derivative
from ..graph.lattice import lattice_walk
from ..systems.rank1 import ScalarSolution, all_pairs, tau_grad, tau_hessian
from ..utils.exceptions import BranchAmbiguity, CriticalPointHit

logger = logging.getLogger(__name__)

Data = Union[RationalCovering, FlowState]


@dataclass
class BergmannData:
    """b(P_m,P_n) and β_mn as M×M matrices with zero diagonal."""
    b: np.ndarray
    beta: np.ndarray

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.beta - self.beta.T))) if self.beta.size else 0.0


def bergmann_branch_matrix(cov: Data) -> BergmannData:
    d = cov.gammas[:, None] - cov.gammas[None, :]
    np.fill_diagonal(d, 1.0)
    b = np.outer(cov.kappas, cov.kappas) / d ** 2
    np.fill_diagonal(b, 0.0)
    return BergmannData(b=b, beta=0.5 * b)


def _off_critical(cov: Data, gamma: complex, tolerances: Tolerances):
    if np.min(np.abs(gamma - cov.gammas)) < tolerances.pole_margin * cov.scale:
        raise CriticalPointHit(f"gamma={gamma} is a critical point.")


def differential_B(cov: Data, m: int, gamma: complex, tolerances: Tolerances = DEFAULT_TOLERANCES) -> complex:
    """B_m/dν = κ_m/(ν − γ_m)²."""
    gamma = complex(gamma)
    _off_critical(cov, gamma, tolerances)
    return complex(cov.kappas[m] / (gamma - cov.gammas[m]) ** 2)


def integral_Omega(cov: Data, m: int, gamma: complex, q0: complex = complex(np.inf),
                   tolerances: Tolerances = DEFAULT_TOLERANCES) -> complex:
    """Ω_m(P) = ∫_{Q₀}^P B_m = κ_m [1/(ν(Q₀) − γ_m) − 1/(ν(P) − γ_m)]."""
    gamma, q0 = complex(gamma), complex(q0)
    _off_critical(cov, gamma, tolerances)
    start = 0j if np.isinf(q0) else 1.0 / (q0 - cov.gammas[m])
    end = 0j if np.isinf(gamma) else 1.0 / (gamma - cov.gammas[m])
    return complex(cov.kappas[m] * (start - end))


def kernel_value(state: Data, p: complex, q: complex) -> complex:
    """b(P,Q) = B(P,Q)/(dλ_P dλ_Q) for points carried at fixed λ."""
    return complex(dnu_dlambda(state, p) * dnu_dlambda(state, q) / (p - q) ** 2)


def rauch_check(state: FlowState, pair: Tuple[int, int], p: str = "p", q: str = "q",
                tolerances: Tolerances = DEFAULT_TOLERANCES) -> Dict[str, complex]:
    """
    Variational formulas checked by differences over flows at the marked
    points p and q:

        ∂b(P,Q)/∂λ_m = ½ b(P,P_m) b(Q,P_m),
        ∂(B_n/dλ)(P)/∂λ_m = ½ b(P_m,P_n) (B_m/dλ)(P),
        Σ_k ∂b(P_m,P_n)/∂λ_k = 0.
    """
    m, n = pair
    if m == n:
        raise ValueError("Rauch formulas are checked for distinct indices only.")
    zp, zq = state.point(p), state.point(q)
    nu_p, nu_q = dnu_dlambda(state, zp), dnu_dlambda(state, zq)

    def kernel(s):
        return kernel_value(s, s.point(p), s.point(q))

    def differential(s):
        return dnu_dlambda(s, s.point(p)) * s.kappas[n] / (s.point(p) - s.gammas[n]) ** 2

    def beta_entry(s):
        return bergmann_branch_matrix(s).b[m, n]

    b_pm = nu_p * state.kappas[m] / (zp - state.gammas[m]) ** 2
    b_qm = nu_q * state.kappas[m] / (zq - state.gammas[m]) ** 2
    kernel_rhs = 0.5 * b_pm * b_qm
    differential_rhs = 0.5 * bergmann_branch_matrix(state).b[m, n] * b_pm
    kernel_lhs = complex(partial_derivative(state, m, kernel, tolerances))
    differential_lhs = complex(partial_derivative(state, m, differential, tolerances))
    translation = complex(directional_derivative(state, np.ones(state.branch_count), beta_entry, tolerances))
    return {
        "kernel": kernel_lhs - kernel_rhs,
        "differential": differential_lhs - differential_rhs,
        "translation": translation,
    }


@dataclass
class MetricData:
    """Diagonal metric g_mm = ∂lnτ/∂λ_m of a scalar solution, with √g_mm = κ_m I_m/2."""
    g: np.ndarray
    sqrt_g: np.ndarray
    solution: ScalarSolution

    @classmethod
    def from_solution(cls, sol: ScalarSolution, state: FlowState,
                      tolerances: Tolerances = DEFAULT_TOLERANCES) -> "MetricData":
        return cls(g=tau_grad(sol, state, tolerances), sqrt_g=0.5 * state.kappas * sol.moments(state),
                   solution=sol)


def christoffel(state: FlowState, metric: MetricData) -> np.ndarray:
    """Γ^n_{nm} = β_mn √g_mm/√g_nn; entry [n, m], zero on the diagonal."""
    beta = bergmann_branch_matrix(state).beta
    ratio = metric.sqrt_g[None, :] / metric.sqrt_g[:, None]
    gamma = beta * ratio
    np.fill_diagonal(gamma, 0.0)
    return gamma


def beta_derivatives_fd(state: FlowState, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """D[l, m, n] = ∂β_mn/∂λ_l by differences over flows."""
    return np.array([partial_derivative(state, l, lambda s: bergmann_branch_matrix(s).beta, tolerances)
                     for l in range(state.branch_count)])


def beta_diagonal_derivatives(state: Data) -> np.ndarray:
    """
    D[l, m, n] = ∂β_mn/∂λ_l for m ≠ n. For l outside {m, n} this is
    β_ml β_ln; the two remaining entries follow from the translation and
    Euler identities.
    """
    beta = bergmann_branch_matrix(state).beta
    lam = state.lambdas
    M = len(lam)
    D = np.zeros((M, M, M), dtype=complex)
    for m in range(M):
        for n in range(M):
            if m == n:
                continue
            others = [l for l in range(M) if l not in (m, n)]
            for l in others:
                D[l, m, n] = beta[m, l] * beta[l, n]
            s1 = sum(D[l, m, n] for l in others)
            s2 = beta[m, n] + sum(lam[l] * D[l, m, n] for l in others)
            system = np.array([[1.0, 1.0], [lam[m], lam[n]]], dtype=complex)
            D[m, m, n], D[n, m, n] = np.linalg.solve(system, [-s1, -s2])
    return D


def _distinct_triples(M: int) -> List[Tuple[int, int, int]]:
    return [(l, m, n) for l in range(M) for m in range(M) for n in range(M)
            if len({l, m, n}) == 3 and m < n]


def egoroff_report(state: FlowState, sol: ScalarSolution,
                   tolerances: Tolerances = DEFAULT_TOLERANCES) -> Dict[str, object]:
    """
    The Darboux-Egoroff checks for the metric g_mm = ∂lnτ/∂λ_m:
    rotation coefficients from the tau Hessian, flatness, translation,
    dilatation and inversion of β, and Egoroff symmetry ∂_m g_nn = ∂_n g_mm.
    """
    M = state.branch_count
    bergmann = bergmann_branch_matrix(state)
    beta = bergmann.beta
    metric = MetricData.from_solution(sol, state, tolerances)
    ambiguous = bool(np.any(np.abs(metric.sqrt_g) < 1e-12 * max(1.0, float(np.max(np.abs(metric.sqrt_g))))))
    if ambiguous:
        warnings.warn("√g_mm vanishes at this point; rotation coefficients are reported up to sign.",
                      BranchAmbiguity)

    D = beta_derivatives_fd(state, tolerances)
    hessian_fd = np.zeros((M, M), dtype=complex)
    for n in range(M):
        column = partial_derivative(state, n, lambda s: tau_grad(sol, s, tolerances), tolerances)
        hessian_fd[:, n] = column

    pairs = all_pairs(M)
    rotation, squared, egoroff = {}, {}, {}
    for m, n in pairs:
        product = metric.sqrt_g[m] * metric.sqrt_g[n]
        from_tau = 0.5 * hessian_fd[m, n] / product if product != 0 else complex(np.nan)
        rotation[(m, n)] = min(abs(beta[m, n] - from_tau), abs(beta[m, n] + from_tau))
        g_product = metric.g[m] * metric.g[n]
        squared[(m, n)] = abs(beta[m, n] ** 2 - 0.25 * hessian_fd[m, n] ** 2 / g_product) \
            if g_product != 0 else float("nan")
        egoroff[(m, n)] = abs(hessian_fd[m, n] - hessian_fd[n, m])

    flatness = {(l, m, n): abs(D[l, m, n] - beta[m, l] * beta[l, n]) for l, m, n in _distinct_triples(M)}
    off = ~np.eye(M, dtype=bool)
    translation = D.sum(axis=0)
    euler = np.tensordot(state.lambdas, D, axes=1) + beta
    inversion = np.tensordot(state.lambdas ** 2, D, axes=1) \
        + (state.lambdas[:, None] + state.lambdas[None, :]) * beta

    def worst(values) -> float:
        values = [v for v in values if np.isfinite(v)]
        return float(max(values)) if values else 0.0

    report = {
        "g": metric.g,
        "sqrt_g": metric.sqrt_g,
        "beta": beta,
        "christoffel": christoffel(state, metric),
        "tau_hessian": tau_hessian(sol, state, tolerances),
        "tau_hessian_fd": hessian_fd,
        "branch_ambiguity": ambiguous,
        "residuals": {
            "rotation_up_to_sign": worst(rotation.values()),
            "rotation_squared": worst(squared.values()),
            "flatness": worst(flatness.values()),
            "translation": float(np.max(np.abs(translation[off]))) if M > 1 else 0.0,
            "dilatation": float(np.max(np.abs(euler[off]))) if M > 1 else 0.0,
            "inversion": float(np.max(np.abs(inversion[off]))) if M > 1 else 0.0,
            "egoroff": worst(egoroff.values()),
            "beta_symmetry": bergmann.symmetry_defect(),
        },
    }
    logger.info("Darboux-Egoroff residuals: %s", report["residuals"])
    return report


def genus_formalism_consistency(state: Data, gamma0: complex,
                                pairs: Optional[Iterable[Tuple[int, int]]] = None) -> float:
    """
    Largest |(b_mn/2)(v_n/v_m) − α_n(γ_m−γ₀)/((γ_m−γ_n)²(γ_n−γ₀))| over
    ordered pairs, with v_m = Ω_m(P₀) = κ_m/(γ_m − γ₀) for Q₀ at infinity.
    """
    M = len(state.gammas)
    pairs = list(pairs) if pairs is not None else [(m, n) for m in range(M) for n in range(M) if m != n]
    b = bergmann_branch_matrix(state).b
    g, a = state.gammas, state.alphas
    v = state.kappas / (g - gamma0)
    worst = 0.0
    for m, n in pairs:
        lhs = 0.5 * b[m, n] * v[n] / v[m]
        rhs = a[n] * (g[m] - gamma0) / ((g[m] - g[n]) ** 2 * (g[n] - gamma0))
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    return worst


def beta_grid(cov: Data, index: int, re_values: Sequence[float], im_values: Sequence[float],
              tolerances: Tolerances = DEFAULT_TOLERANCES) -> List[Dict[str, object]]:
    """
    β_mn over a rectangular grid of values of λ_index, the other branch
    points held fixed. Grid points are reached by short flows from an
    already visited neighbour.
    """
    state = cov if isinstance(cov, FlowState) else FlowState.from_covering(cov)
    re_values, im_values = list(re_values), list(im_values)
    rows, cols = len(re_values), len(im_values)
    start = (rows // 2, cols // 2)
    states: Dict[Tuple[int, int], FlowState] = {}
    for parent, node in lattice_walk(rows, cols, start):
        target = state.lambdas.copy()
        target[index] = complex(re_values[node[0]], im_values[node[1]])
        source = state if parent is None else states[parent]
        states[node] = flow_to(source, target, tolerances)
    records = []
    for (i, j), s in sorted(states.items()):
        beta = bergmann_branch_matrix(s).beta
        record = {"re": re_values[i], "im": im_values[j]}
        for m, n in all_pairs(s.branch_count):
            record[f"re_beta_{m + 1}{n + 1}"] = float(beta[m, n].real)
            record[f"im_beta_{m + 1}{n + 1}"] = float(beta[m, n].imag)
        records.append(record)
    return records


def write_beta_csv(records: List[Dict[str, object]], path: str):
    if not records:
        raise ValueError("No grid records to write.")
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(records[0]))
        writer.writeheader()
        writer.writerows(records)
