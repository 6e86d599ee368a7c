"""
Diagonal systems of hydrodynamic type from contour moments.

For densities h, h₁, h₂ on a contour carried at fixed λ, the moments
M_m(h) = ∮ h B_m = κ_m ∮ h dν/(ν − γ_m)² define

    V_m = M_m(h₁)/M_m(h),   Φ_m = M_m(h₂)/M_m(h),

and λ(x, t) given implicitly by M_m(h₂) + t M_m(h) + x M_m(h₁) = 0
solves ∂λ_m/∂x = V_m ∂λ_m/∂t.
"""
import csv
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..components.base import Density
from ..components.contours import Contour, contour_from_document
from ..components.densities import FourierDensity, density_from_document
from ..config import DEFAULT_TOLERANCES, Tolerances, parse_complex, require
from ..core.deformation import FlowState, flow_to, partial_derivative, resolve_covering
from ..graph.lattice import lattice_walk
from ..solvers.newton import damped_newton
from ..utils.exceptions import ConfigParse, GradientCatastrophe, HurwitzError, NewtonDivergence, ZeroDenominator

logger = logging.getLogger(__name__)

Node = Tuple[int, int]


@dataclass
class HydroConfig:
    """
    :param contour: Contour l, carried by flows at fixed λ.
    :param h: Normalizing density.
    :param h1: Density of the speeds.
    :param h2: Density of the hodograph right-hand side.
    """
    contour: Contour
    h: Density
    h1: Density
    h2: Density

    def prepare(self, state: FlowState) -> FlowState:
        if self.contour.name in state.contours:
            return state
        return state.with_contour(self.contour.name, self.contour.initial_nodes)


def moments(cfg: HydroConfig, state: FlowState, density: Density,
            tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """M_m = κ_m Σ_k w_k/(γ_k − γ_m)² for all m."""
    cfg.contour.check_margin(state, state.gammas, "critical point", tolerances)
    nodes = cfg.contour.nodes(state)
    weights = cfg.contour.weights(state, density)
    return state.kappas * np.sum(weights / (nodes[None, :] - state.gammas[:, None]) ** 2, axis=1)


def moment(cfg: HydroConfig, state: FlowState, density: Density, m: int,
           tolerances: Tolerances = DEFAULT_TOLERANCES) -> complex:
    return complex(moments(cfg, state, density, tolerances)[m])


def _normalizer(cfg: HydroConfig, state: FlowState, tolerances: Tolerances) -> np.ndarray:
    denominator = moments(cfg, state, cfg.h, tolerances)
    nodes = cfg.contour.nodes(state)
    bound = np.abs(state.kappas) * np.sum(
        np.abs(cfg.contour.weights(state, cfg.h)) / np.abs(nodes[None, :] - state.gammas[:, None]) ** 2, axis=1)
    small = np.abs(denominator) <= 1e-12 * np.maximum(bound, np.finfo(float).tiny)
    if np.any(small):
        raise ZeroDenominator(f"∮ h B_m vanishes for m = {list(np.nonzero(small)[0] + 1)}.")
    return denominator


def speeds(cfg: HydroConfig, state: FlowState, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    return moments(cfg, state, cfg.h1, tolerances) / _normalizer(cfg, state, tolerances)


def phis(cfg: HydroConfig, state: FlowState, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    return moments(cfg, state, cfg.h2, tolerances) / _normalizer(cfg, state, tolerances)


def christoffel(cfg: HydroConfig, state: FlowState, tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Γ^n_{nm} = β_mn M_m(h)/M_n(h); entry [n, m]."""
    d = state.gammas[:, None] - state.gammas[None, :]
    np.fill_diagonal(d, 1.0)
    beta = 0.5 * np.outer(state.kappas, state.kappas) / d ** 2
    np.fill_diagonal(beta, 0.0)
    normalizer = _normalizer(cfg, state, tolerances)
    return beta * normalizer[None, :] / normalizer[:, None]


def verify_tsarev(cfg: HydroConfig, state: FlowState, pair: Tuple[int, int],
                  tolerances: Tolerances = DEFAULT_TOLERANCES) -> Dict[str, float]:
    """
    ∂_m V_n − Γ^n_{nm}(V_m − V_n) and the same for Φ, by differences over
    flows, plus the ratio form ∂_m Φ_n/(Φ_n − Φ_m) − ∂_m V_n/(V_n − V_m)
    when V_n ≠ V_m.
    """
    m, n = pair
    if m == n:
        raise ValueError("The Tsarev relations couple distinct indices only.")
    V = speeds(cfg, state, tolerances)
    Phi = phis(cfg, state, tolerances)
    gamma = christoffel(cfg, state, tolerances)[n, m]
    dV = complex(partial_derivative(state, m, lambda s: speeds(cfg, s, tolerances)[n], tolerances))
    dPhi = complex(partial_derivative(state, m, lambda s: phis(cfg, s, tolerances)[n], tolerances))
    result = {
        "speed": abs(dV - gamma * (V[m] - V[n])),
        "phi": abs(dPhi - gamma * (Phi[m] - Phi[n])),
        "ratio": float("nan"),
    }
    gap_v, gap_phi = V[n] - V[m], Phi[n] - Phi[m]
    if abs(gap_v) > 1e-8 * max(1.0, abs(V[n])) and abs(gap_phi) > 1e-8 * max(1.0, abs(Phi[n])):
        result["ratio"] = abs(dPhi / gap_phi - dV / gap_v)
    return result


def hodograph_residual(cfg: HydroConfig, state: FlowState, x: complex, t: complex,
                       tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """F_m = M_m(h₂) + t M_m(h) + x M_m(h₁)."""
    return (moments(cfg, state, cfg.h2, tolerances) + t * moments(cfg, state, cfg.h, tolerances)
            + x * moments(cfg, state, cfg.h1, tolerances))


@dataclass
class HodographState:
    x: complex
    t: complex
    lambdas: np.ndarray
    state: FlowState
    residual_norm: float
    iterations: int
    history: List[float] = field(default_factory=list)
    smallest_singular_value: float = float("nan")

    def ratio_residual(self, cfg: HydroConfig, tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
        """max |Φ_m + t + V_m x|; zero exactly when the hodograph equations hold."""
        V = speeds(cfg, self.state, tolerances)
        Phi = phis(cfg, self.state, tolerances)
        return float(np.max(np.abs(Phi + self.t + V * self.x)))

    def to_document(self) -> Dict[str, object]:
        return {"x": [self.x.real, self.x.imag], "t": [self.t.real, self.t.imag],
                "lambdas": [[float(l.real), float(l.imag)] for l in self.lambdas],
                "residual_norm": self.residual_norm, "iterations": self.iterations,
                "history": self.history, "smallest_singular_value": self.smallest_singular_value}


def hodograph_jacobian(cfg: HydroConfig, state: FlowState, x: complex, t: complex,
                       tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """∂F_m/∂λ_n by differences over short flows (one column per n)."""
    columns = [partial_derivative(state, n, lambda s: hodograph_residual(cfg, s, x, t, tolerances), tolerances)
               for n in range(state.branch_count)]
    return np.column_stack(columns)


def _singular_ratio(jacobian: np.ndarray) -> Tuple[float, float]:
    values = np.linalg.svd(jacobian, compute_uv=False)
    largest = float(values[0]) if values.size else 0.0
    smallest = float(values[-1]) if values.size else 0.0
    return smallest, (smallest / largest if largest > 0 else 0.0)


def hodograph_solve(cfg: HydroConfig, start: FlowState, x: complex, t: complex,
                    seed_lambdas: Optional[Sequence[complex]] = None,
                    tolerances: Tolerances = DEFAULT_TOLERANCES) -> HodographState:
    """
    Damped Newton on F(λ) = 0 for the M branch points, re-flowing the
    covering to every iterate. GradientCatastrophe is raised when the
    Jacobian is numerically singular (characteristics cross).

    The covering is first flowed from start to the seed. A seed the flow
    cannot reach raises NewtonDivergence with iterations = 0 and the flow
    error as its cause, as does an iteration that stalls or runs out of
    newton_maxiter.
    """
    x, t = complex(x), complex(t)
    start = cfg.prepare(start)
    seed = np.asarray(start.lambdas if seed_lambdas is None else seed_lambdas, dtype=complex)
    try:
        origin = flow_to(start, seed, tolerances) if not np.allclose(seed, start.lambdas) else start
    except HurwitzError as e:
        raise NewtonDivergence(f"Seed {seed} is out of reach of the start covering: {e}",
                               iterations=0, residual_norm=float("inf")) from e
    record = {"smallest": float("nan")}

    def evaluate(lambdas):
        state = flow_to(origin, lambdas, tolerances)
        return hodograph_residual(cfg, state, x, t, tolerances), state

    def jacobian(lambdas, state):
        J = hodograph_jacobian(cfg, state, x, t, tolerances)
        smallest, ratio = _singular_ratio(J)
        record["smallest"] = smallest
        if ratio < 1e-10:
            raise GradientCatastrophe(
                f"Hodograph Jacobian is singular at x={x}, t={t} (smallest singular value {smallest:.3e}).",
                smallest_singular_value=smallest)
        return J

    scale = max(1.0, float(np.linalg.norm(moments(cfg, origin, cfg.h, tolerances))) * (1.0 + abs(t) + abs(x)))
    result = damped_newton(evaluate, seed, jacobian, tol=tolerances.newton_tol * scale,
                           maxiter=tolerances.newton_maxiter, polish=1)
    logger.debug("hodograph at x=%s t=%s: %d iterations, |F|=%.3e", x, t, result.iterations, result.residual_norm)
    return HodographState(x=x, t=t, lambdas=result.x, state=result.payload, residual_norm=result.residual_norm,
                          iterations=result.iterations, history=result.history,
                          smallest_singular_value=record["smallest"])


def manufactured_config(contour: Contour, h: Density, h1: Density, state: FlowState,
                        x0: complex = 0.0, t0: complex = 0.0, base: Optional[Density] = None,
                        seed=0, tolerances: Tolerances = DEFAULT_TOLERANCES) -> HydroConfig:
    """
    A configuration whose hodograph solution at (x0, t0) is state.lambdas:

        h₂ = −t0 h − x0 h₁ + g,   g = g₀ + Σ_{j=1..M} c_j e^{ijt},

    with c chosen so that every moment of g vanishes at state. The
    correction g keeps the Jacobian at (x0, t0) nonsingular.
    """
    cfg = HydroConfig(contour, h, h1, h)
    state = cfg.prepare(state)
    M = state.branch_count
    g0 = base if base is not None else FourierDensity.random(2, seed, name="g0")
    modes = [FourierDensity.mode(j, name=f"e{j}") for j in range(1, M + 1)]
    system = np.column_stack([moments(cfg, state, mode, tolerances) for mode in modes])
    rhs = -moments(cfg, state, g0, tolerances)
    coefficients, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    g = g0
    for c, mode in zip(coefficients, modes):
        g = g + complex(c) * mode
    h2 = (-complex(t0)) * h + (-complex(x0)) * h1 + g
    h2.name = "h2"
    return HydroConfig(contour, h, h1, h2)


def hodograph_grid(cfg: HydroConfig, start: FlowState, xs: Sequence[float], ts: Sequence[float],
                   center: Optional[Node] = None, seed_lambdas: Optional[Sequence[complex]] = None,
                   tolerances: Tolerances = DEFAULT_TOLERANCES) -> Dict[Node, HodographState]:
    """
    Solutions on the grid xs × ts. The center node is solved from
    seed_lambdas; every other node is seeded with an already solved
    neighbour, in breadth-first order.
    """
    xs, ts = list(xs), list(ts)
    solved: Dict[Node, HodographState] = {}
    for parent, node in lattice_walk(len(xs), len(ts), center):
        x, t = xs[node[0]], ts[node[1]]
        if parent is None:
            solved[node] = hodograph_solve(cfg, start, x, t, seed_lambdas, tolerances)
        else:
            previous = solved[parent]
            solved[node] = hodograph_solve(cfg, previous.state, x, t, previous.lambdas, tolerances)
    return solved


def verify_hds(cfg: HydroConfig, grid: Dict[Node, HodographState], xs: Sequence[float], ts: Sequence[float],
               tolerances: Tolerances = DEFAULT_TOLERANCES) -> Dict[str, object]:
    """
    Relative residual of λ_{m,x} − V_m λ_{m,t} at interior nodes by
    three-point central differences.
    """
    rows, cols = len(xs), len(ts)
    if rows < 3 or cols < 3:
        raise ValueError("The PDE check needs at least three grid lines in both x and t.")
    residuals = {}
    for i in range(1, rows - 1):
        for j in range(1, cols - 1):
            dx = xs[i + 1] - xs[i - 1]
            dt = ts[j + 1] - ts[j - 1]
            lam_x = (grid[(i + 1, j)].lambdas - grid[(i - 1, j)].lambdas) / dx
            lam_t = (grid[(i, j + 1)].lambdas - grid[(i, j - 1)].lambdas) / dt
            V = speeds(cfg, grid[(i, j)].state, tolerances)
            size = np.maximum(np.abs(lam_x), np.abs(V * lam_t))
            size = np.where(size > 0, size, 1.0)
            residuals[(i, j)] = float(np.max(np.abs(lam_x - V * lam_t) / size))
    return {"nodes": residuals, "max_residual": max(residuals.values())}


def grid_records(cfg: HydroConfig, grid: Dict[Node, HodographState],
                 tolerances: Tolerances = DEFAULT_TOLERANCES) -> List[Dict[str, float]]:
    records = []
    for node in sorted(grid):
        solution = grid[node]
        V = speeds(cfg, solution.state, tolerances)
        record = {"x": float(solution.x.real), "t": float(solution.t.real)}
        for m, lam in enumerate(solution.lambdas):
            record[f"re_lambda_{m + 1}"] = float(lam.real)
            record[f"im_lambda_{m + 1}"] = float(lam.imag)
        for m, v in enumerate(V):
            record[f"re_V_{m + 1}"] = float(v.real)
            record[f"im_V_{m + 1}"] = float(v.imag)
        records.append(record)
    return records


def write_grid_csv(records: List[Dict[str, float]], path: str):
    if not records:
        raise ValueError("No grid records to write.")
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(records[0]))
        writer.writeheader()
        writer.writerows(records)


def hydro_config_from_document(document, tolerances: Tolerances = DEFAULT_TOLERANCES) -> Tuple[HydroConfig, FlowState]:
    """
    {"covering": ..., "contour": ..., "h": ..., "h1": ..., "h2": ...}. h2 may be
    {"manufactured": {"x0": .., "t0": .., "seed": .., "base": density}} for a
    configuration solved by the covering's own branch points at (x0, t0).
    """
    cov = resolve_covering(require(document, "covering", "hydro"), tolerances)
    contour = contour_from_document(require(document, "contour", "hydro"), cov, tolerances)
    h = density_from_document(require(document, "h", "hydro"), "h")
    h1 = density_from_document(require(document, "h1", "hydro"), "h1")
    h2 = require(document, "h2", "hydro")
    state = FlowState.from_covering(cov)
    if isinstance(h2, dict) and "manufactured" in h2:
        recipe = h2["manufactured"] or {}
        if not isinstance(recipe, dict):
            raise ConfigParse("hydro.h2.manufactured: expected an object")
        base = density_from_document(recipe["base"], "g0") if "base" in recipe else None
        try:
            seed = int(recipe.get("seed", 0))
        except (TypeError, ValueError):
            raise ConfigParse("hydro.h2.manufactured.seed: expected an integer")
        cfg = manufactured_config(contour, h, h1, state, parse_complex(recipe.get("x0", 0.0), "hydro.h2.x0"),
                                  parse_complex(recipe.get("t0", 0.0), "hydro.h2.t0"), base, seed, tolerances)
    else:
        cfg = HydroConfig(contour, h, h1, density_from_document(h2, "h2"))
    return cfg, cfg.prepare(state)
