"""
Deformations of a covering along paths in branch-point space.

Moving the branch points λ_m moves every critical point, residue and every
point of the covering that sits over a fixed λ:

    ∂γ_m/∂λ_n = α_n/(γ_n−γ_m)              (n ≠ m)
    ∂γ_m/∂λ_m = 1 + Σ_{n≠m} α_n/(γ_m−γ_n)
    ∂α_m/∂λ_n = 2α_nα_m/(γ_n−γ_m)²          (n ≠ m)
    ∂α_m/∂λ_m = −Σ_{n≠m} 2α_nα_m/(γ_n−γ_m)²
    ∂ν/∂λ_n   = −α_n/(ν−γ_n)                at fixed λ(P)

The poles μ_k lie over λ = ∞, which never moves, so they are transported
with the last rule as well.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..config import DEFAULT_TOLERANCES, Tolerances, complex_pairs, parse_complex_list, require
from ..solvers.differences import central_difference
from ..solvers.newton import damped_newton
from ..solvers.ode import continue_roots, final_state, integrate_segment
from ..utils.exceptions import ConfigParse, CriticalCollision, JacobianSingular
from .covering import (
    RationalCovering, critical_data, data_scale, map_derivatives, min_separation,
)

logger = logging.getLogger(__name__)


class ModuliPath:
    """
    A polyline in branch-point space; each segment is traversed at constant
    speed for s ∈ [0, 1].
    """
    def __init__(self, vertices: Sequence[Sequence[complex]], collision_margin: Optional[float] = None):
        vertices = np.array(vertices, dtype=complex)
        if vertices.ndim != 2 or vertices.shape[0] < 1:
            raise ValueError("A moduli path needs at least one vertex of branch points.")
        self.vertices = vertices
        self.collision_margin = collision_margin

    @classmethod
    def straight(cls, start, end, collision_margin: Optional[float] = None) -> "ModuliPath":
        return cls([start, end], collision_margin)

    @classmethod
    def through(cls, start, targets: Sequence[Sequence[complex]],
                collision_margin: Optional[float] = None) -> "ModuliPath":
        return cls([start] + [list(t) for t in targets], collision_margin)

    @property
    def start(self) -> np.ndarray:
        return self.vertices[0]

    @property
    def end(self) -> np.ndarray:
        return self.vertices[-1]

    @property
    def branch_count(self) -> int:
        return self.vertices.shape[1]

    def segments(self) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        for a, b in zip(self.vertices[:-1], self.vertices[1:]):
            yield a, b

    def is_trivial(self) -> bool:
        return bool(np.all(self.vertices == self.vertices[0]))

    def min_branch_separation(self) -> float:
        """Smallest |λ_m(s) − λ_n(s)| along the path (exact on straight segments)."""
        if self.branch_count < 2:
            return float("inf")
        best = min_separation(self.vertices[0])
        for a, b in self.segments():
            d0 = a[:, None] - a[None, :]
            d1 = b[:, None] - b[None, :]
            slope = d1 - d0
            denom = np.abs(slope) ** 2
            s = np.where(denom > 0, -(d0 * np.conj(slope)).real / np.where(denom > 0, denom, 1.0), 0.0)
            s = np.clip(s, 0.0, 1.0)
            closest = np.abs(d0 + s * slope)
            closest[np.diag_indices_from(closest)] = np.inf
            best = min(best, float(closest.min()))
        return best

    def to_document(self) -> Dict[str, object]:
        return {"targets": [complex_pairs(v) for v in self.vertices[1:]]}


def path_from_document(document, start: np.ndarray) -> ModuliPath:
    """{"targets": [[...], ...]} (straight segments) or {"samples": [[...], ...]}."""
    if not isinstance(document, dict):
        raise ConfigParse("path: expected an object with 'targets' or 'samples'")
    margin = document.get("collision_margin")
    if "targets" in document:
        raw = document["targets"]
        if not isinstance(raw, list) or not raw:
            raise ConfigParse("path.targets: expected a non-empty list")
        single = not any(isinstance(v, list) for v in raw[0]) if isinstance(raw[0], list) else True
        if single:
            raw = [raw]
        targets = [parse_complex_list(t, f"path.targets[{i}]") for i, t in enumerate(raw)]
        path = ModuliPath.through(start, targets, margin)
    elif "samples" in document:
        samples = [parse_complex_list(t, f"path.samples[{i}]") for i, t in enumerate(document["samples"])]
        path = ModuliPath(samples, margin)
    else:
        raise ConfigParse("path: expected 'targets' or 'samples'")
    if path.branch_count != len(start):
        raise ConfigParse(f"path: vectors have {path.branch_count} entries, covering has {len(start)} branch points")
    return path


@dataclass(eq=False)
class FlowState:
    """
    Critical data transported along a flow, plus every marked point and
    contour node set that rides along at fixed λ.
    """
    lambdas: np.ndarray
    gammas: np.ndarray
    alphas: np.ndarray
    kappas: np.ndarray
    poles: np.ndarray
    points: Dict[str, complex] = field(default_factory=dict)
    contours: Dict[str, np.ndarray] = field(default_factory=dict)
    extra: Optional[np.ndarray] = None

    @classmethod
    def from_covering(cls, cov: RationalCovering, points: Optional[Dict[str, complex]] = None,
                      contours: Optional[Dict[str, np.ndarray]] = None) -> "FlowState":
        return cls(lambdas=cov.lambdas.copy(), gammas=cov.gammas.copy(), alphas=cov.alphas.copy(),
                   kappas=cov.kappas.copy(), poles=cov.poles.copy(),
                   points={k: complex(v) for k, v in (points or {}).items()},
                   contours={k: np.array(v, dtype=complex) for k, v in (contours or {}).items()})

    def copy(self) -> "FlowState":
        return FlowState(self.lambdas.copy(), self.gammas.copy(), self.alphas.copy(), self.kappas.copy(),
                         self.poles.copy(), dict(self.points),
                         {k: v.copy() for k, v in self.contours.items()},
                         None if self.extra is None else self.extra.copy())

    def with_points(self, **points: complex) -> "FlowState":
        state = self.copy()
        state.points.update({k: complex(v) for k, v in points.items()})
        return state

    def with_contour(self, name: str, nodes: np.ndarray) -> "FlowState":
        state = self.copy()
        state.contours[name] = np.array(nodes, dtype=complex)
        return state

    @property
    def degree(self) -> int:
        return len(self.poles) + 1

    @property
    def branch_count(self) -> int:
        return len(self.gammas)

    @property
    def critical_points(self) -> np.ndarray:
        return self.gammas

    @property
    def critical_values(self) -> np.ndarray:
        return self.lambdas

    @property
    def residues(self) -> np.ndarray:
        """r_k solving Σ_k r_k/(γ_m−μ_k) = λ_m − γ_m in the least-squares sense."""
        if self.poles.size == 0:
            return np.zeros(0, dtype=complex)
        system = 1.0 / (self.gammas[:, None] - self.poles[None, :])
        solution, *_ = np.linalg.lstsq(system, self.lambdas - self.gammas, rcond=None)
        return solution

    @property
    def scale(self) -> float:
        return data_scale(self.lambdas, self.gammas, self.poles)

    def point(self, name: str) -> complex:
        """A marked point by name; 'pole:k' is the k-th pole, 'inf' the sheet-1 infinity."""
        if name == "inf":
            return complex(np.inf)
        if name.startswith("pole:"):
            return complex(self.poles[int(name.split(":", 1)[1]) - 1])
        if name not in self.points:
            raise KeyError(f"Unknown marked point '{name}'. Available: {sorted(self.points)}")
        return self.points[name]

    def to_document(self) -> Dict[str, object]:
        return {
            "branch_points": complex_pairs(self.lambdas),
            "critical_points": complex_pairs(self.gammas),
            "alphas": complex_pairs(self.alphas),
            "kappas": complex_pairs(self.kappas),
            "poles": complex_pairs(self.poles),
            "residues": complex_pairs(self.residues),
            "marked_points": {k: complex_pairs([v])[0] for k, v in sorted(self.points.items())},
            "contours": {k: len(v) for k, v in sorted(self.contours.items())},
        }


class CoupledSystem(ABC):
    """
    Extra ODEs integrated together with a flow. They see the marked points
    and their velocities ds-derivatives at every evaluation.
    """
    @abstractmethod
    def initial(self, state: FlowState) -> np.ndarray:
        pass

    @abstractmethod
    def derivative(self, positions: Dict[str, complex], velocities: Dict[str, complex],
                   y: np.ndarray) -> np.ndarray:
        pass


def _collision_margin(state: FlowState, path: ModuliPath, tolerances: Tolerances) -> float:
    if path.collision_margin is not None:
        return float(path.collision_margin)
    return tolerances.collision_margin * state.scale


def _flow_segment(state: FlowState, start: np.ndarray, end: np.ndarray, margin: float,
                  tolerances: Tolerances, coupled: Optional[CoupledSystem]) -> FlowState:
    M = state.branch_count
    names = sorted(state.points)
    contour_names = sorted(state.contours)
    sizes = [len(state.poles), len(names)] + [len(state.contours[c]) for c in contour_names]
    carried = np.concatenate([state.poles, np.array([state.points[n] for n in names], dtype=complex)]
                             + [state.contours[c] for c in contour_names]).astype(complex)
    extra0 = state.extra if coupled is not None else None
    if coupled is not None and extra0 is None:
        extra0 = coupled.initial(state)
    y0 = np.concatenate([state.gammas, state.alphas, carried]
                        + ([extra0] if extra0 is not None else [])).astype(complex)
    n_carried = carried.size
    delta = np.asarray(end - start, dtype=complex)
    off = ~np.eye(M, dtype=bool)
    named_slice = slice(2 * M + sizes[0], 2 * M + sizes[0] + sizes[1])

    def rhs(s, y):
        gammas, alphas = y[:M], y[M:2 * M]
        carried_now = y[2 * M:2 * M + n_carried]
        diff = gammas[:, None] - gammas[None, :]
        if M > 1 and np.min(np.abs(diff[off])) < margin:
            raise CriticalCollision(f"Critical points collide at s={s:.6f}.")
        inverse = np.zeros((M, M), dtype=complex)
        inverse[off] = 1.0 / diff[off]
        weights = alphas * delta
        d_gammas = delta * (1.0 + inverse @ alphas) - inverse @ weights
        squared = inverse ** 2
        d_alphas = 2.0 * alphas * (squared @ weights - delta * (squared @ alphas))
        offsets = carried_now[:, None] - gammas[None, :]
        if offsets.size and np.min(np.abs(offsets)) < margin:
            raise CriticalCollision(f"A marked point or contour node hits a critical point at s={s:.6f}.")
        d_carried = -(weights[None, :] / offsets).sum(axis=1)
        parts = [d_gammas, d_alphas, d_carried]
        if coupled is not None:
            positions = dict(zip(names, y[named_slice]))
            velocities = dict(zip(names, d_carried[sizes[0]:sizes[0] + sizes[1]]))
            for k, pole in enumerate(y[2 * M:2 * M + sizes[0]]):
                positions[f"pole:{k + 1}"] = pole
                velocities[f"pole:{k + 1}"] = d_carried[k]
            parts.append(coupled.derivative(positions, velocities, y[2 * M + n_carried:]))
        return np.concatenate(parts)

    sol = integrate_segment(rhs, y0, tolerances)
    y = final_state(sol)
    kappas = continue_roots(state.kappas, sol.y[M:2 * M, 1:].T, lambda row: 2.0 * row)

    offset = 2 * M
    poles = y[offset:offset + sizes[0]]
    offset += sizes[0]
    points = dict(zip(names, (complex(v) for v in y[offset:offset + sizes[1]])))
    offset += sizes[1]
    contours = {}
    for name, size in zip(contour_names, sizes[2:]):
        contours[name] = y[offset:offset + size].copy()
        offset += size
    extra = y[offset:].copy() if coupled is not None else state.extra
    return FlowState(lambdas=np.array(end, dtype=complex), gammas=y[:M].copy(), alphas=y[M:2 * M].copy(),
                     kappas=kappas, poles=poles.copy(), points=points, contours=contours, extra=extra)


def flow(start: Union[RationalCovering, FlowState], path: ModuliPath,
         tolerances: Tolerances = DEFAULT_TOLERANCES, coupled: Optional[CoupledSystem] = None) -> FlowState:
    """
    Transports the critical data, marked points and contours of start along
    path. κ_m is continued by picking, at every accepted step, the square
    root of 2α_m nearest its previous value.
    """
    state = start if isinstance(start, FlowState) else FlowState.from_covering(start)
    if path.branch_count != state.branch_count:
        raise ValueError(f"Path has {path.branch_count} branch points, state has {state.branch_count}.")
    if not np.allclose(path.start, state.lambdas, rtol=0.0, atol=1e-9 * state.scale):
        raise ValueError("Path must start at the branch points of the state.")
    margin = _collision_margin(state, path, tolerances)
    if path.min_branch_separation() < margin:
        raise CriticalCollision("Branch points collide along the path.")
    if coupled is not None and state.extra is None:
        state = state.copy()
        state.extra = np.asarray(coupled.initial(state), dtype=complex)
    if path.is_trivial():
        return state.copy()
    for a, b in path.segments():
        if np.all(a == b):
            continue
        state = _flow_segment(state, a, b, margin, tolerances, coupled)
    logger.debug("flowed to lambdas=%s", state.lambdas)
    return state


def flow_to(start: Union[RationalCovering, FlowState], target: Sequence[complex],
            tolerances: Tolerances = DEFAULT_TOLERANCES, coupled: Optional[CoupledSystem] = None) -> FlowState:
    state = start if isinstance(start, FlowState) else FlowState.from_covering(start)
    return flow(state, ModuliPath.straight(state.lambdas, np.asarray(target, dtype=complex)),
                tolerances, coupled)


def fd_step(state: FlowState, direction: np.ndarray, tolerances: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Step length along direction, relative to the branch-point scale."""
    size = float(np.max(np.abs(direction))) or 1.0
    return tolerances.fd_step * max(1.0, float(np.max(np.abs(state.lambdas)))) / size


def directional_derivative(state: FlowState, direction: Sequence[complex],
                           evaluate: Callable[[FlowState], np.ndarray],
                           tolerances: Tolerances = DEFAULT_TOLERANCES,
                           coupled: Optional[CoupledSystem] = None, step: Optional[float] = None) -> np.ndarray:
    """
    Σ_k d_k ∂/∂λ_k of evaluate, by central differences over genuine short
    flows from state (one Richardson level).
    """
    direction = np.asarray(direction, dtype=complex)
    h = step if step is not None else fd_step(state, direction, tolerances)

    def shifted(s):
        if s == 0.0:
            return np.asarray(evaluate(state))
        return np.asarray(evaluate(flow_to(state, state.lambdas + s * direction, tolerances, coupled)))

    return central_difference(shifted, h)


def partial_derivative(state: FlowState, index: int, evaluate: Callable[[FlowState], np.ndarray],
                       tolerances: Tolerances = DEFAULT_TOLERANCES,
                       coupled: Optional[CoupledSystem] = None) -> np.ndarray:
    direction = np.zeros(state.branch_count, dtype=complex)
    direction[index] = 1.0
    return directional_derivative(state, direction, evaluate, tolerances, coupled)


def _map_system(unknowns: np.ndarray, K: int, targets: np.ndarray):
    residues, poles, gammas = unknowns[:K], unknowns[K:2 * K], unknowns[2 * K:]
    value, first, second = map_derivatives(poles, residues, gammas)
    residual = np.concatenate([value - targets, first])
    M = len(gammas)
    d = gammas[:, None] - poles[None, :]
    jacobian = np.zeros((2 * M, 2 * K + M), dtype=complex)
    jacobian[:M, :K] = 1.0 / d
    jacobian[:M, K:2 * K] = residues / d ** 2
    jacobian[:M, 2 * K:] = np.diag(first)
    jacobian[M:, :K] = -1.0 / d ** 2
    jacobian[M:, K:2 * K] = -2.0 * residues / d ** 3
    jacobian[M:, 2 * K:] = np.diag(second)
    return residual, jacobian


def reconstruct_map(state: Optional[FlowState] = None, target_lambdas: Optional[Sequence[complex]] = None,
                    seed: Optional[RationalCovering] = None,
                    tolerances: Tolerances = DEFAULT_TOLERANCES) -> RationalCovering:
    """
    The rational map whose branch points are target_lambdas, by Newton on
    (r_k, μ_k, γ_m) for R(γ_m) = λ_m, R'(γ_m) = 0.

    The iteration starts from the transported data of state when given (its
    poles, least-squares residues and critical points), else from seed. The
    result keeps the index order and κ signs of the starting data.
    """
    if state is None and seed is None:
        raise ValueError("reconstruct_map needs a flow state or a seed covering.")
    if state is not None:
        residues0, poles0, gammas0, kappas0 = state.residues, state.poles, state.gammas, state.kappas
        targets = np.asarray(state.lambdas if target_lambdas is None else target_lambdas, dtype=complex)
    else:
        residues0, poles0, gammas0, kappas0 = seed.residues, seed.poles, seed.gammas, seed.kappas
        targets = np.asarray(seed.lambdas if target_lambdas is None else target_lambdas, dtype=complex)
    K = len(poles0)
    if len(targets) != len(gammas0):
        raise ValueError(f"Expected {len(gammas0)} target branch points, got {len(targets)}.")

    def evaluate(x):
        residual, jacobian = _map_system(x, K, targets)
        return residual, jacobian

    result = damped_newton(evaluate, np.concatenate([residues0, poles0, gammas0]),
                           lambda x, jacobian: jacobian,
                           tol=tolerances.newton_tol * data_scale(targets),
                           maxiter=tolerances.newton_maxiter, polish=2)
    residues, poles, gammas = result.x[:K], result.x[K:2 * K], result.x[2 * K:]
    logger.debug("reconstructed map in %d Newton iterations, residual %.3e",
                 result.iterations, result.residual_norm)

    cov = critical_data(poles, residues, tolerances)
    rows, cols = linear_sum_assignment(np.abs(gammas[:, None] - cov.gammas[None, :]))
    order = cols[np.argsort(rows)]
    kappas = cov.kappas[order]
    kappas = np.where(np.abs(kappas + kappas0) < np.abs(kappas - kappas0), -kappas, kappas)
    return replace(cov, gammas=cov.gammas[order], lambdas=cov.lambdas[order],
                   alphas=cov.alphas[order], kappas=kappas)


@dataclass
class BMZSplit:
    """
    Branch points split into an x-family (index_x) and a y-family (index_y),
    each moved along a user curve. Indices are 0-based.
    """
    index_x: Sequence[int]
    index_y: Sequence[int]
    curve_x: Callable[[complex], Sequence[complex]]
    curve_y: Callable[[complex], Sequence[complex]]
    derivative_x: Optional[Callable[[complex], Sequence[complex]]] = None
    derivative_y: Optional[Callable[[complex], Sequence[complex]]] = None

    def validate(self, branch_count: int):
        ix, iy = set(self.index_x), set(self.index_y)
        if ix & iy:
            raise ValueError("BMZ index sets must be disjoint.")
        if ix | iy != set(range(branch_count)):
            raise ValueError(f"BMZ index sets must cover all {branch_count} branch points.")

    def lambdas(self, x: complex, y: complex) -> np.ndarray:
        values = np.zeros(len(self.index_x) + len(self.index_y), dtype=complex)
        values[list(self.index_x)] = np.asarray(self.curve_x(x), dtype=complex)
        values[list(self.index_y)] = np.asarray(self.curve_y(y), dtype=complex)
        return values

    def velocity_x(self, x: complex, step: float = 1e-5) -> np.ndarray:
        if self.derivative_x is not None:
            return np.asarray(self.derivative_x(x), dtype=complex)
        return central_difference(lambda s: np.asarray(self.curve_x(x + s), dtype=complex), step)

    def velocity_y(self, y: complex, step: float = 1e-5) -> np.ndarray:
        if self.derivative_y is not None:
            return np.asarray(self.derivative_y(y), dtype=complex)
        return central_difference(lambda s: np.asarray(self.curve_y(y + s), dtype=complex), step)


def bmz_realize(cov: Union[RationalCovering, FlowState], split: BMZSplit, x: complex, y: complex,
                tolerances: Tolerances = DEFAULT_TOLERANCES) -> Dict[str, object]:
    """
    Realizes the two-family splitting at (x, y):
        c_n = α_n ∂λ_n/∂x (n in the x-family), b_m = α_m ∂λ_m/∂y (m in the y-family),
    and returns FD-over-flow residuals of
        ∂γ_n/∂y + Σ b_m/(γ_n−γ̃_m) = 0,   ∂c_n/∂y − 2c_n Σ b_m/(γ_n−γ̃_m)² = 0,
    and of the two mirror equations with x and y exchanged.
    """
    state = cov if isinstance(cov, FlowState) else FlowState.from_covering(cov)
    split.validate(state.branch_count)
    ix, iy = list(split.index_x), list(split.index_y)
    base = flow_to(state, split.lambdas(x, y), tolerances)
    lx, ly = split.velocity_x(x), split.velocity_y(y)

    def families(s: FlowState):
        return s.gammas[ix], s.gammas[iy], s.alphas[ix] * lx, s.alphas[iy] * ly

    def at(dx: complex, dy: complex) -> FlowState:
        if dx == 0 and dy == 0:
            return base
        return flow_to(base, split.lambdas(x + dx, y + dy), tolerances)

    gx, gy, c, b = families(base)
    h = tolerances.fd_step * max(1.0, abs(x), abs(y))
    d_y = central_difference(lambda s: np.concatenate(families(at(0, s))[::2]), h)
    d_x = central_difference(lambda s: np.concatenate(families(at(s, 0))[1::2]), h)
    n_x, n_y = len(ix), len(iy)
    dgx_dy, dc_dy = d_y[:n_x], d_y[n_x:]
    dgy_dx, db_dx = d_x[:n_y], d_x[n_y:]

    inv_xy = 1.0 / (gx[:, None] - gy[None, :]) if n_x and n_y else np.zeros((n_x, n_y), dtype=complex)
    residuals = {
        "gamma_y": dgx_dy + inv_xy @ b,
        "c_y": dc_dy - 2.0 * c * (inv_xy ** 2 @ b),
        "gamma_x": dgy_dx - inv_xy.T @ c,
        "b_x": db_dx - 2.0 * b * (inv_xy.T ** 2 @ c),
    }
    worst = max((float(np.max(np.abs(v))) for v in residuals.values() if v.size), default=0.0)
    return {"b": b, "c": c, "residuals": residuals, "max_residual": worst, "state": base}


def resolve_covering(document, tolerances: Tolerances = DEFAULT_TOLERANCES) -> RationalCovering:
    """
    Builds a covering from {"degree", "poles", "residues"} or from
    {"target_branch_points", "seed_covering"} by flowing the seed and
    reconstructing the map at the targets.
    """
    if not isinstance(document, dict):
        raise ConfigParse("covering: expected an object")
    if "target_branch_points" in document:
        seed = resolve_covering(require(document, "seed_covering", "covering"), tolerances)
        targets = parse_complex_list(document["target_branch_points"], "covering.target_branch_points")
        if len(targets) != seed.branch_count:
            raise ConfigParse(f"covering.target_branch_points: expected {seed.branch_count} values")
        state = flow_to(seed, targets, tolerances)
        return reconstruct_map(state, targets, seed, tolerances)
    poles = parse_complex_list(require(document, "poles", "covering"), "covering.poles")
    residues = parse_complex_list(require(document, "residues", "covering"), "covering.residues")
    degree = document.get("degree", len(poles) + 1)
    if int(degree) != len(poles) + 1:
        raise ConfigParse(f"covering: degree {degree} needs {int(degree) - 1} poles, got {len(poles)}")
    return critical_data(poles, residues, tolerances)
