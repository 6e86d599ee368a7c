"""
Genus-zero branched coverings of the λ-sphere.

A covering of degree N is stored as the rational map

    R(γ) = γ + Σ_k r_k / (γ − μ_k),   k = 1..N−1,

normalized so that R(γ) = γ + o(1) at infinity. Its 2N−2 critical points γ_m
project to the branch points λ_m = R(γ_m); the residues α_m = 1/R''(γ_m)
govern every deformation formula of the package.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..config import DEFAULT_TOLERANCES, Tolerances, complex_pairs
from ..utils.exceptions import (
    CriticalPointHit, DegenerateCritical, NonGenericCovering,
    PathThroughBranchPoint, PoleHit,
)

logger = logging.getLogger(__name__)

ComplexLike = Union[complex, float, int]


def _complex_array(values) -> np.ndarray:
    return np.atleast_1d(np.asarray(values, dtype=complex)).ravel()


def map_derivatives(poles: np.ndarray, residues: np.ndarray, gamma) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """R, R' and R'' at gamma (scalar or array) without any pole guard."""
    g = np.asarray(gamma, dtype=complex)
    d = g[..., None] - poles
    value = g + np.sum(residues / d, axis=-1)
    first = 1.0 - np.sum(residues / d ** 2, axis=-1)
    second = 2.0 * np.sum(residues / d ** 3, axis=-1)
    return value, first, second


def data_scale(*arrays: Sequence[complex]) -> float:
    scale = 1.0
    for values in arrays:
        values = np.asarray(values)
        if values.size:
            scale = max(scale, float(np.max(np.abs(values))))
    return scale


def min_separation(values: np.ndarray) -> float:
    """Smallest pairwise distance, inf for fewer than two values."""
    values = np.asarray(values)
    if values.size < 2:
        return float("inf")
    d = np.abs(values[:, None] - values[None, :])
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


def lexicographic_order(values: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Indices sorting complex values by (real, imag); real parts equal up to roundoff tie."""
    real_key = np.round(values.real / scale, 9)
    return np.lexsort((values.imag, real_key))


@dataclass(frozen=True, eq=False)
class RationalCovering:
    """
    A degree-N rational map together with its critical data.

    Instances are produced by critical_data (or by reconstruct_map in the
    deformation module) and are treated as immutable values.
    """
    poles: np.ndarray
    residues: np.ndarray
    gammas: np.ndarray
    lambdas: np.ndarray
    alphas: np.ndarray
    kappas: np.ndarray

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
    def scale(self) -> float:
        return data_scale(self.poles, np.sqrt(np.abs(self.residues)), self.gammas, self.lambdas)

    def evaluate(self, gamma: ComplexLike) -> complex:
        return eval_map(self, gamma)

    def to_document(self) -> Dict[str, object]:
        return {
            "degree": self.degree,
            "poles": complex_pairs(self.poles),
            "residues": complex_pairs(self.residues),
        }

    def __repr__(self):
        return f"RationalCovering(degree={self.degree}, lambdas={np.round(self.lambdas, 6).tolist()})"


@dataclass(frozen=True)
class CoveringPoint:
    """A point P = (λ, γ) of the covering; sheet is set when a labeling was used."""
    gamma: complex
    lam: complex
    sheet: Optional[int] = None


def _validate_map_data(poles: np.ndarray, residues: np.ndarray, tol: Tolerances) -> float:
    if len(poles) != len(residues):
        raise ValueError(f"Got {len(poles)} poles but {len(residues)} residues.")
    if not (np.all(np.isfinite(poles)) and np.all(np.isfinite(residues))):
        raise ValueError("Poles and residues must be finite.")
    scale = data_scale(poles, np.sqrt(np.abs(residues)))
    if min_separation(poles) <= tol.genericity * scale:
        raise NonGenericCovering("Poles must be pairwise distinct.")
    if residues.size and float(np.min(np.abs(residues))) <= tol.genericity * scale ** 2:
        raise NonGenericCovering("Residues must be nonzero.")
    return scale


def _derivative_numerator(poles: np.ndarray, residues: np.ndarray) -> np.ndarray:
    """Coefficients of Π(γ−μ_k)² · R'(γ), a monic polynomial of degree 2N−2."""
    numerator = np.poly(np.repeat(poles, 2)).astype(complex)
    for k, r in enumerate(residues):
        others = np.repeat(np.delete(poles, k), 2)
        term = r * np.poly(others)
        numerator[-len(term):] -= term
    return numerator


def critical_residual(poles: np.ndarray, residues: np.ndarray, gamma) -> np.ndarray:
    """|R'(γ)| relative to 1 + Σ|r_k/(γ−μ_k)²|; close to one next to a pole."""
    g = np.asarray(gamma, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = residues / (g[..., None] - poles) ** 2
        relative = np.abs(1.0 - np.sum(terms, axis=-1)) / (1.0 + np.sum(np.abs(terms), axis=-1))
    return np.where(np.isfinite(relative), relative, 1.0)


def critical_data(poles, residues, tolerances: Tolerances = DEFAULT_TOLERANCES) -> RationalCovering:
    """
    Builds the covering of R(γ) = γ + Σ r_k/(γ−μ_k) with all its critical data.

    Critical points are the roots of the cleared numerator of R', polished by
    two Newton steps on R'. Roots whose relative R' residual exceeds
    tolerances.degenerate (spurious roots at the poles) are dropped; if fewer
    than 2N−2 remain the covering is rejected. They are ordered by (real, imag).
    """
    poles = _complex_array(poles) if np.size(poles) else np.zeros(0, dtype=complex)
    residues = _complex_array(residues) if np.size(residues) else np.zeros(0, dtype=complex)
    scale = _validate_map_data(poles, residues, tolerances)

    gammas = np.roots(_derivative_numerator(poles, residues)).astype(complex)
    for _ in range(2):
        with np.errstate(divide="ignore", invalid="ignore"):
            _, first, second = map_derivatives(poles, residues, gammas)
        step = np.divide(first, second, out=np.zeros_like(first), where=np.isfinite(second) & (second != 0))
        gammas = gammas - step

    residual = critical_residual(poles, residues, gammas)
    spurious = residual > tolerances.degenerate
    for gamma, r in zip(gammas[spurious], residual[spurious]):
        logger.debug("dropping spurious critical point %s (relative R' residual %.3e)", gamma, r)
    gammas = gammas[~spurious]
    if gammas.size != 2 * len(poles):
        raise NonGenericCovering(
            f"Only {gammas.size} of {2 * len(poles)} critical points pass the R' residual check.")

    values, first, second = map_derivatives(poles, residues, gammas)
    if gammas.size and float(np.min(np.abs(second))) * scale < tolerances.degenerate:
        raise DegenerateCritical(
            f"Critical point with |R''| = {float(np.min(np.abs(second))):.3e} is not simple.")

    order = lexicographic_order(gammas, scale)
    gammas, values, second = gammas[order], values[order], second[order]
    alphas = 1.0 / second
    kappas = np.sqrt(2.0 * alphas)

    scale = data_scale(scale, gammas, values)
    if min_separation(values) <= tolerances.genericity * scale:
        raise NonGenericCovering(
            f"Branch points coincide (separation {min_separation(values):.3e}).")
    if min_separation(gammas) <= tolerances.genericity * scale:
        raise NonGenericCovering("Critical points coincide.")

    logger.debug("critical data of degree-%d map: lambdas=%s", len(poles) + 1, values)
    return RationalCovering(poles=poles, residues=residues, gammas=gammas,
                            lambdas=values, alphas=alphas, kappas=kappas)


def eval_map(cov: RationalCovering, gamma: ComplexLike, tolerances: Tolerances = DEFAULT_TOLERANCES):
    """λ = R(γ). Infinity maps to infinity."""
    g = np.asarray(gamma, dtype=complex)
    if np.any(np.isinf(g)):
        if g.ndim == 0:
            return complex(np.inf)
        raise ValueError("eval_map accepts infinity only as a scalar argument.")
    if cov.poles.size:
        distance = float(np.min(np.abs(g[..., None] - cov.poles)))
        if distance < tolerances.pole_margin * cov.scale:
            raise PoleHit(f"gamma={complex(np.ravel(g)[0])} is within {distance:.3e} of a pole.")
    value, _, _ = map_derivatives(cov.poles, cov.residues, g)
    return complex(value) if value.ndim == 0 else value


def _fiber_polynomial(cov: RationalCovering, lam: complex) -> np.ndarray:
    coefficients = np.polymul([1.0, -lam], np.poly(cov.poles)).astype(complex)
    for k, r in enumerate(cov.residues):
        term = r * np.poly(np.delete(cov.poles, k))
        coefficients[-len(term):] += term
    return coefficients


def fiber_roots(cov: RationalCovering, lam: complex) -> np.ndarray:
    """The N roots of R(γ) = λ, unlabeled, ordered by (real, imag)."""
    roots = np.roots(_fiber_polynomial(cov, complex(lam))).astype(complex)
    for _ in range(2):
        value, first, _ = map_derivatives(cov.poles, cov.residues, roots)
        trial = roots - np.divide(value - lam, first, out=np.zeros_like(first), where=np.abs(first) > 1e-8)
        better = np.abs(map_derivatives(cov.poles, cov.residues, trial)[0] - lam) < np.abs(value - lam)
        roots = np.where(better, trial, roots)
    return roots[lexicographic_order(roots, data_scale(roots))]


def _segment_distance(point: complex, start: complex, end: complex) -> float:
    direction = end - start
    length2 = abs(direction) ** 2
    if length2 == 0.0:
        return abs(point - start)
    s = min(1.0, max(0.0, ((point - start) * np.conj(direction)).real / length2))
    return abs(point - (start + s * direction))


def continue_fiber(cov: RationalCovering, roots: np.ndarray, lam_start: complex, lam_end: complex,
                   tolerances: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """
    Analytic continuation of an ordered fiber along the straight segment
    lam_start -> lam_end, keeping the order of the roots.

    Predictor γ + Δλ/R'(γ), Newton corrector; a step is accepted only when
    every corrected root stays well inside its own basin.
    """
    lam_start, lam_end = complex(lam_start), complex(lam_end)
    margin = tolerances.genericity * cov.scale
    for m, branch in enumerate(cov.lambdas):
        if _segment_distance(branch, lam_start, lam_end) < margin:
            raise PathThroughBranchPoint(
                f"Segment {lam_start} -> {lam_end} passes through branch point λ_{m + 1} = {branch}.")

    current = np.array(roots, dtype=complex)
    s, ds, lam = 0.0, 0.125, lam_start
    while s < 1.0:
        s_next = min(1.0, s + ds)
        lam_next = lam_start + s_next * (lam_end - lam_start)
        _, first, _ = map_derivatives(cov.poles, cov.residues, current)
        predicted = current + (lam_next - lam) / first
        corrected = predicted.copy()
        for _ in range(4):
            value, first, _ = map_derivatives(cov.poles, cov.residues, corrected)
            corrected = corrected - (value - lam_next) / first
        residual = np.abs(map_derivatives(cov.poles, cov.residues, corrected)[0] - lam_next)
        separation = min_separation(corrected)
        accepted = (np.all(np.isfinite(corrected))
                    and float(np.max(np.abs(corrected - predicted))) < 0.1 * separation
                    and float(np.max(residual)) < 1e-9 * (1.0 + abs(lam_next)))
        if accepted:
            current, s, lam = corrected, s_next, lam_next
            ds = min(2.0 * ds, 1.0)
        else:
            ds *= 0.5
            if ds < 1e-10:
                raise PathThroughBranchPoint(
                    f"Fiber continuation stalled at λ={lam} on the way to {lam_end}.")
    return current


@dataclass(frozen=True, eq=False)
class SheetLabeling:
    """An ordered fiber over base_lambda; index k holds the root on sheet k+1."""
    base_lambda: complex
    ordered_fiber: np.ndarray

    @classmethod
    def at_infinity(cls, cov: RationalCovering, direction: complex = 1.0) -> "SheetLabeling":
        """
        Labels the fiber over a far point λ = 1000·scale·direction: sheet 1 is
        the root near λ itself, sheet k+1 the root near the pole μ_k.
        """
        base = complex(1000.0 * cov.scale * direction / abs(direction))
        roots = fiber_roots(cov, base)
        targets = np.concatenate([[base], cov.poles])
        rows, cols = linear_sum_assignment(np.abs(roots[:, None] - targets[None, :]))
        ordered = np.empty_like(roots)
        ordered[cols] = roots[rows]
        return cls(base_lambda=base, ordered_fiber=ordered)

    def continued(self, cov: RationalCovering, lam: complex,
                  tolerances: Tolerances = DEFAULT_TOLERANCES) -> "SheetLabeling":
        roots = continue_fiber(cov, self.ordered_fiber, self.base_lambda, lam, tolerances)
        return SheetLabeling(base_lambda=complex(lam), ordered_fiber=roots)


def fiber(cov: RationalCovering, lam: ComplexLike, labeling: Optional[SheetLabeling] = None,
          tolerances: Tolerances = DEFAULT_TOLERANCES) -> List[CoveringPoint]:
    """All N points over lam, with sheets when a labeling is attached."""
    lam = complex(lam)
    if labeling is None:
        return [CoveringPoint(gamma=complex(g), lam=lam) for g in fiber_roots(cov, lam)]
    roots = continue_fiber(cov, labeling.ordered_fiber, labeling.base_lambda, lam, tolerances)
    return [CoveringPoint(gamma=complex(g), lam=lam, sheet=k + 1) for k, g in enumerate(roots)]


def nu_derivatives(cov, gamma: ComplexLike,
                   tolerances: Tolerances = DEFAULT_TOLERANCES) -> Tuple[complex, np.ndarray]:
    """
    ∂ν/∂λ = 1/R'(γ) and ∂ν/∂λ_n = −α_n/(γ−γ_n) at the point with coordinate gamma.
    Works on anything carrying poles, residues, gammas and alphas.
    """
    gamma = complex(gamma)
    if np.isinf(gamma):
        return 1.0 + 0j, np.zeros(len(cov.gammas), dtype=complex)
    offsets = gamma - cov.gammas
    if offsets.size and float(np.min(np.abs(offsets))) < tolerances.pole_margin * cov.scale:
        raise CriticalPointHit(f"gamma={gamma} is a critical point.")
    _, first, _ = map_derivatives(cov.poles, cov.residues, gamma)
    return complex(1.0 / first), -cov.alphas / offsets


def dnu_dlambda(cov, gamma) -> np.ndarray:
    """∂ν/∂λ in partial-fraction form 1 + Σ α_n/(γ−γ_n); vectorized."""
    g = np.asarray(gamma, dtype=complex)
    return 1.0 + np.sum(cov.alphas / (g[..., None] - cov.gammas), axis=-1)


def verify_partial_fraction(cov: RationalCovering, samples: Sequence[complex]) -> float:
    """Max over samples of |1/R'(γ) − 1 − Σ α_n/(γ−γ_n)|."""
    samples = np.asarray(samples, dtype=complex)
    if samples.size == 0:
        return 0.0
    _, first, _ = map_derivatives(cov.poles, cov.residues, samples)
    return float(np.max(np.abs(1.0 / first - dnu_dlambda(cov, samples))))


def genericity_margins(cov: RationalCovering) -> Dict[str, float]:
    _, _, second = map_derivatives(cov.poles, cov.residues, cov.gammas)
    return {
        "scale": cov.scale,
        "min_branch_point_separation": min_separation(cov.lambdas),
        "min_critical_point_separation": min_separation(cov.gammas),
        "min_pole_separation": min_separation(cov.poles),
        "min_abs_second_derivative": float(np.min(np.abs(second))) if second.size else float("inf"),
        "max_critical_residual": float(np.max(np.abs(map_derivatives(cov.poles, cov.residues, cov.gammas)[1])))
        if cov.gammas.size else 0.0,
    }


def random_covering(degree: int, seed=None, box: float = 1.0, min_separation_ratio: float = 0.1,
                    tolerances: Tolerances = DEFAULT_TOLERANCES, attempts: int = 1000) -> RationalCovering:
    """
    Fixed-seed random covering with poles in the box |Re|,|Im| ≤ box and
    residues of modulus in [0.2, 1]·box². Outcomes whose poles, critical
    points or branch points are closer than min_separation_ratio·box are
    rejected.
    """
    if degree < 1:
        raise ValueError("degree must be positive.")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    count = degree - 1
    threshold = min_separation_ratio * box
    for _ in range(attempts):
        poles = box * (rng.uniform(-1, 1, count) + 1j * rng.uniform(-1, 1, count))
        residues = box ** 2 * rng.uniform(0.2, 1.0, count) * np.exp(2j * np.pi * rng.uniform(0, 1, count))
        try:
            cov = critical_data(poles, residues, tolerances)
        except (NonGenericCovering, DegenerateCritical):
            continue
        if min(min_separation(cov.poles), min_separation(cov.gammas), min_separation(cov.lambdas)) > threshold:
            return cov
    raise NonGenericCovering(f"No generic degree-{degree} covering found in {attempts} attempts.")
