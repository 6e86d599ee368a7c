"""
Named acceptance suites. Each criterion builds its own fixed-seed inputs,
runs the library operations and returns Check records; run_suite collects
them into one report section per criterion.

"quick" uses fewer random coverings and coarser grids than "full"; both are
deterministic for a given seed.
"""
import logging
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .analysis.geometry import bergmann_branch_matrix, egoroff_report, genus_formalism_consistency, rauch_check
from .analysis.symbolic_analyzer import SymbolicAnalyzer
from .components.contours import Contour
from .components.densities import ConstantDensity, FourierDensity
from .config import DEFAULT_TOLERANCES, Tolerances
from .core.covering import critical_data, random_covering, verify_partial_fraction
from .core.deformation import FlowState, ModuliPath, flow, reconstruct_map
from .graph.monodromy import covering_monodromy
from .solvers.differences import central_difference
from .systems.hydro import (
    christoffel as hydro_christoffel, hodograph_grid, manufactured_config, phis, speeds, verify_hds, verify_tsarev,
)
from .systems.isomonodromy import (
    HurwitzPullback, SchlesingerState, conservation_monitors, hierarchy_Jm, jm_tau_grad, monodromy_probe,
    pullback_flow, random_schlesinger_state, schlesinger_rhs, tau_relation_check, verify_hierarchy,
)
from .systems.rank1 import (
    CauchySolution, all_pairs, euler_darboux_check, pde_residuals, prepare_state, square_loop, tau_grad,
    tau_grad_residue, tau_integrate,
)
from .utils.exceptions import BranchAmbiguity, HurwitzError, LoopThroughPole, QuadratureDegraded
from .utils.reporting import Check

logger = logging.getLogger(__name__)

MODES = ("quick", "full")


@dataclass(frozen=True)
class SuiteSettings:
    """Sizes that differ between the quick and the full suite."""
    coverings_per_degree: int
    degrees: Tuple[int, ...]
    flow_degrees: Tuple[int, ...]
    scalar_coverings: int
    iso_degrees: Tuple[int, ...]
    hydro_degrees: Tuple[int, ...]
    grid_size: int
    nodes: int

    @classmethod
    def for_mode(cls, mode: str) -> "SuiteSettings":
        if mode == "quick":
            return cls(coverings_per_degree=2, degrees=(2, 3, 4, 5), flow_degrees=(3,), scalar_coverings=1,
                       iso_degrees=(2,), hydro_degrees=(2,), grid_size=3, nodes=256)
        if mode == "full":
            return cls(coverings_per_degree=10, degrees=(2, 3, 4, 5), flow_degrees=(3, 4), scalar_coverings=3,
                       iso_degrees=(2, 3), hydro_degrees=(2, 3), grid_size=5, nodes=512)
        raise ValueError(f"Unknown suite mode '{mode}'. Available: {list(MODES)}")


def far_points(rng: np.random.Generator, avoid: np.ndarray, count: int, box: float, margin: float,
                attempts: int = 10000) -> np.ndarray:
    """count random points of the box |Re|,|Im| ≤ box at distance > margin from avoid and from each other."""
    chosen: List[complex] = []
    for _ in range(attempts):
        z = complex(box * rng.uniform(-1, 1), box * rng.uniform(-1, 1))
        blocked = np.concatenate([np.asarray(avoid, dtype=complex), np.asarray(chosen, dtype=complex)])
        if blocked.size == 0 or float(np.min(np.abs(blocked - z))) > margin:
            chosen.append(z)
            if len(chosen) == count:
                return np.array(chosen, dtype=complex)
    raise QuadratureDegraded(f"Could not place {count} points at distance {margin:.3g} from the singularities.")


def _circle_for(state: FlowState, nodes: int, tolerances: Tolerances) -> Contour:
    """A circle about the origin whose radius keeps the critical points and poles furthest away."""
    singular = np.abs(np.concatenate([state.gammas, state.poles]))
    radii = state.scale * np.linspace(0.15, 1.6, 30)
    gaps = np.array([np.min(np.abs(singular - r)) for r in radii])
    radius = float(radii[int(np.argmax(gaps))])
    spacing = 2.0 * np.pi * radius / nodes
    if float(gaps.max()) < 1.5 * tolerances.quadrature_margin * spacing:
        raise QuadratureDegraded("No circle about the origin clears the critical points.")
    return Contour.circle_on(state, 0.0, radius, nodes, "l", tolerances=tolerances)


def _covering_with_circle(rng: np.random.Generator, degree: int, settings: SuiteSettings,
                          tolerances: Tolerances, attempts: int = 20):
    for _ in range(attempts):
        cov = random_covering(degree, rng, min_separation_ratio=0.2, tolerances=tolerances)
        try:
            return cov, _circle_for(FlowState.from_covering(cov), settings.nodes, tolerances)
        except QuadratureDegraded:
            continue
    raise QuadratureDegraded(f"No degree-{degree} covering admits a clear circle in {attempts} attempts.")


def _cauchy_setup(rng: np.random.Generator, degree: int, settings: SuiteSettings,
                  tolerances: Tolerances, attempts: int = 20):
    """Random covering, contour, Fourier density of order ≤ 3 and base point P₀ with safe margins."""
    for _ in range(attempts):
        cov, contour = _covering_with_circle(rng, degree, settings, tolerances)
        state = FlowState.from_covering(cov)
        density = FourierDensity.random(int(rng.integers(1, 4)), rng)
        sol = CauchySolution(contour, density)
        margin = 2.0 * tolerances.quadrature_margin * contour.spacing(cov)
        avoid = np.concatenate([cov.gammas, cov.poles, contour.initial_nodes])
        try:
            p0, p, q = far_points(rng, avoid, 3, state.scale, max(margin, 0.15 * state.scale))
        except QuadratureDegraded:
            continue
        return cov, sol, prepare_state(cov, sol, p0=p0, p=p, q=q)
    raise QuadratureDegraded(f"No usable degree-{degree} setup found in {attempts} attempts.")


def _worst(values) -> float:
    values = [float(v) for v in values]
    return max(values) if values else 0.0


def closed_form(settings: SuiteSettings, rng: np.random.Generator, tolerances: Tolerances) -> List[Check]:
    cov = critical_data([2.0], [1.0], tolerances)
    order = np.argsort(cov.gammas.real)
    gamma_error = float(np.max(np.abs(cov.gammas[order] - np.array([1.0, 3.0]))))
    alpha_error = float(np.max(np.abs(cov.alphas[order] - np.array([-0.5, 0.5]))))
    lambda_error = float(np.max(np.abs(cov.lambdas[order] - np.array([0.0, 4.0]))))
    beta = bergmann_branch_matrix(cov).beta
    analyzer = SymbolicAnalyzer()
    beta_error = abs(complex(beta[0, 1]) ** 2 - float(analyzer.beta_closed_form().subs(
        {analyzer.l1: 0, analyzer.l2: 4})))
    return [
        Check("gamma", gamma_error, 1e-12),
        Check("alpha", alpha_error, 1e-12),
        Check("lambda", lambda_error, 1e-12),
        Check("beta_squared", beta_error, 1e-12),
        Check("symbolic_degree_two", 0.0 if analyzer.verify_degree_two() else 1.0, 0.5),
    ]


def partial_fraction(settings: SuiteSettings, rng: np.random.Generator, tolerances: Tolerances) -> List[Check]:
    checks = []
    for degree in settings.degrees:
        worst = 0.0
        for _ in range(settings.coverings_per_degree):
            cov = random_covering(degree, rng, tolerances=tolerances)
            samples = far_points(rng, cov.gammas, 100, 2.0 * cov.scale, 0.1 * cov.scale)
            worst = max(worst, verify_partial_fraction(cov, samples))
        checks.append(Check(f"degree_{degree}", worst, 1e-10))
    return checks


def deformation(settings: SuiteSettings, rng: np.random.Generator, tolerances: Tolerances) -> List[Check]:
    checks = []
    for degree in settings.flow_degrees:
        cov = random_covering(degree, rng, min_separation_ratio=0.2, tolerances=tolerances)
        start = cov.lambdas
        step = 0.05 * cov.scale * np.exp(2j * np.pi * rng.uniform(0, 1, 2))
        first, second = start.copy(), start.copy()
        first[0] += step[0]
        second[1] += step[1]
        both = first.copy()
        both[1] += step[1]
        one = flow(cov, ModuliPath([start, first, both]), tolerances)
        other = flow(cov, ModuliPath([start, second, both]), tolerances)
        order = max(float(np.max(np.abs(one.gammas - other.gammas))),
                    float(np.max(np.abs(one.alphas - other.alphas))))
        rebuilt = reconstruct_map(one, tolerances=tolerances)
        round_trip = max(float(np.max(np.abs(rebuilt.gammas - one.gammas))),
                         float(np.max(np.abs(rebuilt.alphas - one.alphas))),
                         float(np.max(np.abs(rebuilt.kappas - one.kappas))))
        before = covering_monodromy(cov, tolerances).generators
        after = covering_monodromy(rebuilt, tolerances).generators
        checks += [
            Check(f"degree_{degree}_path_order", order / cov.scale, 1e-8),
            Check(f"degree_{degree}_round_trip", round_trip / cov.scale, 1e-8),
            Check(f"degree_{degree}_monodromy", 0.0 if before == after else 1.0, 0.5),
        ]
    return checks


def euler_darboux(settings: SuiteSettings, rng: np.random.Generator, tolerances: Tolerances) -> List[Check]:
    checks = []
    worst = 0.0
    for _ in range(settings.scalar_coverings):
        _, sol, state = _cauchy_setup(rng, 3, settings, tolerances)
        worst = max(worst, _worst(abs(r) for r in pde_residuals(sol, state, tolerances=tolerances).values()))
    checks.append(Check("scalar_system_degree_3", worst, tolerances.residual))

    density = FourierDensity.random(3, rng) + ConstantDensity(1.0)
    classic = euler_darboux_check(1.0 + 0.5j, -0.5 - 0.3j, density, nodes=settings.nodes, tolerances=tolerances)
    oracle_error = max(abs(classic["f"] - classic["oracle_f"]), abs(classic["f_xi"] - classic["oracle_f_xi"]),
                       abs(classic["f_xibar"] - classic["oracle_f_xibar"]))
    size = max(1.0, abs(classic["f"]), abs(classic["f_xi"]), abs(classic["f_xibar"]))
    checks += [
        Check("classic_degree_2", classic["relative_residual"], tolerances.residual),
        Check("classic_oracle", oracle_error / size, 1e-8),
    ]
    return checks


def scalar_tau(settings: SuiteSettings, rng: np.random.Generator, tolerances: Tolerances) -> List[Check]:
    _, sol, state = _cauchy_setup(rng, 3, settings, tolerances)
    direct = tau_grad(sol, state, tolerances)
    residue = tau_grad_residue(sol, state)
    size = max(1.0, float(np.max(np.abs(direct))))
    loop_size = 0.02 * state.scale
    increment, _ = tau_integrate(sol, state, square_loop(state.lambdas, 0, 1, loop_size), tolerances=tolerances)
    return [
        Check("residue_form", float(np.max(np.abs(direct - residue))) / size, 1e-8),
        Check("loop_closedness", abs(increment) / (4.0 * loop_size * size), tolerances.residual),
    ]


def rauch(settings: SuiteSettings, rng: np.random.Generator, tolerances: Tolerances) -> List[Check]:
    checks = []
    for degree in (2, 3):
        cov = random_covering(degree, rng, min_separation_ratio=0.2, tolerances=tolerances)
        p, q = far_points(rng, np.concatenate([cov.gammas, cov.poles]), 2, cov.scale, 0.3 * cov.scale)
        state = FlowState.from_covering(cov, {"p": p, "q": q})
        results = [rauch_check(state, pair, tolerances=tolerances) for pair in all_pairs(state.branch_count)]
        for key in ("kernel", "differential", "translation"):
            checks.append(Check(f"degree_{degree}_{key}", _worst(abs(r[key]) for r in results), tolerances.residual))
    return checks


def darboux_egoroff(settings: SuiteSettings, rng: np.random.Generator, tolerances: Tolerances) -> List[Check]:
    _, sol, state = _cauchy_setup(rng, 3, settings, tolerances)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BranchAmbiguity)
        report = egoroff_report(state, sol, tolerances)
    residuals = report["residuals"]
    beta_size = max(1.0, float(np.max(np.abs(report["beta"]))))
    hessian_size = max(1.0, float(np.max(np.abs(report["tau_hessian_fd"]))))
    scaled = {
        "flatness": beta_size ** 2, "translation": beta_size ** 2, "dilatation": beta_size,
        "inversion": beta_size * state.scale, "egoroff": hessian_size, "rotation_up_to_sign": beta_size,
        "rotation_squared": beta_size ** 2, "beta_symmetry": beta_size,
    }
    return [Check(name, residuals[name] / size, tolerances.residual) for name, size in scaled.items()]


def genus_reduction(settings: SuiteSettings, rng: np.random.Generator, tolerances: Tolerances) -> List[Check]:
    cov = random_covering(4, rng, min_separation_ratio=0.2, tolerances=tolerances)
    gamma0 = far_points(rng, cov.gammas, 1, cov.scale, 0.2 * cov.scale)[0]
    defect = SymbolicAnalyzer().genus_reduction_defect()
    return [
        Check("numeric_degree_4", genus_formalism_consistency(cov, gamma0), 1e-12),
        Check("symbolic", 0.0 if defect == 0 else 1.0, 0.5),
    ]


def _monodromy_change(initial: SchlesingerState, final: SchlesingerState, tolerances: Tolerances) -> float:
    worst = 0.0
    for j in range(initial.count):
        others = np.delete(initial.z, j)
        radius = 0.3 * float(np.min(np.abs(others - initial.z[j])))
        for angle in np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False):
            try:
                before = monodromy_probe(initial, initial.z[j], radius, angle, tolerances)
                after = monodromy_probe(final, final.z[j], radius, angle, tolerances)
            except LoopThroughPole:
                continue
            worst = max(worst, float(np.max(np.abs(before - after))))
            break
        else:
            raise LoopThroughPole(f"No loop direction around pole {j + 1} avoids the other poles.")
    return worst


def _commuting_tau(rng: np.random.Generator) -> float:
    a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
    A = np.array([np.diag([a, -a]), np.diag([b, -b]), -np.diag([a + b, -(a + b)])], dtype=complex)
    z = np.array([0.0, 1.0 + 0.5j, -0.7 + 1.1j])
    products = np.einsum("jab,kba->jk", A, A)

    def log_tau(shift, j):
        w = z.copy()
        w[j] += shift
        return sum(products[k, l] * np.log(w[k] - w[l]) for k in range(3) for l in range(k + 1, 3))

    state = SchlesingerState(z, A)
    exact = np.array([central_difference(lambda s, j=j: log_tau(s, j), 1e-3) for j in range(3)])
    D, _ = schlesinger_rhs(state)
    return max(float(np.max(np.abs(exact - jm_tau_grad(state)))), float(np.max(np.abs(D))))


def isomonodromy(settings: SuiteSettings, rng: np.random.Generator, tolerances: Tolerances) -> List[Check]:
    checks = []
    for degree in settings.iso_degrees:
        cov = random_covering(degree, rng, min_separation_ratio=0.2, tolerances=tolerances)
        points = far_points(rng, np.concatenate([cov.gammas, cov.poles]), 4, cov.scale, 0.25 * cov.scale)
        names = ["q1", "q2", "q3"]
        state = FlowState.from_covering(cov, dict(zip(names + ["p0"], points)))
        pb = HurwitzPullback(state, names)
        initial = random_schlesinger_state(pb.poles(), rank=2, seed=rng)
        target = cov.lambdas + 0.02 * cov.scale * np.exp(2j * np.pi * rng.uniform(0, 1, cov.branch_count))
        path = ModuliPath.straight(cov.lambdas, target)

        final, _ = pullback_flow(pb, initial, path, tolerances)
        monitors = conservation_monitors(initial, final)
        hierarchy = verify_hierarchy(pb, initial.A, tolerances=tolerances)
        J_size = max(1.0, float(np.max(np.abs(hierarchy_Jm(pb, state, initial.A, tolerances)))))
        relation = tau_relation_check(pb, initial, path, tolerances=tolerances)
        prefix = f"degree_{degree}"
        checks += [
            Check(f"{prefix}_constraint", monitors["constraint"], 1e-9),
            Check(f"{prefix}_trace_squares", monitors["trace_square_drift"], 1e-9),
            Check(f"{prefix}_monodromy", _monodromy_change(initial, final, tolerances), tolerances.residual),
            Check(f"{prefix}_zero_curvature", _worst(r["zero_curvature"] for r in hierarchy.values()) / J_size ** 2,
                  tolerances.residual),
            Check(f"{prefix}_hierarchy", _worst(r["hierarchy"] for r in hierarchy.values()) / J_size,
                  tolerances.residual),
            Check(f"{prefix}_tau_relation", abs(relation["residual"]) / max(1.0, abs(relation["lhs"])),
                  tolerances.residual),
        ]
    checks.append(Check("commuting_closed_form", _commuting_tau(rng), 1e-10))
    return checks


def _hydro_setup(rng: np.random.Generator, degree: int, settings: SuiteSettings, tolerances: Tolerances):
    cov, contour = _covering_with_circle(rng, degree, settings, tolerances)
    h = FourierDensity.random(2, rng, name="h") + ConstantDensity(1.0)
    h1 = FourierDensity.random(2, rng, name="h1")
    return contour, h, h1, FlowState.from_covering(cov)


def hydro(settings: SuiteSettings, rng: np.random.Generator, tolerances: Tolerances) -> List[Check]:
    checks = []
    for degree in settings.hydro_degrees:
        contour, h, h1, state = _hydro_setup(rng, degree, settings, tolerances)
        cfg = manufactured_config(contour, h, h1, state, seed=rng, tolerances=tolerances)
        state = cfg.prepare(state)
        V, Phi = speeds(cfg, state, tolerances), phis(cfg, state, tolerances)
        size = max(1.0, float(np.max(np.abs(hydro_christoffel(cfg, state, tolerances))))
                   * max(float(np.max(np.abs(V))), float(np.max(np.abs(Phi)))))
        results = [verify_tsarev(cfg, state, (m, n), tolerances)
                   for m in range(degree) for n in range(degree) if m != n]
        checks.append(Check(f"degree_{degree}_tsarev",
                            _worst(max(r["speed"], r["phi"]) for r in results) / size, tolerances.residual))

        half = settings.grid_size // 2
        axis = 5e-4 * np.arange(-half, half + 1)
        grid = hodograph_grid(cfg, state, axis, axis, seed_lambdas=state.lambdas, tolerances=tolerances)
        checks.append(Check(f"degree_{degree}_hodograph_grid",
                            verify_hds(cfg, grid, axis, axis, tolerances)["max_residual"], tolerances.residual))

    contour, h, _, state = _hydro_setup(rng, 2, settings, tolerances)
    symmetric = manufactured_config(contour, h, h, state, seed=rng, tolerances=tolerances)
    state = symmetric.prepare(state)
    checks.append(Check("unit_speed", float(np.max(np.abs(speeds(symmetric, state, tolerances) - 1.0))),
                        tolerances.residual))
    if settings.grid_size >= 5:
        axis = 5e-4 * np.arange(-1, 2)
        grid = hodograph_grid(symmetric, state, axis, axis, seed_lambdas=state.lambdas, tolerances=tolerances)
        checks.append(Check("unit_speed_grid", verify_hds(symmetric, grid, axis, axis, tolerances)["max_residual"],
                            tolerances.residual))
    return checks


CRITERIA: Dict[str, Callable[[SuiteSettings, np.random.Generator, Tolerances], List[Check]]] = {
    "closed_form": closed_form,
    "partial_fraction": partial_fraction,
    "deformation": deformation,
    "euler_darboux": euler_darboux,
    "scalar_tau": scalar_tau,
    "rauch": rauch,
    "darboux_egoroff": darboux_egoroff,
    "genus_reduction": genus_reduction,
    "isomonodromy": isomonodromy,
    "hydro": hydro,
}


def run_criterion(name: str, mode: str = "quick", seed: int = 0,
                  tolerances: Tolerances = DEFAULT_TOLERANCES) -> Dict[str, object]:
    """
    Runs one criterion with its own generator seeded from (seed, position),
    so criteria can be run alone and give the same numbers as in a full run.
    Numerical errors are recorded as a failed criterion.
    """
    if name not in CRITERIA:
        raise ValueError(f"Unknown criterion '{name}'. Available: {list(CRITERIA)}")
    settings = SuiteSettings.for_mode(mode)
    rng = np.random.default_rng([seed, list(CRITERIA).index(name)])
    try:
        checks = CRITERIA[name](settings, rng, tolerances)
    except HurwitzError as e:
        logger.warning("criterion %s failed with %s: %s", name, type(e).__name__, e)
        return {"checks": [], "passed": False, "error": {"kind": type(e).__name__, "message": str(e)}}
    passed = all(c.passed for c in checks)
    logger.info("criterion %s: %s", name, "passed" if passed else "FAILED")
    return {"checks": checks, "passed": passed}


def run_suite(mode: str = "quick", seed: int = 0, only: Optional[Sequence[str]] = None,
              tolerances: Tolerances = DEFAULT_TOLERANCES) -> Dict[str, object]:
    SuiteSettings.for_mode(mode)
    names = list(only) if only else list(CRITERIA)
    criteria = {name: run_criterion(name, mode, seed, tolerances) for name in names}
    return {"mode": mode, "seed": seed, "criteria": criteria,
            "passed": all(c["passed"] for c in criteria.values())}
