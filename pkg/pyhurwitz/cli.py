"""
Command-line entry point: `python -m pyhurwitz <group> <command> ...`.

Every command reads JSON (or YAML) documents, runs one library operation,
and writes a JSON report with the inputs echoed, the results, and a list of
checks against tolerances. Exit codes: 0 when every check passes, 1 for a
failed check or a numerical error, 2 for unreadable input.
"""
import argparse
import logging
import sys
import warnings
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .analysis.geometry import (
    beta_diagonal_derivatives, beta_grid, bergmann_branch_matrix, egoroff_report, genus_formalism_consistency,
    rauch_check, write_beta_csv,
)
from .components.contours import contour_from_document
from .components.densities import density_from_document
from .config import Tolerances, load_document, parse_complex, parse_complex_list, parse_int, require
from .core.covering import (
    SheetLabeling, fiber, fiber_roots, genericity_margins, map_derivatives, verify_partial_fraction,
)
from .core.deformation import FlowState, flow, path_from_document, reconstruct_map, resolve_covering
from .graph.monodromy import covering_monodromy
from .suites import CRITERIA, MODES, far_points, run_suite
from .systems.hydro import (
    grid_records, hodograph_grid, hodograph_solve, hydro_config_from_document, phis, speeds, verify_hds,
    verify_tsarev, write_grid_csv,
)
from .systems.isomonodromy import (
    HurwitzPullback, SchlesingerState, conservation_monitors, jm_tau_grad, monodromy_probe, pullback_flow,
    random_schlesinger_state, tau_relation_check, verify_hierarchy,
)
from .systems.rank1 import (
    CauchySolution, all_pairs, fd_gradient, lsscal_residual, pde_residuals, plemelj_jump, prepare_state,
    square_loop, tau_grad, tau_grad_residue, tau_hessian_check, tau_integrate,
)
from .utils.exceptions import BranchAmbiguity, ConfigParse, HurwitzError, LoopThroughPole
from .utils.reporting import Check, build_report, write_report

logger = logging.getLogger(__name__)

Outcome = Tuple[Dict[str, Any], Dict[str, Any], List[Check]]


def _document(path: str) -> Any:
    return load_document(path)


def _relative(difference, reference) -> float:
    return float(np.max(np.abs(difference))) / max(1.0, float(np.max(np.abs(reference))))


def parse_grid(text: str) -> Dict[str, np.ndarray]:
    """'x=a:b:n,t=a:b:n' -> {'x': linspace(a, b, n), 't': linspace(a, b, n)}."""
    axes = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        name, sep, rng = part.partition("=")
        bounds = rng.split(":")
        if not sep or len(bounds) != 3:
            raise ConfigParse(f"--grid: expected name=start:stop:count, got '{part}'")
        try:
            start, stop, count = float(bounds[0]), float(bounds[1]), int(bounds[2])
        except ValueError:
            raise ConfigParse(f"--grid: cannot read '{part}'")
        if count < 1:
            raise ConfigParse(f"--grid: count must be positive in '{part}'")
        axes[name.strip()] = np.linspace(start, stop, count)
    return axes


def parse_pairs(text: str, count: int) -> List[Tuple[int, int]]:
    """'all' or '1-2,1-3' (1-based) -> 0-based index pairs."""
    if text == "all":
        return all_pairs(count)
    pairs = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        try:
            m, n = (int(v) - 1 for v in part.split("-"))
        except ValueError:
            raise ConfigParse(f"--pairs: expected m-n, got '{part}'")
        if not (0 <= m < count and 0 <= n < count) or m == n:
            raise ConfigParse(f"--pairs: '{part}' is not a pair of distinct indices in 1..{count}")
        pairs.append((m, n))
    return pairs


def resolve_base_point(document, cov, tolerances: Tolerances) -> Tuple[str, Dict[str, complex]]:
    """
    P₀ from {"gamma": z}, {"pole": k} or {"lambda": λ, "sheet": k}; returns the
    marked-point name and the points to add to the flow state.
    """
    if not isinstance(document, dict):
        raise ConfigParse("p0: expected an object")
    if "gamma" in document:
        return "p0", {"p0": parse_complex(document["gamma"], "p0.gamma")}
    if "pole" in document:
        k = document["pole"]
        if not isinstance(k, int) or not 1 <= k <= len(cov.poles):
            raise ConfigParse(f"p0.pole: expected an integer in 1..{len(cov.poles)}")
        return f"pole:{k}", {}
    if "lambda" in document:
        lam = parse_complex(document["lambda"], "p0.lambda")
        sheet = document.get("sheet", 1)
        if not isinstance(sheet, int) or not 1 <= sheet <= cov.degree:
            raise ConfigParse(f"p0.sheet: expected an integer in 1..{cov.degree}")
        points = fiber(cov, lam, SheetLabeling.at_infinity(cov), tolerances)
        return "p0", {"p0": points[sheet - 1].gamma}
    raise ConfigParse("p0: expected 'gamma', 'pole' or 'lambda' with 'sheet'")


def _solution_setup(inputs: Dict[str, Any], tolerances: Tolerances):
    cov = resolve_covering(require(inputs, "covering", "inputs"), tolerances)
    contour = contour_from_document(require(inputs, "contour", "inputs"), cov, tolerances)
    density = density_from_document(require(inputs, "density", "inputs"))
    base, points = resolve_base_point(require(inputs, "p0", "inputs"), cov, tolerances)
    sol = CauchySolution(contour, density, base_point=base)
    return cov, sol, prepare_state(cov, sol, **points)


def _solution_inputs(path: str) -> Dict[str, Any]:
    report = _document(path)
    if isinstance(report, dict) and "inputs" in report:
        return report["inputs"]
    return report


def cover_build(args, tolerances: Tolerances) -> Outcome:
    document = _document(args.covering)
    cov = resolve_covering(document, tolerances)
    value, first, _ = map_derivatives(cov.poles, cov.residues, cov.gammas)
    results = {
        "covering": cov.to_document(),
        "critical_points": cov.gammas,
        "branch_points": cov.lambdas,
        "alphas": cov.alphas,
        "kappas": cov.kappas,
        "genericity": genericity_margins(cov),
    }
    checks = [
        Check("critical_equation", float(np.max(np.abs(first))), tolerances.residual),
        Check("critical_values", _relative(value - cov.lambdas, cov.lambdas), 1e-10),
    ]
    return {"covering": document}, results, checks


def cover_verify(args, tolerances: Tolerances) -> Outcome:
    document = _document(args.covering)
    cov = resolve_covering(document, tolerances)
    rng = np.random.default_rng(args.seed)
    samples = far_points(rng, cov.gammas, 100, 2.0 * cov.scale, 0.1 * cov.scale)
    lam = complex(2.0 * cov.scale * rng.uniform(-1, 1), 2.0 * cov.scale * rng.uniform(-1, 1))
    roots = fiber_roots(cov, lam)
    fiber_error = max(abs(cov.evaluate(g) - lam) for g in roots)
    labeling = SheetLabeling.at_infinity(cov)
    far = labeling.base_lambda
    sheet_one = abs(labeling.ordered_fiber[0] - far) / abs(far)
    graph = covering_monodromy(cov, tolerances)
    results = {"covering": cov.to_document(), "monodromy": graph.to_document(), "fiber": roots}
    checks = [
        Check("partial_fraction", verify_partial_fraction(cov, samples), 1e-10),
        Check("fiber", fiber_error / max(1.0, abs(lam)), 1e-10),
        Check("sheet_one_asymptotics", sheet_one, 1e-3),
        Check("transitive", 0.0 if graph.is_transitive() else 1.0, 0.5),
        Check("simple_branching", 0.0 if graph.is_simple_branching() else 1.0, 0.5),
    ]
    return {"covering": document, "seed": args.seed}, results, checks


def _points_document(path: Optional[str]) -> Tuple[Any, Dict[str, complex]]:
    if not path:
        return None, {}
    document = _document(path)
    if not isinstance(document, dict):
        raise ConfigParse("points: expected an object of name: [re, im]")
    return document, {str(k): parse_complex(v, f"points.{k}") for k, v in document.items()}


def flow_run(args, tolerances: Tolerances) -> Outcome:
    cov_doc, path_doc = _document(args.covering), _document(args.path)
    points_doc, points = _points_document(args.points)
    cov = resolve_covering(cov_doc, tolerances)
    path = path_from_document(path_doc, cov.lambdas)
    end = flow(FlowState.from_covering(cov, points), path, tolerances)
    rebuilt = reconstruct_map(end, tolerances=tolerances)
    mismatch = max(float(np.max(np.abs(rebuilt.gammas - end.gammas))),
                   float(np.max(np.abs(rebuilt.alphas - end.alphas))))
    landing = float(np.max(np.abs(end.lambdas - path.end)))
    results = {"state": end.to_document(), "covering": rebuilt.to_document(),
               "marked_point_values": {k: rebuilt.evaluate(v) for k, v in sorted(end.points.items())}}
    inputs = {"covering": cov_doc, "path": path_doc, "points": points_doc}
    checks = [
        Check("reconstruction", mismatch / end.scale, 1e-8),
        Check("endpoint", landing / end.scale, 1e-12),
    ]
    for name, gamma in sorted(points.items()):
        checks.append(Check(f"fixed_lambda_{name}",
                            abs(rebuilt.evaluate(end.points[name]) - cov.evaluate(gamma)) / end.scale, 1e-8))
    return inputs, results, checks


def rank1_solve(args, tolerances: Tolerances) -> Outcome:
    inputs = {"covering": _document(args.covering), "contour": _document(args.contour),
              "density": _document(args.density), "p0": _document(args.p0)}
    _, sol, state = _solution_setup(inputs, tolerances)
    direct = tau_grad(sol, state, tolerances)
    residue = tau_grad_residue(sol, state)
    jump = plemelj_jump(sol, state, 0)
    results = {
        "f": sol.value(state, tolerances),
        "gradient": sol.gradient(state, tolerances),
        "moments": sol.moments(state),
        "tau_grad": direct,
        "tau_grad_residue": residue,
        "plemelj": jump,
        "solution": sol.to_document(),
    }
    checks = [
        Check("tau_residue_form", _relative(direct - residue, direct), 1e-8),
        Check("plemelj_jump", jump["residual"] / max(1.0, abs(jump["expected"])), tolerances.residual),
    ]
    return inputs, results, checks


def rank1_residual(args, tolerances: Tolerances) -> Outcome:
    inputs = _solution_inputs(args.sol)
    cov, sol, state = _solution_setup(inputs, tolerances)
    pairs = parse_pairs(args.pairs, state.branch_count)
    rng = np.random.default_rng(args.seed)
    avoid = np.concatenate([state.gammas, sol.singularities(state), [sol.gamma0(state)]])
    margin = max(2.0 * tolerances.quadrature_margin * sol.contour.spacing(state), 0.1 * state.scale)
    probe = far_points(rng, avoid, 1, state.scale, margin)[0]
    state = state.with_points(probe=probe)
    residuals = pde_residuals(sol, state, pairs, relative=True, tolerances=tolerances)
    gradient = sol.gradient(state, tolerances)
    numeric = fd_gradient(sol, state, tolerances)
    linear = lsscal_residual(sol, state, "probe", tolerances)
    results = {"pde_residuals": residuals, "gradient": gradient, "fd_gradient": numeric,
               "linear_system_residual": linear, "probe": probe}
    checks = [Check(f"pde_{m + 1}-{n + 1}", abs(r), tolerances.residual) for (m, n), r in residuals.items()]
    checks += [
        Check("gradient_fd", _relative(gradient - numeric, gradient), tolerances.residual),
        Check("linear_system", _relative(linear, gradient), tolerances.residual),
    ]
    return {"solution": inputs, "pairs": args.pairs, "seed": args.seed}, results, checks


def rank1_tau(args, tolerances: Tolerances) -> Outcome:
    inputs = _solution_inputs(args.sol)
    _, sol, state = _solution_setup(inputs, tolerances)
    direct = tau_grad(sol, state, tolerances)
    residue = tau_grad_residue(sol, state)
    hessian = tau_hessian_check(sol, state, tolerances=tolerances)
    size = args.loop_size * state.scale
    loops = {}
    for m, n in all_pairs(state.branch_count):
        increment, _ = tau_integrate(sol, state, square_loop(state.lambdas, m, n, size), tolerances=tolerances)
        loops[(m, n)] = increment
    scale = max(1.0, float(np.max(np.abs(direct))))
    results = {"tau_grad": direct, "tau_grad_residue": residue, "hessian": hessian, "loop_increments": loops}
    checks = [
        Check("residue_form", _relative(direct - residue, direct), 1e-8),
        Check("hessian", hessian["max_residual"] / max(1.0, scale ** 2), tolerances.residual),
        Check("loop_closedness", max(abs(v) for v in loops.values()) / (4.0 * size * scale), tolerances.residual),
    ]
    return {"solution": inputs, "loop_size": args.loop_size}, results, checks


def geometry_report(args, tolerances: Tolerances) -> Outcome:
    cov_doc = _document(args.covering)
    cov = resolve_covering(cov_doc, tolerances)
    rng = np.random.default_rng(args.seed)
    p, q, gamma0 = far_points(rng, np.concatenate([cov.gammas, cov.poles]), 3, cov.scale, 0.2 * cov.scale)
    state = FlowState.from_covering(cov, {"p": p, "q": q})
    bergmann = bergmann_branch_matrix(state)
    rauch = {pair: rauch_check(state, pair, tolerances=tolerances) for pair in all_pairs(state.branch_count)}
    results = {"beta": bergmann.beta, "b": bergmann.b, "beta_derivatives": beta_diagonal_derivatives(state),
               "rauch": rauch, "probe_points": [p, q]}
    checks = [Check(f"rauch_{key}", max(abs(r[key]) for r in rauch.values()) if rauch else 0.0, tolerances.residual)
              for key in ("kernel", "differential", "translation")]
    checks.append(Check("genus_reduction", genus_formalism_consistency(state, gamma0), 1e-12))
    checks.append(Check("beta_symmetry", bergmann.symmetry_defect(), 1e-14))
    inputs: Dict[str, Any] = {"covering": cov_doc, "seed": args.seed}

    if args.sol:
        sol_inputs = _solution_inputs(args.sol)
        _, sol, sol_state = _solution_setup(sol_inputs, tolerances)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", BranchAmbiguity)
            report = egoroff_report(sol_state, sol, tolerances)
        report["warnings"] = [str(w.message) for w in caught]
        results["egoroff"] = report
        beta_size = max(1.0, float(np.max(np.abs(report["beta"]))))
        for name, value in report["residuals"].items():
            checks.append(Check(f"egoroff_{name}", value / beta_size ** 2, tolerances.residual))
        inputs["solution"] = sol_inputs

    if args.beta_grid:
        axes = parse_grid(args.grid)
        if set(axes) != {"re", "im"}:
            raise ConfigParse("--grid: the beta grid needs axes 're' and 'im'")
        if not 1 <= args.grid_index <= cov.branch_count:
            raise ConfigParse(f"--grid-index: expected 1..{cov.branch_count}")
        records = beta_grid(cov, args.grid_index - 1, axes["re"], axes["im"], tolerances)
        write_beta_csv(records, args.beta_grid)
        results["beta_grid"] = {"path": args.beta_grid, "rows": len(records)}
        inputs.update(grid=args.grid, grid_index=args.grid_index)
    return inputs, results, checks


def _iso_setup(args, tolerances: Tolerances):
    anchors_doc = _document(args.anchors)
    residues_doc = _document(args.residues)
    anchors = parse_complex_list(require(anchors_doc, "anchors", "anchors"), "anchors.anchors")
    normalize = bool(anchors_doc.get("normalize_at_base", False))
    names = [f"q{j + 1}" for j in range(len(anchors))]
    points = dict(zip(names, anchors))
    if "p0" in anchors_doc:
        points["p0"] = parse_complex(anchors_doc["p0"], "anchors.p0")
    elif normalize:
        raise ConfigParse("anchors: normalize_at_base needs 'p0'")
    residues = _residues_from_document(residues_doc, anchors)
    return anchors_doc, residues_doc, names, points, normalize, residues


def _residues_from_document(document, anchors: np.ndarray) -> np.ndarray:
    """{"residues": [matrix, ...]} with [re, im] entries, or {"random": {"rank": r, "seed": s}}."""
    if not isinstance(document, dict):
        raise ConfigParse("residues: expected an object")
    if "random" in document:
        options = document["random"] or {}
        if not isinstance(options, dict):
            raise ConfigParse("residues.random: expected an object")
        rank = parse_int(options.get("rank", 2), "residues.random.rank")
        if rank < 1:
            raise ConfigParse("residues.random.rank: expected a positive integer")
        return random_schlesinger_state(anchors, rank=rank,
                                        seed=parse_int(options.get("seed", 0), "residues.random.seed")).A
    raw = require(document, "residues", "residues")
    try:
        A = np.array([[[parse_complex(v, "residues") for v in row] for row in matrix] for matrix in raw],
                     dtype=complex)
    except (TypeError, ValueError):
        # ragged nesting
        raise ConfigParse("residues.residues: expected a list of square matrices")
    if A.ndim != 3 or A.shape[1] != A.shape[2] or A.shape[0] != len(anchors):
        raise ConfigParse(f"residues.residues: expected {len(anchors)} square matrices, got shape {A.shape}")
    return A


def _loop_monodromies(state: SchlesingerState, centers: Sequence[complex], radii: Sequence[float],
                      tolerances: Tolerances, angles: Optional[Sequence[float]] = None):
    monodromies, used = [], []
    for j, (center, radius) in enumerate(zip(centers, radii)):
        candidates = [angles[j]] if angles is not None else np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False)
        for angle in candidates:
            try:
                monodromies.append(monodromy_probe(state, center, radius, float(angle), tolerances))
                used.append(float(angle))
                break
            except LoopThroughPole:
                continue
        else:
            raise LoopThroughPole(f"No loop around pole {j + 1} avoids the other poles.")
    return monodromies, used


def _loop_radii(z: np.ndarray) -> np.ndarray:
    d = np.abs(z[:, None] - z[None, :])
    d[np.diag_indices_from(d)] = np.inf
    return 0.3 * d.min(axis=1)


def iso_run(args, tolerances: Tolerances) -> Outcome:
    cov_doc, path_doc = _document(args.covering), _document(args.path)
    anchors_doc, residues_doc, names, points, normalize, residues = _iso_setup(args, tolerances)
    if args.hierarchy and normalize:
        raise ConfigParse("--hierarchy: the hierarchy is built from Ψ normalized at infinity; "
                          "drop 'normalize_at_base' from the anchors document")
    if args.hierarchy and "p0" not in points:
        raise ConfigParse("--hierarchy: the anchors document needs a base point 'p0'")
    cov = resolve_covering(cov_doc, tolerances)
    state = FlowState.from_covering(cov, points)
    pb = HurwitzPullback(state, names, base_point="p0" if "p0" in points else "inf", normalize_at_base=normalize)
    initial = pb.schlesinger_state(residues)
    path = path_from_document(path_doc, cov.lambdas)
    final, _ = pullback_flow(pb, initial, path, tolerances)
    monitors = conservation_monitors(initial, final)
    radii = _loop_radii(initial.z)
    before, angles = _loop_monodromies(initial, initial.z, radii, tolerances)
    after, _ = _loop_monodromies(final, final.z, radii, tolerances, angles)
    if normalize:
        # conjugation invariants only: tr M^k for k = 1..r
        change = max(abs(np.trace(np.linalg.matrix_power(b, k)) - np.trace(np.linalg.matrix_power(a, k)))
                     for b, a in zip(before, after) for k in range(1, initial.rank + 1))
    else:
        change = max(float(np.max(np.abs(b - a))) for b, a in zip(before, after))
    results = {"initial": initial.to_document(), "final": final.to_document(), "conservation": monitors,
               "monodromy_before": before, "monodromy_after": after}
    checks = [
        Check("constraint", monitors["constraint"], 1e-9),
        Check("trace_squares", monitors["trace_square_drift"], 1e-9),
        Check("monodromy" if not normalize else "monodromy_spectrum", change, tolerances.residual),
    ]
    if not normalize and "p0" in points and state.branch_count > 1:
        hierarchy = verify_hierarchy(pb, residues, tolerances=tolerances)
        results["hierarchy"] = hierarchy
        checks.append(Check("zero_curvature", max(r["zero_curvature"] for r in hierarchy.values()),
                            tolerances.residual))
        checks.append(Check("hierarchy", max(r["hierarchy"] for r in hierarchy.values()), tolerances.residual))
    inputs = {"covering": cov_doc, "anchors": anchors_doc, "residues": residues_doc, "path": path_doc}
    return inputs, results, checks


def iso_tau_check(args, tolerances: Tolerances) -> Outcome:
    cov_doc, path_doc = _document(args.covering), _document(args.path)
    anchors_doc, residues_doc, names, points, normalize, residues = _iso_setup(args, tolerances)
    cov = resolve_covering(cov_doc, tolerances)
    state = FlowState.from_covering(cov, points)
    pb = HurwitzPullback(state, names, base_point="p0" if "p0" in points else "inf", normalize_at_base=normalize)
    initial = pb.schlesinger_state(residues)
    relation = tau_relation_check(pb, initial, path_from_document(path_doc, cov.lambdas), tolerances=tolerances)
    results = {"relation": relation, "jimbo_miwa_tau_grad": jm_tau_grad(initial)}
    checks = [Check("tau_relation", abs(relation["residual"]) / max(1.0, abs(relation["lhs"])), tolerances.residual)]
    inputs = {"covering": cov_doc, "anchors": anchors_doc, "residues": residues_doc, "path": path_doc}
    return inputs, results, checks


def iso_monodromy(args, tolerances: Tolerances) -> Outcome:
    anchors_doc, residues_doc, _, points, normalize, residues = _iso_setup(args, tolerances)
    z = np.array([points[f"q{j + 1}"] for j in range(len(residues))], dtype=complex)
    gamma0 = points["p0"] if normalize else complex(np.inf)
    state = SchlesingerState(z, residues, gamma0)
    monodromies, angles = _loop_monodromies(state, z, _loop_radii(z), tolerances)
    spectrum = 0.0
    for M, A in zip(monodromies, residues):
        expected = np.exp(2j * np.pi * np.linalg.eigvals(A))
        computed = np.linalg.eigvals(M)
        spectrum = max(spectrum, max(float(np.min(np.abs(computed - e))) for e in expected))
    results = {"monodromies": monodromies, "base_angles": angles, "state": state.to_document()}
    checks = [
        Check("local_spectrum", spectrum, tolerances.residual),
        Check("unit_determinant", max(abs(np.linalg.det(M) - np.exp(2j * np.pi * np.trace(A)))
                                      for M, A in zip(monodromies, residues)), tolerances.residual),
    ]
    return {"anchors": anchors_doc, "residues": residues_doc}, results, checks


def _seed_lambdas(path: Optional[str]):
    if not path:
        return None, None
    document = _document(path)
    return document, parse_complex_list(require(document, "lambdas", "seed"), "seed.lambdas")


def hydro_solve(args, tolerances: Tolerances) -> Outcome:
    cfg_doc = _document(args.config)
    seed_doc, seed = _seed_lambdas(args.seed)
    cfg, state = hydro_config_from_document(cfg_doc, tolerances)
    x, t = parse_complex(args.x, "--x"), parse_complex(args.t, "--t")
    solution = hodograph_solve(cfg, state, x, t, seed, tolerances)
    scale = max(1.0, float(np.max(np.abs(phis(cfg, solution.state, tolerances)))))
    results = {"solution": solution, "speeds": speeds(cfg, solution.state, tolerances),
               "phis": phis(cfg, solution.state, tolerances)}
    checks = [Check("hodograph", solution.ratio_residual(cfg, tolerances) / scale, tolerances.residual)]
    return {"config": cfg_doc, "seed": seed_doc, "x": args.x, "t": args.t}, results, checks


def _hydro_grid(args, cfg, state, tolerances: Tolerances):
    axes = parse_grid(args.grid)
    if set(axes) != {"x", "t"}:
        raise ConfigParse("--grid: the hodograph grid needs axes 'x' and 't'")
    _, seed = _seed_lambdas(getattr(args, "seed", None))
    grid = hodograph_grid(cfg, state, axes["x"], axes["t"], seed_lambdas=seed, tolerances=tolerances)
    return axes, grid


def hydro_evolve(args, tolerances: Tolerances) -> Outcome:
    cfg_doc = _document(args.config)
    cfg, state = hydro_config_from_document(cfg_doc, tolerances)
    axes, grid = _hydro_grid(args, cfg, state, tolerances)
    records = grid_records(cfg, grid, tolerances)
    write_grid_csv(records, args.csv)
    worst = max(s.ratio_residual(cfg, tolerances) for s in grid.values())
    results = {"csv": args.csv, "nodes": len(grid), "max_iterations": max(s.iterations for s in grid.values())}
    checks = [Check("hodograph", worst, tolerances.residual)]
    if len(axes["x"]) >= 3 and len(axes["t"]) >= 3:
        hds = verify_hds(cfg, grid, axes["x"], axes["t"], tolerances)
        results["pde"] = hds
        checks.append(Check("characteristic_pde", hds["max_residual"], tolerances.residual))
    return {"config": cfg_doc, "grid": args.grid}, results, checks


def hydro_verify(args, tolerances: Tolerances) -> Outcome:
    cfg_doc = _document(args.config)
    cfg, state = hydro_config_from_document(cfg_doc, tolerances)
    M = state.branch_count
    tsarev = {(m, n): verify_tsarev(cfg, state, (m, n), tolerances) for m in range(M) for n in range(M) if m != n}
    V, Phi = speeds(cfg, state, tolerances), phis(cfg, state, tolerances)
    results = {"speeds": V, "phis": Phi, "tsarev": tsarev}
    checks = [
        Check("tsarev_speed", max((r["speed"] for r in tsarev.values()), default=0.0), tolerances.residual),
        Check("tsarev_phi", max((r["phi"] for r in tsarev.values()), default=0.0), tolerances.residual),
    ]
    inputs: Dict[str, Any] = {"config": cfg_doc}
    if args.grid:
        axes, grid = _hydro_grid(args, cfg, state, tolerances)
        hds = verify_hds(cfg, grid, axes["x"], axes["t"], tolerances)
        results["pde"] = hds
        checks.append(Check("characteristic_pde", hds["max_residual"], tolerances.residual))
        inputs["grid"] = args.grid
    return inputs, results, checks


def verify_all(args, tolerances: Tolerances) -> Outcome:
    only = [name.strip() for name in args.only.split(",")] if args.only else None
    if only:
        unknown = sorted(set(only) - set(CRITERIA))
        if unknown:
            raise ConfigParse(f"--only: unknown criteria {unknown}. Available: {list(CRITERIA)}")
    suite = run_suite(args.suite, args.seed, only, tolerances)
    checks = []
    for name, criterion in suite["criteria"].items():
        checks += [Check(f"{name}.{c.name}", c.value, c.tolerance) for c in criterion["checks"]]
        if "error" in criterion:
            checks.append(Check(f"{name}.error", float("inf"), 0.0))
    return {"suite": args.suite, "seed": args.seed, "only": only}, suite, checks


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=str, default=None, help="Path of the JSON report (default: stdout).")
    common.add_argument("--tol", type=float, default=None, help="Override the residual tolerance.")
    common.add_argument("--no-timestamp", action="store_true", dest="no_timestamp",
                        help="Leave the timestamp out of the report.")
    common.add_argument("--log-level", type=str, default="WARNING", dest="log_level",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level on stderr.")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=0, help="Seed of the random probes (default: 0).")

    parser = argparse.ArgumentParser(prog="pyhurwitz",
                                     description="Integrable systems on genus-zero Hurwitz spaces.")
    groups = parser.add_subparsers(dest="group", required=True)

    def command(group, name, handler, help_text, parents=(common,)):
        sub = group.add_parser(name, parents=list(parents), help=help_text)
        sub.set_defaults(handler=handler, command=f"{handler.__name__.split('_')[0]} {name}")
        return sub

    cover = groups.add_parser("cover", help="Rational coverings.").add_subparsers(dest="action", required=True)
    sub = command(cover, "build", cover_build, "Critical data of a covering.")
    sub.add_argument("--covering", required=True)
    sub = command(cover, "verify", cover_verify, "Identities and monodromy of a covering.", (common, seeded))
    sub.add_argument("--covering", required=True)

    flow_group = groups.add_parser("flow", help="Branch-point flows.").add_subparsers(dest="action", required=True)
    sub = command(flow_group, "run", flow_run, "Flow a covering along a path of branch points.")
    sub.add_argument("--covering", required=True)
    sub.add_argument("--path", required=True)
    sub.add_argument("--points", default=None, help="Marked points {name: [re, im]} carried at fixed λ.")

    rank1 = groups.add_parser("rank1", help="Scalar hierarchy.").add_subparsers(dest="action", required=True)
    sub = command(rank1, "solve", rank1_solve, "Cauchy-integral solution, gradient and tau gradient.")
    for option in ("--covering", "--contour", "--density", "--p0"):
        sub.add_argument(option, required=True)
    sub = command(rank1, "residual", rank1_residual, "PDE residuals of a solution report.", (common, seeded))
    sub.add_argument("--sol", required=True, help="Report written by 'rank1 solve'.")
    sub.add_argument("--pairs", default="all", help="'all' or 1-based pairs such as '1-2,1-3'.")
    sub = command(rank1, "tau", rank1_tau, "Tau gradient, Hessian and loop closedness.")
    sub.add_argument("--sol", required=True)
    sub.add_argument("--loop-size", type=float, default=0.02, dest="loop_size",
                     help="Side of the square loops relative to the data scale.")

    geometry = groups.add_parser("geometry", help="Bergmann kernel and metrics.").add_subparsers(
        dest="action", required=True)
    sub = command(geometry, "report", geometry_report, "Rotation coefficients, Rauch and Egoroff checks.",
                  (common, seeded))
    sub.add_argument("--covering", required=True)
    sub.add_argument("--sol", default=None, help="Report of 'rank1 solve' for the Darboux-Egoroff checks.")
    sub.add_argument("--beta-grid", default=None, dest="beta_grid", help="CSV path for β over a grid of one λ.")
    sub.add_argument("--grid-index", type=int, default=1, dest="grid_index")
    sub.add_argument("--grid", default="re=-1:1:5,im=-1:1:5")

    iso = groups.add_parser("iso", help="Schlesinger sector.").add_subparsers(dest="action", required=True)
    for name, handler, text in (("run", iso_run, "Pull the Schlesinger flow back along a path."),
                                ("tau-check", iso_tau_check, "Differentiated tau relation along a path.")):
        sub = command(iso, name, handler, text)
        for option in ("--covering", "--anchors", "--residues", "--path"):
            sub.add_argument(option, required=True)
        if name == "run":
            sub.add_argument("--hierarchy", action="store_true",
                             help="Require the hierarchy checks (needs 'p0' and normalization at infinity).")
    sub = command(iso, "monodromy", iso_monodromy, "Monodromy around every Fuchsian pole.")
    sub.add_argument("--anchors", required=True)
    sub.add_argument("--residues", required=True)

    hydro = groups.add_parser("hydro", help="Hydrodynamic type systems.").add_subparsers(dest="action", required=True)
    sub = command(hydro, "solve", hydro_solve, "Hodograph solution at one (x, t).")
    sub.add_argument("--config", required=True)
    sub.add_argument("--x", required=True)
    sub.add_argument("--t", required=True)
    sub.add_argument("--seed", default=None, help="Document {\"lambdas\": [...]} with the Newton seed.")
    sub = command(hydro, "evolve", hydro_evolve, "Hodograph solutions over an (x, t) grid.")
    sub.add_argument("--config", required=True)
    sub.add_argument("--grid", required=True, help="'x=a:b:n,t=a:b:n'")
    sub.add_argument("--csv", required=True, help="CSV path for the grid.")
    sub.add_argument("--seed", default=None)
    sub = command(hydro, "verify", hydro_verify, "Tsarev relations and, with --grid, the PDE.")
    sub.add_argument("--config", required=True)
    sub.add_argument("--grid", default=None)
    sub.add_argument("--seed", default=None)

    verify = groups.add_parser("verify", help="Acceptance suites.").add_subparsers(dest="action", required=True)
    sub = command(verify, "all", verify_all, "Run the acceptance criteria.", (common, seeded))
    sub.add_argument("--suite", choices=list(MODES), default="quick")
    sub.add_argument("--only", default=None, help=f"Comma-separated subset of {list(CRITERIA)}.")
    return parser


def _emit(args, report: Dict[str, Any]):
    text = write_report(args.out, report)
    if not args.out:
        sys.stdout.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    inputs: Dict[str, Any] = {}
    try:
        tolerances = Tolerances.from_env(residual=args.tol)
        inputs, results, checks = args.handler(args, tolerances)
    except ConfigParse as e:
        logger.error("%s", e)
        _emit(args, build_report(args.command, inputs, {}, [], not args.no_timestamp, e))
        return 2
    except HurwitzError as e:
        logger.error("%s: %s", type(e).__name__, e)
        _emit(args, build_report(args.command, inputs, {}, [], not args.no_timestamp, e))
        return 1
    except (ValueError, KeyError, TypeError) as e:
        # a document shape no parser anticipated
        error = ConfigParse(f"{type(e).__name__}: {e}")
        logger.error("%s", error)
        _emit(args, build_report(args.command, inputs, {}, [], not args.no_timestamp, error))
        return 2
    results["tolerances"] = tolerances.as_dict()
    report = build_report(args.command, inputs, results, checks, not args.no_timestamp)
    _emit(args, report)
    for check in checks:
        if not check.passed:
            logger.warning("check %s failed: %.3e >= %.1e", check.name, check.value, check.tolerance)
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
