import logging
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.optimize import linear_sum_assignment

from ..config import DEFAULT_TOLERANCES, Tolerances
from ..core.covering import RationalCovering, SheetLabeling, continue_fiber, min_separation
from ..utils.exceptions import PathThroughBranchPoint

logger = logging.getLogger(__name__)

Permutation = Tuple[int, ...]


def _match(final: np.ndarray, start: np.ndarray) -> Permutation:
    rows, cols = linear_sum_assignment(np.abs(final[:, None] - start[None, :]))
    mismatch = float(np.max(np.abs(final[rows] - start[cols])))
    if mismatch > 1e-6 * max(1.0, float(np.max(np.abs(start)))):
        raise PathThroughBranchPoint(f"Fiber did not close up after the loop (mismatch {mismatch:.3e}).")
    permutation = np.empty(len(start), dtype=int)
    permutation[rows] = cols
    return tuple(int(p) for p in permutation)


def loop_permutation(cov: RationalCovering, center: complex, radius: float,
                     labeling: Optional[SheetLabeling] = None, vertices: int = 64,
                     tolerances: Tolerances = DEFAULT_TOLERANCES) -> Permutation:
    """
    Sheet permutation induced by the counterclockwise λ-circle |λ−center| = radius
    based at center + radius. Entry i is the sheet (0-based) reached from sheet i.
    Sheets are those of labeling, by default the labeling at infinity carried to
    the base point along a straight segment.
    """
    base = complex(center) + radius
    labeling = labeling or SheetLabeling.at_infinity(cov)
    start = continue_fiber(cov, labeling.ordered_fiber, labeling.base_lambda, base, tolerances)
    current, lam = start, base
    for k in range(1, vertices + 1):
        nxt = complex(center) + radius * np.exp(2j * np.pi * k / vertices)
        current = continue_fiber(cov, current, lam, nxt, tolerances)
        lam = nxt
    return _match(current, start)


def branch_point_generators(cov: RationalCovering, radius_ratio: float = 0.3,
                            tolerances: Tolerances = DEFAULT_TOLERANCES) -> Dict[str, Permutation]:
    """
    One permutation per branch point from a small circle around it. All of
    them use the same far base point, so together they generate the
    monodromy group. The far direction is rotated until every connecting
    segment avoids the branch points.
    """
    spacing = min_separation(cov.lambdas)
    radius = radius_ratio * (spacing if np.isfinite(spacing) else 1.0)
    for attempt in range(12):
        direction = np.exp(1j * 0.13 * attempt * (-1) ** attempt)
        labeling = SheetLabeling.at_infinity(cov, direction)
        try:
            return {f"lambda_{m + 1}": loop_permutation(cov, lam, radius, labeling, tolerances=tolerances)
                    for m, lam in enumerate(cov.lambdas)}
        except PathThroughBranchPoint as e:
            logger.debug("generator direction %s rejected: %s", direction, e)
    raise PathThroughBranchPoint("No far base direction gives branch-point-free connecting segments.")


class MonodromyGraph:
    """
    The sheets of a covering as nodes, with one labelled edge set per
    permutation generator. Connectivity of the graph is transitivity of the
    monodromy group.
    """
    def __init__(self, degree: int, name: str = "monodromy"):
        if degree < 1:
            raise ValueError("degree must be positive.")
        self.name = name
        self.degree = degree
        self.graph = nx.MultiDiGraph()
        self.graph.add_nodes_from(range(1, degree + 1))
        self.generators: Dict[str, Permutation] = {}

    def add_generator(self, label: str, permutation: Sequence[int]):
        permutation = tuple(int(p) for p in permutation)
        if label in self.generators:
            raise ValueError(f"Generator '{label}' already exists.")
        if sorted(permutation) != list(range(self.degree)):
            raise ValueError(f"{permutation} is not a permutation of {self.degree} sheets.")
        self.generators[label] = permutation
        for sheet, image in enumerate(permutation):
            self.graph.add_edge(sheet + 1, image + 1, key=label)

    def is_transitive(self) -> bool:
        return nx.is_strongly_connected(self.graph)

    def cycle_type(self, label: str) -> Tuple[int, ...]:
        cycles = nx.DiGraph()
        cycles.add_nodes_from(range(self.degree))
        cycles.add_edges_from(enumerate(self.generators[label]))
        return tuple(sorted((len(c) for c in nx.weakly_connected_components(cycles)), reverse=True))

    def is_simple_branching(self) -> bool:
        """Every generator is a transposition."""
        transposition = (2,) + (1,) * (self.degree - 2)
        return all(self.cycle_type(label) == transposition for label in self.generators)

    def to_document(self) -> Dict[str, object]:
        return {
            "degree": self.degree,
            "generators": {k: [p + 1 for p in v] for k, v in sorted(self.generators.items())},
            "cycle_types": {k: list(self.cycle_type(k)) for k in sorted(self.generators)},
            "transitive": self.is_transitive(),
        }

    def __repr__(self):
        return f"MonodromyGraph(name='{self.name}', degree={self.degree}, generators={list(self.generators)})"


def monodromy_graph(permutations: Dict[str, Sequence[int]], degree: Optional[int] = None) -> MonodromyGraph:
    """Builds the graph of labelled generators; the degree defaults to the permutation length."""
    if not permutations:
        if degree is None:
            raise ValueError("Cannot infer the degree of an empty set of generators.")
        return MonodromyGraph(degree)
    graph = MonodromyGraph(degree if degree is not None else len(next(iter(permutations.values()))))
    for label, permutation in permutations.items():
        graph.add_generator(label, permutation)
    return graph


def covering_monodromy(cov: RationalCovering, tolerances: Tolerances = DEFAULT_TOLERANCES) -> MonodromyGraph:
    graph = monodromy_graph(branch_point_generators(cov, tolerances=tolerances), cov.degree)
    logger.info("monodromy of degree-%d covering: transitive=%s", cov.degree, graph.is_transitive())
    return graph
