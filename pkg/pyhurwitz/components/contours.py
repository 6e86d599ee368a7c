import logging
from typing import Dict, Optional, Sequence

import numpy as np

from ..config import DEFAULT_TOLERANCES, Tolerances, parse_complex, require
from ..core.covering import RationalCovering, dnu_dlambda, map_derivatives
from ..utils.exceptions import ConfigParse, CriticalPointHit, PoleHit, QuadratureDegraded
from .base import Density

logger = logging.getLogger(__name__)


class Contour:
    """
    A closed contour sampled at K equispaced parameters t_k = 2πk/K.

    The contour is drawn in the γ-plane of the covering it was built on and
    afterwards carried by flows at fixed λ(t_k): the derivative dλ/dt at the
    nodes is stored once, and the γ-velocity at any later moduli point is
    dλ/dt · ∂ν/∂λ.
    """
    def __init__(self, name: str, nodes: Sequence[complex], dlambda_dt: Sequence[complex],
                 circle: Optional[Dict[str, object]] = None):
        self.name = name
        self.initial_nodes = np.asarray(nodes, dtype=complex)
        self.dlambda_dt = np.asarray(dlambda_dt, dtype=complex)
        if self.initial_nodes.shape != self.dlambda_dt.shape or self.initial_nodes.ndim != 1:
            raise ValueError("Contour nodes and dλ/dt must be 1-D arrays of equal length.")
        self.count = len(self.initial_nodes)
        self.t = 2.0 * np.pi * np.arange(self.count) / self.count
        self.circle = circle

    @classmethod
    def circle_on(cls, cov, center: complex, radius: float, nodes: int = 512,
                  name: str = "l", clockwise: bool = False,
                  tolerances: Tolerances = DEFAULT_TOLERANCES) -> "Contour":
        """Circle γ(t) = center + radius·e^{±it} in the uniformizer of cov."""
        sign = -1.0 if clockwise else 1.0
        t = 2.0 * np.pi * np.arange(nodes) / nodes
        gamma = complex(center) + radius * np.exp(sign * 1j * t)
        dgamma = sign * 1j * radius * np.exp(sign * 1j * t)
        if cov.poles.size and np.min(np.abs(gamma[:, None] - cov.poles)) < tolerances.pole_margin * cov.scale:
            raise PoleHit("Contour passes through a pole of the covering.")
        if np.min(np.abs(gamma[:, None] - cov.gammas)) < tolerances.pole_margin * cov.scale:
            raise CriticalPointHit("Contour passes through a critical point.")
        _, first, _ = map_derivatives(cov.poles, cov.residues, gamma)
        return cls(name, gamma, first * dgamma,
                   circle={"center": complex(center), "radius": float(radius), "clockwise": clockwise})

    def nodes(self, state) -> np.ndarray:
        """Node coordinates at state (a FlowState carrying this contour, or the original covering)."""
        contours = getattr(state, "contours", None)
        if contours is not None and self.name in contours:
            return contours[self.name]
        if contours is None:
            return self.initial_nodes
        raise KeyError(f"Contour '{self.name}' is not carried by this flow state.")

    def velocity(self, state) -> np.ndarray:
        """dγ/dt at the nodes."""
        return self.dlambda_dt * dnu_dlambda(state, self.nodes(state))

    def weights(self, state, density: Density) -> np.ndarray:
        """h(t_k)·γ'(t_k)·2π/K, so that Σ weights·g(γ_k) approximates ∮ h g dν."""
        return density.values(self.t) * self.velocity(state) * (2.0 * np.pi / self.count)

    def spacing(self, state) -> float:
        nodes = self.nodes(state)
        return float(np.max(np.abs(np.roll(nodes, -1) - nodes)))

    def distance(self, state, point: complex) -> float:
        return float(np.min(np.abs(self.nodes(state) - point)))

    def check_margin(self, state, points: Sequence[complex], what: str,
                     tolerances: Tolerances = DEFAULT_TOLERANCES):
        """QuadratureDegraded when a singularity is closer than quadrature_margin node spacings."""
        limit = tolerances.quadrature_margin * self.spacing(state)
        for point in np.atleast_1d(np.asarray(points, dtype=complex)):
            if np.isinf(point):
                continue
            d = self.distance(state, point)
            if d < limit:
                raise QuadratureDegraded(
                    f"{what} at {complex(point)} is {d:.3e} from contour '{self.name}' "
                    f"(needs {limit:.3e}); use more nodes or move the contour.")

    def outward_normals(self, state) -> np.ndarray:
        """Unit normals pointing to the right of the direction of travel."""
        velocity = self.velocity(state)
        return -1j * velocity / np.abs(velocity)

    def to_document(self) -> Dict[str, object]:
        if self.circle is not None:
            c = self.circle["center"]
            return {"circle": {"center": [c.real, c.imag], "radius": self.circle["radius"],
                               "nodes": self.count, "clockwise": self.circle["clockwise"]}, "name": self.name}
        return {"name": self.name, "nodes": self.count}

    def __repr__(self):
        return f"Contour(name='{self.name}', nodes={self.count})"


def contour_from_document(document, cov: RationalCovering, tolerances: Tolerances = DEFAULT_TOLERANCES) -> Contour:
    """{"circle": {"center": [re, im], "radius": r, "nodes": K}}"""
    circle = require(document, "circle", "contour")
    center = parse_complex(require(circle, "center", "contour.circle"), "contour.circle.center")
    try:
        radius = float(require(circle, "radius", "contour.circle"))
        nodes = int(circle.get("nodes", tolerances.quadrature_nodes))
    except (TypeError, ValueError):
        raise ConfigParse("contour.circle: radius must be a number and nodes an integer")
    if radius <= 0 or nodes < 8:
        raise ConfigParse("contour.circle: radius must be positive and nodes at least 8")
    return Contour.circle_on(cov, center, radius, nodes, document.get("name", "l"),
                             bool(circle.get("clockwise", False)), tolerances)
