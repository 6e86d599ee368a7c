"""
Finite differences and quadrature rules shared by the verification code.
"""
from typing import Callable

import numpy as np


def central_difference(evaluate: Callable[[float], np.ndarray], step: float) -> np.ndarray:
    """
    Derivative at 0 of s -> evaluate(s): central differences at step and
    step/2 combined by one Richardson level.
    """
    def central(h):
        return (np.asarray(evaluate(h)) - np.asarray(evaluate(-h))) / (2.0 * h)

    coarse = central(step)
    fine = central(0.5 * step)
    return (4.0 * fine - coarse) / 3.0


def richardson_limit(evaluate: Callable[[float], complex], eps: float, levels: int = 2) -> complex:
    """
    Limit at 0 of a quantity with an expansion in powers of eps, from the
    values at eps, eps/2, ..., eps/2**levels.
    """
    table = [complex(evaluate(eps / 2 ** k)) for k in range(levels + 1)]
    for level in range(1, levels + 1):
        factor = 2.0 ** level
        table = [(factor * table[k + 1] - table[k]) / (factor - 1.0) for k in range(len(table) - 1)]
    return table[0]


def periodic_trapezoid(values: np.ndarray, axis: int = -1) -> np.ndarray:
    """Trapezoid rule on K equispaced nodes of [0, 2π): 2π/K · Σ values."""
    values = np.asarray(values)
    return values.sum(axis=axis) * (2.0 * np.pi / values.shape[axis])


def gauss_legendre_unit(order: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return 0.5 * (nodes + 1.0), 0.5 * weights
