import logging
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from ..config import DEFAULT_TOLERANCES, Tolerances
from ..utils.exceptions import StepFailure

logger = logging.getLogger(__name__)


def integrate_segment(rhs: Callable[[float, np.ndarray], np.ndarray], y0: np.ndarray,
                      tolerances: Tolerances = DEFAULT_TOLERANCES,
                      span=(0.0, 1.0), dense: bool = False, method: str = "DOP853"):
    """
    Integrates a complex ODE system over span with an embedded Runge-Kutta pair.

    Exceptions raised inside rhs (collisions) propagate unchanged. A failed
    step controller is reported as StepFailure. Returns the scipy solution
    object; sol.t holds the accepted steps.
    """
    y0 = np.asarray(y0, dtype=complex)
    sol = solve_ivp(rhs, span, y0, method=method, rtol=tolerances.ode_rtol,
                    atol=tolerances.ode_atol, dense_output=dense)
    if sol.status == -1:
        raise StepFailure(f"Integrator failed on [{span[0]}, {span[1]}]: {sol.message}")
    logger.debug("integrated %d unknowns in %d steps (%d evaluations)",
                 y0.size, len(sol.t) - 1, sol.nfev)
    return sol


def final_state(sol) -> np.ndarray:
    return np.array(sol.y[:, -1], dtype=complex)


def nearest_branch(previous: np.ndarray, squares: np.ndarray) -> np.ndarray:
    """Square roots of squares, each sign picked to lie nearest the previous root."""
    roots = np.sqrt(np.asarray(squares, dtype=complex))
    flip = np.abs(roots + previous) < np.abs(roots - previous)
    return np.where(flip, -roots, roots)


def continue_roots(initial: np.ndarray, square_history: np.ndarray,
                   transform: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> np.ndarray:
    """
    Follows square roots along a sampled history (one row per accepted step),
    starting from initial. transform maps a history row to the squared values.
    """
    current = np.asarray(initial, dtype=complex)
    for row in square_history:
        squares = transform(row) if transform is not None else row
        current = nearest_branch(current, squares)
    return current
