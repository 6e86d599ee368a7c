import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from ..utils.exceptions import HurwitzError, JacobianSingular, NewtonDivergence

logger = logging.getLogger(__name__)


@dataclass
class NewtonResult:
    x: np.ndarray
    residual_norm: float
    iterations: int
    history: List[float] = field(default_factory=list)
    payload: object = None

    @property
    def contraction_ratios(self) -> List[float]:
        """‖F_{k+1}‖/‖F_k‖²; bounded ratios at the tail indicate quadratic convergence."""
        h = self.history
        return [h[k + 1] / h[k] ** 2 for k in range(len(h) - 1) if h[k] > 0.0]


def solve_step(jacobian: np.ndarray, residual: np.ndarray, cond_limit: float = 1e13) -> np.ndarray:
    try:
        cond = np.linalg.cond(jacobian)
        if not np.isfinite(cond) or cond > cond_limit:
            raise JacobianSingular(f"Newton Jacobian is singular (condition number {cond:.3e}).")
        return np.linalg.solve(jacobian, -residual)
    except np.linalg.LinAlgError as e:
        raise JacobianSingular(f"Newton Jacobian is singular: {e}")


def damped_newton(evaluate: Callable[[np.ndarray], tuple], x0: np.ndarray,
                  jacobian: Callable[[np.ndarray, object], np.ndarray],
                  tol: float = 1e-10, maxiter: int = 50, max_halvings: int = 12,
                  polish: int = 1) -> NewtonResult:
    """
    Damped Newton iteration for a complex square system.

    evaluate(x) returns (F(x), payload); the payload (for instance a flowed
    state) is handed to jacobian(x, payload) and kept on the result. A trial
    step is halved while it fails or does not decrease ‖F‖. After ‖F‖ < tol
    up to `polish` further full steps are taken while they keep decreasing ‖F‖.
    """
    x = np.asarray(x0, dtype=complex)
    residual, payload = evaluate(x)
    norm = float(np.linalg.norm(residual))
    history = [norm]
    for iteration in range(1, maxiter + 1):
        converged = norm < tol
        if converged and polish <= 0:
            return NewtonResult(x, norm, iteration - 1, history, payload)
        step = solve_step(jacobian(x, payload), residual)
        damping, accepted = 1.0, False
        for _ in range(max_halvings):
            trial = x + damping * step
            try:
                trial_residual, trial_payload = evaluate(trial)
                trial_norm = float(np.linalg.norm(trial_residual))
            except HurwitzError as e:
                logger.debug("newton trial rejected: %s", e)
                trial_norm = np.inf
            if np.isfinite(trial_norm) and trial_norm < norm:
                accepted = True
                break
            if converged:
                break
            damping *= 0.5
        if converged:
            if accepted:
                x, residual, payload, norm = trial, trial_residual, trial_payload, trial_norm
                history.append(norm)
            polish -= 1
            if not accepted or polish <= 0:
                return NewtonResult(x, norm, iteration, history, payload)
            continue
        if not accepted:
            raise NewtonDivergence(
                f"Newton stalled at iteration {iteration} with residual {norm:.3e}.",
                iterations=iteration, residual_norm=norm)
        x, residual, payload, norm = trial, trial_residual, trial_payload, trial_norm
        history.append(norm)
        logger.debug("newton iteration %d: |F|=%.3e (damping %.3g)", iteration, norm, damping)
    if norm < tol:
        return NewtonResult(x, norm, maxiter, history, payload)
    raise NewtonDivergence(f"Newton did not converge in {maxiter} iterations (residual {norm:.3e}).",
                           iterations=maxiter, residual_norm=norm)
