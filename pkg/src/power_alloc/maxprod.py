"""
Max-product SINR power allocation

With rho_k = exp(q_k) the objective sum_k log gamma_k is concave in q (a
geometric program in convex form). Each iteration takes a Newton step on the
budget surface sum(exp(q)) = Pmax: the K x K Hessian of the Lagrangian is
solved together with the linearized budget constraint. When that step is not
an ascent direction the projected gradient is used instead (Barzilai-Borwein
trial step). Steps are accepted by backtracking line search and the iterate
is pulled back onto the budget by a uniform log-shift.
"""
import logging
import math
from typing import Optional, Tuple

import numpy as np

from src.core.sinr_metrics import SINRCoefficients
from src.core.types import RealArray
from src.power_alloc.base import AllocationResult, AllocatorConfig, PowerAllocator, Strategy

logger = logging.getLogger(__name__)

ARMIJO = 1e-4
MIN_STEP = 1e-18
MAX_STEP = 1e8


def _shift_to_budget(q: RealArray, log_Pmax: float) -> RealArray:
    log_total = np.logaddexp.reduce(q)
    return q - (log_total - log_Pmax)


def _objective(coeffs: SINRCoefficients, cross: RealArray, q: RealArray) -> Tuple[float, RealArray]:
    """sum_k log gamma_k and its gradient in q"""
    rho = np.exp(q)
    interference = cross @ rho + coeffs.sigma2
    value = float(np.sum(q + np.log(coeffs.a) - np.log(interference)))
    grad = 1.0 - rho * (cross.T @ (1.0 / interference))
    return value, grad


def _hessian(coeffs: SINRCoefficients, cross: RealArray, q: RealArray) -> RealArray:
    """Hessian of the objective in q (negative semidefinite)"""
    rho = np.exp(q)
    inv = 1.0 / (cross @ rho + coeffs.sigma2)
    weighted = cross * rho          # C[k, i] rho_i
    return weighted.T @ (weighted * (inv**2)[:, None]) - np.diag(rho * (cross.T @ inv))


def _project(grad: RealArray, rho: RealArray) -> RealArray:
    return grad - (grad @ rho) / (rho @ rho) * rho


def newton_direction(coeffs: SINRCoefficients, cross: RealArray, q: RealArray,
                     grad: RealArray) -> Optional[RealArray]:
    """
    Newton step tangent to the budget surface, or None if it is not an ascent
    direction. The budget multiplier nu = grad.rho / rho.rho adds the
    curvature -nu diag(rho) of the surface itself.
    """
    K = q.shape[0]
    rho = np.exp(q)
    nu = max(float(grad @ rho) / float(rho @ rho), 0.0)
    kkt = np.zeros((K + 1, K + 1))
    kkt[:K, :K] = _hessian(coeffs, cross, q) - nu * np.diag(rho)
    kkt[:K, K] = rho
    kkt[K, :K] = rho
    rhs = np.concatenate([-grad, [0.0]])
    try:
        step = np.linalg.solve(kkt, rhs)[:K]
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(step)) or float(grad @ step) <= 0:
        return None
    return step


def maxprod_allocation(coeffs: SINRCoefficients, Pmax: float,
                       tolerance: float = 1e-8, max_iter: int = 500) -> AllocationResult:
    """Maximize prod_k gamma_k subject to sum(rho) <= Pmax"""
    K = coeffs.K
    # Interference seen by device k from stream i (own stream keeps its non-coherent part)
    cross = coeffs.G - np.diag(coeffs.a)
    log_Pmax = math.log(Pmax)

    q = np.full(K, log_Pmax - math.log(K))
    value, grad = _objective(coeffs, cross, q)
    step = 1.0
    converged = False
    iterations = 0
    grad_norm = 0.0
    newton_steps = 0

    for iterations in range(max_iter):
        rho = np.exp(q)
        projected = _project(grad, rho)
        grad_norm = float(np.linalg.norm(projected))
        scale = max(float(np.linalg.norm(grad)), 1.0)
        if grad_norm <= tolerance * scale:
            converged = True
            break

        direction = newton_direction(coeffs, cross, q, grad)
        if direction is not None:
            s = 1.0
            newton_steps += 1
        else:
            direction, s = projected, step
        slope = float(grad @ direction)

        while True:
            q_new = _shift_to_budget(q + s * direction, log_Pmax)
            value_new, grad_new = _objective(coeffs, cross, q_new)
            if value_new >= value + ARMIJO * s * slope:
                break
            s *= 0.5
            if s < MIN_STEP:
                break
        if s < MIN_STEP:
            # No ascent left at machine precision
            converged = grad_norm <= math.sqrt(tolerance) * scale
            break

        # Barzilai-Borwein trial step for a later gradient iteration (concave objective)
        dq = q_new - q
        dg = grad_new - grad
        curvature = -float(dq @ dg)
        step = float(dq @ dq) / curvature if curvature > 0 else 2.0 * s
        step = min(max(step, MIN_STEP), MAX_STEP)

        q, value, grad = q_new, value_new, grad_new
    else:
        iterations = max_iter

    if not converged:
        logger.warning(f"max-prod stopped after {iterations} iterations with "
                       f"projected gradient {grad_norm:.2e} (tolerance {tolerance:.0e})")
    else:
        logger.debug(f"max-prod converged in {iterations} iterations ({newton_steps} Newton)")

    rho = np.exp(q)
    rho = rho * (Pmax / rho.sum())
    return AllocationResult(
        rho=rho,
        strategy=Strategy.MAXPROD,
        certificate={
            "gradient_norm": grad_norm,
            "iterations": iterations,
            "newton_steps": newton_steps,
            "log_product": value,
            "converged": converged,
        },
    )


class MaxProdAllocator(PowerAllocator):
    """Max-product SINR"""

    strategy = Strategy.MAXPROD

    def __init__(self, config: Optional[AllocatorConfig] = None):
        super().__init__(config or AllocatorConfig(tolerance=1e-8, max_iter=500))

    def solve(self, coeffs: SINRCoefficients, Pmax: float) -> AllocationResult:
        return maxprod_allocation(coeffs, Pmax, tolerance=self.config.tolerance,
                                  max_iter=self.config.max_iter)
