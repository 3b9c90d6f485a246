"""
Max-min SINR power allocation

Bisection on a common SINR target t. For a given t the equal-SINR conditions
    rho_k a_k = t (sum_i rho_i G[k, i] - rho_k a_k + sigma^2)
are the K x K linear system (diag(a (1+t)/t) - G) rho = sigma^2 1, and t is
achievable iff its solution is non-negative with sum(rho) <= Pmax. The upper end
of the final bracket is pulled below the pole of that system, then the bracket
is polished with Brent's method on sum(rho(t)) = Pmax.
"""
import logging
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from src.core.sinr_metrics import SINRCoefficients, sinr
from src.core.types import RealArray
from src.power_alloc.base import (
    AllocationError,
    AllocationResult,
    AllocatorConfig,
    ConvergenceError,
    PowerAllocator,
    Strategy,
)

logger = logging.getLogger(__name__)

# Allowed relative spread of the SINRs around the common value
CERTIFICATE_TOLERANCE = 1e-6


def equal_sinr_powers(coeffs: SINRCoefficients, t: float) -> Optional[RealArray]:
    """Powers giving every device SINR exactly t, or None if the system is singular"""
    system = np.diag(coeffs.a * (1.0 + t) / t) - coeffs.G
    try:
        rho = np.linalg.solve(system, np.full(coeffs.K, coeffs.sigma2))
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(rho)):
        return None
    return rho


def single_user_bound(coeffs: SINRCoefficients, Pmax: float) -> float:
    """min_k of the SINR device k would get alone at full power"""
    self_interference = np.maximum(np.diag(coeffs.G) - coeffs.a, 0.0)
    gamma = Pmax * coeffs.a / (Pmax * self_interference + coeffs.sigma2)
    return float(np.min(gamma))


def _feasible(rho: Optional[RealArray], Pmax: float) -> bool:
    return rho is not None and bool(np.all(rho >= 0)) and float(rho.sum()) <= Pmax


def _spends_budget(rho: Optional[RealArray], Pmax: float) -> bool:
    return rho is not None and bool(np.all(rho >= 0)) and float(rho.sum()) >= Pmax


def budget_bracket(coeffs: SINRCoefficients, Pmax: float, t_lo: float, rho_lo: RealArray,
                   t_hi: float) -> Tuple[float, RealArray, Optional[float]]:
    """
    Shrink (t_lo, t_hi] until rho(t_hi) is non-negative and spends at least
    Pmax, so sum(rho(t)) = Pmax has a root in between. A non-negative solution
    implies t lies below the pole of the equal-SINR system. Returns None for
    t_hi once t_lo and t_hi are adjacent floats without such a point.
    """
    while not _spends_budget(equal_sinr_powers(coeffs, t_hi), Pmax):
        t = 0.5 * (t_lo + t_hi)
        if not t_lo < t < t_hi:
            return t_lo, rho_lo, None
        rho = equal_sinr_powers(coeffs, t)
        if _feasible(rho, Pmax):
            t_lo, rho_lo = t, rho
        else:
            t_hi = t
    return t_lo, rho_lo, t_hi


def maxmin_allocation(coeffs: SINRCoefficients, Pmax: float,
                      tolerance: float = 1e-8, max_steps: int = 200) -> AllocationResult:
    """Maximize the minimum SINR subject to sum(rho) <= Pmax"""
    if np.any(~(coeffs.a > 0)):
        raise AllocationError("max-min needs strictly positive signal gains")
    t_lo, t_hi = 0.0, single_user_bound(coeffs, Pmax)
    rho_lo = None
    steps = 0

    while (t_hi - t_lo) > tolerance * t_hi:
        if steps >= max_steps:
            raise ConvergenceError(
                f"max-min bisection did not converge in {max_steps} steps "
                f"(bracket [{t_lo:.6e}, {t_hi:.6e}])"
            )
        t = 0.5 * (t_lo + t_hi)
        rho = equal_sinr_powers(coeffs, t)
        if _feasible(rho, Pmax):
            t_lo, rho_lo = t, rho
        else:
            t_hi = t
        steps += 1

    if rho_lo is None:
        raise ConvergenceError("max-min bisection found no feasible SINR target")

    t_lo, rho_lo, t_root = budget_bracket(coeffs, Pmax, t_lo, rho_lo, t_hi)
    if t_root is not None:
        t_hi = t_root
        t_star = brentq(lambda t: equal_sinr_powers(coeffs, t).sum() - Pmax,
                        t_lo, t_hi, xtol=1e-15 * t_hi, rtol=1e-15)
        rho_star = equal_sinr_powers(coeffs, t_star)
    else:
        # t_lo sits next to the pole: rho_lo is the interference-limited direction
        t_star, rho_star = t_lo, rho_lo

    rho_star = rho_star * (Pmax / rho_star.sum())
    gamma = sinr(coeffs, rho_star)
    common = float(gamma.min())
    spread = float(np.max(np.abs(gamma - common)) / common)
    if spread > CERTIFICATE_TOLERANCE:
        logger.warning(f"max-min SINR spread {spread:.2e} above {CERTIFICATE_TOLERANCE:.0e}")

    return AllocationResult(
        rho=rho_star,
        strategy=Strategy.MAXMIN,
        certificate={
            "common_sinr": common,
            "bisection_gap": (t_hi - t_lo) / t_hi,
            "steps": steps,
            "sinr_spread": spread,
        },
    )


class MaxMinAllocator(PowerAllocator):
    """Max-min fairness"""

    strategy = Strategy.MAXMIN

    def __init__(self, config: Optional[AllocatorConfig] = None):
        super().__init__(config or AllocatorConfig(tolerance=1e-8, max_iter=200))

    def solve(self, coeffs: SINRCoefficients, Pmax: float) -> AllocationResult:
        return maxmin_allocation(coeffs, Pmax, tolerance=self.config.tolerance,
                                 max_steps=self.config.max_iter)
