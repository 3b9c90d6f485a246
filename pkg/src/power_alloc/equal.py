"""
Equal power allocation, rho_k = Pmax / K
"""
import numpy as np

from src.core.sinr_metrics import SINRCoefficients
from src.power_alloc.base import AllocationResult, PowerAllocator, Strategy


def equal_power(K: int, Pmax: float) -> AllocationResult:
    """Split the budget evenly"""
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    return AllocationResult(rho=np.full(K, Pmax / K), strategy=Strategy.EQUAL)


class EqualPowerAllocator(PowerAllocator):
    """Equal power baseline"""

    strategy = Strategy.EQUAL

    def solve(self, coeffs: SINRCoefficients, Pmax: float) -> AllocationResult:
        return equal_power(coeffs.K, Pmax)
