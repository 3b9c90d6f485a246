"""
Base power allocator for the downlink simulator
Defines the interface that all allocation strategies must follow
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional
import logging

import numpy as np

from src.core.sinr_metrics import SINRCoefficients
from src.core.types import RealArray

logger = logging.getLogger(__name__)

# Relative slack allowed on the sum-power constraint
POWER_SLACK = 1e-9


class Strategy(str, Enum):
    EQUAL = "equal"
    MAXMIN = "maxmin"
    MAXPROD = "maxprod"


class AllocationError(RuntimeError):
    """Coefficients rejected or allocation failed"""


class ConvergenceError(AllocationError):
    """Iterative solver ran out of steps"""


@dataclass
class AllocationResult:
    """Power vector and the evidence the solver produced for it"""
    rho: RealArray
    strategy: Strategy
    certificate: Dict[str, Any] = field(default_factory=dict)

    @property
    def total_power(self) -> float:
        return float(np.sum(self.rho))


@dataclass
class AllocatorConfig:
    """Solver settings"""
    tolerance: float = 1e-8
    max_iter: int = 200


class PowerAllocator(ABC):
    """Abstract base class for allocation strategies"""

    strategy: Strategy

    def __init__(self, config: Optional[AllocatorConfig] = None):
        self.config = config or AllocatorConfig()

    @abstractmethod
    def solve(self, coeffs: SINRCoefficients, Pmax: float) -> AllocationResult:
        """
        Compute the power vector for one instance
        Must be implemented by each strategy
        """
        pass

    def allocate(self, coeffs: SINRCoefficients, Pmax: float) -> AllocationResult:
        """Validate the instance, solve it and check the power budget"""
        if not Pmax > 0:
            raise AllocationError(f"Pmax must be positive, got {Pmax}")
        try:
            coeffs.check()
        except ValueError as e:
            raise AllocationError(f"{self.strategy.value}: {e}") from e

        result = self.solve(coeffs, Pmax)

        if np.any(result.rho < 0) or result.total_power > Pmax * (1 + POWER_SLACK):
            raise AllocationError(
                f"{self.strategy.value} violated the power budget: "
                f"sum={result.total_power:.6e}, Pmax={Pmax:.6e}"
            )
        logger.debug(f"{self.strategy.value} allocation: {result.certificate}")
        return result
