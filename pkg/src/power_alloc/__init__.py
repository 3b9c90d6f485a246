"""
Power allocation strategies
"""
from typing import Dict, Optional, Type

from .base import (
    AllocationError,
    AllocationResult,
    AllocatorConfig,
    ConvergenceError,
    PowerAllocator,
    Strategy,
)
from .equal import EqualPowerAllocator, equal_power
from .maxmin import MaxMinAllocator, maxmin_allocation
from .maxprod import MaxProdAllocator, maxprod_allocation

ALLOCATORS: Dict[Strategy, Type[PowerAllocator]] = {
    Strategy.EQUAL: EqualPowerAllocator,
    Strategy.MAXMIN: MaxMinAllocator,
    Strategy.MAXPROD: MaxProdAllocator,
}


def get_allocator(strategy, config: Optional[AllocatorConfig] = None) -> PowerAllocator:
    """Instantiate the allocator registered for a strategy name"""
    return ALLOCATORS[Strategy(strategy)](config)


__all__ = [
    'ALLOCATORS',
    'AllocationError',
    'AllocationResult',
    'AllocatorConfig',
    'ConvergenceError',
    'EqualPowerAllocator',
    'MaxMinAllocator',
    'MaxProdAllocator',
    'PowerAllocator',
    'Strategy',
    'equal_power',
    'get_allocator',
    'maxmin_allocation',
    'maxprod_allocation',
]
