"""
Unit conversions between logarithmic and linear scales
Everything inside the simulator is linear (watts, linear gains); dB and dBm
only appear at the configuration and reporting boundaries
"""
from typing import Union

import numpy as np

from src.core.types import RealArray

ArrayLike = Union[float, RealArray]


def db_to_linear(value_db: ArrayLike) -> ArrayLike:
    """Convert a power ratio in dB to linear scale"""
    return np.power(10.0, np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value: ArrayLike) -> ArrayLike:
    """Convert a linear power ratio to dB"""
    return 10.0 * np.log10(np.asarray(value, dtype=float))


def dbm_to_watts(value_dbm: ArrayLike) -> ArrayLike:
    """Convert a power in dBm to watts"""
    return db_to_linear(value_dbm) / 1000.0


def watts_to_dbm(value_w: ArrayLike) -> ArrayLike:
    """Convert a power in watts to dBm"""
    return linear_to_db(np.asarray(value_w, dtype=float) * 1000.0)
