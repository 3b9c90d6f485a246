"""
Scenario: noise power, large-scale fading and device deployments
Single square cell with the BS at its center, devices dropped uniformly
"""
import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from src.core.config import SystemConfig
from src.core.types import RealArray
from src.utils.seeding import array_digest
from src.utils.units import db_to_linear, dbm_to_watts

logger = logging.getLogger(__name__)

# Thermal noise density at room temperature
THERMAL_NOISE_DBM_PER_HZ = -174.0

# Rejection sampling should accept almost immediately; this only guards bad configs
MAX_RESAMPLE_ROUNDS = 10_000


@dataclass(frozen=True)
class Deployment:
    """One drop of K devices around the BS"""
    positions: RealArray  # (K, 2) meters, BS at the origin
    d: RealArray          # (K,) meters
    F: RealArray          # (K,) shadow fading in dB
    beta: RealArray       # (K,) linear large-scale gain

    @property
    def K(self) -> int:
        return int(self.beta.shape[0])

    def digest(self) -> str:
        """Fingerprint of positions and shadowing, equal for paired deployments"""
        return array_digest(self.positions, self.F)


def noise_power(B: float, NF: float) -> float:
    """Receiver noise power in watts: -174 dBm/Hz + 10log10(B) + NF"""
    if B <= 0:
        raise ValueError(f"Bandwidth must be positive, got {B}")
    return float(dbm_to_watts(THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(B) + NF))


def large_scale_gain_db(d: Union[float, RealArray], F: Union[float, RealArray],
                        cfg: SystemConfig) -> Union[float, RealArray]:
    """Pathloss plus shadowing in dB, referenced to the median gain at 1 km"""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("Distances must be strictly positive")
    return cfg.Upsilon - 10.0 * cfg.alpha * np.log10(d / 1000.0) + np.asarray(F, dtype=float)


def large_scale_gain(d: Union[float, RealArray], F: Union[float, RealArray],
                     cfg: SystemConfig) -> Union[float, RealArray]:
    """Linear large-scale fading coefficient beta"""
    return db_to_linear(large_scale_gain_db(d, F, cfg))


def _draw_positions(cfg: SystemConfig, rng: np.random.Generator) -> RealArray:
    half = cfg.cell_side / 2.0
    positions = np.asarray(rng.uniform(-half, half, size=(cfg.K, 2)), dtype=float)

    # Resample only the devices that fell inside the exclusion radius
    for _ in range(MAX_RESAMPLE_ROUNDS):
        too_close = np.hypot(positions[:, 0], positions[:, 1]) < cfg.d_min
        if not np.any(too_close):
            return positions
        n = int(np.count_nonzero(too_close))
        positions[too_close] = rng.uniform(-half, half, size=(n, 2))

    raise RuntimeError(f"Could not place devices outside d_min={cfg.d_min} m")


def generate_deployment(cfg: SystemConfig, rng: np.random.Generator) -> Deployment:
    """Drop K devices uniformly in the square cell and draw their shadowing"""
    positions = _draw_positions(cfg, rng)
    d = np.hypot(positions[:, 0], positions[:, 1])
    F = np.asarray(rng.normal(0.0, cfg.sigma_sf, size=cfg.K), dtype=float)
    beta = np.asarray(large_scale_gain(d, F, cfg), dtype=float)
    return Deployment(positions=positions, d=d, F=F, beta=beta)
