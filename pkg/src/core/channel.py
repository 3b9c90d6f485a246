"""
Small-scale fading and MMSE channel estimation

Pilots are orthogonal (tau_p = f*K >= K), so after de-spreading device k sees
only its own channel plus noise of variance sigma^2/(tau_p p) per antenna.
Estimates are drawn from that equivalent observation; pilot matrices are never
built.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.core.config import SystemConfig
from src.core.scenario import Deployment
from src.core.types import ComplexArray, RealArray

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChannelBatch:
    """True channels h, shape (n_channel, K, M)"""
    h: ComplexArray
    deployment: Deployment

    @property
    def n_channel(self) -> int:
        return int(self.h.shape[0])


@dataclass(frozen=True)
class EstimationModel:
    """Per-device MMSE estimate and error variances"""
    beta: RealArray
    phi: RealArray          # estimate variance per antenna element
    c: RealArray            # error variance per antenna element
    tau_p: int
    pilot_noise: float      # sigma^2 / (tau_p p)

    @property
    def scale(self) -> RealArray:
        """MMSE scaling beta/(beta + sigma^2/(tau_p p))"""
        return self.beta / (self.beta + self.pilot_noise)


@dataclass(frozen=True)
class EstimateBatch:
    """Channel estimates h_hat, shape (n_channel, K, M)"""
    h_hat: ComplexArray
    model: EstimationModel


def complex_normal(rng: np.random.Generator, shape, variance=1.0) -> ComplexArray:
    """Circularly symmetric complex Gaussian samples with the given variance"""
    std = np.sqrt(np.asarray(variance, dtype=float) / 2.0)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * std


def draw_channels(dep: Deployment, cfg: SystemConfig, rng: np.random.Generator,
                  n_channel: Optional[int] = None) -> ChannelBatch:
    """Draw n_channel i.i.d. Rayleigh realizations, h_k ~ CN(0, beta_k I_M)"""
    if np.any(dep.beta <= 0) or not np.all(np.isfinite(dep.beta)):
        raise ValueError("Large-scale gains must be finite and strictly positive")
    n = cfg.n_channel if n_channel is None else n_channel
    h = complex_normal(rng, (n, dep.K, cfg.M), dep.beta[None, :, None])
    return ChannelBatch(h=h, deployment=dep)


def estimation_model(dep: Deployment, cfg: SystemConfig) -> EstimationModel:
    """Closed-form MMSE statistics for orthogonal pilots of length tau_p"""
    if cfg.tau_p < dep.K:
        raise ValueError(f"tau_p={cfg.tau_p} < K={dep.K}: orthogonal pilots do not exist")
    pilot_noise = cfg.sigma2 / (cfg.tau_p * cfg.p)
    beta = dep.beta
    phi = beta**2 / (beta + pilot_noise)
    c = beta - phi
    return EstimationModel(beta=beta, phi=phi, c=c, tau_p=cfg.tau_p, pilot_noise=pilot_noise)


def estimate_channels(batch: ChannelBatch, model: EstimationModel,
                      rng: np.random.Generator) -> EstimateBatch:
    """MMSE estimates h_hat = scale * (h + e), e ~ CN(0, sigma^2/(tau_p p) I)"""
    shape = batch.h.shape
    if model.pilot_noise > 0:
        noise = complex_normal(rng, shape, model.pilot_noise)
        observation = batch.h + noise
    else:
        observation = batch.h
    h_hat = model.scale[None, :, None] * observation
    return EstimateBatch(h_hat=h_hat, model=model)
