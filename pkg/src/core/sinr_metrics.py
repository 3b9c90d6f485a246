"""
Hardening-bound SINR, spectral efficiency and the URLLC rate threshold

The SINR of device k only depends on the powers through
    gamma_k = rho_k a_k / (sum_i rho_i G[k, i] - rho_k a_k + sigma^2)
with a_k = |E[w_k^H h_k]|^2 and G[k, i] = E[|w_i^H h_k|^2]. (a, G) are
estimated once per deployment from the channel realizations and reused by
every power allocation strategy.
"""
import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import gammaln

from src.core.channel import ChannelBatch, EstimationModel
from src.core.precoding import PrecoderBatch
from src.core.types import RealArray

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SINRCoefficients:
    """Sufficient statistic of the hardening-bound SINR"""
    a: RealArray       # (K,) signal gains
    G: RealArray       # (K, K) second moments, G[k, i] = E|w_i^H h_k|^2
    sigma2: float

    @property
    def K(self) -> int:
        return int(self.a.shape[0])

    def check(self):
        """Raise ValueError if the coefficients cannot describe a valid SINR"""
        if self.G.shape != (self.K, self.K):
            raise ValueError(f"G has shape {self.G.shape}, expected {(self.K, self.K)}")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.G))):
            raise ValueError("SINR coefficients contain non-finite values")
        if np.any(self.a <= 0):
            raise ValueError(f"Signal gains must be positive, got min {self.a.min():.3e}")
        if np.any(self.G < 0):
            raise ValueError("Second moments must be non-negative")
        if not self.sigma2 > 0:
            raise ValueError(f"Noise power must be positive, got {self.sigma2}")

    def scaled(self, factor: float) -> "SINRCoefficients":
        """Same SINR map with (a, G, sigma^2) multiplied by a common factor"""
        return SINRCoefficients(a=self.a * factor, G=self.G * factor, sigma2=self.sigma2 * factor)


@dataclass(frozen=True)
class RateModel:
    """Coherence-block and packet parameters entering SE and the threshold"""
    tau: int
    tau_p: int
    B: float
    Bc: float
    b: int

    def __post_init__(self):
        if not 0 <= self.tau_p < self.tau:
            raise ValueError(f"Need 0 <= tau_p < tau, got tau_p={self.tau_p}, tau={self.tau}")

    @property
    def prelog(self) -> float:
        """Fraction of the coherence block left for downlink data"""
        return (self.tau - self.tau_p) / self.tau

    @classmethod
    def from_config(cls, cfg) -> "RateModel":
        return cls(tau=cfg.tau, tau_p=cfg.tau_p, B=cfg.B, Bc=cfg.Bc, b=cfg.b)


class CoefficientAccumulator:
    """
    Streaming estimator of (a, G) over chunks of channel realizations.
    Sums are kept in extended precision and added in arrival order, so a
    fixed chunking gives bit-identical results.
    """

    def __init__(self, K: int):
        self.K = K
        self.n = 0
        self._gain_sum = np.zeros(K, dtype=np.clongdouble)
        self._power_sum = np.zeros((K, K), dtype=np.longdouble)

    def update(self, ch: ChannelBatch, pr: PrecoderBatch):
        """Add the realizations of one channel/precoder batch"""
        if ch.h.shape != pr.w.shape:
            raise ValueError(f"Channel batch {ch.h.shape} and precoders {pr.w.shape} differ")
        # inner[n, k, i] = w_i^H h_k
        inner = np.einsum("nim,nkm->nki", pr.w.conj(), ch.h)
        idx = np.arange(self.K)
        self._gain_sum += inner[:, idx, idx].astype(np.clongdouble).sum(axis=0)
        power = inner.real**2 + inner.imag**2
        self._power_sum += power.astype(np.longdouble).sum(axis=0)
        self.n += inner.shape[0]

    def finalize(self, sigma2: float) -> SINRCoefficients:
        """Sample means as SINR coefficients"""
        if self.n == 0:
            raise ValueError("No realizations accumulated")
        mean_gain = self._gain_sum / self.n
        a = (mean_gain.real**2 + mean_gain.imag**2).astype(np.float64)
        G = (self._power_sum / self.n).astype(np.float64)
        return SINRCoefficients(a=a, G=G, sigma2=float(sigma2))


def estimate_coefficients(ch: ChannelBatch, pr: PrecoderBatch, sigma2: float) -> SINRCoefficients:
    """Monte-Carlo (a, G) from one batch of realizations"""
    acc = CoefficientAccumulator(ch.h.shape[1])
    acc.update(ch, pr)
    return acc.finalize(sigma2)


def mr_closed_form_coefficients(model: EstimationModel, M: int, sigma2: float) -> SINRCoefficients:
    """
    Exact (a, G) for MR with i.i.d. Rayleigh fading and orthogonal pilots:
    a_k = phi_k (Gamma(M+1/2)/Gamma(M))^2, G[k, i] = beta_k for i != k and
    G[k, k] = phi_k M + c_k
    """
    K = model.beta.shape[0]
    ratio = math.exp(2.0 * (gammaln(M + 0.5) - gammaln(M)))
    a = model.phi * ratio
    G = np.repeat(model.beta[:, None], K, axis=1).astype(float)
    G[np.arange(K), np.arange(K)] = model.phi * M + model.c
    return SINRCoefficients(a=a, G=G, sigma2=float(sigma2))


def sinr(coeffs: SINRCoefficients, rho: Union[RealArray, list]) -> RealArray:
    """Hardening-bound SINR of every device for power vector rho"""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("Powers must be non-negative")
    signal = rho * coeffs.a
    denominator = coeffs.G @ rho - signal + coeffs.sigma2
    return signal / denominator


def spectral_efficiency(gamma: RealArray, rm: RateModel) -> RealArray:
    """SE_k = ((tau - tau_p)/tau) log2(1 + gamma_k) in bit/s/Hz"""
    gamma = np.asarray(gamma, dtype=float)
    return rm.prelog * np.log2(1.0 + gamma)


def achievable_rate(gamma: RealArray, rm: RateModel) -> RealArray:
    """R_k = B * SE_k in bit/s"""
    return rm.B * spectral_efficiency(gamma, rm)


def rate_threshold(rm: RateModel) -> float:
    """Rate needed to deliver b bits in the data part of one block: Bc b/(tau - tau_p)"""
    return rm.Bc * rm.b / (rm.tau - rm.tau_p)


def sinr_threshold(rm: RateModel) -> float:
    """SINR below which R_k < R_T, i.e. the device is in outage"""
    exponent = rate_threshold(rm) * rm.tau / (rm.B * (rm.tau - rm.tau_p))
    return float(np.expm1(exponent * math.log(2.0)))
