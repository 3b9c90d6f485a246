"""
Unit-norm MR and MMSE precoders built from channel estimates

MMSE uses the regularized Gram matrix sum_i h_i h_i^H + (sum_i c_i + sigma^2/p) I_M.
Two equivalent solves are available:
  - "cholesky": assemble the M x M Hermitian matrix per realization and
    solve with a Cholesky factorization (K right-hand sides)
  - "woodbury": (X X^H + lam I_M)^-1 X = X (X^H X + lam I_K)^-1, a batched
    K x K solve; much cheaper when M >> K
"""
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from src.core.channel import EstimateBatch
from src.core.config import SystemConfig
from src.core.types import ComplexArray

logger = logging.getLogger(__name__)


class Precoder(str, Enum):
    MR = "mr"
    MMSE = "mmse"


class PrecodingError(RuntimeError):
    """A realization could not be precoded"""

    def __init__(self, message: str, realization: int):
        super().__init__(f"{message} (realization {realization})")
        self.realization = realization


@dataclass(frozen=True)
class PrecoderBatch:
    """Unit-norm precoders w, shape (n_channel, K, M)"""
    w: ComplexArray
    scheme: Precoder


def _normalize(v: ComplexArray) -> ComplexArray:
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    bad = np.argwhere(~(norms[..., 0] > 0))
    if bad.size:
        n, k = (int(x) for x in bad[0])
        raise PrecodingError(f"Zero-norm precoder direction for device {k}", n)
    return v / norms


def mr_precoder(est: EstimateBatch) -> PrecoderBatch:
    """Maximum ratio: w_k = h_hat_k / ||h_hat_k||"""
    return PrecoderBatch(w=_normalize(est.h_hat), scheme=Precoder.MR)


def mmse_regularizer(est: EstimateBatch, sigma2: float, p: float) -> float:
    """Scaled-identity regularizer sum_i c_i + sigma^2/p"""
    return float(np.sum(est.model.c) + sigma2 / p)


def _solve_cholesky(h_hat: ComplexArray, lam: float) -> ComplexArray:
    n, K, M = h_hat.shape
    v = np.empty_like(h_hat)
    identity = np.eye(M)
    for idx in range(n):
        X = h_hat[idx].T  # (M, K), columns are estimates
        gram = X @ X.conj().T + lam * identity
        try:
            factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
            v[idx] = scipy.linalg.cho_solve(factor, X, check_finite=False).T
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as e:
            raise PrecodingError(f"Hermitian solve failed: {e}", idx) from e
    return v


def _solve_woodbury(h_hat: ComplexArray, lam: float) -> ComplexArray:
    K = h_hat.shape[1]
    # gram[n, k, i] = h_hat_k^H h_hat_i
    gram = np.einsum("nkm,nim->nki", h_hat.conj(), h_hat) + lam * np.eye(K)
    try:
        # V^H = (X^H X + lam I)^-1 X^H, rows of X^H are conj(h_hat_k)
        v_h = np.linalg.solve(gram, h_hat.conj())
    except np.linalg.LinAlgError as e:
        bad = int(np.argmax(~np.all(np.isfinite(gram), axis=(1, 2))))
        raise PrecodingError(f"Hermitian solve failed: {e}", bad) from e
    return v_h.conj()


def mmse_precoder(est: EstimateBatch, sigma2: float, p: float,
                  solver: str = "woodbury") -> PrecoderBatch:
    """MMSE precoders, normalized after the solve"""
    lam = mmse_regularizer(est, sigma2, p)
    if not lam > 0:
        raise ValueError(f"MMSE regularizer must be positive, got {lam}")

    if solver == "cholesky":
        v = _solve_cholesky(est.h_hat, lam)
    elif solver == "woodbury":
        v = _solve_woodbury(est.h_hat, lam)
    else:
        raise ValueError(f"Unknown MMSE solver: {solver}")

    return PrecoderBatch(w=_normalize(v), scheme=Precoder.MMSE)


def build_precoders(scheme: Precoder, est: EstimateBatch, cfg: SystemConfig) -> PrecoderBatch:
    """Dispatch on the precoding scheme"""
    scheme = Precoder(scheme)
    if scheme is Precoder.MR:
        return mr_precoder(est)
    return mmse_precoder(est, cfg.sigma2, cfg.p, solver=cfg.mmse_solver)
