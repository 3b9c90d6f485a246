"""
Oracle checks behind `urllc-mimo-sim validate`
Each check compares an implementation against an independent reference
(closed forms, brute-force grids, hand-derived thresholds) or a structural
invariant, and reports pass/fail with a short detail line
"""
import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from src.core.channel import EstimationModel, draw_channels, estimate_channels, estimation_model
from src.core.config import SystemConfig
from src.core.precoding import Precoder, build_precoders, mr_precoder
from src.core.scenario import generate_deployment
from src.core.sinr_metrics import (
    CoefficientAccumulator,
    SINRCoefficients,
    estimate_coefficients,
    mr_closed_form_coefficients,
    rate_threshold,
    sinr,
    sinr_threshold,
)
from src.core.types import RealArray
from src.harness.simulation import run_cell
from src.power_alloc import equal_power, maxmin_allocation, maxprod_allocation
from src.utils.seeding import derive_seed, deployment_rng

logger = logging.getLogger(__name__)

VALIDATION_SEED = 20_190_601
GRID_POINTS = 10_000
GRID_TOLERANCE = 1e-3
EQUAL_SINR_TOLERANCE = 1e-6
BUDGET_TOLERANCE = 1e-6


class ValidationFailure(AssertionError):
    """An oracle disagreed with the implementation"""


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def random_coefficients(rng: np.random.Generator, K: int, spread_db: float = 30.0,
                        cfg: Optional[SystemConfig] = None) -> SINRCoefficients:
    """
    Random but physically plausible (a, G): MR closed forms for random gains
    with the cross terms perturbed, so G is no longer column-constant
    """
    cfg = cfg or SystemConfig()
    beta = 10.0 ** (rng.uniform(-105.0 - spread_db, -105.0, K) / 10.0)
    pilot_noise = cfg.sigma2 / (cfg.tau_p * cfg.p)
    phi = beta**2 / (beta + pilot_noise)
    model = EstimationModel(beta=beta, phi=phi, c=beta - phi, tau_p=cfg.tau_p,
                            pilot_noise=pilot_noise)
    M = int(rng.integers(16, 129))
    base = mr_closed_form_coefficients(model, M, cfg.sigma2)
    G = base.G * rng.uniform(0.2, 1.5, (K, K))
    G[np.arange(K), np.arange(K)] = base.G.diagonal()
    return SINRCoefficients(a=base.a, G=G, sigma2=base.sigma2)


def _two_device_grid(coeffs: SINRCoefficients, Pmax: float) -> RealArray:
    """SINRs on the full-budget segment rho_1 + rho_2 = Pmax, shape (GRID_POINTS, 2)"""
    rho1 = np.linspace(0.0, Pmax, GRID_POINTS)
    rho = np.stack([rho1, Pmax - rho1], axis=1)
    signal = rho * coeffs.a
    return signal / (rho @ coeffs.G.T - signal + coeffs.sigma2)


def grid_maxmin(coeffs: SINRCoefficients, Pmax: float) -> float:
    """Best min-SINR over the grid"""
    return float(_two_device_grid(coeffs, Pmax).min(axis=1).max())


def grid_maxprod(coeffs: SINRCoefficients, Pmax: float) -> float:
    """Best log product of SINRs over the grid"""
    with np.errstate(divide="ignore"):
        return float(np.log(_two_device_grid(coeffs, Pmax)).sum(axis=1).max())


def _log_product(coeffs: SINRCoefficients, rho: RealArray) -> float:
    return float(np.sum(np.log(sinr(coeffs, rho))))


def _require(condition: bool, message: str):
    if not condition:
        raise ValidationFailure(message)


def check_thresholds(quick: bool) -> str:
    """Rate and SINR thresholds for K=10, f=1 at the default scenario"""
    rm = SystemConfig(K=10, f=1).rate_model
    r_t = rate_threshold(rm)
    g_th = sinr_threshold(rm)
    # b bits in tau - tau_p data symbols of a Bc-wide block, inverted through log2(1 + gamma)
    hand_r_t = 100e3 * 256 / 90
    hand_g_th = 2.0 ** (hand_r_t * 100 / (20e6 * 90)) - 1.0
    _require(math.isclose(r_t, 284_444.4, rel_tol=1e-6), f"R_T = {r_t}")
    _require(math.isclose(g_th, hand_g_th, rel_tol=1e-9), f"gamma_th = {g_th} vs {hand_g_th}")
    _require(math.isclose(g_th, 0.01101, rel_tol=1e-3), f"gamma_th = {g_th}")
    return f"R_T = {r_t:.1f} bit/s, gamma_th = {g_th:.6g}"


def check_mr_closed_form(quick: bool) -> str:
    """Monte-Carlo MR coefficients against the i.i.d. Rayleigh closed forms"""
    cfg = SystemConfig(M=100, K=4, f=1, seed=VALIDATION_SEED)
    n_total, tolerance = (20_000, 0.05) if quick else (100_000, 0.01)
    chunk = 2_000

    rng = deployment_rng(cfg.seed, cfg.K, cfg.f, 0)
    dep = generate_deployment(cfg, rng)
    model = estimation_model(dep, cfg)
    acc = CoefficientAccumulator(cfg.K)
    for _ in range(n_total // chunk):
        batch = draw_channels(dep, cfg, rng, n_channel=chunk)
        acc.update(batch, mr_precoder(estimate_channels(batch, model, rng)))
    mc = acc.finalize(cfg.sigma2)
    exact = mr_closed_form_coefficients(model, cfg.M, cfg.sigma2)

    err_a = float(np.max(np.abs(mc.a / exact.a - 1.0)))
    err_G = float(np.max(np.abs(mc.G / exact.G - 1.0)))
    _require(max(err_a, err_G) <= tolerance,
             f"relative error a {err_a:.3e}, G {err_G:.3e} above {tolerance:.0%}")
    return f"{acc.n} realizations: max rel. error a {err_a:.2e}, G {err_G:.2e}"


def check_maxmin(quick: bool) -> str:
    """Equal-SINR certificate, full budget and the two-device grid oracle"""
    rng = np.random.default_rng(derive_seed(VALIDATION_SEED, "maxmin"))
    Pmax = SystemConfig().Pmax
    n = 20 if quick else 100
    worst_spread = worst_budget = worst_grid = 0.0

    for i in range(n):
        K = int(rng.integers(2, 11))
        coeffs = random_coefficients(rng, K)
        result = maxmin_allocation(coeffs, Pmax)
        gamma = sinr(coeffs, result.rho)
        spread = float((gamma.max() - gamma.min()) / gamma.min())
        budget = abs(result.total_power - Pmax) / Pmax
        _require(spread <= EQUAL_SINR_TOLERANCE, f"instance {i} (K={K}): SINR spread {spread:.2e}")
        _require(budget <= BUDGET_TOLERANCE, f"instance {i} (K={K}): budget error {budget:.2e}")
        worst_spread, worst_budget = max(worst_spread, spread), max(worst_budget, budget)

    for i in range(n):
        coeffs = random_coefficients(rng, 2, spread_db=6.0)
        achieved = float(sinr(coeffs, maxmin_allocation(coeffs, Pmax).rho).min())
        reference = grid_maxmin(coeffs, Pmax)
        gap = (achieved - reference) / reference
        _require(-1e-6 <= gap <= GRID_TOLERANCE, f"K=2 instance {i}: grid gap {gap:.2e}")
        worst_grid = max(worst_grid, gap)

    return (f"{n} instances: spread {worst_spread:.1e}, budget {worst_budget:.1e}, "
            f"grid gap {worst_grid:.1e}")


def check_maxprod(quick: bool) -> str:
    """Max-prod beats equal power and max-min, and matches the two-device grid"""
    rng = np.random.default_rng(derive_seed(VALIDATION_SEED, "maxprod"))
    Pmax = SystemConfig().Pmax
    n = 20 if quick else 100
    worst_grid = 0.0

    for i in range(n):
        K = int(rng.integers(2, 11))
        coeffs = random_coefficients(rng, K)
        best = _log_product(coeffs, maxprod_allocation(coeffs, Pmax).rho)
        for label, rho in (("equal", equal_power(K, Pmax).rho),
                           ("maxmin", maxmin_allocation(coeffs, Pmax).rho)):
            other = _log_product(coeffs, rho)
            _require(best >= other - 1e-9 * max(1.0, abs(other)),
                     f"instance {i} (K={K}): product below {label} ({best:.9g} < {other:.9g})")

    for i in range(n):
        coeffs = random_coefficients(rng, 2, spread_db=20.0)
        achieved = _log_product(coeffs, maxprod_allocation(coeffs, Pmax).rho)
        reference = grid_maxprod(coeffs, Pmax)
        # relative gap of the product itself
        gap = math.expm1(achieved - reference)
        _require(-1e-7 <= gap <= GRID_TOLERANCE, f"K=2 instance {i}: grid gap {gap:.2e}")
        worst_grid = max(worst_grid, gap)

    return f"{n} instances: grid gap {worst_grid:.1e}"


def check_invariants(quick: bool) -> str:
    """Structural properties on randomized deployments and coefficients"""
    n = 100 if quick else 1_000
    rng = np.random.default_rng(derive_seed(VALIDATION_SEED, "invariants"))
    Pmax = SystemConfig().Pmax

    for i in range(n):
        K = int(rng.integers(2, 9))
        cfg = SystemConfig(M=int(rng.integers(K, 33)), K=K, f=int(rng.integers(1, 3)),
                           n_channel=8, seed=VALIDATION_SEED)
        dep_rng = deployment_rng(cfg.seed, K, cfg.f, i)
        dep = generate_deployment(cfg, dep_rng)
        model = estimation_model(dep, cfg)
        _require(np.allclose(model.phi + model.c, model.beta, rtol=1e-12, atol=0.0),
                 f"deployment {i}: phi + c != beta")

        batch = draw_channels(dep, cfg, dep_rng)
        est = estimate_channels(batch, model, dep_rng)
        for scheme in Precoder:
            pr = build_precoders(scheme, est, cfg)
            norms = np.linalg.norm(pr.w, axis=-1)
            _require(np.allclose(norms, 1.0, atol=1e-10), f"deployment {i}: {scheme.value} not unit-norm")
            coeffs = estimate_coefficients(batch, pr, cfg.sigma2)
            _require(np.all(coeffs.a <= coeffs.G.diagonal() * (1 + 1e-12)),
                     f"deployment {i}: {scheme.value} violates a_k <= G_kk")

        coeffs = random_coefficients(rng, K)
        rho = rng.uniform(0.0, Pmax / K, K)
        _require(np.all(sinr(coeffs, 2.0 * rho) >= sinr(coeffs, rho) * (1 - 1e-12)),
                 f"instance {i}: SINR decreased under uniform power scaling")
        factor = 10.0 ** rng.uniform(-6, 6)
        for allocate in (maxmin_allocation, maxprod_allocation):
            base = allocate(coeffs, Pmax).rho
            scaled = allocate(coeffs.scaled(factor), Pmax).rho
            _require(np.allclose(base, scaled, rtol=1e-5, atol=1e-9 * Pmax),
                     f"instance {i}: {allocate.__name__} changed under coefficient scaling")

    cfg = SystemConfig(M=16, K=6, f=1, n_deployments=50, n_channel=20, seed=VALIDATION_SEED)
    for scheme in Precoder:
        report = run_cell(cfg, scheme, "equal")
        _require(report.system_outage >= report.device_outage,
                 f"{scheme.value}: system outage below device outage")
    return f"{n} randomized instances"


CHECKS: List[Tuple[str, Callable[[bool], str]]] = [
    ("threshold arithmetic", check_thresholds),
    ("MR closed form", check_mr_closed_form),
    ("max-min certificate", check_maxmin),
    ("max-prod certificate", check_maxprod),
    ("invariants", check_invariants),
]


def run_validation(quick: bool = False) -> List[CheckResult]:
    """Run every oracle check; failures are reported, not raised"""
    results = []
    for name, check in CHECKS:
        start = time.perf_counter()
        try:
            detail = check(quick)
            passed = True
        except ValidationFailure as e:
            detail, passed = str(e), False
        except Exception as e:
            logger.exception(f"Check '{name}' crashed")
            detail, passed = f"{type(e).__name__}: {e}", False
        elapsed = time.perf_counter() - start
        level = logging.INFO if passed else logging.ERROR
        logger.log(level, f"{name}: {'PASS' if passed else 'FAIL'} ({elapsed:.1f}s) {detail}")
        results.append(CheckResult(name=name, passed=passed, detail=detail, seconds=elapsed))
    return results
