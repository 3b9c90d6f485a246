"""
Tests for the equal, max-min and max-product power allocators
"""
import numpy as np
import pytest

from src.core.sinr_metrics import SINRCoefficients, sinr
from src.harness.validation import grid_maxmin, grid_maxprod, random_coefficients
from src.power_alloc import (
    ALLOCATORS,
    AllocationError,
    AllocatorConfig,
    ConvergenceError,
    Strategy,
    equal_power,
    get_allocator,
    maxmin_allocation,
    maxprod_allocation,
)
from src.power_alloc.maxmin import budget_bracket, equal_sinr_powers, single_user_bound
from src.power_alloc.maxprod import _objective, newton_direction

PMAX = 39.81


def _symmetric(K=2):
    G = np.full((K, K), 2e-12)
    np.fill_diagonal(G, 5e-11)
    return SINRCoefficients(a=np.full(K, 4e-11), G=G, sigma2=4e-13)


def test_registry_covers_every_strategy():
    assert set(ALLOCATORS) == set(Strategy)
    for strategy in Strategy:
        allocator = get_allocator(strategy.value)
        assert allocator.strategy is strategy


def test_equal_power():
    result = equal_power(10, PMAX)
    np.testing.assert_allclose(result.rho, 3.981)
    assert result.total_power == pytest.approx(PMAX)
    assert equal_power(1, PMAX).rho[0] == PMAX
    with pytest.raises(ValueError):
        equal_power(0, PMAX)


def test_allocate_validates_input():
    allocator = get_allocator("equal")
    bad = SINRCoefficients(a=np.array([1.0, -1.0]), G=np.ones((2, 2)), sigma2=1.0)
    with pytest.raises(AllocationError):
        allocator.allocate(bad, PMAX)
    with pytest.raises(AllocationError):
        allocator.allocate(_symmetric(), 0.0)


def test_maxmin_symmetric_instance():
    result = get_allocator(Strategy.MAXMIN).allocate(_symmetric(), PMAX)
    np.testing.assert_allclose(result.rho, [PMAX / 2, PMAX / 2], rtol=1e-9)
    gamma = sinr(_symmetric(), result.rho)
    assert gamma[0] == pytest.approx(gamma[1], rel=1e-9)


def test_maxmin_single_device():
    coeffs = SINRCoefficients(a=np.array([3e-11]), G=np.array([[4e-11]]), sigma2=4e-13)
    result = maxmin_allocation(coeffs, PMAX)
    assert result.rho[0] == pytest.approx(PMAX)
    expected = PMAX * 3e-11 / (PMAX * 1e-11 + 4e-13)
    assert result.certificate["common_sinr"] == pytest.approx(expected, rel=1e-8)


def test_maxmin_certificate(rng):
    for _ in range(30):
        K = int(rng.integers(2, 11))
        coeffs = random_coefficients(rng, K)
        result = maxmin_allocation(coeffs, PMAX)
        gamma = sinr(coeffs, result.rho)
        assert np.all(result.rho >= 0)
        assert result.total_power == pytest.approx(PMAX, rel=1e-9)
        assert (gamma.max() - gamma.min()) / gamma.min() <= 1e-6
        assert result.certificate["sinr_spread"] <= 1e-6
        # no feasible point reaches above the single-user bound
        assert gamma.min() <= single_user_bound(coeffs, PMAX)


def _quiet_noise(coeffs, snr_drop_db):
    return SINRCoefficients(a=coeffs.a, G=coeffs.G, sigma2=coeffs.sigma2 * 10 ** (-snr_drop_db / 10))


def test_maxmin_certificate_interference_limited(rng):
    # full-power SNRs of roughly 100 to 180 dB put the optimum right next to the pole
    for _ in range(200):
        K = int(rng.integers(2, 11))
        coeffs = _quiet_noise(random_coefficients(rng, K), rng.uniform(50.0, 130.0))
        result = maxmin_allocation(coeffs, PMAX)
        gamma = sinr(coeffs, result.rho)
        assert result.total_power == pytest.approx(PMAX, rel=1e-9)
        assert (gamma.max() - gamma.min()) / gamma.min() <= 1e-6
        assert gamma.min() <= single_user_bound(coeffs, PMAX)


def test_budget_bracket_pulls_upper_end_below_pole(rng):
    coeffs = _quiet_noise(random_coefficients(rng, 3), 100.0)
    t_top = single_user_bound(coeffs, PMAX)
    rho_top = equal_sinr_powers(coeffs, t_top)
    t_lo, rho_lo, t_hi = budget_bracket(coeffs, PMAX, 0.0, np.zeros(3), t_top)
    assert t_hi is not None and t_lo < t_hi <= t_top
    rho_hi = equal_sinr_powers(coeffs, t_hi)
    assert np.all(rho_hi >= 0) and rho_hi.sum() >= PMAX
    if t_lo > 0:
        assert np.all(rho_lo >= 0) and rho_lo.sum() <= PMAX
    if rho_top is not None and np.all(rho_top >= 0) and rho_top.sum() >= PMAX:
        assert t_hi == t_top



def test_maxmin_matches_grid(rng):
    for _ in range(10):
        coeffs = random_coefficients(rng, 2, spread_db=6.0)
        achieved = sinr(coeffs, maxmin_allocation(coeffs, PMAX).rho).min()
        reference = grid_maxmin(coeffs, PMAX)
        assert reference * (1 - 1e-6) <= achieved <= reference * (1 + 1e-3)


def test_maxmin_beats_equal_power_on_the_weakest(rng):
    coeffs = random_coefficients(rng, 6)
    fair = sinr(coeffs, maxmin_allocation(coeffs, PMAX).rho).min()
    even = sinr(coeffs, equal_power(6, PMAX).rho).min()
    assert fair >= even


def test_equal_sinr_powers_solves_target(coeffs):
    t = 0.5 * single_user_bound(coeffs, PMAX) / coeffs.K
    rho = equal_sinr_powers(coeffs, t)
    if rho is not None and np.all(rho > 0):
        np.testing.assert_allclose(sinr(coeffs, rho), t, rtol=1e-8)


def test_maxmin_step_budget(coeffs):
    with pytest.raises(ConvergenceError):
        maxmin_allocation(coeffs, PMAX, tolerance=1e-12, max_steps=3)


def test_maxmin_rejects_zero_gain():
    coeffs = SINRCoefficients(a=np.array([1e-11, 0.0]), G=np.full((2, 2), 1e-11), sigma2=1e-13)
    with pytest.raises(AllocationError):
        maxmin_allocation(coeffs, PMAX)


def test_maxprod_symmetric_is_equal_power():
    result = get_allocator("maxprod").allocate(_symmetric(4), PMAX)
    np.testing.assert_allclose(result.rho, PMAX / 4, rtol=1e-6)
    assert result.certificate["converged"]


def test_maxprod_single_device():
    coeffs = SINRCoefficients(a=np.array([3e-11]), G=np.array([[4e-11]]), sigma2=4e-13)
    assert maxprod_allocation(coeffs, PMAX).rho[0] == pytest.approx(PMAX)


def test_maxprod_dominates_baselines(rng):
    for _ in range(20):
        K = int(rng.integers(2, 11))
        coeffs = random_coefficients(rng, K)
        result = maxprod_allocation(coeffs, PMAX)
        best = np.sum(np.log(sinr(coeffs, result.rho)))
        assert result.total_power == pytest.approx(PMAX, rel=1e-9)
        assert best == pytest.approx(result.certificate["log_product"], rel=1e-9, abs=1e-9)
        for rho in (equal_power(K, PMAX).rho, maxmin_allocation(coeffs, PMAX).rho):
            assert best >= np.sum(np.log(sinr(coeffs, rho))) - 1e-9


def test_maxprod_matches_grid(rng):
    for _ in range(10):
        coeffs = random_coefficients(rng, 2, spread_db=20.0)
        achieved = np.sum(np.log(sinr(coeffs, maxprod_allocation(coeffs, PMAX).rho)))
        reference = grid_maxprod(coeffs, PMAX)
        assert achieved >= reference - 1e-7
        assert achieved - reference <= np.log1p(1e-3)


def test_maxprod_reports_unconverged(coeffs, caplog):
    result = maxprod_allocation(coeffs, PMAX, tolerance=1e-14, max_iter=1)
    assert not result.certificate["converged"]
    assert result.total_power == pytest.approx(PMAX, rel=1e-9)
    assert "max-prod stopped" in caplog.text


@pytest.mark.parametrize("strategy", list(Strategy))
def test_allocation_invariant_to_common_scaling(coeffs, strategy):
    allocator = get_allocator(strategy)
    base = allocator.allocate(coeffs, PMAX).rho
    scaled = allocator.allocate(coeffs.scaled(1e6), PMAX).rho
    np.testing.assert_allclose(scaled, base, rtol=1e-5)


def test_allocator_config_is_passed_through(coeffs):
    allocator = get_allocator("maxmin", AllocatorConfig(tolerance=1e-4, max_iter=50))
    result = allocator.allocate(coeffs, PMAX)
    assert result.certificate["steps"] <= 50


def test_maxprod_converges_in_few_newton_steps(rng, coeffs):
    instances = [coeffs] + [random_coefficients(rng, int(rng.integers(2, 11))) for _ in range(30)]
    for instance in instances:
        result = maxprod_allocation(instance, PMAX)
        assert result.certificate["converged"]
        assert result.certificate["iterations"] <= 50
        assert result.certificate["newton_steps"] >= 1 or result.certificate["iterations"] == 0


def test_maxprod_newton_direction_is_tangent_ascent(coeffs):
    cross = coeffs.G - np.diag(coeffs.a)
    q = np.log(np.linspace(1.0, 2.0, coeffs.K) * PMAX / np.sum(np.linspace(1.0, 2.0, coeffs.K)))
    _, grad = _objective(coeffs, cross, q)
    step = newton_direction(coeffs, cross, q, grad)
    if step is not None:
        rho = np.exp(q)
        assert abs(float(rho @ step)) <= 1e-8 * np.linalg.norm(rho) * np.linalg.norm(step)
        assert float(grad @ step) > 0
