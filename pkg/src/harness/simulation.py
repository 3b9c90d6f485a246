"""
Monte-Carlo driver
Runs deployments for each (K, f) sweep cell, applies every precoder and power
allocation strategy to the same deployment draw, and aggregates the outcomes
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

from src.core.channel import draw_channels, estimate_channels, estimation_model
from src.core.config import ConfigError, SweepAxes, SystemConfig
from src.core.precoding import Precoder, build_precoders
from src.core.scenario import generate_deployment
from src.core.sinr_metrics import (
    estimate_coefficients,
    sinr,
    sinr_threshold,
    spectral_efficiency,
)
from src.core.types import RealArray
from src.harness.reporting import OutageAccumulator, OutageReport
from src.harness.result_cache import ResultCache, cell_key
from src.power_alloc import Strategy, get_allocator
from src.utils.seeding import derive_seed, deployment_rng

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[int, int], None]
Combo = Tuple[Precoder, Strategy]

DEFAULT_K_VALUES = list(range(2, 11))
DEFAULT_F_VALUES = [1, 2]


class SimulationError(RuntimeError):
    """A deployment could not be simulated"""

    def __init__(self, message: str, K: Optional[int] = None, f: Optional[int] = None,
                 index: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.K = K
        self.f = f
        self.index = index

    def __reduce__(self):
        return type(self), (self.message, self.K, self.f, self.index)

    def __str__(self) -> str:
        return f"K={self.K} f={self.f} deployment {self.index}: {self.message}"


@dataclass
class DeploymentOutcome:
    """Post-allocation SINRs and SEs of one deployment for one (precoder, strategy)"""
    index: int
    digest: str
    gamma: RealArray
    se: RealArray


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian sweep over K, f, precoders and strategies on a base scenario"""
    base: SystemConfig
    K_values: Tuple[int, ...] = tuple(DEFAULT_K_VALUES)
    f_values: Tuple[int, ...] = tuple(DEFAULT_F_VALUES)
    precoders: Tuple[Precoder, ...] = (Precoder.MR, Precoder.MMSE)
    strategies: Tuple[Strategy, ...] = (Strategy.EQUAL, Strategy.MAXMIN, Strategy.MAXPROD)

    def __post_init__(self):
        object.__setattr__(self, "K_values", tuple(int(k) for k in self.K_values))
        object.__setattr__(self, "f_values", tuple(int(f) for f in self.f_values))
        try:
            object.__setattr__(self, "precoders", tuple(Precoder(p) for p in self.precoders))
            object.__setattr__(self, "strategies", tuple(Strategy(s) for s in self.strategies))
        except ValueError as e:
            raise ConfigError(str(e)) from e
        for name in ("K_values", "f_values", "precoders", "strategies"):
            if not getattr(self, name):
                raise ConfigError(f"Sweep axis {name} is empty")
        for K, f in self.cells():
            if K < 1 or f < 1:
                raise ConfigError(f"Sweep cell K={K} f={f} must have positive K and f")
            if f * K >= self.base.tau:
                raise ConfigError(
                    f"Sweep cell K={K} f={f} needs tau_p={f * K} pilots, "
                    f"but the coherence block is tau={self.base.tau}"
                )

    @classmethod
    def from_axes(cls, base: SystemConfig, axes: SweepAxes) -> "SweepSpec":
        """Fill unset axes with the default sweep"""
        kwargs = {}
        if axes.K_values:
            kwargs["K_values"] = tuple(axes.K_values)
        if axes.f_values:
            kwargs["f_values"] = tuple(axes.f_values)
        if axes.precoders:
            kwargs["precoders"] = tuple(axes.precoders)
        if axes.strategies:
            kwargs["strategies"] = tuple(axes.strategies)
        return cls(base=base, **kwargs)

    def cells(self) -> Iterator[Tuple[int, int]]:
        return product(self.K_values, self.f_values)

    def to_dict(self) -> Dict[str, List]:
        return {
            "K_values": list(self.K_values),
            "f_values": list(self.f_values),
            "precoders": [p.value for p in self.precoders],
            "strategies": [s.value for s in self.strategies],
        }


@dataclass
class CellFailure:
    """A sweep cell that was skipped"""
    K: int
    f: int
    deployment_index: Optional[int]
    message: str

    def to_dict(self) -> Dict:
        return {"K": self.K, "f": self.f, "deployment_index": self.deployment_index,
                "message": self.message}


@dataclass
class SweepResult:
    """Reports of a sweep, in sweep order, plus the cells that failed"""
    reports: List[OutageReport] = field(default_factory=list)
    failures: List[CellFailure] = field(default_factory=list)

    def __iter__(self) -> Iterator[OutageReport]:
        return iter(self.reports)

    def __len__(self) -> int:
        return len(self.reports)

    def get(self, K: int, f: int, precoder, strategy) -> Optional[OutageReport]:
        wanted = (K, f, Precoder(precoder).value, Strategy(strategy).value)
        for report in self.reports:
            if report.cell == wanted:
                return report
        return None


def simulate_deployment(cfg: SystemConfig, index: int, precoders: Sequence[Precoder],
                        strategies: Sequence[Strategy]) -> Dict[Combo, DeploymentOutcome]:
    """
    Simulate deployment `index` of cell (cfg.K, cfg.f) under every precoder and
    strategy. The RNG stream only depends on (seed, K, f, index).
    """
    rng = deployment_rng(cfg.seed, cfg.K, cfg.f, index)
    try:
        dep = generate_deployment(cfg, rng)
        batch = draw_channels(dep, cfg, rng)
        model = estimation_model(dep, cfg)
        est = estimate_channels(batch, model, rng)
        digest = dep.digest()
        rm = cfg.rate_model

        outcomes: Dict[Combo, DeploymentOutcome] = {}
        for scheme in precoders:
            coeffs = estimate_coefficients(batch, build_precoders(scheme, est, cfg), cfg.sigma2)
            for strategy in strategies:
                result = get_allocator(strategy).allocate(coeffs, cfg.Pmax)
                gamma = sinr(coeffs, result.rho)
                outcomes[(Precoder(scheme), Strategy(strategy))] = DeploymentOutcome(
                    index=index,
                    digest=digest,
                    gamma=gamma,
                    se=spectral_efficiency(gamma, rm),
                )
        return outcomes
    # PrecodingError and AllocationError are RuntimeErrors, LinAlgError is a ValueError
    except (RuntimeError, ValueError) as e:
        raise SimulationError(f"{type(e).__name__}: {e}", cfg.K, cfg.f, index) from e


def _simulate_task(task: Tuple[SystemConfig, Tuple[Precoder, ...], Tuple[Strategy, ...], int]
                   ) -> Dict[Combo, DeploymentOutcome]:
    cfg, precoders, strategies, index = task
    return simulate_deployment(cfg, index, precoders, strategies)


def _iter_deployments(cfg: SystemConfig, precoders: Sequence[Precoder],
                      strategies: Sequence[Strategy], workers: int
                      ) -> Iterator[Dict[Combo, DeploymentOutcome]]:
    """Outcomes in deployment-index order, whatever the worker count"""
    tasks = ((cfg, tuple(precoders), tuple(strategies), i) for i in range(cfg.n_deployments))
    if workers <= 1:
        yield from map(_simulate_task, tasks)
        return
    chunksize = max(1, cfg.n_deployments // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as executor:
        yield from executor.map(_simulate_task, tasks, chunksize=chunksize)


def run_cells(cfg: SystemConfig, precoders: Sequence[Precoder], strategies: Sequence[Strategy],
              workers: int = 1, progress_callback: Optional[ProgressCallback] = None
              ) -> Dict[Combo, OutageReport]:
    """Run cell (cfg.K, cfg.f) for every precoder/strategy combination"""
    precoders = [Precoder(p) for p in precoders]
    strategies = [Strategy(s) for s in strategies]
    gamma_th = sinr_threshold(cfg.rate_model)
    reservoir_seed = derive_seed(cfg.seed, cfg.K, cfg.f, "reservoir")
    accumulators = {
        (pc, st): OutageAccumulator(cfg.K, cfg.f, pc.value, st.value, gamma_th,
                                    cfg.reservoir_size, reservoir_seed)
        for pc, st in product(precoders, strategies)
    }

    logger.debug(f"Cell K={cfg.K} f={cfg.f}: {cfg.n_deployments} deployments, "
                 f"{cfg.n_channel} realizations each, {workers} worker(s)")
    total = cfg.n_deployments
    for done, outcomes in enumerate(_iter_deployments(cfg, precoders, strategies, workers), 1):
        for combo, outcome in outcomes.items():
            accumulators[combo].add(outcome.gamma, outcome.se, outcome.digest, outcome.index)
        if progress_callback:
            progress_callback(done, total)

    reports = {combo: acc.finalize() for combo, acc in accumulators.items()}
    for (pc, st), r in reports.items():
        logger.info(f"K={r.K} f={r.f} {pc.value}/{st.value}: device outage {r.device_outage:.4g}, "
                    f"system outage {r.system_outage:.4g}, sum SE {r.sum_se_mean:.4g} bit/s/Hz")
    return reports


def run_cell(cfg: SystemConfig, precoder, strategy, workers: int = 1,
             progress_callback: Optional[ProgressCallback] = None) -> OutageReport:
    """Run one sweep cell; errors propagate"""
    combo = (Precoder(precoder), Strategy(strategy))
    return run_cells(cfg, [combo[0]], [combo[1]], workers, progress_callback)[combo]


def run_sweep(spec: SweepSpec, workers: int = 1, cache: Optional[ResultCache] = None,
              progress_callback: Optional[ProgressCallback] = None) -> SweepResult:
    """
    Run the full sweep. A (K, f) cell that fails is recorded in
    SweepResult.failures and the sweep goes on.
    """
    result = SweepResult()
    cells = list(spec.cells())
    total = len(cells) * spec.base.n_deployments
    combos = list(product(spec.precoders, spec.strategies))

    for position, (K, f) in enumerate(cells):
        cfg = spec.base.with_cell(K, f)
        offset = position * cfg.n_deployments
        keys = {combo: cell_key(cfg.to_dict(), combo[0].value, combo[1].value) for combo in combos}

        cached: Dict[Combo, OutageReport] = {}
        if cache is not None:
            for combo, key in keys.items():
                report = cache.get(key)
                if report is not None:
                    cached[combo] = report

        if len(cached) == len(combos):
            logger.info(f"Cell K={K} f={f} loaded from cache")
            fresh: Dict[Combo, OutageReport] = {}
            if progress_callback:
                progress_callback(offset + cfg.n_deployments, total)
        else:
            def cell_progress(done: int, _: int, offset=offset):
                if progress_callback:
                    progress_callback(offset + done, total)

            try:
                fresh = run_cells(cfg, spec.precoders, spec.strategies, workers, cell_progress)
            except SimulationError as e:
                logger.error(f"Skipping cell K={K} f={f}: {e}")
                result.failures.append(CellFailure(K, f, e.index, e.message))
                if progress_callback:
                    progress_callback(offset + cfg.n_deployments, total)
                continue
            if cache is not None:
                for combo, report in fresh.items():
                    if combo not in cached:
                        cache.put(keys[combo], report)

        for combo in combos:
            result.reports.append(cached[combo] if combo in cached else fresh[combo])

    if result.failures:
        logger.warning(f"{len(result.failures)} of {len(cells)} cells failed")
    return result
