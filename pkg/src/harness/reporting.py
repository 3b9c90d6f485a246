"""
Aggregation of per-deployment outcomes into outage/SE reports, and the result
files (sum_se.csv, outage.csv, sinr_pdf.csv, manifest.json)
"""
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from src.core.types import RealArray

logger = logging.getLogger(__name__)

PDF_BIN_DB = 0.5
CONFIDENCE = 0.95

# SINRs of zero (a device left without power) are reported at this floor
SINR_FLOOR_DB = -300.0

CELL_COLUMNS = ["K", "f", "precoder", "strategy"]


def _z(confidence: float) -> float:
    return float(stats.norm.ppf(1 - (1 - confidence) / 2))


def wilson_interval(hits: int, n: int, confidence: float = CONFIDENCE) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion"""
    if n <= 0:
        return 0.0, 1.0
    z = _z(confidence)
    p = hits / n
    denom = 1 + z**2 / n
    center = (p + z**2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denom
    lo = min(max(center - half, 0.0), p)
    hi = max(min(center + half, 1.0), p)
    return lo, hi


def mean_interval(values: Sequence[float], confidence: float = CONFIDENCE) -> Tuple[float, float, float]:
    """Sample mean with its normal-approximation confidence interval"""
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, mean, mean
    half = _z(confidence) * float(arr.std(ddof=1)) / math.sqrt(arr.size)
    return mean, mean - half, mean + half


def difference_interval(hits_a: int, n_a: int, hits_b: int, n_b: int,
                        confidence: float = CONFIDENCE) -> Tuple[float, float, float]:
    """
    Difference of two independent proportions, p_a - p_b, with the hybrid
    score interval built from the two Wilson intervals (Newcombe)
    """
    p_a, p_b = hits_a / n_a, hits_b / n_b
    lo_a, hi_a = wilson_interval(hits_a, n_a, confidence)
    lo_b, hi_b = wilson_interval(hits_b, n_b, confidence)
    diff = p_a - p_b
    lo = diff - math.sqrt((p_a - lo_a) ** 2 + (hi_b - p_b) ** 2)
    hi = diff + math.sqrt((hi_a - p_a) ** 2 + (p_b - lo_b) ** 2)
    return diff, lo, hi


def paired_difference_interval(only_a: int, only_b: int, n: int,
                               confidence: float = CONFIDENCE) -> Tuple[float, float, float]:
    """
    Difference of two proportions observed on the same n trials. only_a and
    only_b count the discordant trials; the interval is conditional on their
    total m, with only_a ~ Binomial(m, pi) and p_a - p_b = m (2 pi - 1) / n.
    """
    discordant = only_a + only_b
    diff = (only_a - only_b) / n
    if discordant == 0:
        return diff, 0.0, 0.0
    pi_lo, pi_hi = wilson_interval(only_a, discordant, confidence)
    return diff, discordant * (2 * pi_lo - 1) / n, discordant * (2 * pi_hi - 1) / n


@dataclass
class OutageReport:
    """Aggregated metrics of one sweep cell (K, f, precoder, strategy)"""
    K: int
    f: int
    precoder: str
    strategy: str
    n_deployments: int
    device_outage: float
    device_ci: Tuple[float, float]
    system_outage: float
    system_ci: Tuple[float, float]
    sum_se_mean: float
    sum_se_ci: Tuple[float, float]
    gamma_threshold: float
    deployment_digest: str
    sinr_samples_db: RealArray = field(default_factory=lambda: np.empty(0))
    device_hits: int = 0
    # Deployment indices with at least one device in outage
    outage_deployments: Tuple[int, ...] = ()

    @property
    def cell(self) -> Tuple[int, int, str, str]:
        return self.K, self.f, self.precoder, self.strategy

    def sinr_histogram(self, bin_db: float = PDF_BIN_DB) -> Tuple[RealArray, np.ndarray]:
        """Histogram of the SINR samples on a bin_db grid aligned to multiples of bin_db"""
        samples = self.sinr_samples_db
        if samples.size == 0:
            return np.empty(0), np.empty(0, dtype=np.int64)
        lo = math.floor(samples.min() / bin_db)
        hi = math.floor(samples.max() / bin_db) + 1
        edges = np.arange(lo, hi + 1) * bin_db
        counts, _ = np.histogram(samples, bins=edges)
        return edges, counts

    def sinr_density(self, bin_db: float = PDF_BIN_DB) -> Tuple[RealArray, RealArray]:
        """Bin centers and the empirical PDF (per dB) of the SINR samples"""
        edges, counts = self.sinr_histogram(bin_db)
        if counts.size == 0:
            return edges, counts.astype(float)
        return 0.5 * (edges[:-1] + edges[1:]), counts / (counts.sum() * bin_db)

    def to_dict(self) -> Dict[str, Any]:
        """JSON-compatible form; SINR samples are stored as float hex so they round-trip exactly"""
        return {
            "K": self.K,
            "f": self.f,
            "precoder": self.precoder,
            "strategy": self.strategy,
            "n_deployments": self.n_deployments,
            "device_outage": self.device_outage,
            "device_ci": list(self.device_ci),
            "system_outage": self.system_outage,
            "system_ci": list(self.system_ci),
            "sum_se_mean": self.sum_se_mean,
            "sum_se_ci": list(self.sum_se_ci),
            "gamma_threshold": self.gamma_threshold,
            "deployment_digest": self.deployment_digest,
            "sinr_samples_db": [float(x).hex() for x in self.sinr_samples_db],
            "device_hits": self.device_hits,
            "outage_deployments": list(self.outage_deployments),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "OutageReport":
        return cls(
            K=int(data["K"]),
            f=int(data["f"]),
            precoder=data["precoder"],
            strategy=data["strategy"],
            n_deployments=int(data["n_deployments"]),
            device_outage=data["device_outage"],
            device_ci=tuple(data["device_ci"]),
            system_outage=data["system_outage"],
            system_ci=tuple(data["system_ci"]),
            sum_se_mean=data["sum_se_mean"],
            sum_se_ci=tuple(data["sum_se_ci"]),
            gamma_threshold=data["gamma_threshold"],
            deployment_digest=data["deployment_digest"],
            sinr_samples_db=np.array([float.fromhex(x) for x in data["sinr_samples_db"]], dtype=float),
            device_hits=int(data["device_hits"]),
            outage_deployments=tuple(int(i) for i in data["outage_deployments"]),
        )


class OutageAccumulator:
    """
    Folds deployment outcomes, in deployment-index order, into an OutageReport.
    SINR samples are kept in a reservoir of bounded size; the reservoir RNG is
    seeded so the retained samples are reproducible.
    """

    def __init__(self, K: int, f: int, precoder: str, strategy: str, gamma_threshold: float,
                 reservoir_size: int, reservoir_seed: int):
        self.K = K
        self.f = f
        self.precoder = precoder
        self.strategy = strategy
        self.gamma_threshold = gamma_threshold
        self.reservoir_size = reservoir_size
        self._rng = np.random.default_rng(reservoir_seed)
        self._reservoir: List[float] = []
        self._seen = 0
        self._device_hits = 0
        self._outage_deployments: List[int] = []
        self._sum_se: List[float] = []
        self._digest = hashlib.sha256()

    @property
    def n(self) -> int:
        return len(self._sum_se)

    def add(self, gamma: RealArray, se: RealArray, deployment_digest: str,
            index: Optional[int] = None):
        """Add one deployment's post-allocation SINRs and SEs; index defaults to arrival order"""
        if index is None:
            index = self.n
        in_outage = gamma < self.gamma_threshold
        self._device_hits += int(np.count_nonzero(in_outage))
        if in_outage.any():
            self._outage_deployments.append(int(index))
        self._sum_se.append(float(np.sum(se)))
        self._digest.update(deployment_digest.encode("ascii"))

        with np.errstate(divide="ignore"):
            sinr_db = np.maximum(10.0 * np.log10(gamma), SINR_FLOOR_DB)
        for value in sinr_db:
            if len(self._reservoir) < self.reservoir_size:
                self._reservoir.append(float(value))
            else:
                j = int(self._rng.integers(0, self._seen + 1))
                if j < self.reservoir_size:
                    self._reservoir[j] = float(value)
            self._seen += 1

    def finalize(self, confidence: float = CONFIDENCE) -> OutageReport:
        if self.n == 0:
            raise ValueError("No deployments were aggregated")
        n_devices = self.n * self.K
        mean, se_lo, se_hi = mean_interval(self._sum_se, confidence)
        return OutageReport(
            K=self.K,
            f=self.f,
            precoder=self.precoder,
            strategy=self.strategy,
            n_deployments=self.n,
            device_outage=self._device_hits / n_devices,
            device_ci=wilson_interval(self._device_hits, n_devices, confidence),
            system_outage=len(self._outage_deployments) / self.n,
            system_ci=wilson_interval(len(self._outage_deployments), self.n, confidence),
            sum_se_mean=mean,
            sum_se_ci=(se_lo, se_hi),
            gamma_threshold=self.gamma_threshold,
            deployment_digest=self._digest.hexdigest()[:16],
            sinr_samples_db=np.asarray(self._reservoir, dtype=float),
            device_hits=self._device_hits,
            outage_deployments=tuple(self._outage_deployments),
        )


def system_outage_difference(a: OutageReport, b: OutageReport,
                             confidence: float = CONFIDENCE) -> Tuple[float, float, float]:
    """
    system_outage(a) - system_outage(b) with its interval. Reports of the same
    (K, f) cell share their deployments, so they are compared deployment by
    deployment; other pairs are treated as independent samples.
    """
    if a.deployment_digest == b.deployment_digest and a.n_deployments == b.n_deployments:
        only_a = len(set(a.outage_deployments) - set(b.outage_deployments))
        only_b = len(set(b.outage_deployments) - set(a.outage_deployments))
        return paired_difference_interval(only_a, only_b, a.n_deployments, confidence)
    return difference_interval(len(a.outage_deployments), a.n_deployments,
                               len(b.outage_deployments), b.n_deployments, confidence)


def device_outage_difference(a: OutageReport, b: OutageReport,
                             confidence: float = CONFIDENCE) -> Tuple[float, float, float]:
    """device_outage(a) - device_outage(b), devices treated as independent samples"""
    return difference_interval(a.device_hits, a.n_deployments * a.K,
                               b.device_hits, b.n_deployments * b.K, confidence)


def build_manifest(config: Dict[str, Any], sweep: Dict[str, Any],
                   failures: Optional[Iterable[Dict[str, Any]]] = None) -> Dict[str, Any]:
    """Manifest that doubles as a config file for re-running the sweep"""
    from src import __version__

    manifest = dict(config)
    manifest["sweep"] = sweep
    manifest["manifest"] = {
        "tool": "urllc-mimo-sim",
        "version": __version__,
        "generated_at": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
        "master_seed": config.get("seed"),
        "failures": list(failures or []),
    }
    return manifest


def _frames(reports: Sequence[OutageReport]) -> Dict[str, pd.DataFrame]:
    se_rows, outage_rows, pdf_rows = [], [], []
    for r in reports:
        cell = dict(zip(CELL_COLUMNS, r.cell))
        se_rows.append({**cell, "sum_se_mean": r.sum_se_mean,
                        "sum_se_ci_lo": r.sum_se_ci[0], "sum_se_ci_hi": r.sum_se_ci[1]})
        outage_rows.append({
            **cell,
            "device_outage": r.device_outage,
            "device_ci_lo": r.device_ci[0],
            "device_ci_hi": r.device_ci[1],
            "system_outage": r.system_outage,
            "system_ci_lo": r.system_ci[0],
            "system_ci_hi": r.system_ci[1],
            "n_deployments": r.n_deployments,
        })
        edges, counts = r.sinr_histogram()
        for lo, hi, count in zip(edges[:-1], edges[1:], counts):
            pdf_rows.append({**cell, "bin_lo_db": lo, "bin_hi_db": hi, "count": int(count)})

    return {
        "sum_se.csv": pd.DataFrame(se_rows, columns=CELL_COLUMNS + [
            "sum_se_mean", "sum_se_ci_lo", "sum_se_ci_hi"]),
        "outage.csv": pd.DataFrame(outage_rows, columns=CELL_COLUMNS + [
            "device_outage", "device_ci_lo", "device_ci_hi",
            "system_outage", "system_ci_lo", "system_ci_hi", "n_deployments"]),
        "sinr_pdf.csv": pd.DataFrame(pdf_rows, columns=CELL_COLUMNS + [
            "bin_lo_db", "bin_hi_db", "count"]),
    }


def emit_results(reports: Sequence[OutageReport], out_dir: Path,
                 manifest: Optional[Dict[str, Any]] = None) -> Dict[str, Path]:
    """Write the CSV result files and the run manifest into out_dir"""
    out_dir = Path(out_dir)
    written: Dict[str, Path] = {}
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"Cannot create output directory {out_dir}: {e}") from e

    for name, frame in _frames(reports).items():
        path = out_dir / name
        try:
            frame.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
        except OSError as e:
            raise OSError(f"Failed to write {path}: {e}") from e
        written[name] = path

    if manifest is not None:
        path = out_dir / "manifest.json"
        try:
            with open(path, "w") as f:
                json.dump(manifest, f, indent=2)
                f.write("\n")
        except OSError as e:
            raise OSError(f"Failed to write {path}: {e}") from e
        written["manifest.json"] = path

    logger.info(f"Wrote {len(written)} result files to {out_dir}")
    return written
