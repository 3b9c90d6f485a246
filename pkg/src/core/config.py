"""
Configuration for the URLLC massive MIMO simulator
Loads the scenario (SystemConfig) and the optional sweep/run sections from a
JSON file, with environment overrides applied by the entry point
"""
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from src.utils.units import dbm_to_watts

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).parent.parent.parent / "config.json"

# Sections that may sit next to the SystemConfig keys in a config file
RESERVED_SECTIONS = ("sweep", "run", "manifest")

MMSE_SOLVERS = ("woodbury", "cholesky")


class ConfigError(ValueError):
    """Invalid simulator configuration"""


@dataclass(frozen=True)
class SystemConfig:
    """Scenario parameters plus Monte-Carlo run controls (linear units)"""
    M: int = 100
    K: int = 10
    f: int = 1
    tau: int = 100
    b: int = 256
    B: float = 20e6
    Bc: float = 100e3
    Pmax: float = float(dbm_to_watts(46.0))
    p: float = float(dbm_to_watts(23.0))
    NF: float = 7.0
    Upsilon: float = -148.1
    alpha: float = 3.76
    sigma_sf: float = 7.0
    cell_side: float = 500.0
    n_deployments: int = 1000
    n_channel: Optional[int] = None
    seed: int = 1
    d_min: float = 35.0
    mmse_solver: str = "woodbury"
    reservoir_size: int = 200_000

    def __post_init__(self):
        if self.n_channel is None:
            object.__setattr__(self, "n_channel", max(1, int(round(self.B / self.Bc))))
        self.validate()

    def validate(self):
        """Check the invariants of the scenario"""
        for name in ("M", "K", "f", "tau", "n_deployments", "n_channel", "reservoir_size"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not isinstance(self.b, int) or self.b < 0:
            raise ConfigError(f"b must be a non-negative integer, got {self.b!r}")
        for name in ("B", "Bc", "Pmax", "p", "cell_side", "d_min"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be strictly positive, got {value!r}")
        if self.sigma_sf < 0:
            raise ConfigError(f"sigma_sf must be non-negative, got {self.sigma_sf!r}")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha!r}")
        if self.tau_p >= self.tau:
            raise ConfigError(
                f"tau_p = f*K = {self.tau_p} leaves no data symbols in tau = {self.tau}"
            )
        if self.d_min >= self.cell_side / 2:
            raise ConfigError(f"d_min {self.d_min} m does not fit in a {self.cell_side} m cell")
        if self.mmse_solver not in MMSE_SOLVERS:
            raise ConfigError(f"mmse_solver must be one of {MMSE_SOLVERS}, got {self.mmse_solver!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must fit in 64 bits, got {self.seed!r}")

    @property
    def tau_p(self) -> int:
        """Pilot length in channel uses"""
        return self.f * self.K

    @property
    def sigma2(self) -> float:
        """Noise power in watts"""
        from src.core.scenario import noise_power
        return noise_power(self.B, self.NF)

    @property
    def rate_model(self):
        """Rate model of this configuration"""
        from src.core.sinr_metrics import RateModel
        return RateModel.from_config(self)

    def with_cell(self, K: int, f: int) -> "SystemConfig":
        """Copy of this configuration for sweep cell (K, f)"""
        return replace(self, K=K, f=f)

    def to_dict(self) -> Dict[str, Any]:
        """Resolved configuration as plain JSON-compatible values"""
        return asdict(self)


@dataclass
class SweepAxes:
    """Sweep axes as read from the `sweep` section of a config file"""
    K_values: Optional[List[int]] = None
    f_values: Optional[List[int]] = None
    precoders: Optional[List[str]] = None
    strategies: Optional[List[str]] = None


@dataclass
class RunOptions:
    """Execution options from the `run` section"""
    workers: int = 1
    out_dir: Optional[str] = None
    cache: Optional[str] = None


@dataclass
class LoadedConfig:
    """Everything a config file can hold"""
    system: SystemConfig
    sweep: SweepAxes = field(default_factory=SweepAxes)
    run: RunOptions = field(default_factory=RunOptions)


# dB-declared fields accept an explicit suffix alias; watt fields accept _dbm
_DB_ALIASES = {"NF_db": "NF", "Upsilon_db": "Upsilon", "sigma_sf_db": "sigma_sf"}
_DBM_FIELDS = {"Pmax_dbm": "Pmax", "p_dbm": "p"}
_INT_FIELDS = {"M", "K", "f", "tau", "b", "n_deployments", "n_channel", "seed", "reservoir_size"}


def parse_system(raw: Dict[str, Any]) -> SystemConfig:
    """Build a SystemConfig from the top-level keys of a config object"""
    known = {f.name for f in fields(SystemConfig)}
    values: Dict[str, Any] = {}

    for key, value in raw.items():
        if key in RESERVED_SECTIONS:
            continue
        if key in _DBM_FIELDS:
            target = _DBM_FIELDS[key]
            value = float(dbm_to_watts(float(value)))
        elif key in _DB_ALIASES:
            target = _DB_ALIASES[key]
        elif key in known:
            target = key
        else:
            raise ConfigError(f"Unknown configuration key: {key}")

        if target in values:
            raise ConfigError(f"{target} given twice (check {key})")
        if target in _INT_FIELDS and value is not None:
            if isinstance(value, float) and not value.is_integer():
                raise ConfigError(f"{key} must be an integer, got {value!r}")
            value = int(value)
        values[target] = value

    return SystemConfig(**values)


def _int_list(section: Dict[str, Any], key: str) -> Optional[List[int]]:
    value = section.get(key)
    return None if value is None else [int(v) for v in value]


def _str_list(section: Dict[str, Any], key: str) -> Optional[List[str]]:
    value = section.get(key)
    return None if value is None else [str(v).lower() for v in value]


def parse_config(raw: Dict[str, Any]) -> LoadedConfig:
    """Parse a full config object (scenario plus sweep and run sections)"""
    if not isinstance(raw, dict):
        raise ConfigError("Configuration must be a JSON object")

    sweep_raw = raw.get("sweep") or {}
    run_raw = raw.get("run") or {}
    unknown = set(sweep_raw) - {"K_values", "f_values", "precoders", "strategies"}
    if unknown:
        raise ConfigError(f"Unknown sweep keys: {sorted(unknown)}")
    unknown = set(run_raw) - {"workers", "out_dir", "cache"}
    if unknown:
        raise ConfigError(f"Unknown run keys: {sorted(unknown)}")

    sweep = SweepAxes(
        K_values=_int_list(sweep_raw, "K_values"),
        f_values=_int_list(sweep_raw, "f_values"),
        precoders=_str_list(sweep_raw, "precoders"),
        strategies=_str_list(sweep_raw, "strategies"),
    )
    run = RunOptions(
        workers=int(run_raw.get("workers", 1)),
        out_dir=run_raw.get("out_dir"),
        cache=run_raw.get("cache"),
    )
    return LoadedConfig(system=parse_system(raw), sweep=sweep, run=run)


def load_config(path: Optional[Path] = None) -> LoadedConfig:
    """Load configuration from a JSON file (defaults to config.json)"""
    path = Path(path) if path is not None else DEFAULT_CONFIG_PATH
    try:
        with open(path, "r") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    except OSError as e:
        raise OSError(f"Cannot read config {path}: {e}") from e

    loaded = parse_config(raw)
    logger.info(f"Loaded config from {path}: M={loaded.system.M}, K={loaded.system.K}, "
                f"f={loaded.system.f}, deployments={loaded.system.n_deployments}")
    return loaded


def save_config(loaded: LoadedConfig, path: Path):
    """Write a config file that load_config reads back to the same LoadedConfig"""
    path = Path(path)
    data = loaded.system.to_dict()
    sweep = {k: v for k, v in asdict(loaded.sweep).items() if v is not None}
    if sweep:
        data["sweep"] = sweep
    data["run"] = asdict(loaded.run)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            json.dump(data, f, indent=2)
            f.write("\n")
    except OSError as e:
        raise OSError(f"Failed to write config {path}: {e}") from e
    logger.debug(f"Saved config to {path}")


def apply_overrides(cfg: SystemConfig, **overrides: Any) -> Tuple[SystemConfig, List[str]]:
    """Return cfg with the non-None overrides applied, and the names changed"""
    changes = {k: v for k, v in overrides.items() if v is not None}
    if not changes:
        return cfg, []
    return replace(cfg, **changes), sorted(changes)
