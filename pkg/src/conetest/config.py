import logging
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import yaml

logger = logging.getLogger(__name__)

EXPERIMENTS = (
    "subspace-scaling",
    "circular",
    "orthant-scaling",
    "monotone-scaling",
    "product-suboptimality",
    "kpiece",
    "concentration",
    "lower-bounds",
    "geometry-report",
)

CONE_NAMES = ("orthant", "monotone", "monotone-centered", "circular", "subspace", "product", "k-ell")
FORMATS = ("csv", "json")

# Replicates per evaluation when the config leaves n unset.
DEFAULT_REPLICATES = {
    "concentration": 20_000,
    "geometry-report": 100_000,
    "lower-bounds": 10_000,
}
RADIUS_REPLICATES = 4000

SEED_ENV_VAR = "CONETEST_SEED"

KNOWN_FIELDS = {
    "experiment", "dims", "sigma", "rho", "alpha", "n", "seed", "out", "format", "cone",
    "bisect_iters", "n_directions", "workers", "pieces", "ell", "curve",
}


class ConfigError(ValueError):
    """An experiment configuration field is missing or out of range."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    dims: tuple
    sigma: float = 1.0
    rho: float = 0.1
    alpha: float = math.pi / 4
    n: int = RADIUS_REPLICATES
    seed: int = 0
    out: str = None
    format: str = "csv"
    cone: str = None
    bisect_iters: int = 8
    n_directions: int = 4
    workers: int = 1
    pieces: tuple = (1, 4)
    ell: int = 1
    curve: bool = False

    def to_dict(self) -> dict:
        out = asdict(self)
        out["dims"] = list(self.dims)
        out["pieces"] = list(self.pieces)
        return out


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _real(raw, name, default, check, requirement):
    value = raw.get(name, default)
    if not _is_number(value) or not math.isfinite(value) or not check(value):
        raise ConfigError(name, requirement)
    return float(value)


def _integer(raw, name, default, check, requirement):
    value = raw.get(name, default)
    if not isinstance(value, int) or isinstance(value, bool) or not check(value):
        raise ConfigError(name, requirement)
    return value


def _int_list(raw, name, default, minimum):
    value = raw.get(name, default)
    if value is None or (isinstance(value, (list, tuple)) and not value):
        raise ConfigError(name, "nonempty required")
    if not isinstance(value, (list, tuple)):
        raise ConfigError(name, "must be a list of integers")
    for v in value:
        if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
            raise ConfigError(name, f"entries must be integers >= {minimum}")
    if any(b <= a for a, b in zip(value, value[1:])):
        raise ConfigError(name, "must be strictly increasing")
    return tuple(value)


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError("seed", f"{SEED_ENV_VAR} must be an integer, got '{raw}'")


def validate_config(raw: dict) -> ExperimentConfig:
    """Check every field and fill defaults; the first problem raises ConfigError."""
    if not isinstance(raw, dict):
        raise ConfigError("config", "must be a mapping")
    unknown = sorted(set(raw) - KNOWN_FIELDS)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")

    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")

    dims = _int_list(raw, "dims", None, 1)
    sigma = _real(raw, "sigma", 1.0, lambda v: v > 0, "must be a finite number > 0")
    rho = _real(raw, "rho", 0.1, lambda v: 0 < v < 0.5, "must lie in (0, 0.5)")
    alpha = _real(raw, "alpha", math.pi / 4, lambda v: 0 < v < math.pi / 2, "must lie in (0, pi/2)")
    n_default = DEFAULT_REPLICATES.get(experiment, RADIUS_REPLICATES)
    n = _integer(raw, "n", n_default, lambda v: v >= 2, "must be an integer >= 2")
    seed = _integer(raw, "seed", _default_seed(), lambda v: 0 <= v < 2 ** 64, "must be an integer in [0, 2**64)")
    bisect_iters = _integer(raw, "bisect_iters", 8, lambda v: 1 <= v <= 60, "must be an integer in [1, 60]")
    n_directions = _integer(raw, "n_directions", 4, lambda v: v >= 0, "must be an integer >= 0")
    workers = _integer(raw, "workers", 1, lambda v: v >= 1, "must be an integer >= 1")
    ell = _integer(raw, "ell", 1, lambda v: v >= 1, "must be an integer >= 1")
    pieces = _int_list(raw, "pieces", [1, 4], 1)
    curve = raw.get("curve", False)
    if not isinstance(curve, bool):
        raise ConfigError("curve", "must be true or false")

    fmt = raw.get("format", "csv")
    if fmt not in FORMATS:
        raise ConfigError("format", "must be 'csv' or 'json'")
    out = raw.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError("out", "must be a path string")
    cone = raw.get("cone")
    if cone is not None and cone not in CONE_NAMES:
        raise ConfigError("cone", f"must be one of {', '.join(CONE_NAMES)}")

    if experiment == "product-suboptimality" and ell >= dims[0]:
        raise ConfigError("ell", f"must be smaller than every dimension (smallest is {dims[0]})")
    if experiment in ("circular", "product-suboptimality") and dims[0] < 2:
        raise ConfigError("dims", "circular cones need d >= 2")
    if experiment == "kpiece" and pieces[-1] > dims[0]:
        raise ConfigError("pieces", f"piece counts must not exceed the smallest dimension {dims[0]}")

    return ExperimentConfig(
        experiment=experiment, dims=dims, sigma=sigma, rho=rho, alpha=alpha, n=n, seed=seed, out=out,
        format=fmt, cone=cone, bisect_iters=bisect_iters, n_directions=n_directions, workers=workers,
        pieces=pieces, ell=ell, curve=curve,
    )


def load_config(path) -> dict:
    """Load raw configuration fields from a YAML file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(
            f"Config file not found: {path}\n"
            "Copy config.example.yaml and pass it with --config, or give every field as a flag."
        )
    with open(path) as f:
        cfg = yaml.safe_load(f)
    if cfg is None:
        return {}
    if not isinstance(cfg, dict):
        raise ConfigError("config", f"{path} must contain a YAML mapping")
    return cfg


def resolve_config(path=None, **overrides) -> ExperimentConfig:
    """File values first, then every flag that was actually given."""
    raw = load_config(path) if path else {}
    for key, value in overrides.items():
        if value is not None:
            raw[key] = value
    logger.info("resolved config fields: %s", ", ".join(sorted(raw)))
    return validate_config(raw)
