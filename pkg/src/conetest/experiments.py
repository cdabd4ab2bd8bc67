"""Scaling studies: one registered function per experiment name.

Each study loops over the configured dimensions and returns one row per
(dimension, variant). A row that hits a numerical failure is kept with its
status column set instead of aborting the whole run. Every row carries the
seed it was computed with and its replicate count, and each dimension gets
its own child seed so a single row can be recomputed alone.
"""

import logging
import math
import platform
import time
from dataclasses import dataclass, field

import numpy as np
import scipy

from conetest import __version__
from conetest.cones import (
    ConeError,
    ProjectionError,
    circular,
    constant_line,
    full_space,
    induced,
    k_ell_product_cone,
    make_pair,
    monotone,
    orthant,
    product,
    zero_cone,
)
from conetest.config import ExperimentConfig
from conetest.gaussian import derive_seed
from conetest.geometry import GeometryError, concentration_report, summarize_geometry
from conetest.lowerbound import (
    MonotoneFGPrior,
    OrthantSparsePrior,
    PriorError,
    minimax_lower_radius,
    projection_prior_for,
)
from conetest.testing import (
    RadiusBracketError,
    TestProblem,
    default_directions,
    glrt_radius,
    kpiece_radius,
    truncation_radius,
)

logger = logging.getLogger(__name__)

NUMERICAL_ERRORS = (ProjectionError, RadiusBracketError, PriorError, GeometryError)

REGISTRY = {}


def experiment(name):
    def register(fn):
        REGISTRY[name] = fn
        return fn
    return register


@dataclass
class ExperimentReport:
    experiment: str
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def failed_rows(self) -> int:
        return sum(1 for row in self.rows if row.get("status") != "ok")


def build_cone(name: str, d: int, alpha: float = math.pi / 4, ell: int = 1):
    """Named cone of alternatives (after reduction) used by the CLI and the studies."""
    if name == "orthant":
        return orthant(d)
    if name == "monotone":
        return monotone(d)
    if name == "monotone-centered":
        return induced(make_pair(constant_line(d), monotone(d)))
    if name == "circular":
        return circular(alpha, d)
    if name == "subspace":
        return full_space(d)
    if name == "product":
        return product([circular(alpha, d - 1), full_space(1)])
    if name == "k-ell":
        return k_ell_product_cone(d, ell, alpha)
    raise ConeError(f"unknown cone name '{name}'")


def _pair_for(cone):
    return make_pair(zero_cone(cone.dim), cone)


def _guarded(row: dict, compute, log) -> dict:
    try:
        row.update(compute())
        row["status"] = "ok"
    except NUMERICAL_ERRORS as e:
        log(f"[FAIL] d={row.get('d')}: {e}")
        row["status"] = f"numerical_error: {e}"
    return row


def curve_rows(row: dict, estimate, test: str = None) -> list:
    """One row per error-curve evaluation behind a radius estimate, in order of ε."""
    base = {"cone": row["cone"], "d": row["d"], "sigma": row["sigma"], "rho": row["rho"]}
    if test is not None:
        base["test"] = test
    return [
        dict(base, epsilon=point.epsilon, type1=point.type1.mean, type2=point.type2_worst.mean, total=point.total,
             threshold=point.threshold, seed=row["seed"], n=row["n"], status=row["status"])
        for point in sorted(estimate.evaluations, key=lambda p: p.epsilon)
    ]


def _radius_columns(estimate, prefix=""):
    """radius_sq with its squared bracket as bracket_lo / bracket_hi."""
    lo_sq, hi_sq = estimate.bracket_sq
    return {f"{prefix}radius_sq": estimate.radius_sq, f"{prefix}bracket_lo": lo_sq, f"{prefix}bracket_hi": hi_sq,
            f"{prefix}evaluations": len(estimate.evaluations), f"{prefix}violations": estimate.violations}


def _glrt_row(cfg: ExperimentConfig, cone, d, seed, normalizer, column, log, estimates):
    problem = TestProblem(_pair_for(cone), sigma=cfg.sigma, rho=cfg.rho)
    directions = default_directions(cone, n_random=cfg.n_directions, seed=seed)
    estimate = glrt_radius(problem, bisect_iters=cfg.bisect_iters, n=cfg.n, seed=seed,
                           directions=directions, log=log)
    estimates.append(estimate)
    out = _radius_columns(estimate)
    out[column] = estimate.radius_sq / (cfg.sigma ** 2 * normalizer) if normalizer > 0 else math.nan
    return out


def _scaling(cfg: ExperimentConfig, log, cone_for, normalizer_for, label, column="radius_sq_normalized"):
    rows = []
    for d in cfg.dims:
        seed = derive_seed(cfg.seed, d)
        log(f"[HEAD] {cfg.experiment} d={d}")
        row = {"experiment": cfg.experiment, "cone": label, "d": d, "sigma": cfg.sigma, "rho": cfg.rho,
               "normalizer": normalizer_for(d), "seed": seed, "n": cfg.n}
        estimates = []
        row = _guarded(row, lambda: _glrt_row(cfg, cone_for(d), d, seed, normalizer_for(d), column, log, estimates),
                       log)
        if cfg.curve and estimates:
            rows.extend(curve_rows(row, estimates[0]))
        else:
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------

@experiment("subspace-scaling")
def subspace_scaling(cfg, log):
    """GLRT radius² / sqrt(k) for the full space R^k against the origin."""
    return _scaling(cfg, log, full_space, lambda k: math.sqrt(k), "subspace", "radius_sq_over_sqrt_k")


@experiment("orthant-scaling")
def orthant_scaling(cfg, log):
    return _scaling(cfg, log, orthant, lambda d: math.sqrt(d), "orthant", "radius_sq_over_sqrt_d")


@experiment("monotone-scaling")
def monotone_scaling(cfg, log):
    """GLRT radius² / sqrt(log(e d)); the centered variant tests span(1) against M."""
    if cfg.cone == "monotone-centered":
        return _scaling(cfg, log, lambda d: build_cone("monotone-centered", d),
                        lambda d: math.sqrt(math.log(math.e * d)), "monotone-centered",
                        "radius_sq_over_sqrt_log_d")
    return _scaling(cfg, log, monotone, lambda d: math.sqrt(math.log(math.e * d)), "monotone",
                    "radius_sq_over_sqrt_log_d")


@experiment("circular")
def circular_scaling(cfg, log):
    """Radius² should stay flat in d; the δ²_LR column shows why."""
    rows = _scaling(cfg, log, lambda d: circular(cfg.alpha, d), lambda d: 1.0, "circular")
    if cfg.curve:
        return rows
    for row in rows:
        if row["status"] != "ok":
            continue
        summary = summarize_geometry(circular(cfg.alpha, row["d"]), n=cfg.n, seed=row["seed"], workers=cfg.workers)
        row["alpha"] = cfg.alpha
        row["delta_lr_sq"] = summary.delta_lr_sq
        row["delta_opt_sq"] = summary.delta_opt_sq
    return rows


@experiment("product-suboptimality")
def product_suboptimality(cfg, log):
    """GLRT against the truncation test on the product cone K_ell = circular x R."""
    rows = []
    for d in cfg.dims:
        seed = derive_seed(cfg.seed, d)
        cone = k_ell_product_cone(d, cfg.ell, cfg.alpha)
        coords = list(range(cfg.ell)) + [d - 1]
        log(f"[HEAD] product-suboptimality d={d} ell={cfg.ell}")
        row = {"experiment": cfg.experiment, "cone": "k-ell", "d": d, "ell": cfg.ell, "alpha": cfg.alpha,
               "sigma": cfg.sigma, "rho": cfg.rho, "seed": seed, "n": cfg.n}

        estimates = {}

        def compute(cone=cone, coords=coords, seed=seed):
            problem = TestProblem(_pair_for(cone), sigma=cfg.sigma, rho=cfg.rho)
            directions = default_directions(cone, n_random=cfg.n_directions, seed=seed)
            glrt = glrt_radius(problem, bisect_iters=cfg.bisect_iters, n=cfg.n, seed=seed,
                               directions=directions, log=log)
            trunc = truncation_radius(problem, coords, bisect_iters=cfg.bisect_iters, n=cfg.n, seed=seed,
                                      directions=directions, log=log)
            estimates.update(glr=glrt, trunc=trunc)
            out = _radius_columns(glrt, "glr_")
            out.update(_radius_columns(trunc, "trunc_"))
            out["ratio"] = glrt.radius_sq / trunc.radius_sq
            out["glr_radius_sq_over_sqrt_d"] = glrt.radius_sq / (cfg.sigma ** 2 * math.sqrt(d))
            return out

        row = _guarded(row, compute, log)
        if cfg.curve and estimates:
            for test, estimate in estimates.items():
                rows.extend(curve_rows(row, estimate, test))
        else:
            rows.append(row)
    return rows


def piecewise_constant(d: int, k: int) -> np.ndarray:
    """Nondecreasing vector with k constant pieces of near-equal length."""
    edges = np.linspace(0, d, k + 1).round().astype(int)
    return np.repeat(np.arange(k, dtype=float), np.diff(edges))


@experiment("kpiece")
def kpiece(cfg, log):
    """Radius at a k-piece θ0 over its tangent cone, normalized by sqrt(k log(e d / k))."""
    rows = []
    for d in cfg.dims:
        for k in cfg.pieces:
            seed = derive_seed(cfg.seed, d, k)
            normalizer = math.sqrt(k * math.log(math.e * d / k))
            log(f"[HEAD] kpiece d={d} k={k}")
            row = {"experiment": cfg.experiment, "d": d, "k": k, "sigma": cfg.sigma, "rho": cfg.rho,
                   "normalizer": normalizer, "seed": seed, "n": cfg.n}

            def compute(d=d, k=k, seed=seed, normalizer=normalizer):
                estimate = kpiece_radius(piecewise_constant(d, k), sigma=cfg.sigma, rho=cfg.rho,
                                         bisect_iters=cfg.bisect_iters, n=cfg.n, seed=seed,
                                         n_random=cfg.n_directions, log=log)
                out = _radius_columns(estimate)
                out["radius_sq_over_sqrt_k_log_d"] = estimate.radius_sq / (cfg.sigma ** 2 * normalizer)
                return out

            rows.append(_guarded(row, compute, log))
    return rows


@experiment("concentration")
def concentration(cfg, log):
    rows = []
    name = cfg.cone or "orthant"
    for d in cfg.dims:
        seed = derive_seed(cfg.seed, d)
        log(f"[HEAD] concentration {name} d={d}")
        try:
            report = concentration_report(build_cone(name, d, cfg.alpha, cfg.ell), n=cfg.n, seed=seed,
                                          workers=cfg.workers)
        except NUMERICAL_ERRORS as e:
            log(f"[FAIL] d={d}: {e}")
            rows.append({"experiment": cfg.experiment, "cone": name, "d": d, "seed": seed, "n": cfg.n,
                         "status": f"numerical_error: {e}"})
            continue
        for row in report.to_rows():
            row.update(experiment=cfg.experiment, cone=name, status="ok")
            rows.append(row)
    return rows


@experiment("lower-bounds")
def lower_bounds(cfg, log):
    """Lower radii from the sparse orthant, monotone and projection priors."""
    rows = []
    for d in cfg.dims:
        seed = derive_seed(cfg.seed, d)
        priors = [
            ("orthant-sparse", lambda d=d: OrthantSparsePrior(d), math.sqrt(d)),
            ("monotone-fg", lambda d=d: MonotoneFGPrior(d), math.sqrt(math.log(math.e * d))),
        ]
        if d >= 2:
            priors.append(("projection-circular",
                           lambda d=d: projection_prior_for(circular(cfg.alpha, d), n=cfg.n, seed=seed), 1.0))
        for name, build, normalizer in priors:
            log(f"[HEAD] lower-bounds {name} d={d}")
            row = {"experiment": cfg.experiment, "prior": name, "d": d, "sigma": cfg.sigma, "rho": cfg.rho,
                   "normalizer": normalizer, "seed": seed, "n": cfg.n}

            def compute(build=build, normalizer=normalizer):
                sampler = build()
                estimate = minimax_lower_radius(sampler, rho=cfg.rho, n_pairs=cfg.n, seed=seed,
                                                sigma=cfg.sigma, log=log)
                out = {key: value for key, value in sampler.describe().items() if key not in ("prior", "d")}
                out.update(lower_radius_sq=estimate.radius_sq, bracket_lo=estimate.lo ** 2,
                           bracket_hi=estimate.hi ** 2, method=estimate.method,
                           lower_radius_sq_normalized=estimate.radius_sq / (cfg.sigma ** 2 * normalizer))
                return out

            rows.append(_guarded(row, compute, log))
    return rows


@experiment("geometry-report")
def geometry_report(cfg, log):
    rows = []
    name = cfg.cone or "monotone"
    for d in cfg.dims:
        seed = derive_seed(cfg.seed, d)
        log(f"[HEAD] geometry {name} d={d}")
        row = {"experiment": cfg.experiment, "d": d}
        rows.append(_guarded(
            row,
            lambda d=d, seed=seed: summarize_geometry(build_cone(name, d, cfg.alpha, cfg.ell), n=cfg.n, seed=seed,
                                                      workers=cfg.workers).to_dict(),
            log))
    return rows


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

def build_identifier() -> str:
    return (f"conetest {__version__} (numpy {np.__version__}, scipy {scipy.__version__}, "
            f"python {platform.python_version()})")


def run_experiment(cfg: ExperimentConfig, log=None) -> ExperimentReport:
    """Run the configured study and return its rows with a metadata block."""
    if log is None:
        log = logger.info
    if cfg.experiment not in REGISTRY:
        raise ValueError(f"unknown experiment '{cfg.experiment}'")
    started = time.time()
    rows = REGISTRY[cfg.experiment](cfg, log)
    wall = time.time() - started
    report = ExperimentReport(cfg.experiment, rows, {
        "config": cfg.to_dict(),
        "build": build_identifier(),
        "wall_time_s": round(wall, 3),
    })
    if report.failed_rows:
        log(f"[WARN] {report.failed_rows} of {len(rows)} rows failed")
    log(f"[INFO] {cfg.experiment}: {len(rows)} rows in {wall:.1f}s")
    return report
