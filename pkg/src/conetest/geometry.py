"""Gaussian geometry of a cone: width, mean projection and the two separation functionals.

For a cone K with projection Π and g ~ N(0, I_d):

    width          w(K)   = E ||Π g||
    mean projection m(K)  = E Π g
    δ²_LR(K)  = min( w, (w / inf_{η ∈ K∩S} <η, m>)² )
    δ²_OPT(K) = min( w, (w / ||m||)² )

The infimum over K ∩ S is taken over analytic candidate vectors for the
cone kind plus normalized projections of Gaussian samples, so the computed
value is an upper bound on the true infimum.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from conetest.cones import (
    ConeDescriptor,
    ConeKind,
    contains,
    is_zero_cone,
    product,
    project_induced,
    project_rows,
)
from conetest.gaussian import McEstimate, derive_seed, gaussian_rows, mc_map, mc_vector_mean

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 100_000
DEFAULT_CANDIDATES = 200
NOISE_FLOOR_SE = 3.0
SPHERE_TOL = 1e-9


class GeometryError(RuntimeError):
    """A candidate vector or estimate violated a geometric invariant."""


@dataclass(frozen=True)
class GeometrySummary:
    cone: str
    d: int
    n: int
    seed: int
    width: McEstimate
    width_sq: McEstimate
    mean_proj: np.ndarray = field(repr=False)
    mean_proj_se: np.ndarray = field(repr=False)
    inf_inner: float
    sup_inner: float
    delta_lr_sq: float
    delta_opt_sq: float

    def to_dict(self) -> dict:
        return {
            "cone": self.cone,
            "d": self.d,
            "n": self.n,
            "seed": self.seed,
            "width": self.width.mean,
            "width_se": self.width.stderr,
            "width_sq": self.width_sq.mean,
            "width_sq_se": self.width_sq.stderr,
            "mean_proj_norm": self.sup_inner,
            "inf_inner": self.inf_inner,
            "sup_inner": self.sup_inner,
            "delta_lr_sq": self.delta_lr_sq,
            "delta_opt_sq": self.delta_opt_sq,
            "mean_proj": self.mean_proj.tolist(),
            "mean_proj_se": self.mean_proj_se.tolist(),
        }


# ---------------------------------------------------------------------------
# Monte Carlo functionals
# ---------------------------------------------------------------------------

def _projection_norms(cone: ConeDescriptor):
    return lambda rows: np.linalg.norm(project_rows(cone, rows), axis=1)


def estimate_width(cone: ConeDescriptor, n: int = DEFAULT_SAMPLES, seed: int = 0, workers: int = 1):
    """Return (width, width_sq) estimates of E||Π g|| and E||Π g||²."""
    norms = mc_map(_projection_norms(cone), cone.dim, n, seed, workers)
    return McEstimate.from_values(norms, seed), McEstimate.from_values(norms ** 2, seed)


def estimate_mean_projection(cone: ConeDescriptor, n: int = DEFAULT_SAMPLES, seed: int = 0, workers: int = 1):
    """Return (mean, se) of E Π g, coordinatewise."""
    return mc_vector_mean(lambda rows: project_rows(cone, rows), cone.dim, n, seed, workers)


def gamma_shift(cone: ConeDescriptor, theta, n: int = 10_000, seed: int = 0, workers: int = 1) -> McEstimate:
    """E||Π(θ + g)|| - E||Π g|| from paired draws."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (cone.dim,):
        raise GeometryError(f"theta has shape {theta.shape}, cone has dimension {cone.dim}")

    def shifted(rows):
        return (np.linalg.norm(project_rows(cone, rows + theta), axis=1)
                - np.linalg.norm(project_rows(cone, rows), axis=1))

    return McEstimate.from_values(mc_map(shifted, cone.dim, n, seed, workers), seed)


def masking_bound(cone: ConeDescriptor, epsilon: float, n: int = 10_000, seed: int = 0) -> McEstimate:
    """Upper bound (ε²/2) E[1/||Π_K' g'||] on the shift along a trailing free coordinate.

    ``cone`` must be a product whose last component is the full line R;
    K' is the product of the remaining components.
    """
    if cone.kind is not ConeKind.PRODUCT:
        raise GeometryError("masking bound needs a product cone")
    comps = cone.params["components"]
    last = comps[-1]
    if not (last.kind is ConeKind.SUBSPACE and last.dim == 1 and last.params["basis"].shape[1] == 1):
        raise GeometryError("masking bound needs a trailing free coordinate")
    head = comps[0] if len(comps) == 2 else product(comps[:-1])
    inverse = mc_map(lambda rows: 1.0 / np.linalg.norm(project_rows(head, rows), axis=1), head.dim, n, seed)
    return McEstimate.from_values(0.5 * epsilon ** 2 * inverse, seed)


# ---------------------------------------------------------------------------
# Candidates on K ∩ S
# ---------------------------------------------------------------------------

def _unit(v):
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else None


def _basis_vector(d, j, sign=1.0):
    e = np.zeros(d)
    e[j] = sign
    return e


def step_vectors(d, centered):
    """Unit monotone vectors with a single jump after the first and before the last coordinate."""
    if d < 2:
        return
    if centered:
        scale = 1.0 / math.sqrt(d * (d - 1))
        first = np.ones(d)
        first[0] = -(d - 1)
        last = -np.ones(d)
        last[-1] = d - 1
        yield first * scale
        yield last * scale
    else:
        first = np.ones(d)
        first[0] = 0.0
        yield first / math.sqrt(d - 1)
        yield -_basis_vector(d, 0)


def _analytic_candidates(cone: ConeDescriptor):
    d, p = cone.dim, cone.params
    kind = cone.kind
    if kind is ConeKind.ORTHANT:
        for j in range(d):
            yield _basis_vector(d, j)
    elif kind is ConeKind.MONOTONE:
        yield np.full(d, 1.0 / math.sqrt(d))
        yield np.full(d, -1.0 / math.sqrt(d))
    elif kind is ConeKind.CIRCULAR:
        alpha, axis = p["alpha"], p["axis"]
        yield axis.copy()
        for u in null_space(axis[None, :]).T:
            yield math.cos(alpha) * axis + math.sin(alpha) * u
            yield math.cos(alpha) * axis - math.sin(alpha) * u
    elif kind is ConeKind.SUBSPACE:
        for col in p["basis"].T:
            yield col.copy()
            yield -col
    elif kind is ConeKind.RAY:
        yield _unit(p["direction"])
    elif kind is ConeKind.GENERATOR:
        for col in p["generators"].T:
            if np.any(col):
                yield _unit(col)
    elif kind is ConeKind.PRODUCT:
        start = 0
        for comp in p["components"]:
            for v in _analytic_candidates(comp):
                out = np.zeros(d)
                out[start:start + comp.dim] = v
                yield out
            start += comp.dim
    elif kind is ConeKind.INDUCED:
        pair = p["pair"]
        if is_constant_line(pair.inner) and pair.outer.kind is ConeKind.MONOTONE:
            yield from step_vectors(d, centered=True)
            return
        for v in _analytic_candidates(pair.outer):
            w = _unit(project_induced(pair, v))
            if w is not None:
                yield w


def is_constant_line(cone: ConeDescriptor) -> bool:
    if cone.kind is not ConeKind.SUBSPACE or cone.params["basis"].shape[1] != 1:
        return False
    col = cone.params["basis"][:, 0]
    return bool(np.allclose(np.abs(col), 1.0 / math.sqrt(cone.dim), atol=1e-12, rtol=0.0)
                and np.all(np.sign(col) == np.sign(col[0])))


def sphere_candidates(cone: ConeDescriptor, n_samples: int = DEFAULT_CANDIDATES, seed: int = 0):
    """Yield unit vectors of K ∩ S: analytic candidates, then normalized projections.

    Every vector is checked for unit norm and membership; a failure raises
    GeometryError.
    """
    def checked(v, origin):
        if abs(np.linalg.norm(v) - 1.0) > SPHERE_TOL or not contains(cone, v):
            raise GeometryError(f"{origin} candidate for {cone.describe()} is not a unit vector in the cone")
        return v

    for v in _analytic_candidates(cone):
        yield checked(v, "analytic")
    if n_samples <= 0:
        return
    rows = project_rows(cone, gaussian_rows(cone.dim, derive_seed(seed, 1), 0, n_samples))
    norms = np.linalg.norm(rows, axis=1)
    for row, norm in zip(rows, norms):
        if norm > 0:
            yield checked(row / norm, "sampled")


def inf_inner_on_sphere(cone: ConeDescriptor, v, n_samples: int = DEFAULT_CANDIDATES, seed: int = 0) -> float:
    """min <η, v> over the candidate set of K ∩ S; +inf when K = {0}."""
    v = np.asarray(v, dtype=float)
    best = math.inf
    for eta in sphere_candidates(cone, n_samples, seed):
        best = min(best, float(eta @ v))
    return best


# ---------------------------------------------------------------------------
# Separation functionals
# ---------------------------------------------------------------------------

def _delta_lr(width: float, inf_inner: float) -> float:
    if inf_inner <= 0.0:
        return width
    return min(width, (width / inf_inner) ** 2)


def _delta_opt(width: float, mean_norm: float) -> float:
    if mean_norm <= 0.0:
        return width
    return min(width, (width / mean_norm) ** 2)


def summarize_geometry(cone: ConeDescriptor, n: int = DEFAULT_SAMPLES, seed: int = 0,
                       n_candidates: int = DEFAULT_CANDIDATES, workers: int = 1) -> GeometrySummary:
    """Width, mean projection and both separation functionals in one pass."""
    if is_zero_cone(cone):
        zero = McEstimate(0.0, 0.0, n, seed)
        return GeometrySummary(cone.describe(), cone.dim, n, seed, zero, zero,
                               np.zeros(cone.dim), np.zeros(cone.dim), math.inf, 0.0, 0.0, 0.0)

    def moments(rows):
        proj = project_rows(cone, rows)
        norms = np.linalg.norm(proj, axis=1)
        return np.column_stack([norms, norms ** 2, proj])

    values_mean, values_se = mc_vector_mean(moments, cone.dim, n, seed, workers)
    width = McEstimate(float(values_mean[0]), float(values_se[0]), n, seed)
    width_sq = McEstimate(float(values_mean[1]), float(values_se[1]), n, seed)
    mean_proj, mean_se = values_mean[2:], values_se[2:]

    sup_inner = float(np.linalg.norm(mean_proj))
    noise = float(np.linalg.norm(mean_se))
    mean_norm = 0.0 if sup_inner <= NOISE_FLOOR_SE * noise else sup_inner
    if mean_norm == 0.0:
        logger.info("mean projection of %s is within noise (%.3g <= %.1f x %.3g); treating it as zero",
                    cone.describe(), sup_inner, NOISE_FLOOR_SE, noise)
    inf_inner = inf_inner_on_sphere(cone, mean_proj, n_candidates, derive_seed(seed, 2))

    delta_lr_sq = _delta_lr(width.mean, inf_inner if mean_norm > 0.0 else 0.0)
    delta_opt_sq = _delta_opt(width.mean, mean_norm)
    if delta_opt_sq > delta_lr_sq * (1.0 + 1e-12):
        raise GeometryError(f"delta_opt^2={delta_opt_sq:.6g} exceeds delta_lr^2={delta_lr_sq:.6g}")
    return GeometrySummary(cone.describe(), cone.dim, n, seed, width, width_sq, mean_proj, mean_se,
                           inf_inner, sup_inner, delta_lr_sq, delta_opt_sq)


def delta_lr_sq(cone: ConeDescriptor, n: int = DEFAULT_SAMPLES, seed: int = 0, workers: int = 1) -> float:
    return summarize_geometry(cone, n, seed, workers=workers).delta_lr_sq


def delta_opt_sq(cone: ConeDescriptor, n: int = DEFAULT_SAMPLES, seed: int = 0, workers: int = 1) -> float:
    return summarize_geometry(cone, n, seed, workers=workers).delta_opt_sq


# ---------------------------------------------------------------------------
# Concentration of ||Π g||
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailRow:
    t: float
    upper: float
    upper_se: float
    lower: float
    lower_se: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.upper <= self.bound + 3 * self.upper_se and self.lower <= self.bound + 3 * self.lower_se


@dataclass(frozen=True)
class ConcentrationReport:
    cone: str
    d: int
    n: int
    seed: int
    mean: float
    variance: float
    variance_se: float
    tails: tuple
    variance_bound: float = 4.0

    def to_rows(self) -> list:
        base = {"cone": self.cone, "d": self.d, "n": self.n, "seed": self.seed, "mean": self.mean,
                "variance": self.variance, "variance_se": self.variance_se,
                "variance_bound": self.variance_bound}
        return [dict(base, t=row.t, upper=row.upper, upper_se=row.upper_se, lower=row.lower,
                     lower_se=row.lower_se, bound=row.bound, holds=row.holds) for row in self.tails]


def _proportion(flags):
    p = float(np.mean(flags))
    return p, math.sqrt(p * (1.0 - p) / len(flags))


def concentration_report(cone: ConeDescriptor, n: int = 20_000, seed: int = 0, ts=(0.5, 1.0, 2.0),
                         workers: int = 1) -> ConcentrationReport:
    """Empirical one-sided tails of ||Π g|| around its mean against exp(-t²/2), and its variance against 4."""
    norms = mc_map(_projection_norms(cone), cone.dim, n, seed, workers)
    mean = float(norms.mean())
    dev = norms - mean
    variance = float(dev.var(ddof=1))
    variance_se = float(np.square(dev).std(ddof=1) / math.sqrt(n))
    tails = []
    for t in ts:
        upper, upper_se = _proportion(dev >= t)
        lower, lower_se = _proportion(dev <= -t)
        tails.append(TailRow(float(t), upper, upper_se, lower, lower_se, math.exp(-t * t / 2.0)))
    report = ConcentrationReport(cone.describe(), cone.dim, n, seed, mean, variance, variance_se, tuple(tails))
    if variance > report.variance_bound + 3 * variance_se:
        logger.warning("variance %.4g of ||Pi g|| exceeds 4 for %s", variance, cone.describe())
    return report


def median_exceedance(cone: ConeDescriptor, n: int = 20_000, seed: int = 0, workers: int = 1) -> McEstimate:
    """Estimate P(||Π g|| > E||Π g||) using the plug-in mean."""
    norms = mc_map(_projection_norms(cone), cone.dim, n, seed, workers)
    if norms.mean() < 128:
        logger.info("width %.1f of %s is below 128; the 7/16 lower bound is not claimed",
                    norms.mean(), cone.describe())
    return McEstimate.from_values((norms > norms.mean()).astype(float), seed)
