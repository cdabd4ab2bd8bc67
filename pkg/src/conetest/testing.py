"""Generalized likelihood ratio testing of cone-vs-cone hypotheses.

For a non-oblique pair C1 ⊆ C2 the GLRT statistic is ||Π_K y||² with
K = C2 ∩ C1*, and the problem reduces to testing θ = 0 against θ ∈ K.
Error curves are simulated with common random numbers: the same noise
matrix feeds the null and every alternative direction, and the rejection
threshold is the best one for the pooled statistics.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from conetest.cones import (
    ConeDescriptor,
    ConeKind,
    ConePair,
    contains,
    make_pair,
    pair_cone,
    project_rows,
    tangent_cone_monotone,
    zero_cone,
)
from conetest.gaussian import McEstimate, derive_seed, gaussian_rows
from conetest.geometry import GeometrySummary, is_constant_line, step_vectors

logger = logging.getLogger(__name__)

DEFAULT_RHO = 0.1
DEFAULT_REPLICATES = 4000
DEFAULT_BISECT_ITERS = 8
DEFAULT_RANDOM_DIRECTIONS = 4
MAX_BRACKET_DOUBLINGS = 12
MONOTONE_VIOLATION_SE = 5.0
CROSS_CHECK_TOL = 1e-8


class RadiusBracketError(RuntimeError):
    """The bisection could not bracket the critical radius."""


@dataclass(frozen=True)
class TestProblem:
    __test__ = False

    pair: ConePair
    sigma: float = 1.0
    epsilon: float = 0.0
    rho: float = DEFAULT_RHO

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if not 0.0 < self.rho < 0.5:
            raise ValueError(f"rho must lie in (0, 0.5), got {self.rho}")

    @property
    def cone(self) -> ConeDescriptor:
        return pair_cone(self.pair)

    @property
    def dim(self) -> int:
        return self.pair.dim


@dataclass(frozen=True)
class ErrorCurvePoint:
    epsilon: float
    threshold: float
    type1: McEstimate
    type2_worst: McEstimate
    total: float
    worst_direction: int
    n_directions: int

    @property
    def total_se(self) -> float:
        return math.hypot(self.type1.stderr, self.type2_worst.stderr)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "threshold": self.threshold,
            "type1": self.type1.mean,
            "type1_se": self.type1.stderr,
            "type2_worst": self.type2_worst.mean,
            "type2_worst_se": self.type2_worst.stderr,
            "total": self.total,
            "worst_direction": self.worst_direction,
            "n_directions": self.n_directions,
        }


@dataclass(frozen=True)
class RadiusEstimate:
    radius: float
    lo: float
    hi: float
    evaluations: tuple = field(repr=False)
    violations: int = 0

    @property
    def radius_sq(self) -> float:
        return self.radius ** 2

    @property
    def bracket_sq(self) -> tuple:
        return self.lo ** 2, self.hi ** 2


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

def glrt_statistics(pair: ConePair, rows) -> np.ndarray:
    """||Π_C2 y - Π_C1 Π_C2 y||² for every row y."""
    cone = pair_cone(pair)
    return np.square(project_rows(cone, rows)).sum(axis=1)


def glrt_statistic(pair: ConePair, y, cross_check: bool = False) -> float:
    """GLRT statistic for one observation.

    With ``cross_check`` the value is compared against the two-projection
    form ||Π_C2 y||² - ||Π_C1 y||².
    """
    y = np.asarray(y, dtype=float)
    value = float(glrt_statistics(pair, y[None, :])[0])
    if cross_check:
        outer = float(np.square(project_rows(pair.outer, y[None, :])).sum())
        inner = float(np.square(project_rows(pair.inner, y[None, :])).sum())
        scale = max(1.0, float(y @ y))
        if abs(value - (outer - inner)) > CROSS_CHECK_TOL * scale:
            raise ValueError(f"GLRT cross-check failed: {value:.12g} vs {outer - inner:.12g}")
    return value


def truncation_statistics(coords, rows) -> np.ndarray:
    """||y_S||² for every row y."""
    rows = np.atleast_2d(rows)
    return np.square(rows[:, list(coords)]).sum(axis=1)


def sweep_threshold(null_stats, alt_stats):
    """Best threshold for the rule 'reject iff T > β'.

    Candidates are -inf and every pooled statistic value. Returns
    (threshold, type1, type2 per alternative) at the minimizer of
    type1 + max_j type2_j; ties go to the smallest threshold.
    """
    null_sorted = np.sort(np.asarray(null_stats, dtype=float))
    alts_sorted = [np.sort(np.asarray(a, dtype=float)) for a in alt_stats]
    if not alts_sorted:
        raise ValueError("at least one alternative is required")
    pooled = np.unique(np.concatenate([null_sorted, *alts_sorted]))
    candidates = np.concatenate([[-np.inf], pooled])
    type1 = 1.0 - np.searchsorted(null_sorted, candidates, side="right") / null_sorted.size
    type2 = np.vstack([np.searchsorted(a, candidates, side="right") / a.size for a in alts_sorted])
    total = type1 + type2.max(axis=0)
    best = int(np.argmin(total))
    return float(candidates[best]), float(type1[best]), type2[:, best]


# ---------------------------------------------------------------------------
# Directions
# ---------------------------------------------------------------------------

def _unit_or_none(v):
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else None


def _embedded(d, start, v):
    out = np.zeros(d)
    out[start:start + v.size] = v
    return out


def _hard_directions(cone: ConeDescriptor) -> list:
    d, p, kind = cone.dim, cone.params, cone.kind
    if kind is ConeKind.ORTHANT:
        out = [np.eye(d)[0], np.full(d, 1.0 / math.sqrt(d))]
        if d > 1:
            out.insert(1, np.eye(d)[-1])
        return out
    if kind is ConeKind.MONOTONE:
        return [np.full(d, 1.0 / math.sqrt(d)), np.full(d, -1.0 / math.sqrt(d)),
                *step_vectors(d, centered=False)]
    if kind is ConeKind.CIRCULAR:
        axis, alpha = p["axis"], p["alpha"]
        other = np.zeros(d)
        other[int(np.argmin(np.abs(axis)))] = 1.0
        u = _unit_or_none(other - (other @ axis) * axis)
        out = [axis.copy()]
        if u is not None:
            out.append(math.cos(alpha) * axis + math.sin(alpha) * u)
        return out
    if kind is ConeKind.SUBSPACE:
        basis = p["basis"]
        return [col.copy() for col in basis.T[:2]]
    if kind is ConeKind.RAY:
        return [_unit_or_none(p["direction"])]
    if kind is ConeKind.GENERATOR:
        return [v for v in (_unit_or_none(c) for c in p["generators"].T[:4]) if v is not None]
    if kind is ConeKind.PRODUCT:
        out, start = [], 0
        for comp in p["components"]:
            out.extend(_embedded(d, start, v) for v in _hard_directions(comp))
            start += comp.dim
        return out
    if kind is ConeKind.INDUCED:
        pair = p["pair"]
        if is_constant_line(pair.inner) and pair.outer.kind is ConeKind.MONOTONE:
            return list(step_vectors(d, centered=True))
        outer_dirs = _hard_directions(pair.outer)
        if not outer_dirs:
            return []
        projected = project_rows(cone, np.vstack(outer_dirs))
        return [v for v in (_unit_or_none(row) for row in projected) if v is not None]
    return []


def default_directions(cone: ConeDescriptor, summary: GeometrySummary = None,
                       n_random: int = DEFAULT_RANDOM_DIRECTIONS, seed: int = 0) -> list:
    """Unit directions in K used to approximate the sup over alternatives.

    The normalized mean projection (when a summary is given), analytic hard
    directions for the cone kind and normalized projections of random draws.
    """
    candidates = []
    if summary is not None:
        candidates.append(_unit_or_none(np.asarray(summary.mean_proj, dtype=float)))
    candidates.extend(_hard_directions(cone))
    if n_random > 0:
        rows = project_rows(cone, gaussian_rows(cone.dim, derive_seed(seed, 3), 0, n_random))
        candidates.extend(_unit_or_none(row) for row in rows)
    out = []
    for v in candidates:
        if v is None or not contains(cone, v):
            continue
        if any(np.allclose(v, w, atol=1e-12, rtol=0.0) for w in out):
            continue
        out.append(v)
    if not out:
        raise ValueError(f"no usable directions for {cone.describe()}")
    return out


def _check_directions(cone: ConeDescriptor, directions) -> np.ndarray:
    directions = [np.asarray(u, dtype=float) for u in directions]
    if not directions:
        raise ValueError("direction list is empty")
    for j, u in enumerate(directions):
        if u.shape != (cone.dim,) or abs(np.linalg.norm(u) - 1.0) > 1e-9:
            raise ValueError(f"direction {j} is not a unit vector of length {cone.dim}")
        if not contains(cone, u):
            raise ValueError(f"direction {j} does not lie in {cone.describe()}")
    return np.vstack(directions)


# ---------------------------------------------------------------------------
# Error curves
# ---------------------------------------------------------------------------

class ErrorCurve:
    """Uniform error of a test as a function of ε, on fixed noise.

    The noise matrix and null statistics are computed once; each call
    only evaluates the alternatives at the requested radius.
    """

    def __init__(self, statistic, sigma, directions, d, n, seed):
        self.statistic = statistic
        self.directions = directions
        self.seed = seed
        self.noise = sigma * gaussian_rows(d, seed, 0, n)
        self.null_stats = statistic(self.noise)

    def __call__(self, epsilon: float) -> ErrorCurvePoint:
        n = self.noise.shape[0]
        alt_stats = [self.statistic(epsilon * u + self.noise) for u in self.directions]
        threshold, type1, type2 = sweep_threshold(self.null_stats, alt_stats)
        worst = int(np.argmax(type2))
        type2_worst = float(type2[worst])
        return ErrorCurvePoint(
            epsilon=float(epsilon),
            threshold=threshold,
            type1=McEstimate(type1, math.sqrt(type1 * (1 - type1) / n), n, self.seed),
            type2_worst=McEstimate(type2_worst, math.sqrt(type2_worst * (1 - type2_worst) / n), n, self.seed),
            total=type1 + type2_worst,
            worst_direction=worst,
            n_directions=len(self.directions),
        )


def _glrt_curve(problem: TestProblem, directions, n, seed) -> ErrorCurve:
    cone = problem.cone
    dirs = _check_directions(cone, directions if directions is not None else default_directions(cone, seed=seed))
    return ErrorCurve(lambda rows: glrt_statistics(problem.pair, rows), problem.sigma, dirs, problem.dim, n, seed)


def _truncation_curve(problem: TestProblem, coords, directions, n, seed) -> ErrorCurve:
    coords = sorted(set(int(c) for c in coords))
    if not coords or coords[0] < 0 or coords[-1] >= problem.dim:
        raise ValueError(f"coordinate set must be a nonempty subset of [0, {problem.dim})")
    cone = problem.cone
    dirs = _check_directions(cone, directions if directions is not None else default_directions(cone, seed=seed))
    return ErrorCurve(lambda rows: truncation_statistics(coords, rows), problem.sigma, dirs, problem.dim, n, seed)


def uniform_error_glrt(problem: TestProblem, directions=None, n: int = DEFAULT_REPLICATES,
                       seed: int = 0) -> ErrorCurvePoint:
    """Type I error plus worst type II error of the GLRT at radius problem.epsilon."""
    return _glrt_curve(problem, directions, n, seed)(problem.epsilon)


def truncation_test_error(problem: TestProblem, coords, directions=None, n: int = DEFAULT_REPLICATES,
                          seed: int = 0) -> ErrorCurvePoint:
    """Uniform error of the test that rejects when ||y_S||² is large."""
    return _truncation_curve(problem, coords, directions, n, seed)(problem.epsilon)


# ---------------------------------------------------------------------------
# Radius bisection
# ---------------------------------------------------------------------------

def _initial_upper(d: int, sigma: float) -> float:
    return sigma * (3.0 + 2.0 * d ** 0.25)


def _count_violations(points) -> int:
    ordered = sorted(points, key=lambda p: p.epsilon)
    violations = 0
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if b.total > a.total + MONOTONE_VIOLATION_SE * math.hypot(a.total_se, b.total_se):
                violations += 1
    return violations


def bisect_radius(curve, rho: float, eps_lo: float = 0.0, eps_hi: float = None, bisect_iters: int = 8,
                  scale_hint: float = 1.0, log=None) -> RadiusEstimate:
    """Smallest ε with curve(ε).total <= rho, to bisect_iters halvings.

    The upper end is doubled until it qualifies; failing that after
    MAX_BRACKET_DOUBLINGS the search raises RadiusBracketError.
    """
    if log is None:
        log = logger.info
    if not 0.0 < rho < 0.5:
        raise ValueError(f"rho must lie in (0, 0.5), got {rho}")
    points = []

    def evaluate(eps):
        point = curve(eps)
        points.append(point)
        return point

    lo = max(0.0, float(eps_lo))
    hi = float(eps_hi) if eps_hi is not None else max(scale_hint, lo * 2.0, 1e-3)
    if hi <= lo:
        raise RadiusBracketError(f"upper radius {hi} does not exceed lower radius {lo}")

    top = evaluate(hi)
    doublings = 0
    while top.total > rho:
        if doublings >= MAX_BRACKET_DOUBLINGS:
            raise RadiusBracketError(
                f"error {top.total:.3f} still above rho={rho} at epsilon={hi:.4g} after {doublings} doublings")
        lo, hi = hi, hi * 2.0
        doublings += 1
        top = evaluate(hi)
    if doublings == 0 and lo > 0.0 and evaluate(lo).total <= rho:
        raise RadiusBracketError(f"error already below rho={rho} at the lower radius {lo:.4g}")

    for _ in range(bisect_iters):
        mid = 0.5 * (lo + hi)
        if evaluate(mid).total <= rho:
            hi = mid
        else:
            lo = mid

    violations = _count_violations(points)
    if violations:
        log(f"[WARN] error curve not monotone in epsilon: {violations} pair(s) beyond "
            f"{MONOTONE_VIOLATION_SE:g} SE")
    log(f"[INFO] radius bracket [{lo:.4g}, {hi:.4g}] after {len(points)} evaluations")
    return RadiusEstimate(0.5 * (lo + hi), lo, hi, tuple(points), violations)


def glrt_radius(problem: TestProblem, eps_lo: float = 0.0, eps_hi: float = None,
                bisect_iters: int = DEFAULT_BISECT_ITERS, n: int = DEFAULT_REPLICATES, seed: int = 0,
                directions=None, log=None) -> RadiusEstimate:
    """Critical radius of the GLRT for problem.pair at level problem.rho."""
    curve = _glrt_curve(problem, directions, n, seed)
    return bisect_radius(curve, problem.rho, eps_lo, eps_hi, bisect_iters,
                         _initial_upper(problem.dim, problem.sigma), log)


def truncation_radius(problem: TestProblem, coords, eps_lo: float = 0.0, eps_hi: float = None,
                      bisect_iters: int = DEFAULT_BISECT_ITERS, n: int = DEFAULT_REPLICATES, seed: int = 0,
                      directions=None, log=None) -> RadiusEstimate:
    """Critical radius of the truncation test on the coordinates ``coords``."""
    curve = _truncation_curve(problem, coords, directions, n, seed)
    return bisect_radius(curve, problem.rho, eps_lo, eps_hi, bisect_iters,
                         _initial_upper(problem.dim, problem.sigma), log)


def kpiece_radius(theta0, sigma: float = 1.0, rho: float = DEFAULT_RHO, bisect_iters: int = DEFAULT_BISECT_ITERS,
                  n: int = DEFAULT_REPLICATES, seed: int = 0, n_random: int = DEFAULT_RANDOM_DIRECTIONS,
                  log=None) -> RadiusEstimate:
    """GLRT radius for θ0 against the tangent cone of the monotone cone at θ0."""
    tangent = tangent_cone_monotone(theta0)
    problem = TestProblem(make_pair(zero_cone(tangent.dim), tangent), sigma=sigma, rho=rho)
    directions = default_directions(tangent, n_random=n_random, seed=seed)
    return glrt_radius(problem, bisect_iters=bisect_iters, n=n, seed=seed, directions=directions, log=log)
