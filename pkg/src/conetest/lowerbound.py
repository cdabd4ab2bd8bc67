"""Minimax lower bounds on the critical radius from priors over the alternative.

Every prior puts mass on unit-or-larger vectors η of a cone; the alternative
is θ = ε η. For two independent draws η, η' the second moment of the
likelihood ratio is E exp(ε² <η, η'> / σ²), and any test's uniform error is
at least 1 - ½ sqrt(moment - 1). The sparse orthant prior has an exact
moment; the other priors are estimated by Monte Carlo on cached inner
products.
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.special import comb, gammaln, logsumexp
from scipy.stats import norm

from conetest.cones import ConeDescriptor, monotone, orthant, project_rows
from conetest.gaussian import McEstimate, RngStream, derive_seed, mc_map

logger = logging.getLogger(__name__)

FG_DELTA = 9
FG_RATIO = 1.0 / 3.0
MAX_REJECTION_TRIES = 10_000
HEAVY_TAIL_SHARE = 0.5
MAX_SUPPORT_ENUMERATION = 100_000
DEFAULT_PAIRS = 10_000


class PriorError(RuntimeError):
    """A prior could not be built or sampled as required."""


# ---------------------------------------------------------------------------
# Priors
# ---------------------------------------------------------------------------

class PriorSampler:
    """Base class: draws one prior vector per RNG stream."""

    name = "prior"

    def __init__(self, cone: ConeDescriptor):
        self.cone = cone
        self.d = cone.dim

    def sample(self, stream: RngStream) -> np.ndarray:
        raise NotImplementedError

    def sample_rows(self, seed: int, start: int, stop: int) -> np.ndarray:
        return np.vstack([self.sample(RngStream(seed, i)) for i in range(start, stop)])

    def describe(self) -> dict:
        return {"prior": self.name, "d": self.d}


class ProjectionPrior(PriorSampler):
    """η = Π g / (w/2) conditioned on ||Π g|| >= w/2, so ||η|| >= 1."""

    name = "projection"

    def __init__(self, cone: ConeDescriptor, width: float):
        super().__init__(cone)
        if not width > 0:
            raise PriorError(f"projection prior needs a positive width, got {width}")
        self.width = float(width)

    def sample(self, stream: RngStream) -> np.ndarray:
        gen = stream.generator()
        half = 0.5 * self.width
        for _ in range(MAX_REJECTION_TRIES):
            proj = project_rows(self.cone, gen.standard_normal(self.d)[None, :])[0]
            if np.linalg.norm(proj) >= half:
                return proj / half
        raise PriorError(f"projection prior rejected {MAX_REJECTION_TRIES} draws for {self.cone.describe()}")


class OrthantSparsePrior(PriorSampler):
    """Uniform over s-subsets S with s = floor(sqrt(d)); η = 1_S / sqrt(s)."""

    name = "orthant-sparse"

    def __init__(self, d: int, s: int = None):
        super().__init__(orthant(d))
        self.s = math.isqrt(d) if s is None else int(s)
        if not 1 <= self.s <= d:
            raise PriorError(f"sparse orthant prior needs 1 <= s <= d, got s={self.s}, d={d}")

    @property
    def has_exact_moment(self) -> bool:
        return 2 * self.s <= self.d

    def sample(self, stream: RngStream) -> np.ndarray:
        support = stream.generator().choice(self.d, size=self.s, replace=False)
        eta = np.zeros(self.d)
        eta[support] = 1.0 / math.sqrt(self.s)
        return eta

    def describe(self) -> dict:
        return dict(super().describe(), s=self.s)


def monotone_fg_partition(d: int, remainder: str = "first"):
    """Block count m and block lengths for the monotone prior.

    With α = log_9 d + 3, the i-th length is floor(8/9^i (d + α)); m is the
    largest count whose lengths sum below d. The leftover coordinates go to
    the first block (``remainder="first"``), which keeps every ratio
    ℓ_i / ℓ_(i+1) >= 9, or to the last block (``remainder="last"``).
    """
    if remainder not in ("first", "last"):
        raise PriorError(f"remainder must be 'first' or 'last', got {remainder!r}")
    if d < 2:
        raise PriorError(f"monotone prior needs d >= 2, got {d}")
    alpha = math.log(d, FG_DELTA) + 3.0
    lengths, total = [], 0
    i = 1
    while True:
        ell = math.floor((FG_DELTA - 1) / FG_DELTA ** i * (d + alpha))
        if ell < 1 or total + ell >= d:
            break
        lengths.append(ell)
        total += ell
        i += 1
    if not lengths:
        raise PriorError(f"monotone prior has no admissible block at d={d}")
    if remainder == "first":
        lengths[0] += d - total
    elif len(lengths) == 1:
        lengths[0] = d
    else:
        lengths[-1] = d - sum(lengths[:-1])
    return len(lengths), lengths


class MonotoneFGPrior(PriorSampler):
    """Block-step prior on the monotone cone.

    With m blocks of lengths ℓ_1, ..., ℓ_m, G is the m x m lower-triangular
    matrix G_ij = (1/3)^(i-j) and F the d x m matrix with F_kj = 1/sqrt(ℓ_j) on
    block j. A draw picks b uniformly among the vectors with s = floor(sqrt(m))
    entries equal to 1/sqrt(s) and returns F G b, centered to mean zero when
    ``centered``. Block values only grow because ℓ_j >= 9 ℓ_(j+1).
    """

    name = "monotone-fg"

    def __init__(self, d: int, centered: bool = False, remainder: str = "first"):
        super().__init__(monotone(d))
        self.centered = centered
        self.remainder = remainder
        self.m, self.lengths = monotone_fg_partition(d, remainder)
        self.s = math.isqrt(self.m)
        lag = np.subtract.outer(np.arange(self.m), np.arange(self.m))
        self.G = np.tril(FG_RATIO ** np.clip(lag, 0, None))
        self.F = np.zeros((d, self.m))
        start = 0
        for i, ell in enumerate(self.lengths):
            self.F[start:start + ell, i] = 1.0 / math.sqrt(ell)
            start += ell

    @property
    def norm_floor(self) -> float:
        return 9.0 / 4.0 - 63.0 / (32.0 * self.s)

    def vector(self, support) -> np.ndarray:
        b = np.zeros(self.m)
        b[list(support)] = 1.0 / math.sqrt(self.s)
        eta = np.repeat(self.G @ b / np.sqrt(self.lengths), self.lengths)
        if self.centered:
            eta = eta - eta.mean()
        return eta

    def _validate(self, eta, support):
        if np.any(eta[1:] < eta[:-1]):
            raise PriorError(f"monotone prior draw is not nondecreasing at d={self.d}, m={self.m} "
                             f"(support {sorted(int(b) for b in support)})")
        if np.linalg.norm(eta) < 1.0 - 1e-12:
            raise PriorError(f"monotone prior draw has norm {np.linalg.norm(eta):.4g} < 1 at d={self.d}, "
                             f"m={self.m}" + (" (centered)" if self.centered else ""))

    def sample(self, stream: RngStream) -> np.ndarray:
        support = stream.generator().choice(self.m, size=self.s, replace=False)
        eta = self.vector(support)
        self._validate(eta, support)
        return eta

    def support_report(self) -> dict:
        """Check every support of size s by enumeration: monotonicity and norm range."""
        count = int(comb(self.m, self.s, exact=True))
        if count > MAX_SUPPORT_ENUMERATION:
            raise PriorError(f"{count} supports are too many to enumerate")
        norms, monotone_ok = [], True
        for support in combinations(range(self.m), self.s):
            eta = self.vector(support)
            norms.append(float(np.linalg.norm(eta)))
            monotone_ok = monotone_ok and bool(np.all(eta[1:] >= eta[:-1]))
        return {"d": self.d, "m": self.m, "s": self.s, "lengths": list(self.lengths), "supports": count,
                "centered": self.centered, "monotone": monotone_ok, "min_norm": min(norms),
                "max_norm": max(norms), "valid": monotone_ok and min(norms) >= 1.0 - 1e-12}

    def describe(self) -> dict:
        return dict(super().describe(), m=self.m, s=self.s, centered=self.centered, remainder=self.remainder)


def sample_projection_prior(cone: ConeDescriptor, width: float, stream: RngStream) -> np.ndarray:
    return ProjectionPrior(cone, width).sample(stream)


def sample_orthant_sparse(d: int, stream: RngStream) -> np.ndarray:
    return OrthantSparsePrior(d).sample(stream)


def build_monotone_fg(d: int, centered: bool = False, remainder: str = "first") -> MonotoneFGPrior:
    return MonotoneFGPrior(d, centered, remainder)


def projection_prior_acceptance(cone: ConeDescriptor, width: float, n: int = 10_000, seed: int = 0) -> McEstimate:
    """Probability that ||Π g|| >= width/2."""
    accepted = mc_map(lambda rows: np.linalg.norm(project_rows(cone, rows), axis=1) >= 0.5 * width,
                      cone.dim, n, seed)
    return McEstimate.from_values(accepted, seed)


# ---------------------------------------------------------------------------
# Second moments
# ---------------------------------------------------------------------------

def _log_binom(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def orthant_chi2_log_moment(d: int, s: int, lam: float) -> float:
    """log E exp(λ |S ∩ S'| / s) for independent uniform s-subsets of [d]."""
    if not 1 <= s <= d / 2:
        raise PriorError(f"need 1 <= s <= d/2, got s={s}, d={d}")
    if lam < 0:
        raise PriorError(f"lambda must be nonnegative, got {lam}")
    i = np.arange(s + 1)
    log_terms = _log_binom(s, i) + _log_binom(d - s, s - i) - _log_binom(d, s) + lam * i / s
    return float(logsumexp(log_terms))


def orthant_chi2_moment_exact(d: int, s: int, lam: float) -> float:
    log_moment = orthant_chi2_log_moment(d, s, lam)
    if log_moment > np.log(np.finfo(float).max):
        logger.warning("orthant moment overflows at d=%d, s=%d, lambda=%.4g", d, s, lam)
        return math.inf
    return math.exp(log_moment)


def orthant_moment_coefficients(d: int, s: int) -> np.ndarray:
    """Coefficients A_i with E exp(λ<η,η'>) = Σ_i A_i z^i / i!, z = e^(λ/s).

    A_i = (s! (d-s)!)² / ((s-i)!² d! (d-2s+i)!), so that
    A_i / A_(i-1) = (s-i+1)² / (d-2s+i).
    """
    if not 1 <= s <= d / 2:
        raise PriorError(f"need 1 <= s <= d/2, got s={s}, d={d}")
    i = np.arange(s + 1)
    log_a = (2.0 * (gammaln(s + 1) + gammaln(d - s + 1)) - 2.0 * gammaln(s - i + 1)
             - gammaln(d + 1) - gammaln(d - 2 * s + i + 1))
    return np.exp(log_a)


def orthant_moment_bound(d: int, lam: float) -> float:
    """exp(exp((2 + λ)/(√d - 1)) - (1 - 1/√d)²), valid for d >= 4."""
    if d < 4:
        raise PriorError(f"moment bound needs d >= 4, got {d}")
    root = math.sqrt(d)
    return math.exp(math.exp((2.0 + lam) / (root - 1.0)) - (1.0 - 1.0 / root) ** 2)


def pair_inner_products(sampler: PriorSampler, n_pairs: int = DEFAULT_PAIRS, seed: int = 0,
                        block: int = 256) -> np.ndarray:
    """<η_k, η'_k> for n_pairs independent pairs; η uses streams [0, n), η' uses [n, 2n)."""
    if n_pairs < 2:
        raise PriorError("need at least two prior pairs")
    out = np.empty(n_pairs)
    for start in range(0, n_pairs, block):
        stop = min(start + block, n_pairs)
        left = sampler.sample_rows(seed, start, stop)
        right = sampler.sample_rows(seed, n_pairs + start, n_pairs + stop)
        out[start:stop] = np.einsum("ij,ij->i", left, right)
    return out


def moment_from_inner_products(inner, lam: float):
    """Log-mean-exp estimate of E exp(λ <η, η'>) with its standard error.

    Returns (moment, stderr, heavy_tail); heavy_tail flags that the top 1%
    of terms carries more than half of the total.
    """
    inner = np.asarray(inner, dtype=float)
    n = inner.size
    terms = lam * inner
    peak = float(terms.max())
    weights = np.exp(terms - peak)
    log_moment = float(logsumexp(terms) - math.log(n))
    moment = math.exp(log_moment) if log_moment < 709.0 else math.inf
    stderr = math.exp(peak) * float(weights.std(ddof=1)) / math.sqrt(n) if peak < 709.0 else math.inf
    top = max(1, n // 100)
    heavy_tail = bool(np.sort(weights)[-top:].sum() > HEAVY_TAIL_SHARE * weights.sum())
    return moment, stderr, heavy_tail


# ---------------------------------------------------------------------------
# Error bounds and radii
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LowerBoundPoint:
    epsilon: float
    moment: float
    moment_se: float
    error_lb: float
    method: str
    heavy_tail: bool = False
    n_pairs: int = 0
    seed: int = 0

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "moment": self.moment, "moment_se": self.moment_se,
                "error_lb": self.error_lb, "method": self.method, "heavy_tail": self.heavy_tail,
                "n_pairs": self.n_pairs, "seed": self.seed}


@dataclass(frozen=True)
class LowerRadiusEstimate:
    radius: float
    lo: float
    hi: float
    method: str
    points: tuple = field(repr=False, default=())

    @property
    def radius_sq(self) -> float:
        return self.radius ** 2


def error_lower_bound(moment: float) -> float:
    """1 - ½ sqrt(moment - 1), clipped to [0, 1]."""
    if math.isinf(moment):
        return 0.0
    return min(1.0, max(0.0, 1.0 - 0.5 * math.sqrt(max(moment - 1.0, 0.0))))


def simple_vs_simple_error(epsilon: float, sigma: float = 1.0) -> float:
    """Minimal total error for θ = 0 against a single point at distance ε: 2Φ(-ε/2σ)."""
    return float(2.0 * norm.cdf(-epsilon / (2.0 * sigma)))


class _MomentCurve:
    """Second moment as a function of ε for a fixed prior and fixed pairs."""

    def __init__(self, sampler: PriorSampler, n_pairs: int, seed: int, sigma: float, method: str):
        self.sampler = sampler
        self.sigma = sigma
        self.seed = seed
        exact_ok = isinstance(sampler, OrthantSparsePrior) and sampler.has_exact_moment
        if method == "auto":
            method = "exact" if exact_ok else "mc"
        if method == "exact" and not exact_ok:
            raise PriorError(f"no exact moment for the {sampler.name} prior at d={sampler.d}")
        self.method = method
        self.n_pairs = 0 if method == "exact" else n_pairs
        self.inner = None if method == "exact" else pair_inner_products(sampler, n_pairs, seed)

    def __call__(self, epsilon: float) -> LowerBoundPoint:
        if epsilon < 0:
            raise PriorError(f"epsilon must be nonnegative, got {epsilon}")
        lam = epsilon ** 2 / self.sigma ** 2
        if epsilon == 0:
            return LowerBoundPoint(0.0, 1.0, 0.0, 1.0, self.method, False, self.n_pairs, self.seed)
        if self.method == "exact":
            moment = orthant_chi2_moment_exact(self.sampler.d, self.sampler.s, lam)
            stderr, heavy = 0.0, False
        else:
            moment, stderr, heavy = moment_from_inner_products(self.inner, lam)
            if heavy:
                logger.warning("moment estimate at epsilon=%.4g is dominated by a few pairs", epsilon)
            if moment < 1.0 - 3.0 * stderr - 1e-12:
                raise PriorError(f"second moment {moment:.6g} is below 1 beyond Monte Carlo noise")
        return LowerBoundPoint(float(epsilon), moment, stderr, error_lower_bound(moment), self.method,
                               heavy, self.n_pairs, self.seed)


def chi2_error_lower_bound(sampler: PriorSampler, epsilon: float, n_pairs: int = DEFAULT_PAIRS, seed: int = 0,
                           sigma: float = 1.0, method: str = "auto") -> LowerBoundPoint:
    """Lower bound on the uniform error of any test at radius ε under the prior."""
    return _MomentCurve(sampler, n_pairs, seed, sigma, method)(epsilon)


def minimax_lower_radius(sampler: PriorSampler, rho: float = 0.1, bisect_iters: int = 30,
                         n_pairs: int = DEFAULT_PAIRS, seed: int = 0, sigma: float = 1.0,
                         method: str = "auto", log=None) -> LowerRadiusEstimate:
    """Largest ε whose error lower bound still reaches rho."""
    if log is None:
        log = logger.info
    if not 0.0 < rho < 0.5:
        raise PriorError(f"rho must lie in (0, 0.5), got {rho}")
    curve = _MomentCurve(sampler, n_pairs, seed, sigma, method)
    points = []

    def evaluate(eps):
        point = curve(eps)
        points.append(point)
        return point

    lo, hi = 0.0, sigma
    while evaluate(hi).error_lb >= rho:
        lo, hi = hi, hi * 2.0
        if hi > 1e6 * sigma:
            raise PriorError("error lower bound never drops below rho")
    for _ in range(bisect_iters):
        mid = 0.5 * (lo + hi)
        if evaluate(mid).error_lb >= rho:
            lo = mid
        else:
            hi = mid
    log(f"[INFO] {sampler.name} lower radius bracket [{lo:.4g}, {hi:.4g}] ({curve.method})")
    return LowerRadiusEstimate(0.5 * (lo + hi), lo, hi, curve.method, tuple(points))


def lower_bound_curve(sampler: PriorSampler, epsilons, n_pairs: int = DEFAULT_PAIRS, seed: int = 0,
                      sigma: float = 1.0, method: str = "auto") -> list:
    curve = _MomentCurve(sampler, n_pairs, seed, sigma, method)
    return [curve(float(eps)) for eps in epsilons]


def projection_prior_for(cone: ConeDescriptor, n: int = 20_000, seed: int = 0) -> ProjectionPrior:
    """Projection prior with the width estimated on an independent seed."""
    from conetest.geometry import estimate_width

    width, _ = estimate_width(cone, n, derive_seed(seed, 4))
    return ProjectionPrior(cone, width.mean)
