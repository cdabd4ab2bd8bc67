"""Closed convex cones and Euclidean projections onto them.

A cone is an immutable ``ConeDescriptor``; every operation dispatches on its
kind. Projections are exact where a closed form or a finite algorithm
exists (orthant, monotone via pool-adjacent-violators, circular, subspace,
ray, products) and iterative where none does (NNLS for generator cones,
Dykstra's alternating projections for halfspace intersections). Iterative
projections check their own accuracy and raise ``ProjectionError`` instead
of returning an unconverged point.

Pairs of nested cones carry a non-obliqueness certificate. Only certified
pairs may be used to build the induced cone C2 ∩ C1*.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import isotonic_regression, nnls

logger = logging.getLogger(__name__)

MEMBERSHIP_TOL = 1e-9
ORTHONORMAL_TOL = 1e-12
DYKSTRA_TOL = 1e-10
DYKSTRA_MAX_CYCLES = 100_000
NNLS_KKT_TOL = 1e-9
OBLIQUE_TOL = 1e-8


class ConeError(ValueError):
    """A cone was described with malformed parameters."""


class ProjectionError(RuntimeError):
    """An iterative projection failed its convergence check."""

    def __init__(self, message, residual, iterations, best=None):
        super().__init__(f"{message} (residual={residual:.3g}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations
        self.best = best


class ObliquePairError(ValueError):
    """An induced cone was requested for a pair without a certificate."""


class ConeKind(str, Enum):
    ORTHANT = "orthant"
    MONOTONE = "monotone"
    CIRCULAR = "circular"
    SUBSPACE = "subspace"
    RAY = "ray"
    GENERATOR = "generator"
    HALFSPACE = "halfspace"
    PRODUCT = "product"
    INDUCED = "induced"


class CertificateStatus(str, Enum):
    TRUSTED_ANALYTIC = "trusted_analytic"
    NUMERICALLY_CHECKED = "numerically_checked"
    UNCHECKED = "unchecked"
    OBLIQUE = "oblique"


@dataclass(frozen=True)
class Certificate:
    status: CertificateStatus
    n_samples: int = 0
    max_residual: float = 0.0

    @property
    def usable(self) -> bool:
        return self.status in (CertificateStatus.TRUSTED_ANALYTIC,
                               CertificateStatus.NUMERICALLY_CHECKED)


@dataclass(frozen=True, eq=False)
class ConeDescriptor:
    """Immutable description of a closed convex cone in R^dim.

    ``params`` holds the kind-specific data: ``alpha``/``axis`` for circular
    cones, ``basis`` (dim x k, orthonormal columns) for subspaces,
    ``direction`` for rays, ``generators`` (dim x p) for generator cones,
    ``constraints`` (m x dim) for halfspace cones, ``components`` for
    products and ``pair`` for induced cones.
    """

    kind: ConeKind
    dim: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise ConeError(f"dim must be a positive integer, got {self.dim!r}")
        _validate_params(self)

    def describe(self) -> str:
        if self.kind is ConeKind.CIRCULAR:
            return f"circular(alpha={self.params['alpha']:.4g}, d={self.dim})"
        if self.kind is ConeKind.SUBSPACE:
            return f"subspace(k={self.params['basis'].shape[1]}, d={self.dim})"
        if self.kind is ConeKind.PRODUCT:
            inner = " x ".join(c.describe() for c in self.params["components"])
            return f"product({inner})"
        if self.kind is ConeKind.INDUCED:
            pair = self.params["pair"]
            return f"induced({pair.inner.describe()} in {pair.outer.describe()})"
        return f"{self.kind.value}(d={self.dim})"


@dataclass(frozen=True, eq=False)
class ConePair:
    """A nested pair C1 ⊆ C2 of cones in the same dimension."""

    inner: ConeDescriptor
    outer: ConeDescriptor
    certificate: Certificate = Certificate(CertificateStatus.UNCHECKED)

    @property
    def dim(self) -> int:
        return self.outer.dim


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=float)
    out.setflags(write=False)
    return out


def _validate_params(cone: ConeDescriptor):
    kind, d, p = cone.kind, cone.dim, cone.params
    if kind is ConeKind.CIRCULAR:
        alpha = p.get("alpha")
        if alpha is None or not 0.0 < alpha < math.pi / 2:
            raise ConeError(f"circular cone needs alpha in (0, pi/2), got {alpha!r}")
        if d < 2:
            raise ConeError("circular cone needs d >= 2")
        axis = p["axis"]
        if axis.shape != (d,) or abs(np.linalg.norm(axis) - 1.0) > ORTHONORMAL_TOL:
            raise ConeError("circular cone axis must be a unit vector of length d")
    elif kind is ConeKind.SUBSPACE:
        basis = p["basis"]
        if basis.ndim != 2 or basis.shape[0] != d:
            raise ConeError(f"subspace basis must have {d} rows")
        k = basis.shape[1]
        if k > d:
            raise ConeError(f"subspace dimension {k} exceeds ambient dimension {d}")
        if k and np.max(np.abs(basis.T @ basis - np.eye(k))) > ORTHONORMAL_TOL:
            raise ConeError("subspace basis columns are not orthonormal")
    elif kind is ConeKind.RAY:
        direction = p["direction"]
        if direction.shape != (d,) or not np.any(direction):
            raise ConeError("ray direction must be a nonzero vector of length d")
    elif kind is ConeKind.GENERATOR:
        gens = p["generators"]
        if gens.ndim != 2 or gens.shape[0] != d or gens.shape[1] < 1:
            raise ConeError(f"generator matrix must be {d} x p with p >= 1")
        if not np.any(gens):
            raise ConeError("generator matrix is zero")
    elif kind is ConeKind.HALFSPACE:
        rows = p["constraints"]
        if rows.ndim != 2 or rows.shape[1] != d or rows.shape[0] < 1:
            raise ConeError(f"constraint matrix must be m x {d} with m >= 1")
        if np.any(~np.any(rows, axis=1)):
            raise ConeError("constraint matrix has a zero row")
    elif kind is ConeKind.PRODUCT:
        comps = p["components"]
        if not comps:
            raise ConeError("product cone needs at least one component")
        if sum(c.dim for c in comps) != d:
            raise ConeError("product component dimensions do not sum to d")
    elif kind is ConeKind.INDUCED:
        pair = p["pair"]
        if pair.inner.dim != d or pair.outer.dim != d:
            raise ConeError("induced cone dimension mismatch")


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def orthant(d: int) -> ConeDescriptor:
    return ConeDescriptor(ConeKind.ORTHANT, d)


def monotone(d: int) -> ConeDescriptor:
    return ConeDescriptor(ConeKind.MONOTONE, d)


def circular(alpha: float, d: int, axis=None) -> ConeDescriptor:
    """Circular cone {x : <x, axis> >= cos(alpha) ||x||}, axis defaults to e1."""
    if axis is None:
        axis = np.zeros(d)
        axis[0] = 1.0
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0:
        raise ConeError("circular cone axis is zero")
    return ConeDescriptor(ConeKind.CIRCULAR, d, {"alpha": float(alpha), "axis": _frozen(axis / norm)})


def subspace(basis) -> ConeDescriptor:
    basis = np.asarray(basis, dtype=float)
    if basis.ndim == 1:
        basis = basis[:, None]
    return ConeDescriptor(ConeKind.SUBSPACE, basis.shape[0], {"basis": _frozen(basis)})


def span(vectors, d: int = None) -> ConeDescriptor:
    """Subspace spanned by the given columns, orthonormalized."""
    vectors = np.asarray(vectors, dtype=float)
    if vectors.ndim == 1:
        vectors = vectors[:, None]
    if vectors.size == 0:
        return zero_cone(d if d is not None else vectors.shape[0])
    q, r = np.linalg.qr(vectors)
    keep = np.abs(np.diag(r)) > 1e-12 * max(1.0, np.max(np.abs(r)))
    return subspace(q[:, keep])


def zero_cone(d: int) -> ConeDescriptor:
    return subspace(np.zeros((d, 0)))


def full_space(d: int) -> ConeDescriptor:
    return subspace(np.eye(d))


def constant_line(d: int) -> ConeDescriptor:
    return subspace(np.full((d, 1), 1.0 / math.sqrt(d)))


def ray(direction) -> ConeDescriptor:
    direction = np.asarray(direction, dtype=float)
    return ConeDescriptor(ConeKind.RAY, direction.shape[0], {"direction": _frozen(direction)})


def generator_cone(generators) -> ConeDescriptor:
    """Cone {X beta : beta >= 0} generated by the columns of X."""
    generators = np.atleast_2d(np.asarray(generators, dtype=float))
    return ConeDescriptor(ConeKind.GENERATOR, generators.shape[0], {"generators": _frozen(generators)})


def halfspace_cone(constraints) -> ConeDescriptor:
    """Cone {x : A x <= 0}."""
    constraints = np.atleast_2d(np.asarray(constraints, dtype=float))
    return ConeDescriptor(ConeKind.HALFSPACE, constraints.shape[1], {"constraints": _frozen(constraints)})


def product(components) -> ConeDescriptor:
    components = tuple(components)
    return ConeDescriptor(ConeKind.PRODUCT, sum(c.dim for c in components), {"components": components})


def induced(pair: "ConePair") -> ConeDescriptor:
    """The cone C2 ∩ C1* of a certified pair."""
    _require_certificate(pair)
    return ConeDescriptor(ConeKind.INDUCED, pair.dim, {"pair": pair})


def pair_cone(pair: ConePair) -> ConeDescriptor:
    """Cone of alternatives after reduction: C2 itself when C1 = {0}."""
    if is_zero_cone(pair.inner):
        return pair.outer
    return induced(pair)


def is_zero_cone(cone: ConeDescriptor) -> bool:
    return cone.kind is ConeKind.SUBSPACE and cone.params["basis"].shape[1] == 0


def k_ell_product_cone(d: int, ell: int, alpha: float) -> ConeDescriptor:
    """Circular cone in R^(d-1) around 1_S/sqrt(ell), S = first ell coords, times R."""
    if not 1 <= ell <= d - 1:
        raise ConeError(f"ell must lie in [1, {d - 1}], got {ell}")
    axis = np.zeros(d - 1)
    axis[:ell] = 1.0 / math.sqrt(ell)
    return product([circular(alpha, d - 1, axis), full_space(1)])


def monotone_constraints(d: int) -> np.ndarray:
    """Rows e_i - e_(i+1), so that A x <= 0 describes the monotone cone."""
    rows = np.zeros((d - 1, d))
    idx = np.arange(d - 1)
    rows[idx, idx] = 1.0
    rows[idx, idx + 1] = -1.0
    return rows


def convexity_cone(t) -> ConeDescriptor:
    """Convex sequences on the design points t: consecutive slopes are nondecreasing."""
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 3:
        raise ConeError("convexity cone needs at least three design points")
    gaps = np.diff(t)
    if np.any(gaps <= 0):
        raise ConeError("design points must be strictly increasing")
    n = t.size
    rows = np.zeros((n - 2, n))
    for i in range(n - 2):
        # slope_i - slope_(i+1) <= 0
        rows[i, i] += -1.0 / gaps[i]
        rows[i, i + 1] += 1.0 / gaps[i] + 1.0 / gaps[i + 1]
        rows[i, i + 2] += -1.0 / gaps[i + 1]
    return halfspace_cone(rows)


def treatment_equal_cone(d: int, group) -> ConeDescriptor:
    """Treatments in ``group`` equal the control (index 0), the rest dominate it."""
    group = set(int(i) for i in group)
    if 0 not in group or not group <= set(range(d)):
        raise ConeError("group must contain the control index 0 and lie in [0, d)")
    rows = []
    for i in range(1, d):
        row = np.zeros(d)
        row[0], row[i] = 1.0, -1.0
        rows.append(row)
        if i in group:
            rows.append(-row)
    return halfspace_cone(np.array(rows))


def treatment_dominance_cone(d: int) -> ConeDescriptor:
    """Every treatment dominates the control: theta_0 <= theta_j."""
    return treatment_equal_cone(d, {0})


def make_pair(inner: ConeDescriptor, outer: ConeDescriptor, certificate: Certificate = None) -> ConePair:
    """Pair two cones. Pairs with a subspace member are trusted analytically."""
    if inner.dim != outer.dim:
        raise ConeError(f"pair dimension mismatch: {inner.dim} vs {outer.dim}")
    if certificate is None:
        if inner.kind is ConeKind.SUBSPACE or outer.kind is ConeKind.SUBSPACE:
            certificate = Certificate(CertificateStatus.TRUSTED_ANALYTIC)
        else:
            certificate = Certificate(CertificateStatus.UNCHECKED)
    return ConePair(inner, outer, certificate)


# ---------------------------------------------------------------------------
# Single-vector projections
# ---------------------------------------------------------------------------

def _as_vector(x, d: int = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ConeError(f"expected a vector, got shape {x.shape}")
    if d is not None and x.shape[0] != d:
        raise ConeError(f"vector has length {x.shape[0]}, cone has dimension {d}")
    return x


def project_monotone_pava(x) -> np.ndarray:
    """Pool-adjacent-violators projection onto {x1 <= ... <= xd}.

    Blocks are kept on a stack as (sum, count); a new value is merged with
    the top block while the top block's mean exceeds it, so pooled blocks
    always take exact arithmetic means.
    """
    x = _as_vector(x)
    if x.size == 0:
        raise ConeError("monotone projection needs d >= 1")
    sums, counts = [], []
    for value in x:
        s, c = float(value), 1
        while sums and sums[-1] / counts[-1] > s / c:
            s += sums.pop()
            c += counts.pop()
        sums.append(s)
        counts.append(c)
    means = [s / c for s, c in zip(sums, counts)]
    return np.repeat(means, counts)


def project_circular(alpha: float, x, axis=None) -> np.ndarray:
    """Closed-form projection onto the circular cone of half-angle alpha."""
    if not 0.0 < alpha < math.pi / 2:
        raise ConeError(f"alpha must lie in (0, pi/2), got {alpha!r}")
    x = _as_vector(x)
    if x.size < 2:
        raise ConeError("circular cone needs d >= 2")
    if axis is None:
        axis = np.zeros(x.size)
        axis[0] = 1.0
    x1 = float(axis @ x)
    rest = x - x1 * axis
    t = float(np.linalg.norm(rest))
    tau = math.tan(alpha)
    if x1 * tau >= t:
        return x.copy()
    if x1 + tau * t <= 0.0:
        return np.zeros_like(x)
    s = (x1 + tau * t) / (1.0 + tau * tau)
    return s * axis + (s * tau / t) * rest


def project_ray(direction, x) -> np.ndarray:
    direction = np.asarray(direction, dtype=float)
    x = _as_vector(x, direction.shape[0])
    coef = max(float(direction @ x), 0.0) / float(direction @ direction)
    return coef * direction


def project_generator_cone(generators, x, tol: float = NNLS_KKT_TOL, max_iter: int = None) -> np.ndarray:
    """Projection onto {X beta : beta >= 0} via active-set NNLS.

    The returned point passes the KKT check max(X^T r) <= tol and
    |beta_j (X^T r)_j| <= tol, scaled by ||X|| ||x||.
    """
    generators = np.atleast_2d(np.asarray(generators, dtype=float))
    x = _as_vector(x, generators.shape[0])
    if not np.any(generators):
        raise ConeError("generator matrix is zero")
    if max_iter is None:
        max_iter = max(50, 3 * generators.shape[1])
    try:
        beta, _ = nnls(generators, x, maxiter=max_iter)
    except RuntimeError as e:
        raise ProjectionError(f"NNLS did not converge: {e}", residual=math.inf, iterations=max_iter) from e
    fit = generators @ beta
    grad = generators.T @ (x - fit)
    kkt = max(float(np.max(grad)), float(np.max(np.abs(beta * grad))), 0.0)
    scale = max(1.0, float(np.linalg.norm(generators)) * float(np.linalg.norm(x)))
    if kkt > tol * scale:
        raise ProjectionError("NNLS solution fails the KKT check", residual=kkt,
                              iterations=max_iter, best=fit)
    return fit


def project_halfspace_cone_dykstra(constraints, x, tol: float = DYKSTRA_TOL,
                                   max_iter: int = DYKSTRA_MAX_CYCLES) -> np.ndarray:
    """Dykstra's alternating projections onto {x : A x <= 0}.

    Stops when one full cycle moves the iterate by at most tol * max(1, ||x||)
    and the constraints hold to the same tolerance.
    """
    rows = np.atleast_2d(np.asarray(constraints, dtype=float))
    x = _as_vector(x, rows.shape[1])
    norms_sq = np.einsum("ij,ij->i", rows, rows)
    if np.any(norms_sq == 0):
        raise ConeError("constraint matrix has a zero row")
    scale = max(1.0, float(np.linalg.norm(x)))
    z = x.copy()
    increments = np.zeros_like(rows)
    change = math.inf
    for cycle in range(1, max_iter + 1):
        z_prev = z.copy()
        for i in range(rows.shape[0]):
            w = z + increments[i]
            violation = float(rows[i] @ w)
            z = w - (violation / norms_sq[i]) * rows[i] if violation > 0.0 else w
            increments[i] = w - z
        change = float(np.linalg.norm(z - z_prev))
        if change <= tol * scale and float(np.max(rows @ z)) <= tol * scale:
            return z
    raise ProjectionError("Dykstra projection did not converge", residual=change,
                          iterations=max_iter, best=z)


def project_product(components, x) -> np.ndarray:
    """Blockwise projection onto a product of cones."""
    x = _as_vector(x, sum(c.dim for c in components))
    out = np.empty_like(x)
    start = 0
    for comp in components:
        stop = start + comp.dim
        out[start:stop] = project(comp, x[start:stop])
        start = stop
    return out


def _require_certificate(pair: ConePair):
    if not pair.certificate.usable:
        raise ObliquePairError(
            f"pair {pair.inner.describe()} in {pair.outer.describe()} has certificate "
            f"{pair.certificate.status.value}; run check_nonoblique first")


def project_induced(pair: ConePair, x) -> np.ndarray:
    """Projection onto C2 ∩ C1* for a non-oblique pair: Π_C2(x) - Π_C1(Π_C2(x))."""
    _require_certificate(pair)
    x = _as_vector(x, pair.dim)
    z = project(pair.outer, x)
    return z - project(pair.inner, z)


def project(cone: ConeDescriptor, x) -> np.ndarray:
    """Euclidean projection of x onto the cone."""
    x = _as_vector(x, cone.dim)
    kind, p = cone.kind, cone.params
    if kind is ConeKind.ORTHANT:
        return np.maximum(x, 0.0)
    if kind is ConeKind.MONOTONE:
        return project_monotone_pava(x)
    if kind is ConeKind.CIRCULAR:
        return project_circular(p["alpha"], x, p["axis"])
    if kind is ConeKind.SUBSPACE:
        basis = p["basis"]
        return basis @ (basis.T @ x)
    if kind is ConeKind.RAY:
        return project_ray(p["direction"], x)
    if kind is ConeKind.GENERATOR:
        return project_generator_cone(p["generators"], x)
    if kind is ConeKind.HALFSPACE:
        return project_halfspace_cone_dykstra(p["constraints"], x)
    if kind is ConeKind.PRODUCT:
        return project_product(p["components"], x)
    if kind is ConeKind.INDUCED:
        return project_induced(p["pair"], x)
    raise ConeError(f"unknown cone kind {kind!r}")


def polar_project(cone: ConeDescriptor, x) -> np.ndarray:
    """Projection onto the polar cone via Moreau: x - Π_C(x)."""
    x = _as_vector(x, cone.dim)
    return x - project(cone, x)


def contains(cone: ConeDescriptor, x, tol: float = MEMBERSHIP_TOL) -> bool:
    """Membership up to tol * max(1, ||x||)."""
    x = _as_vector(x, cone.dim)
    scale = tol * max(1.0, float(np.linalg.norm(x)))
    if cone.kind is ConeKind.HALFSPACE:
        return bool(np.max(cone.params["constraints"] @ x) <= scale)
    try:
        return bool(np.linalg.norm(x - project(cone, x)) <= scale)
    except ProjectionError:
        logger.warning("membership test fell back to a failed projection for %s", cone.describe())
        return False


# ---------------------------------------------------------------------------
# Batched projections
# ---------------------------------------------------------------------------

def _project_circular_rows(alpha, axis, rows):
    x1 = rows @ axis
    rest = rows - np.outer(x1, axis)
    t = np.linalg.norm(rest, axis=1)
    tau = math.tan(alpha)
    inside = x1 * tau >= t
    polar = ~inside & (x1 + tau * t <= 0.0)
    partial = ~(inside | polar)
    out = np.zeros_like(rows)
    out[inside] = rows[inside]
    s = (x1[partial] + tau * t[partial]) / (1.0 + tau * tau)
    out[partial] = np.outer(s, axis) + (s * tau / t[partial])[:, None] * rest[partial]
    return out


def project_rows(cone: ConeDescriptor, rows) -> np.ndarray:
    """Project every row of an (n, d) array onto the cone."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != cone.dim:
        raise ConeError(f"rows have width {rows.shape[1]}, cone has dimension {cone.dim}")
    kind, p = cone.kind, cone.params
    if kind is ConeKind.ORTHANT:
        return np.maximum(rows, 0.0)
    if kind is ConeKind.MONOTONE:
        if cone.dim == 1:
            return rows.copy()
        return np.vstack([isotonic_regression(row).x for row in rows])
    if kind is ConeKind.CIRCULAR:
        return _project_circular_rows(p["alpha"], p["axis"], rows)
    if kind is ConeKind.SUBSPACE:
        basis = p["basis"]
        return (rows @ basis) @ basis.T
    if kind is ConeKind.RAY:
        direction = p["direction"]
        coef = np.maximum(rows @ direction, 0.0) / float(direction @ direction)
        return np.outer(coef, direction)
    if kind is ConeKind.PRODUCT:
        out = np.empty_like(rows)
        start = 0
        for comp in p["components"]:
            stop = start + comp.dim
            out[:, start:stop] = project_rows(comp, rows[:, start:stop])
            start = stop
        return out
    if kind is ConeKind.INDUCED:
        pair = p["pair"]
        _require_certificate(pair)
        z = project_rows(pair.outer, rows)
        return z - project_rows(pair.inner, z)
    return np.vstack([project(cone, row) for row in rows])


# ---------------------------------------------------------------------------
# Pairs and tangent cones
# ---------------------------------------------------------------------------

def check_nonoblique(pair: ConePair, n_samples: int = 200, seed: int = 0,
                     tol: float = OBLIQUE_TOL) -> ConePair:
    """Check Π_C1(x) = Π_C1(Π_C2(x)) and C1 ⊆ C2 on Gaussian samples.

    Returns the pair with a NUMERICALLY_CHECKED or OBLIQUE certificate.
    """
    from conetest.gaussian import gaussian_rows

    if pair.inner.dim != pair.outer.dim:
        raise ConeError("pair dimension mismatch")
    rows = gaussian_rows(pair.dim, seed, 0, n_samples)
    direct = project_rows(pair.inner, rows)
    through = project_rows(pair.inner, project_rows(pair.outer, rows))
    scale = np.maximum(1.0, np.linalg.norm(rows, axis=1))
    residual = float(np.max(np.linalg.norm(direct - through, axis=1) / scale))
    nested = project_rows(pair.outer, direct)
    residual = max(residual, float(np.max(np.linalg.norm(direct - nested, axis=1) / scale)))
    if residual <= tol:
        status = CertificateStatus.NUMERICALLY_CHECKED
    else:
        status = CertificateStatus.OBLIQUE
        logger.warning("pair %s in %s looks oblique: max residual %.3g over %d samples",
                       pair.inner.describe(), pair.outer.describe(), residual, n_samples)
    return ConePair(pair.inner, pair.outer, Certificate(status, n_samples, residual))


def constant_pieces(theta0) -> list:
    """Lengths of the maximal runs of exactly equal adjacent entries."""
    theta0 = _as_vector(theta0)
    breaks = np.flatnonzero(theta0[1:] != theta0[:-1]) + 1
    edges = np.concatenate([[0], breaks, [theta0.size]])
    return [int(n) for n in np.diff(edges)]


def tangent_cone_monotone(theta0) -> ConeDescriptor:
    """Tangent cone of the monotone cone at theta0: a product of monotone blocks."""
    theta0 = _as_vector(theta0)
    if np.any(np.diff(theta0) < 0):
        raise ConeError("theta0 is not nondecreasing")
    return product([monotone(n) for n in constant_pieces(theta0)])


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def cone_to_dict(cone: ConeDescriptor) -> dict:
    out = {"kind": cone.kind.value, "dim": int(cone.dim)}
    p = cone.params
    if cone.kind is ConeKind.CIRCULAR:
        out["alpha"] = p["alpha"]
        out["axis"] = p["axis"].tolist()
    elif cone.kind is ConeKind.SUBSPACE:
        out["basis"] = p["basis"].tolist()
    elif cone.kind is ConeKind.RAY:
        out["direction"] = p["direction"].tolist()
    elif cone.kind is ConeKind.GENERATOR:
        out["generators"] = p["generators"].tolist()
    elif cone.kind is ConeKind.HALFSPACE:
        out["constraints"] = p["constraints"].tolist()
    elif cone.kind is ConeKind.PRODUCT:
        out["components"] = [cone_to_dict(c) for c in p["components"]]
    elif cone.kind is ConeKind.INDUCED:
        pair = p["pair"]
        out["inner"] = cone_to_dict(pair.inner)
        out["outer"] = cone_to_dict(pair.outer)
        out["certificate"] = pair.certificate.status.value
    return out


def cone_from_dict(data: dict) -> ConeDescriptor:
    try:
        kind = ConeKind(data["kind"])
        d = int(data["dim"])
    except (KeyError, ValueError) as e:
        raise ConeError(f"bad cone description: {e}") from e
    if kind is ConeKind.ORTHANT:
        return orthant(d)
    if kind is ConeKind.MONOTONE:
        return monotone(d)
    if kind is ConeKind.CIRCULAR:
        return circular(data["alpha"], d, data.get("axis"))
    if kind is ConeKind.SUBSPACE:
        basis = np.asarray(data.get("basis", []), dtype=float)
        if basis.size == 0:
            return zero_cone(d)
        return subspace(basis.reshape(d, -1))
    if kind is ConeKind.RAY:
        return ray(data["direction"])
    if kind is ConeKind.GENERATOR:
        return generator_cone(data["generators"])
    if kind is ConeKind.HALFSPACE:
        return halfspace_cone(data["constraints"])
    if kind is ConeKind.PRODUCT:
        return product(cone_from_dict(c) for c in data["components"])
    # A stored certificate is not trusted; the pair is certified again on load.
    pair = make_pair(cone_from_dict(data["inner"]), cone_from_dict(data["outer"]))
    if not pair.certificate.usable:
        pair = check_nonoblique(pair)
    return induced(pair)
