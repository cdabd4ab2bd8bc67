"""Projection correctness: closed forms, invariants and cross-algorithm oracles."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import minimize

from conetest.cones import (
    CertificateStatus,
    ConeError,
    ConeKind,
    ObliquePairError,
    check_nonoblique,
    circular,
    cone_from_dict,
    cone_to_dict,
    constant_line,
    constant_pieces,
    contains,
    convexity_cone,
    full_space,
    generator_cone,
    halfspace_cone,
    induced,
    k_ell_product_cone,
    make_pair,
    monotone,
    monotone_constraints,
    orthant,
    polar_project,
    product,
    project_product,
    project,
    project_circular,
    project_generator_cone,
    project_halfspace_cone_dykstra,
    project_monotone_pava,
    project_rows,
    ray,
    span,
    subspace,
    tangent_cone_monotone,
    treatment_dominance_cone,
    zero_cone,
)
from tests.config import N_ORACLE, N_POINTS, N_POINTS_SLOW, SEED
from tests.helpers import closed_form_cones, iterative_cones


def _cases(d):
    return [(cone, 1e-9) for cone in closed_form_cones(d)]


def _iterative_cases(d):
    return [(cone, 1e-6) for cone in iterative_cones(d)]


class TestKnownProjections:
    """Small hand-checked projections."""

    def test_orthant(self):
        assert_allclose(project(orthant(3), [1.0, -2.0, 3.0]), [1.0, 0.0, 3.0])

    def test_monotone_pools_violators(self):
        assert_allclose(project(monotone(3), [3.0, 1.0, 2.0]), [2.0, 2.0, 2.0])

    def test_monotone_keeps_sorted_input(self):
        x = np.array([-1.0, 0.0, 0.0, 4.0])
        assert_allclose(project_monotone_pava(x), x)

    def test_circular_partial_region(self):
        assert_allclose(project(circular(math.pi / 4, 3), [0.0, 3.0, 4.0]), [2.5, 1.5, 2.0])

    def test_circular_polar(self):
        assert_allclose(polar_project(circular(math.pi / 4, 3), [0.0, 3.0, 4.0]), [-2.5, 1.5, 2.0])

    def test_circular_inside_and_polar_regions(self):
        cone = circular(math.pi / 4, 3)
        assert_allclose(project(cone, [2.0, 1.0, 1.0]), [2.0, 1.0, 1.0])
        assert_allclose(project(cone, [-2.0, 1.0, 1.0]), [0.0, 0.0, 0.0])

    def test_circular_narrow_angle_polar_boundary(self):
        """For alpha = pi/6 the polar region is x1 + tan(alpha) t <= 0."""
        alpha = math.pi / 6
        tau = math.tan(alpha)
        # Just outside the polar cone: projection is nonzero.
        x = np.array([-0.9 * tau, 1.0])
        assert np.linalg.norm(project_circular(alpha, x)) > 0
        x = np.array([-1.1 * tau, 1.0])
        assert_allclose(project_circular(alpha, x), [0.0, 0.0])

    def test_generator_cone(self):
        cone = generator_cone([[1.0, 1.0], [0.0, 1.0]])
        assert_allclose(project(cone, [-1.0, 2.0]), [0.5, 0.5], atol=1e-12)

    def test_generator_matches_dual_halfspace(self):
        assert_allclose(project_halfspace_cone_dykstra([[0.0, -1.0], [-1.0, 1.0]], [-1.0, 2.0]),
                        [0.5, 0.5], atol=1e-6)

    def test_induced_monotone_modulo_constants(self):
        pair = make_pair(constant_line(3), monotone(3))
        assert_allclose(project(induced(pair), [1.0, 2.0, 3.0]), [-1.0, 0.0, 1.0], atol=1e-12)

    def test_ray(self):
        cone = ray([1.0, 1.0])
        assert_allclose(project(cone, [3.0, 1.0]), [2.0, 2.0])
        assert_allclose(project(cone, [-3.0, 1.0]), [0.0, 0.0])

    def test_subspace_and_extremes(self):
        x = np.array([1.0, -2.0, 5.0])
        assert_allclose(project(zero_cone(3), x), np.zeros(3))
        assert_allclose(project(full_space(3), x), x)
        assert_allclose(project(constant_line(3), x), np.full(3, 4.0 / 3.0))

    def test_product_is_blockwise(self):
        cone = product([orthant(2), monotone(3)])
        x = np.array([-1.0, 2.0, 3.0, 1.0, 2.0])
        assert_allclose(project(cone, x), [0.0, 2.0, 2.0, 2.0, 2.0])
        assert_allclose(project_product(cone.params["components"], x), project(cone, x))


class TestProjectionInvariants:
    """Moreau decomposition and projection properties on Gaussian points."""

    @pytest.mark.parametrize("d", [3, 10, 100])
    def test_closed_form_cones(self, d):
        rng = np.random.default_rng(SEED + d)
        for cone, tol in _cases(d):
            self._check(cone, rng.standard_normal((N_POINTS, d)) * 3.0, tol)

    @pytest.mark.parametrize("d", [3, 6])
    def test_iterative_cones(self, d):
        rng = np.random.default_rng(SEED + d)
        for cone, tol in _iterative_cases(d):
            self._check(cone, rng.standard_normal((N_POINTS // 4, d)), tol)

    def _check(self, cone, points, tol):
        name = cone.describe()
        reference = project_rows(cone, points[: min(20, len(points))])
        for x in points:
            p = project(cone, x)
            q = x - p
            scale = max(1.0, np.linalg.norm(x))
            assert contains(cone, p, tol=tol), f"{name}: projection left the cone"
            assert abs(p @ q) <= tol * scale ** 2, f"{name}: <Πx, x - Πx> = {p @ q:.3g}"
            assert np.linalg.norm(p) <= np.linalg.norm(x) + tol * scale, f"{name}: ||Πx|| > ||x||"
            assert_allclose(project(cone, p), p, atol=tol * scale, err_msg=f"{name}: not idempotent")
            # x - Πx lies in the polar cone.
            assert np.max(reference @ q) <= tol * scale * max(1.0, np.max(np.linalg.norm(reference, axis=1))), \
                f"{name}: residual not in the polar cone"

    @pytest.mark.parametrize("d", [3, 10, 100])
    def test_batched_matches_single(self, d):
        rng = np.random.default_rng(SEED)
        points = rng.standard_normal((25, d))
        for cone in closed_form_cones(d):
            single = np.vstack([project(cone, x) for x in points])
            assert_allclose(project_rows(cone, points), single, atol=1e-10, err_msg=cone.describe())

    def test_nonexpansive_and_homogeneous(self):
        rng = np.random.default_rng(SEED)
        for cone in closed_form_cones(10):
            for _ in range(20):
                x, y = rng.standard_normal((2, 10))
                px, py = project(cone, x), project(cone, y)
                assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-9, cone.describe()
                assert_allclose(project(cone, 2.5 * x), 2.5 * px, atol=1e-9, err_msg=cone.describe())

    def test_homogeneous_at_several_scales(self):
        rng = np.random.default_rng(SEED)
        cases = [(cone, 1e-9) for cone in closed_form_cones(10)] + [(cone, 1e-6) for cone in iterative_cones(5)]
        for cone, tol in cases:
            for x in rng.standard_normal((5, cone.dim)):
                px = project(cone, x)
                scale = max(1.0, np.linalg.norm(x))
                for c in (0.0, 0.5, 2.0, 10.0):
                    assert_allclose(project(cone, c * x), c * px, atol=tol * max(1.0, c) * scale,
                                    err_msg=f"{cone.describe()} c={c}")

    def test_nested_cones_order_projection_norms(self):
        """C1 ⊆ C2 implies ||Π_C1 x|| <= ||Π_C2 x||."""
        d = 6
        e1 = np.eye(d)[0]
        pairs = [
            (zero_cone(d), orthant(d)),
            (constant_line(d), monotone(d)),
            (ray(np.ones(d)), monotone(d)),
            (ray(e1), orthant(d)),
            (circular(math.pi / 6, d), circular(math.pi / 4, d)),
            (orthant(d), full_space(d)),
            (monotone(d), halfspace_cone(monotone_constraints(d)[:-1])),
        ]
        rng = np.random.default_rng(SEED)
        points = rng.standard_normal((N_POINTS, d)) * 2.0
        for inner, outer in pairs:
            small = np.linalg.norm(project_rows(inner, points), axis=1)
            large = np.linalg.norm(project_rows(outer, points), axis=1)
            assert np.all(small <= large + 1e-6 * np.maximum(1.0, np.linalg.norm(points, axis=1))), \
                f"{inner.describe()} in {outer.describe()}"

    @pytest.mark.slow
    @pytest.mark.parametrize("d", [3, 10, 100])
    def test_closed_form_cones_many_points(self, d):
        rng = np.random.default_rng(SEED + 7 * d)
        for cone, tol in _cases(d):
            self._check(cone, rng.standard_normal((N_POINTS_SLOW, d)) * 3.0, tol)


class TestOracles:
    """Each fast projection against an independent algorithm."""

    @pytest.mark.parametrize("d", [2, 5, 8])
    def test_pava_matches_dykstra(self, d):
        rng = np.random.default_rng(SEED + d)
        constraints = monotone_constraints(d)
        for x in rng.standard_normal((N_ORACLE // 4, d)):
            assert_allclose(project_monotone_pava(x), project_halfspace_cone_dykstra(constraints, x),
                            atol=1e-6)

    def test_pava_matches_isotonic_rows(self):
        rng = np.random.default_rng(SEED)
        points = rng.standard_normal((N_ORACLE, 40))
        expected = np.vstack([project_monotone_pava(x) for x in points])
        assert_allclose(project_rows(monotone(40), points), expected, atol=1e-12)

    @pytest.mark.parametrize("alpha", [math.pi / 12, math.pi / 6, math.pi / 4, math.pi / 3, 1.5])
    def test_circular_matches_planar_generator_cone(self, alpha):
        """The projection lives in the plane of the axis and x; there the cone is generated by two rays."""
        rng = np.random.default_rng(SEED)
        d = 7
        cone = circular(alpha, d)
        planar = np.array([[1.0, 1.0], [0.0, math.tan(alpha)]])
        for x in rng.standard_normal((N_ORACLE, d)) * 2.0:
            rest = np.linalg.norm(x[1:])
            a, b = project_generator_cone(planar, np.array([x[0], rest]))
            expected = np.concatenate([[a], x[1:] * (b / rest)])
            assert_allclose(project(cone, x), expected, atol=1e-8)

    def test_generator_matches_halfspace_description(self):
        """The orthant as a generator cone and as a halfspace cone."""
        rng = np.random.default_rng(SEED)
        d = 4
        for x in rng.standard_normal((N_ORACLE // 4, d)):
            by_nnls = project_generator_cone(np.eye(d), x)
            by_dykstra = project_halfspace_cone_dykstra(-np.eye(d), x)
            assert_allclose(by_nnls, np.maximum(x, 0.0), atol=1e-10)
            assert_allclose(by_dykstra, np.maximum(x, 0.0), atol=1e-8)

    @pytest.mark.parametrize("d", [3, 6])
    def test_halfspace_cones_match_slsqp(self, d):
        """Monotone and convexity projections against a generic constrained solver."""
        rng = np.random.default_rng(SEED + d)
        constraints = [monotone_constraints(d), convexity_cone(np.arange(float(d))).params["constraints"]]
        for rows in constraints:
            for x in rng.standard_normal((10, d)):
                result = minimize(lambda z: 0.5 * np.sum((z - x) ** 2), np.zeros(d), jac=lambda z: z - x,
                                  method="SLSQP",
                                  constraints=[{"type": "ineq", "fun": lambda z: -(rows @ z), "jac": lambda z: -rows}],
                                  options={"ftol": 1e-14, "maxiter": 500})
                assert result.success, result.message
                assert_allclose(project_halfspace_cone_dykstra(rows, x), result.x, atol=1e-5)


class TestPairs:
    def test_subspace_pairs_are_trusted(self):
        pair = make_pair(constant_line(5), monotone(5))
        assert pair.certificate.status is CertificateStatus.TRUSTED_ANALYTIC

    def test_uncertified_pair_cannot_induce(self):
        pair = make_pair(ray([1.0, 0.0, 0.0]), circular(math.pi / 4, 3))
        assert pair.certificate.status is CertificateStatus.UNCHECKED
        with pytest.raises(ObliquePairError):
            induced(pair)

    def test_ray_in_circular_is_oblique(self):
        """x = (0, 1, 0) projects to 0 on the ray but Π_ray Π_C x = e1 / 2."""
        pair = make_pair(ray([1.0, 0.0, 0.0]), circular(math.pi / 4, 3))
        x = np.array([0.0, 1.0, 0.0])
        assert_allclose(project(pair.inner, x), [0.0, 0.0, 0.0])
        assert_allclose(project(pair.inner, project(pair.outer, x)), [0.5, 0.0, 0.0])
        checked = check_nonoblique(pair, n_samples=200, seed=SEED)
        assert checked.certificate.status is CertificateStatus.OBLIQUE
        assert checked.certificate.max_residual > 0.1

    def test_constants_in_monotone_pass_the_check(self):
        pair = make_pair(constant_line(6), monotone(6), certificate=None)
        checked = check_nonoblique(pair, n_samples=200, seed=SEED)
        assert checked.certificate.status is CertificateStatus.NUMERICALLY_CHECKED
        assert checked.certificate.n_samples == 200
        assert checked.certificate.max_residual <= 1e-8
        assert project(induced(checked), np.arange(6.0)).sum() == pytest.approx(0.0, abs=1e-12)

    def test_non_nested_pair_is_rejected(self):
        checked = check_nonoblique(make_pair(monotone(4), orthant(4)), n_samples=100, seed=SEED)
        assert checked.certificate.status is CertificateStatus.OBLIQUE

    def test_dimension_mismatch(self):
        with pytest.raises(ConeError):
            make_pair(orthant(3), orthant(4))


class TestTangentCone:
    def test_pieces(self):
        assert constant_pieces([0.0, 0.0, 1.0, 1.0, 1.0, 2.0]) == [2, 3, 1]
        assert constant_pieces([1.0, 2.0, 3.0]) == [1, 1, 1]
        assert constant_pieces([4.0, 4.0]) == [2]

    def test_tangent_cone_is_blockwise_monotone(self):
        cone = tangent_cone_monotone([0.0, 0.0, 1.0, 1.0, 1.0, 2.0])
        assert cone.kind is ConeKind.PRODUCT
        assert [c.dim for c in cone.params["components"]] == [2, 3, 1]
        x = np.array([3.0, 1.0, 5.0, 0.0, 1.0, -7.0])
        assert_allclose(project(cone, x), [2.0, 2.0, 2.0, 2.0, 2.0, -7.0])

    def test_constant_theta_gives_full_monotone_cone(self):
        cone = tangent_cone_monotone(np.zeros(5))
        x = np.array([3.0, 1.0, 2.0, 0.0, 4.0])
        assert_allclose(project(cone, x), project(monotone(5), x))

    def test_rejects_decreasing_theta(self):
        with pytest.raises(ConeError):
            tangent_cone_monotone([0.0, 1.0, 0.5])


class TestBuilders:
    def test_circular_rejects_bad_angles(self):
        for alpha in (0.0, -0.1, math.pi / 2, 2.0):
            with pytest.raises(ConeError):
                circular(alpha, 3)

    def test_circular_needs_two_dims(self):
        with pytest.raises(ConeError):
            circular(math.pi / 4, 1)

    def test_span_drops_dependent_columns(self):
        cone = span(np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]]))
        assert cone.params["basis"].shape == (3, 1)

    def test_subspace_rejects_non_orthonormal(self):
        with pytest.raises(ConeError):
            subspace(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_k_ell_product(self):
        cone = k_ell_product_cone(10, 3, math.pi / 4)
        assert cone.dim == 10
        head, tail = cone.params["components"]
        assert head.dim == 9 and tail.dim == 1
        assert_allclose(head.params["axis"][:3], np.full(3, 1 / math.sqrt(3)))
        with pytest.raises(ConeError):
            k_ell_product_cone(10, 10, math.pi / 4)

    def test_convexity_cone(self):
        t = np.linspace(0.0, 1.0, 8)
        cone = convexity_cone(t)
        assert contains(cone, t ** 2)
        assert not contains(cone, -(t ** 2))

    def test_treatment_dominance(self):
        cone = treatment_dominance_cone(3)
        assert contains(cone, np.array([0.0, 1.0, 2.0]))
        assert not contains(cone, np.array([1.0, 0.0, 2.0]))

    def test_halfspace_rejects_zero_row(self):
        with pytest.raises(ConeError):
            halfspace_cone([[0.0, 0.0], [1.0, -1.0]])

    def test_wrong_length_vector(self):
        with pytest.raises(ConeError):
            project(orthant(3), [1.0, 2.0])


class TestSerialization:
    def test_descriptions_survive_json(self):
        pair = make_pair(constant_line(6), monotone(6))
        cones = [
            product([circular(math.pi / 5, 4, [1.0, 2.0, 0.0, 1.0]), full_space(2)]),
            induced(pair),
            generator_cone(np.abs(np.random.default_rng(SEED).standard_normal((6, 3)))),
            zero_cone(6),
        ]
        x = np.linspace(-2.0, 3.0, 6)
        for cone in cones:
            again = cone_from_dict(cone_to_dict(cone))
            assert again.kind is cone.kind
            assert_allclose(project(again, x), project(cone, x), atol=1e-12, err_msg=cone.describe())

    def test_unknown_kind(self):
        with pytest.raises(ConeError):
            cone_from_dict({"kind": "pyramid", "dim": 3})

    def test_stored_certificate_is_checked_again(self):
        """An oblique pair cannot be smuggled in through a saved certificate."""
        document = {
            "kind": "induced",
            "dim": 3,
            "inner": cone_to_dict(ray([1.0, 0.0, 0.0])),
            "outer": cone_to_dict(circular(math.pi / 4, 3)),
            "certificate": "numerically_checked",
        }
        with pytest.raises(ObliquePairError):
            cone_from_dict(document)

    def test_unchecked_nested_pair_is_certified_on_load(self):
        document = {
            "kind": "induced",
            "dim": 5,
            "inner": cone_to_dict(ray(np.ones(5))),
            "outer": cone_to_dict(monotone(5)),
            "certificate": "unchecked",
        }
        cone = cone_from_dict(document)
        assert cone.params["pair"].certificate.status is CertificateStatus.NUMERICALLY_CHECKED
