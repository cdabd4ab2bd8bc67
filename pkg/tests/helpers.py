import math

import numpy as np

from conetest.cones import (
    circular,
    constant_line,
    full_space,
    generator_cone,
    halfspace_cone,
    induced,
    make_pair,
    monotone,
    monotone_constraints,
    orthant,
    product,
    ray,
    span,
)


def closed_form_cones(d):
    """Cones whose projections are exact, for invariant checks at dimension d."""
    cones = [
        orthant(d),
        monotone(d),
        circular(math.pi / 4, d),
        circular(math.pi / 6, d, np.arange(1.0, d + 1.0)),
        span(np.random.default_rng(d).standard_normal((d, max(1, d // 3)))),
        ray(np.linspace(-1.0, 2.0, d)),
        product([circular(math.pi / 4, d - 1), full_space(1)]),
        induced(make_pair(constant_line(d), monotone(d))),
    ]
    return cones


def iterative_cones(d):
    """Cones projected by NNLS or Dykstra; kept small so the checks stay fast."""
    rng = np.random.default_rng(d + 1)
    return [
        halfspace_cone(monotone_constraints(d)),
        generator_cone(np.abs(rng.standard_normal((d, d + 2)))),
    ]


