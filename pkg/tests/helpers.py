"""Shared generators for randomized tests: scenes with pole sets and random elements of r_L(K)."""

import numpy as np

from rungekit.geometry import INF, Annulus, Disc, Rect, rasterize
from rungekit.rexpr import PrincipalPart, RationalUnivariate, TensorRationalExpr, Term

# name -> (shapes, allowed poles, a point to measure pole clearance from)
SCENE_KINDS = {
    "disc": ([Disc(0j, 1.0)], [INF]),
    "annulus": ([Annulus(0j, 0.5, 1.0)], [0j, INF]),
    "shifted": ([Disc(1 + 1j, 0.6)], [-1 + 0j]),
    "rect": ([Rect(-1 - 0.5j, 1 + 0.5j)], [INF, 3j]),
    "two_discs": ([Disc(-1.5 + 0j, 0.6), Disc(1.5 + 0j, 0.6)], [INF]),
}

_SCENE_CACHE = {}


def scene(kind, pitch):
    key = (kind, pitch)
    if key not in _SCENE_CACHE:
        shapes, poles = SCENE_KINDS[kind]
        _SCENE_CACHE[key] = (rasterize(shapes, pitch), poles)
    return _SCENE_CACHE[key]


def random_factor(var, K, poles, rng, max_degree=4):
    """A random one-variable rational with poles only in ``poles``."""
    c, R = K.enclosing_disc
    deg = int(rng.integers(0, max_degree + 1)) if INF in poles else 0
    poly = (rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)) / (1 + np.arange(deg + 1))
    parts = []
    for p in poles:
        if p is INF or p == INF:
            continue
        dist = float(np.min(np.abs(K.sample(K.grid_h) - p)))
        order = int(rng.integers(1, 4))
        co = (rng.normal(size=order) + 1j * rng.normal(size=order)) / (1 + np.arange(order))
        parts.append(PrincipalPart(complex(p), dist, co.astype(complex)))
    return RationalUnivariate(var, complex(c), float(R), poly.astype(complex), tuple(parts))


def random_rl_element(kinds, pitch, rng, max_terms=3):
    """Random sum of products of admissible one-variable rationals on the product of ``kinds``."""
    sc = [scene(k, pitch) for k in kinds]
    d = len(kinds)
    terms = []
    for _ in range(int(rng.integers(1, max_terms + 1))):
        factors = tuple(random_factor(i, K, poles, rng) for i, (K, poles) in enumerate(sc))
        terms.append(Term(complex(rng.normal(), rng.normal()), factors))
    return TensorRationalExpr(d, tuple(terms)), [K for K, _ in sc], [p for _, p in sc]
