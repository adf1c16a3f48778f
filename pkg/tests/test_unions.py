import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rungekit.errors import NotDisjoint, PreconditionViolated, TransitivityViolated
from rungekit.geometry import INF, Disc, Rect, assign_poles, rasterize
from rungekit.oracle import parse
from rungekit.rexpr import check_pole_constraint
from rungekit.tensor import approximate_product
from rungekit.unions import (DisjointProductFamily, approximate_union, epsilon_tilde, indicator_rational,
                             product_bound_check, validate_family)


def disc(c, r, h=0.1):
    return rasterize([Disc(complex(c), r)], h)


def paper_family(h=0.5):
    def P(a, r):
        return [rasterize([Disc(complex(a[0]), r[0])], h), rasterize([Disc(complex(a[1]), r[1])], h)]
    return DisjointProductFamily.build(
        [P((35, 55), (25, 5)), P((17, 35), (7, 5)), P((35, 15), (15, 5)), P((80, 55), (10, 12))],
        [[100], [5j]])


def test_paper_family_valid():
    fam = paper_family()
    assert validate_family(fam)
    # overlap classes in coordinate 1: {0,1,2} and {3}; coordinate 2: singletons except 0~3
    assert fam.D(0, 0) == (0, 1, 2) and fam.D(3, 0) == (3,)
    assert fam.D(0, 1) == (0, 3) and fam.D(1, 1) == (1,)


def test_single_member_valid():
    fam = DisjointProductFamily.build([[disc(0, 1), disc(0, 1)]], [[INF], [INF]])
    assert validate_family(fam)


def test_transitivity_violation():
    h = 0.1
    A = rasterize([Rect(0j, 2 + 0.2j)], h)
    B = rasterize([Rect(1.5 + 0j, 3.5 + 0.2j)], h)
    C = rasterize([Rect(3 + 0j, 5 + 0.2j)], h)
    fam = DisjointProductFamily.build([[A, disc(0, 1)], [B, disc(5, 1)], [C, disc(10, 1)]], [[INF], [INF]])
    with pytest.raises(TransitivityViolated):
        validate_family(fam)


def test_not_disjoint():
    fam = DisjointProductFamily.build([[disc(0, 1), disc(0, 1)], [disc(1, 1), disc(1, 1)]], [[INF], [INF]])
    with pytest.raises(NotDisjoint):
        validate_family(fam)


def test_epsilon_tilde_d1():
    assert epsilon_tilde(1, 3, 0.1, 2.0) == 0.1 / (2 * 3 * 2.0)


def test_epsilon_tilde_closed_form():
    x = epsilon_tilde(2, 2, 0.1, 1.0)
    assert abs(x - (math.sqrt(1.025) - 1)) < 1e-10


@given(st.integers(1, 8), st.integers(1, 6), st.floats(1e-4, 1.0), st.floats(0.1, 10.0))
def test_epsilon_tilde_constraints(d, m, eps, gnorm):
    x = epsilon_tilde(d, m, eps, gnorm)
    c = eps / (2 * m * gnorm)
    assert x * (1 + x) ** (d - 1) <= c * (1 + 1e-12)
    assert (1 + x) ** d - 1 <= c * (1 + 1e-12)
    # largest: a slightly bigger value breaks a constraint
    y = x * (1 + 1e-9)
    assert y * (1 + y) ** (d - 1) > c or (1 + y) ** d - 1 > c
    assert epsilon_tilde(d, m, 2 * eps, gnorm) > x


def test_product_bound_examples():
    assert product_bound_check(np.ones(4), 0.1)
    e = 0.2
    zs = np.full(5, 1 + e)
    assert abs(abs(1 - np.prod(zs)) - ((1 + e) ** 5 - 1)) < 1e-12
    assert product_bound_check(zs, e)
    with pytest.raises(PreconditionViolated):
        product_bound_check([1.5], 0.1)


@given(st.integers(1, 6), st.floats(0.0, 0.3), st.lists(st.tuples(st.floats(0, 1), st.floats(0, 2 * math.pi)),
                                                        min_size=6, max_size=6))
def test_product_bound_property(d, e, polar):
    zs = np.array([1 + e * r * complex(math.cos(t), math.sin(t)) for r, t in polar[:d]])
    assert product_bound_check(zs, e)


def test_indicator_two_discs():
    Ki = rasterize([Disc(0j, 1), Disc(5 + 0j, 1)], 0.1)
    D, rest = disc(0, 1), disc(5, 1)
    L = assign_poles(Ki, [INF])
    r, rep = indicator_rational(Ki, D, L, 1e-4, rest=rest, return_report=True)
    assert r.poles() <= {INF}
    t = np.linspace(0, 1, 40)[:, None] * np.exp(2j * np.pi * np.arange(120) / 120)[None, :]
    z = t.ravel()
    assert np.max(np.abs(r(z) - 1)) <= 1e-4
    assert np.max(np.abs(r(z + 5))) <= 1e-4


def test_indicator_whole_set():
    K = disc(0, 1)
    r = indicator_rational(K, K, [INF], 1e-6)
    assert r.degree == 0 and abs(r(np.array([0.3j]))[0] - 1) < 1e-15


def test_indicator_paper_coordinate_one():
    h = 0.5
    Ki = rasterize([Disc(35 + 0j, 25), Disc(80 + 0j, 10)], h)
    D, rest = rasterize([Disc(35 + 0j, 25)], h), rasterize([Disc(80 + 0j, 10)], h)
    r, rep = indicator_rational(Ki, D, [100], 1e-3, rest=rest, return_report=True)
    assert r.poles() <= {100}
    S = Ki.sample(h / 2, h)
    chi = (np.abs(S - 35) <= 25 + 1e-9).astype(float)
    assert np.max(np.abs(r(S) - chi)) <= 1e-3


def test_union_single_member_matches_product():
    K = disc(0, 1)
    fam = DisjointProductFamily.build([[K, K]], [[INF], [INF]])
    f = parse("exp(z1) * z2", dim=2)
    out, rep = approximate_union(f, fam, 1e-3)
    g, _ = approximate_product(f, fam.member_domain(0), 1e-3 / 2)
    z = np.array([[0.2 + 0.1j, -0.3j], [0.5, 0.5]])
    assert np.max(np.abs(out(z) - g(z))) <= 1e-3


def test_union_two_bidiscs():
    fam = DisjointProductFamily.build([[disc(0, 1), disc(0, 1)], [disc(5, 1), disc(5, 1)]],
                                      [[INF], [INF]])
    fs = [parse("z1", dim=2), parse("exp(z2)", dim=2)]
    out, rep = approximate_union(fs, fam, 1e-3)
    assert rep.sampled_sup_error <= 1e-3
    check_pole_constraint(out, [[INF], [INF]])
    # independent dense check per member
    rng = np.random.default_rng(2)
    u = np.sqrt(rng.uniform(0, 1, (2000, 2))) * np.exp(2j * np.pi * rng.uniform(0, 1, (2000, 2)))
    assert np.max(np.abs(out(u) - u[:, 0])) <= 1e-3
    assert np.max(np.abs(out(u + 5) - np.exp(u[:, 1] + 5))) <= 1e-3
    ct = np.array(rep.extra["crosstalk"])
    assert ct[0, 1] <= 1e-3 / 4 and ct[1, 0] <= 1e-3 / 4
