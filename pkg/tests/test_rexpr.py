import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rungekit.errors import PoleConstraintViolated, PoleHit, VariableCollisionInProduct
from rungekit.geometry import INF
from rungekit.rexpr import (ArnoldiPart, ComposedRational, PrincipalPart, RationalUnivariate,
                            TensorRationalExpr, check_pole_constraint, poles_of)
from rungekit.runge1d import _arnoldi

cplx = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


def T(dim, *factors, scalar=1.0):
    e = TensorRationalExpr.constant(dim, scalar)
    return e.times(list(factors)) if factors else e


def test_constant_eval():
    e = TensorRationalExpr.constant(2, 7)
    z = np.random.default_rng(0).normal(size=(5, 2)) + 0j
    assert np.allclose(e(z), 7)


def test_monomial_product():
    e = T(2, RationalUnivariate.monomial(0), RationalUnivariate.monomial(1))
    assert e(np.array([2, 3], dtype=complex)) == 6


def test_sum_of_simple_poles():
    a = T(2, RationalUnivariate.simple_pole(0, 2))
    b = T(2, RationalUnivariate.simple_pole(1, 3))
    assert abs((a + b)(np.zeros(2, complex)) - (-1 / 2 - 1 / 3)) < 1e-15


def test_pole_hit():
    r = RationalUnivariate.simple_pole(0, 2)
    with pytest.raises(PoleHit):
        r(np.array([2 + 0j]))


def test_scale_zero_and_inverse(rng):
    e = T(2, RationalUnivariate.simple_pole(0, 5), RationalUnivariate.monomial(1, 3))
    z = rng.normal(size=(100, 2)) + 1j * rng.normal(size=(100, 2))
    assert np.all(e.scale(0)(z) == 0)
    assert np.max(np.abs((e - e)(z))) == 0


def test_disjoint_product():
    a = T(2, RationalUnivariate.simple_pole(0, 5))
    b = T(2, RationalUnivariate.simple_pole(1, 5))
    assert abs(a.product(b)(np.zeros(2, complex)) - 1 / 25) < 1e-16
    with pytest.raises(VariableCollisionInProduct):
        a.product(a)


def test_poles_of():
    p = T(2, RationalUnivariate.monomial(0, 2), RationalUnivariate.monomial(1))
    assert all(s <= {INF} for s in poles_of(p))
    q = T(2, RationalUnivariate.simple_pole(0, 5))
    assert poles_of(q)[0] == {5}
    assert check_pole_constraint(q, [[5], [INF]])
    with pytest.raises(PoleConstraintViolated):
        check_pole_constraint(q, [[INF], [INF]])


def _explicit(poly, parts, z):
    """Direct evaluation with powers, independent of the Horner code."""
    out = sum(c * z ** k for k, c in enumerate(poly))
    for p, cs in parts:
        out = out + sum(c / (z - p) ** (k + 1) for k, c in enumerate(cs))
    return out


@given(st.lists(cplx, min_size=1, max_size=6), st.lists(cplx, min_size=1, max_size=4), cplx)
def test_univariate_matches_explicit(poly, cs, p0):
    p = p0 + 5  # keep pole away from the evaluation points
    r = RationalUnivariate(0, 0j, 1.0, np.array(poly, dtype=complex),
                           (PrincipalPart(p, 1.0, np.array(cs, dtype=complex)),))
    z = np.exp(2j * np.pi * np.arange(16) / 16)
    ref = _explicit(poly, [(p, cs)], z)
    assert np.allclose(r(z), ref, rtol=1e-12, atol=1e-12 * (1 + np.abs(ref).max()))


@given(st.lists(cplx, min_size=1, max_size=5), st.lists(cplx, min_size=1, max_size=3), st.integers(1, 3))
def test_derivative_matches_explicit(poly, cs, k):
    p = 4 + 1j
    r = RationalUnivariate(0, 0j, 1.0, np.array(poly, dtype=complex),
                           (PrincipalPart(p, 1.0, np.array(cs, dtype=complex)),))
    z = 0.5 * np.exp(2j * np.pi * np.arange(8) / 8)
    # exact derivatives of the explicit form
    dp = np.polynomial.polynomial.polyder(np.array(poly, dtype=complex), k)
    ref = np.polynomial.polynomial.polyval(z, dp) if dp.size else 0 * z
    for j, c in enumerate(cs):
        m = j + 1
        fall = np.prod([-(m + i) for i in range(k)])
        ref = ref + c * fall / (z - p) ** (m + k)
    got = r.derivative(k)(z)
    assert np.allclose(got, ref, rtol=1e-10, atol=1e-10 * (1 + np.abs(ref).max()))


def test_json_roundtrip_bit_equal(rng):
    r = RationalUnivariate(1, 0.3 + 0j, 2.0, rng.normal(size=4) + 1j * rng.normal(size=4),
                           (PrincipalPart(3j, 0.5, rng.normal(size=3) + 0j),))
    e = T(2, RationalUnivariate.monomial(0, 2), r,
          scalar=0.1 + 0.2j)
    back = TensorRationalExpr.from_json(json.loads(json.dumps(e.to_json())))
    z = rng.normal(size=(50, 2)) + 1j * rng.normal(size=(50, 2))
    assert np.array_equal(back(z), e(z))


def _arnoldi_part(pole, n=12):
    B = np.exp(2j * np.pi * np.arange(400) / 400)
    if pole == INF:
        w = B / 1.0
        scale, origin = 1.0, 0j
    else:
        scale, origin = 1.0, 0j
        w = scale / (B - pole)
    Q, H = _arnoldi(w, n)
    coeffs = np.random.default_rng(3).normal(size=n + 1) / (1 + np.arange(n + 1)) ** 2 + 0j
    return ArnoldiPart(pole, scale, origin, H, np.abs(Q).max(0), coeffs, tag="t"), Q, coeffs


@pytest.mark.parametrize("pole", [3.0 + 0j, INF])
def test_arnoldi_part_reproduces_basis(pole):
    part, Q, c = _arnoldi_part(pole)
    B = np.exp(2j * np.pi * np.arange(400) / 400)
    assert np.allclose(part.basis(B, Q.shape[1]), Q, atol=1e-10)
    assert np.allclose(part(B), Q @ c, atol=1e-10)
    assert part.norm_bound() >= np.abs(part(B)).max() - 1e-12


@pytest.mark.parametrize("pole", [3.0 + 0j, INF])
def test_arnoldi_part_derivative(pole):
    part, _, _ = _arnoldi_part(pole)
    z = 0.6 * np.exp(2j * np.pi * np.arange(10) / 10)
    h = 1e-5
    fd = (part(z + h) - part(z - h)) / (2 * h)
    assert np.allclose(part.derivative()(z), fd, atol=1e-6)
    r = RationalUnivariate(0, arnoldi=(part,))
    assert np.allclose(r.derivative(1)(z), fd, atol=1e-6)
    back = RationalUnivariate.from_json(json.loads(json.dumps(r.to_json())))
    assert np.array_equal(back(z), r(z))
    assert r.poles() == ({INF} if pole == INF else {pole})


def test_arnoldi_sum_merges():
    part, _, c = _arnoldi_part(3.0 + 0j)
    r = RationalUnivariate(0, arnoldi=(part,))
    s = r + r
    assert len(s.arnoldi) == 1
    z = np.array([0.2 + 0.1j])
    assert np.allclose(s(z), 2 * r(z))


def test_composed_rational():
    base = RationalUnivariate.simple_pole(0, 3.0) + RationalUnivariate.monomial(0, 1, 0.5)
    comp = ComposedRational(base, np.array([0, 0, 3, -2], dtype=complex))
    z = np.array([0.1 + 0.2j, -0.4j])
    b = base(z)
    assert np.allclose(comp(z), 3 * b ** 2 - 2 * b ** 3)
    assert comp.poles() == base.poles()
    h = 1e-6
    fd = (comp(z + h) - comp(z - h)) / (2 * h)
    assert np.allclose(comp.derivative(1)(z), fd, atol=1e-6)
    back = RationalUnivariate.from_json(json.loads(json.dumps(comp.to_json())))
    assert np.array_equal(back(z), comp(z))


def test_partial_derivative_tensor(rng):
    e = T(2, RationalUnivariate.simple_pole(0, 4.0), RationalUnivariate.monomial(1, 3)) \
        + T(2, RationalUnivariate.monomial(0, 2))
    z = rng.normal(size=(20, 2)) * 0.5 + 0j
    d = e.derivative((1, 1))(z)
    ref = -1 / (z[:, 0] - 4) ** 2 * 3 * z[:, 1] ** 2
    assert np.allclose(d, ref)


def test_eval_grid_matches_pointwise(rng):
    e = T(3, RationalUnivariate.simple_pole(0, 4.0), RationalUnivariate.monomial(2, 2), scalar=2) \
        + T(3, RationalUnivariate.monomial(1, 1))
    axes = [rng.normal(size=4) + 0j, rng.normal(size=3) + 0j, rng.normal(size=5) + 0j]
    G = e.eval_grid(axes)
    Z = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    assert np.allclose(G, e(Z))


def test_pruned_accounts_dropped():
    e = T(1, RationalUnivariate.monomial(0, 1), scalar=1e-9) + TensorRationalExpr.constant(1, 1)
    p, dropped = e.pruned(1e-6)
    assert p.term_count == 1 and 0 < dropped < 1e-6


def test_truncated_bounds_change(rng):
    c = (0.5 ** np.arange(30)) * np.exp(1j * rng.uniform(0, 6, 30))
    r = RationalUnivariate(0, 0j, 1.0, c, (PrincipalPart(3 + 0j, 2.0, 0.3 ** np.arange(1, 20) + 0j),))
    t, dropped = r.truncated(1e-4)
    assert dropped <= 1e-4 and t.degree < r.degree
    z = np.exp(2j * np.pi * np.arange(64) / 64) * 0.999  # |v| <= 1 and |u| <= 1 here
    assert np.max(np.abs(t(z) - r(z))) <= dropped + 1e-15


def test_recompressed_rank_one(rng):
    # sum_k a_k z1 * K_k(z2) collapses to a single product
    base = RationalUnivariate.monomial(0, 1)
    terms = TensorRationalExpr(2, ())
    for k in range(6):
        g = RationalUnivariate(1, 0j, 1.0, rng.normal(size=5) + 0j)
        terms = terms + T(2, base.scaled(rng.normal()), g)
    e, dropped = terms.recompressed(1e-12)
    assert e.term_count == 1 and dropped <= 1e-12
    z = rng.normal(size=(40, 2)) * 0.5 + 0j
    assert np.allclose(e(z), terms(z))
    c, d2 = e.compacted(1e-9)
    assert np.max(np.abs(c(z) - e(z))) <= d2 + 1e-12


def test_recompressed_leaves_other_layouts():
    part, _, _ = _arnoldi_part(3.0 + 0j)
    e = T(2, RationalUnivariate(0, arnoldi=(part,)), RationalUnivariate.monomial(1))
    same, dropped = e.recompressed(1e-6)
    assert same is e and dropped == 0
