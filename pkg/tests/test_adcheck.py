import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import SCENE_KINDS, random_rl_element
from rungekit.adcheck import (check_membership, holo_distance_lower_bound_abs, interior_patches,
                              polynomial_obstruction_demo, slice_points)
from rungekit.errors import PointNotInBoundedComponent
from rungekit.geometry import Annulus, Disc, Points, rasterize, shape_from_json
from rungekit.oracle import parse


@pytest.fixture(scope="module")
def disc02():
    return rasterize([Disc(0j, 1.0)], 0.02)


@pytest.fixture(scope="module")
def origin02():
    return rasterize([Points((0j,))], 0.02)


def test_polynomial_passes(disc02):
    r = check_membership(parse("z1*z2", dim=2), [disc02, disc02])
    assert r.verdict == "pass" and r.witness is None
    assert max(r.residuals) < r.threshold / 100


def test_abs_on_point_times_disc(origin02, disc02):
    r = check_membership(parse("abs(z2)", dim=2), [origin02, disc02])
    assert r.verdict == "fail"
    assert r.residuals[0] is None  # a point has no interior
    assert r.witness["coordinate"] == 1 and r.witness["fixed"][0] == 0
    assert r.witness["residual"] >= 0.5


def test_conj_fails_with_defect_two(disc02):
    r = check_membership(parse("conj(z1)", dim=2), [disc02, disc02])
    assert r.verdict == "fail"
    assert abs(r.residuals[0] - 2) < 1e-6 and r.residuals[1] == 0


@pytest.mark.parametrize("h", [0.05, 0.035, 0.02])
def test_failures_at_any_fine_pitch(h):
    D = rasterize([Disc(0j, 1.0)], h)
    assert check_membership(parse("abs(z2)", dim=2), [D, D]).verdict == "fail"
    assert check_membership(parse("conj(z1)", dim=2), [D, D]).verdict == "fail"


def test_boundary_slices_included(disc02):
    pts = slice_points(disc02)
    on_edge = np.abs(np.abs(pts) - 1) <= disc02.grid_h
    assert on_edge.sum() >= 8


def test_patches_inside_interior(disc02):
    centers, r = interior_patches(disc02, 0.02)
    assert centers.size > 0
    assert np.all(np.abs(centers) + r < 1)


def test_inconclusive_without_interior():
    P = rasterize([Points((0j, 1 + 0j))], 0.05)
    assert check_membership(parse("conj(z1)", dim=2), [P, P]).verdict == "inconclusive"


def test_discontinuous_function_fails():
    D = rasterize([Disc(0j, 1.0)], 0.05)
    f = lambda z1, z2: np.where(np.real(z1) > 0.999, np.inf, 1.0) + 0 * z2  # noqa: E731
    r = check_membership(f, [D, D], patches=2)
    assert r.verdict == "fail"


@settings(max_examples=20, deadline=None)
@given(st.lists(st.sampled_from(sorted(SCENE_KINDS)), min_size=2, max_size=3), st.integers(0, 10 ** 6))
def test_random_rational_elements_pass(kinds, seed):
    e, sets, _ = random_rl_element(kinds, 0.05, np.random.default_rng(seed))
    r = check_membership(e, sets)
    assert r.verdict == "pass"


def test_abs_lower_bound():
    res = holo_distance_lower_bound_abs()
    assert res["bound"] == 0.5
    rows = {c["candidate"]: c for c in res["candidates"]}
    assert rows["half"]["sup_error"] == 0.5 and rows["zero"]["sup_error"] == 1.0
    for c in res["candidates"]:
        assert c["sup_error"] >= 0.49
        assert c["sup_error"] >= c["mean_value_bound"] - 1e-12 >= 0.5 - 1e-12


def test_abs_lower_bound_independent_fit():
    # a separate fit on a polar grid: no polynomial gets closer than 1/2
    rng = np.random.default_rng(11)
    w = np.sqrt(rng.random(1000)) * np.exp(2j * np.pi * rng.random(1000))
    V = w[:, None] ** np.arange(11)
    coef, *_ = np.linalg.lstsq(V, np.abs(w) + 0j, rcond=None)
    g0 = coef[0]
    circle = np.exp(2j * np.pi * np.arange(720) / 720)
    err = max(abs(g0), np.max(np.abs(1 - np.polynomial.polynomial.polyval(circle, coef))))
    assert err >= 0.49


@pytest.fixture(scope="module")
def circle02():
    return rasterize([shape_from_json({"circle": {"c": [0, 0], "r": 1}})], 0.02)


def test_circle_obstruction(circle02):
    res = polynomial_obstruction_demo(circle02, 0j, degree=30)
    assert res["max_defect_on_boundary"] >= 0.99
    assert res["certified_lower_bound"] >= res["guaranteed_lower_bound"]
    assert res["poles_at_infinity_only"] == "missing_pole_in_component"


def test_circle_obstruction_zero_polynomial(circle02):
    res = polynomial_obstruction_demo(circle02, 0j, Q=lambda z: np.zeros_like(z))
    assert res["max_defect_on_boundary"] == 1.0


def test_annulus_obstruction_matches_pole_validation():
    A = rasterize([Annulus(0j, 0.5, 1.0)], 0.05)
    res = polynomial_obstruction_demo(A, 0.1j, degree=20)
    assert res["max_defect_on_boundary"] >= 0.99
    assert res["poles_at_infinity_only"] == "missing_pole_in_component"


def test_obstruction_needs_bounded_component(disc02):
    with pytest.raises(PointNotInBoundedComponent):
        polynomial_obstruction_demo(disc02, 3 + 0j)
