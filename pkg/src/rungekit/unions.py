"""Approximation on finite disjoint unions of products.

Each member K_j = K_{j,1} x ... x K_{j,d} gets its own approximant g_j.
They are glued with near-indicator products r_j = prod_i r_{j,i}, where
r_{j,i} is close to 1 on D_{j,i} (the members' i-th factors overlapping
K_{j,i}) and close to 0 on the rest of K^i. The output is sum_j r_j g_j.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations, permutations

import numpy as np
import shapely

from .errors import (
    BudgetOverflow,
    CertificationFailed,
    NotDisjoint,
    PreconditionViolated,
    SeparationTooTight,
    TransitivityViolated,
)
from .geometry import PlanarCompact, assign_poles, build_cycle, rasterize, validate_pole_set
from .rexpr import ComposedRational, RationalUnivariate, TensorRationalExpr
from .runge1d import (
    DEGREE_CAP,
    _check_clearance,
    arnoldi_block,
    check_sample,
    cycle_delta,
    kernel_basis,
    refine_quadrature,
)
from .tensor import ApproxReport, ProductDomain, approximate_product, verify

MEMBER_VERIFY_POINTS = 10_000
GNORM_INFLATION = 1.1
SHARPEN = np.array([0.0, 0.0, 3.0, -2.0])  # 3x^2 - 2x^3 fixes 0 and 1 to second order
SHARPEN_START = 0.3  # fit error below which sharpening is attempted
SHARPEN_STEPS = 8
FIT_DEGREE_STEP = 50
COMPACT_SHARE = 0.2  # part of each member's eps/2 spent on truncating g_j


@dataclass(frozen=True, eq=False)
class DisjointProductFamily:
    """m products over a common dimension d with shared raw pole lists per coordinate."""

    members: tuple  # members[j][i] is the PlanarCompact K_{j,i}
    poles: tuple  # poles[i] is the raw pole list L_i

    @classmethod
    def build(cls, members, poles):
        members = tuple(tuple(m) for m in members)
        if not members:
            raise ValueError("a family needs at least one member")
        d = len(members[0])
        if any(len(m) != d for m in members):
            raise ValueError("all members must have the same dimension")
        if len(poles) != d:
            raise ValueError("one pole list per coordinate required")
        return cls(members, tuple(tuple(p) for p in poles))

    @property
    def m(self):
        return len(self.members)

    @property
    def dim(self):
        return len(self.members[0])

    def pitch(self, i):
        return min(mem[i].grid_h for mem in self.members)

    def coordinate_union(self, i, which=None) -> PlanarCompact:
        """Union of the i-th factors of the selected members (all by default)."""
        which = range(self.m) if which is None else which
        shapes = tuple(s for j in which for s in self.members[j][i].shapes)
        holes = tuple(h for j in which for h in self.members[j][i].holes)
        return rasterize(shapes, self.pitch(i), holes=holes)

    @cached_property
    def unions(self):
        return [self.coordinate_union(i) for i in range(self.dim)]

    def overlaps(self, i):
        """Boolean matrix: K_{j,i} meets K_{k,i} (on the conservative outer geometry)."""
        geoms = [mem[i].outer for mem in self.members]
        M = np.eye(self.m, dtype=bool)
        for a, b in combinations(range(self.m), 2):
            M[a, b] = M[b, a] = bool(shapely.intersects(geoms[a], geoms[b]))
        return M

    def member_domain(self, j) -> ProductDomain:
        return ProductDomain(tuple((K, assign_poles(K, P)) for K, P in zip(self.members[j], self.poles)))

    def D(self, j, i):
        """Indices k with K_{k,i} meeting K_{j,i}."""
        return tuple(int(k) for k in np.flatnonzero(self.overlaps(i)[j]))


def validate_family(fam: DisjointProductFamily) -> bool:
    """Disjointness, overlap transitivity and pole admissibility, checked exhaustively."""
    ov = [fam.overlaps(i) for i in range(fam.dim)]
    for a, b in combinations(range(fam.m), 2):
        if all(ov[i][a, b] for i in range(fam.dim)):
            raise NotDisjoint(f"members {a} and {b} intersect in every coordinate", pair=(a, b))
    for i in range(fam.dim):
        for j1, j2, j3 in permutations(range(fam.m), 3):
            if ov[i][j1, j2] and ov[i][j2, j3] and not ov[i][j1, j3]:
                raise TransitivityViolated(
                    f"coordinate {i}: {j1}~{j2} and {j2}~{j3} but not {j1}~{j3}", triple=(i, j1, j2, j3))
    for i in range(fam.dim):
        Ki = fam.unions[i]
        validate_pole_set(Ki, assign_poles(Ki, fam.poles[i]))
        for j in range(fam.m):
            K = fam.members[j][i]
            validate_pole_set(K, assign_poles(K, fam.poles[i]))
    return True


def epsilon_tilde(d: int, m: int, eps: float, gnorm: float, rtol: float = 1e-12) -> float:
    """Largest x with x(1+x)^(d-1) <= c and (1+x)^d - 1 <= c, c = eps/(2 m gnorm)."""
    if not (d > 0 and m > 0 and eps > 0 and gnorm > 0):
        raise ValueError("all arguments must be positive")
    c = eps / (2 * m * gnorm)

    def ok(x):
        return x * (1 + x) ** (d - 1) <= c and (1 + x) ** d - 1 <= c

    lo, hi = 0.0, c  # both constraints force x <= c
    if ok(hi):
        return hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def product_bound_check(zs, eps_t: float) -> bool:
    """|1 - prod z_i| <= (1 + eps_t)^d - 1 for numbers with |z_i - 1| <= eps_t."""
    zs = np.asarray(zs, dtype=complex)
    slack = 8 * np.finfo(float).eps * (1 + eps_t)
    if np.any(np.abs(zs - 1) > eps_t + slack):
        raise PreconditionViolated(f"some |z_i - 1| exceeds {eps_t}")
    d = zs.size
    bound = (1 + eps_t) ** d - 1
    lhs = abs(1 - np.prod(zs))
    return bool(lhs <= bound + 4 * d * np.finfo(float).eps * (1 + bound))


@dataclass
class IndicatorReport:
    sampled_error: float
    delta: float
    nodes: int
    degree: int
    method: str = "cauchy"
    sharpen_steps: int = 0


def _sharpen(vals, steps=1):
    for _ in range(steps):
        vals = np.polyval(SHARPEN[::-1], vals)
    return vals


def fit_indicator(Ki: PlanarCompact, D: PlanarCompact, L, eps_t: float, gap: float, var: int = 0,
                  cap: int = DEGREE_CAP):
    """Near-indicator of D by least squares plus sharpening; returns (r, fit degree, steps, error).

    chi_D is fitted on fine boundary samples of K^i by polynomials in the
    normalized variable of every pole in L (Arnoldi bases). From a fit with
    error below SHARPEN_START, iterating x -> 3x^2 - 2x^3 roughly squares
    the error each time; the composite is a polynomial in the fit, so its
    poles are those of the fit. The smallest fit degree (in steps of
    FIT_DEGREE_STEP) that reaches eps_t within SHARPEN_STEPS wins.
    """
    targets = sorted({p for p in L.assignment.values()}, key=str)
    blocks = []
    B = None
    for t in targets:
        tpl, QB, B = arnoldi_block(Ki, t, cap, B)
        blocks.append((tpl, QB))
    S = np.concatenate([check_sample(Ki), B])
    QS = [tpl.basis(S, QB.shape[1]) for tpl, QB in blocks]
    chiB = (D.distance(B) < gap / 2).astype(complex)
    chiS = (D.distance(S) < gap / 2).astype(complex)
    nmax = min(QB.shape[1] for _, QB in blocks) - 1
    best = math.inf
    for n in list(range(FIT_DEGREE_STEP, nmax, FIT_DEGREE_STEP)) + [nmax]:
        A = np.hstack([QB[:, :n + 1] for _, QB in blocks])
        c, *_ = np.linalg.lstsq(A, chiB, rcond=None)
        vals = np.hstack([Q[:, :n + 1] for Q in QS]) @ c
        err = float(np.max(np.abs(vals - chiS)))
        best = min(best, err)
        steps = 0
        while err > eps_t and err < SHARPEN_START and steps < SHARPEN_STEPS:
            nxt = _sharpen(vals)
            nerr = float(np.max(np.abs(nxt - chiS)))
            if nerr >= err:
                break
            vals, err, steps = nxt, nerr, steps + 1
        if err <= eps_t:
            parts, off = [], 0
            for tpl, _ in blocks:
                parts.append(tpl.with_coeffs(c[off:off + n + 1]))
                off += n + 1
            r = RationalUnivariate(var, arnoldi=tuple(parts))
            for _ in range(steps):
                r = ComposedRational(r, SHARPEN.astype(complex))
            return r, n, steps, err
    raise BudgetOverflow(f"indicator fit did not reach {eps_t:.3g} (best {best:.3g})", best=best)


def indicator_rational(Ki: PlanarCompact, D: PlanarCompact, L, eps_t: float, rest: PlanarCompact | None = None,
                       var: int = 0, return_report: bool = False, method: str = "auto",
                       cap: int = DEGREE_CAP):
    """Rational r with poles in L, |r - 1| <= eps_t on D and |r| <= eps_t on the rest of K^i.

    ``method="cauchy"``: a cycle winds once around D and zero times around
    the rest; the Cauchy sum of the constant 1 is then the indicator of D,
    and its kernels are pushed into L (a PoleSet of K^i or a raw pole
    list). ``method="fit"``: ``fit_indicator``. ``"auto"`` tries the Cauchy
    construction and falls back to the fit when pushing overflows the cap.
    """
    if method not in ("auto", "cauchy", "fit"):
        raise ValueError(f"unknown method {method!r}")
    if not hasattr(L, "assignment"):
        L = assign_poles(Ki, L)
    if rest is None:
        r = RationalUnivariate.constant(var, 1.0)
        rep = IndicatorReport(0.0, 0.0, 0, 0, "exact")
        return (r, rep) if return_report else r
    gap = float(shapely.distance(D.outer, rest.outer))
    h = max(Ki.grid_h, D.grid_h)
    delta = cycle_delta(D, 2 * gap / 3, None)
    corridor = delta >= h  # quadrature nodes must stay a pitch away from K^i
    if not gap > 0 or (method == "cauchy" and not corridor):
        raise SeparationTooTight(f"gap {gap:.3g} leaves no corridor at pitch {h}")
    S = check_sample(Ki)
    chi = (D.distance(S) < gap / 2).astype(complex)
    r = None
    if method == "cauchy" or (method == "auto" and corridor):
        cyc = build_cycle(D, delta, avoid=rest)

        def evaluate(quad):
            vals = quad.apply(np.ones(quad.size, dtype=complex), S)
            return float(np.max(np.abs(vals - chi))), vals

        quad, rerr, _ = refine_quadrature(cyc, evaluate, eps_t / 2, 4 * cyc.clearance)
        _check_clearance(Ki, quad)
        tau = (eps_t / 2) / float(np.abs(quad.weights).sum())
        try:
            basis = kernel_basis(Ki, L, quad.nodes, tau, var=var, cap=cap, fit=method == "cauchy")
            r = basis.combine(quad.weights)
            rep = IndicatorReport(0.0, delta, quad.size, r.degree, "cauchy")
        except BudgetOverflow:
            if method == "cauchy":
                raise
    if r is None:
        r, n, steps, _ = fit_indicator(Ki, D, L, eps_t, gap, var, cap)
        rep = IndicatorReport(0.0, 0.0, 0, n, "fit", steps)
    err = float(np.max(np.abs(r(S) - chi)))
    if err > eps_t:
        raise CertificationFailed(f"indicator error {err:.3g} exceeds {eps_t:.3g}")
    rep.sampled_error = err
    return (r, rep) if return_report else r


def approximate_union(fs, fam: DisjointProductFamily, eps: float, margin: float | None = None,
                      seed: int = 0, perm=None, verify_points: int = MEMBER_VERIFY_POINTS, **kw):
    """Approximate the function given per member by ``fs`` on the whole union.

    ``fs`` is one oracle per member or a single oracle used for all.
    Returns (expression, report); the report carries per-member errors,
    eps-tilde values and the cross-talk sup |r_j g_j| on foreign members.
    """
    validate_family(fam)
    m, d = fam.m, fam.dim
    if not isinstance(fs, (list, tuple)):
        fs = [fs] * m
    if len(fs) != m:
        raise ValueError(f"{len(fs)} functions for {m} members")
    report = ApproxReport(eps)
    axes = [fam.member_domain(s).verification_axes(verify_points) for s in range(m)]
    g, members = [], []
    for j in range(m):
        gj, rj = approximate_product(fs[j], fam.member_domain(j), eps / 2 * (1 - COMPACT_SHARE), margin=margin,
                                     seed=seed, perm=perm, verify_points=verify_points, **kw)
        # noise in high-order coefficients is harmless on K_j but explodes on
        # the other members, and gnorm feeds eps-tilde
        gj, dropped = gj.recompressed(eps / 4 * COMPACT_SHARE)
        gj, dropped2 = gj.compacted(eps / 4 * COMPACT_SHARE)
        dropped += dropped2
        gmax = max(float(np.max(np.abs(gj.eval_grid(ax)))) for ax in axes)
        g.append(gj)
        members.append({"member": j, "g_error": rj.sampled_sup_error + dropped, "g_terms": gj.term_count,
                        "compaction_dropped": dropped, "gnorm": GNORM_INFLATION * gmax, "nodes": rj.nodes})
    for j in range(m):
        gn = members[j]["gnorm"]
        members[j]["eps_tilde"] = epsilon_tilde(d, m, eps, gn) if gn > 0 else None
    # one indicator per (coordinate, D set), built for the strictest eps-tilde needing it
    need = {}
    for j in range(m):
        if members[j]["eps_tilde"] is None:
            continue
        for i in range(d):
            key = (i, fam.D(j, i))
            need[key] = min(need.get(key, math.inf), members[j]["eps_tilde"])
    indicators = {}
    for (i, Dset), et in sorted(need.items()):
        others = tuple(k for k in range(m) if k not in Dset)
        Ki = fam.unions[i]
        L = assign_poles(Ki, fam.poles[i])
        if not others or _same_set(fam, i, Dset, others):
            r, irep = indicator_rational(Ki, Ki, L, et, rest=None, var=i, return_report=True)
        else:
            r, irep = indicator_rational(Ki, fam.coordinate_union(i, Dset), L, et,
                                         rest=fam.coordinate_union(i, others), var=i, return_report=True)
        indicators[(i, Dset)] = r
        report.ledger.append({"indicator": [i, list(Dset)], "eps_tilde": et, "error": irep.sampled_error,
                              "delta": irep.delta, "nodes": irep.nodes, "degree": irep.degree,
                              "method": irep.method, "sharpen_steps": irep.sharpen_steps})
    out = TensorRationalExpr(d, ())
    crosstalk = np.zeros((m, m))
    for j in range(m):
        if members[j]["eps_tilde"] is None:
            continue
        factors = [indicators[(i, fam.D(j, i))] for i in range(d)]
        term = g[j].times(factors)
        out = out + term
        for s in range(m):
            if s != j:
                crosstalk[j, s] = float(np.max(np.abs(term.eval_grid(axes[s]))))
    worst, arg, count = 0.0, (), 0
    per_member = []
    for s in range(m):
        err, a, n = verify(fs[s], out, axes[s])
        per_member.append(err)
        count += n
        if err >= worst:
            worst, arg = err, a
    report.sampled_sup_error, report.argmax, report.sample_count = worst, arg, count
    report.term_count = out.term_count
    report.nodes = [mem["nodes"] for mem in members]
    report.certificate = eps
    report.ledger = members + report.ledger
    report.notes.append(f"per-member sampled errors: {per_member}")
    report.extra["crosstalk"] = crosstalk.tolist()
    report.extra["member_errors"] = per_member
    if worst > eps:
        raise CertificationFailed(f"sampled error {worst:.3g} exceeds eps {eps:.3g}", report=report.to_json())
    return out, report


def _same_set(fam, i, Dset, others):
    """True when the rest of K^i is covered by D (nothing to separate)."""
    rest = shapely.union_all([fam.members[k][i].outer for k in others])
    dgeom = shapely.union_all([fam.members[k][i].outer for k in Dset])
    return bool(rest.difference(dgeom).is_empty)

