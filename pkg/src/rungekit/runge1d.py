"""One-variable Runge approximation.

Two ingredients. A Cauchy-integral quadrature on a polygonal cycle around K
turns g into a finite sum of simple fractions c_k g(zeta_k) / (zeta_k - z).
Each fraction is then moved into the prescribed pole set: its pole walks
along a path in the complement and is re-expanded at every waypoint
(``push_pole``). Everything is expressed in normalized bases, so the sum of
absolute coefficients bounds the sup norm on K.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import dijkstra
from scipy.special import gammaln

from .errors import (
    BudgetOverflow,
    CycleTooCloseToSet,
    PathNotFound,
    RefinementLimitExceeded,
)
from .geometry import (
    INF,
    Cycle,
    PlanarCompact,
    PoleSet,
    build_cycle,
    complement_components,
    component_of,
    is_inf,
    pole_key,
    validate_pole_set,
)
from .rexpr import ArnoldiPart, PrincipalPart, RationalUnivariate

DEGREE_CAP = 500
GL_ORDER = 8
MAX_LEVEL = 10
MAX_NODES = 2 ** 14  # refinement stops here; keeps (sample x node) matrices in memory
FINAL_RATIO_MIN = 1.05  # |p - c| / R needed before expanding into a polynomial
FIT_STEP = 8  # degrees tried by fit_kernels: 8, 16, ...
UNIT_ROUNDOFF = np.finfo(float).eps / 2


def rounding_bound(coeffs):
    """Horner rounding error bound 2(n+1) u sum|c| for a series in a variable of modulus <= 1."""
    c = np.asarray(coeffs)
    return 2 * (c.size + 1) * UNIT_ROUNDOFF * float(np.abs(c).sum())
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)


def check_sample(K: PlanarCompact) -> np.ndarray:
    """Dense verification sample: boundary at h/2 and interior lattice at h."""
    return K.sample(K.grid_h / 2, K.grid_h)


def cycle_delta(K: PlanarCompact, margin: float, delta: float | None = None) -> float:
    """Distance of the integration cycle from K: min(user, margin/2), kept inside the grid."""
    lo, hi = K.bbox
    b = K.outer.bounds
    room = min(b[0] - lo.real, b[1] - lo.imag, hi.real - b[2], hi.imag - b[3]) - 2 * K.grid_h
    d = margin / 2 if delta is None else min(delta, margin / 2)
    return float(min(d, room))


# --------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True, eq=False)
class RiemannSumQuadrature:
    """Nodes zeta_k on the cycle and weights c_k = w_k dzeta / (2 pi i)."""

    nodes: np.ndarray
    weights: np.ndarray
    level: int
    cycle: Cycle = field(repr=False)

    @property
    def size(self):
        return self.nodes.size

    def kernel(self, z):
        """Matrix 1/(zeta_k - z) of shape (len(z), M)."""
        z = np.asarray(z, dtype=complex).reshape(-1, 1)
        return 1.0 / (self.nodes[None, :] - z)

    def apply(self, gvals, z):
        """sum_k c_k g(zeta_k) / (zeta_k - z), in row blocks to bound memory."""
        z = np.asarray(z, dtype=complex).ravel()
        cg = self.weights * gvals
        out = np.empty(z.size, dtype=complex)
        step = max(1, 2 ** 22 // max(self.size, 1))
        for i in range(0, z.size, step):
            out[i:i + step] = self.kernel(z[i:i + step]) @ cg
        return out


def gauss_panels(cycle: Cycle, base_length: float, level: int = 0) -> RiemannSumQuadrature:
    """Gauss-Legendre panels on every cycle edge.

    An edge gets ceil(length / base_length) panels at level 0, and each
    level doubles that count, so consecutive levels always differ.
    """
    a, b = cycle.edges()
    lengths = np.abs(b - a)
    npan = np.maximum(1, np.ceil(lengths / base_length)).astype(int) * 2 ** level
    starts, ends = [], []
    for ai, bi, n in zip(a, b, npan):
        t = np.arange(n + 1) / n
        pts = ai + (bi - ai) * t
        starts.append(pts[:-1])
        ends.append(pts[1:])
    s = np.concatenate(starts)
    e = np.concatenate(ends)
    mid, half = (s + e) / 2, (e - s) / 2
    nodes = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    weights = (half[:, None] * _GL_W[None, :]).ravel() / (2j * math.pi)
    return RiemannSumQuadrature(nodes, weights, level, cycle)


def refine_quadrature(cycle: Cycle, evaluate, tol: float, base_length: float,
                      max_level: int = MAX_LEVEL):
    """Halve panel lengths until a level passes its sampled and Richardson checks.

    ``evaluate(quad)`` returns (sampled error, approximant values on the
    check sample). Level l is accepted when its sampled error is <= tol and
    its distance to level l+1 (the Richardson estimate) is also <= tol.
    Returns (quad, sampled error, richardson estimate).
    """
    prev = None
    for level in range(max_level + 1):
        quad = gauss_panels(cycle, base_length, level)
        if quad.size > MAX_NODES:
            break
        err, vals = evaluate(quad)
        if prev is not None:
            pq, perr, pvals = prev
            rich = float(np.max(np.abs(vals - pvals), initial=0.0))
            if perr <= tol and rich <= tol:
                return pq, perr, rich
        prev = (quad, err, vals)
    raise RefinementLimitExceeded(f"quadrature did not reach {tol:.3g} within {max_level} refinements"
                                  f" or {MAX_NODES} nodes", error=None if prev is None else prev[1])


def _check_clearance(K, quad):
    dist = K.distance(quad.nodes)
    if float(dist.min()) < K.grid_h:
        raise CycleTooCloseToSet(f"quadrature node at distance {dist.min():.3g} below pitch {K.grid_h}")
    return dist


def cauchy_riemann_sum(g, K: PlanarCompact, cycle: Cycle, eps_half: float,
                       sample=None) -> RiemannSumQuadrature:
    """Quadrature whose Cauchy sum reproduces g within eps_half on a K-sample."""
    S = check_sample(K) if sample is None else sample
    gS = np.asarray(g(S), dtype=complex)

    def evaluate(quad):
        vals = quad.apply(np.asarray(g(quad.nodes), dtype=complex), S)
        return float(np.max(np.abs(vals - gS), initial=0.0)), vals

    quad, err, rich = refine_quadrature(cycle, evaluate, eps_half, 4 * cycle.clearance)
    _check_clearance(K, quad)
    return quad


# --------------------------------------------------------------------------
# series re-expansion


def _neg_binom_tail(logA, m, J, q):
    """Upper bound for sum_m A_m sum_{j>=J_m} C(m+j-1, j) q^j (all in logs)."""
    J = np.maximum(J, 0)
    full = logA - m * math.log1p(-q)
    lt = logA + gammaln(m + J) - gammaln(J + 1) - gammaln(m) + J * math.log(q) if q > 0 else None
    if lt is None:
        return float(np.exp(np.where(J == 0, full, -np.inf)).sum())
    r = (m + J) / (J + 1) * q
    with np.errstate(divide="ignore"):
        geo = lt - np.log1p(-np.minimum(r, 0.999999))
    bound = np.where(r < 1, np.minimum(geo, full), full)
    return float(np.exp(bound).sum())


def _series_compose(a, m, sigma, tau, N, shift):
    """Coefficients 0..N of sum_m a_m x^m in y.

    x = sigma*y/(1 - tau*y) when ``shift`` is set, else x = sigma/(1 - tau*y).
    Each power contributes a_m sigma^m C(m+j-1, j) tau^j at y^(j+m) (shift)
    or y^j. Consecutive binomials differ by the factor (m+j-1)/j, so the
    magnitudes come from one real cumulative product; the phase of tau^j
    splits into a factor of the output index and one of m.
    """
    tau = complex(tau)
    q = abs(tau)
    M = int(m.max())
    full = np.zeros(M, dtype=complex)
    full[m - 1] = a
    mm = np.arange(1, M + 1)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore", under="ignore"):
        am = full * complex(sigma) ** mm
        rows = N + 1 - (1 if shift else 0)  # j never exceeds N - 1 when shifting
        T = np.empty((rows, M))
        T[0] = np.abs(am)
        T[1:] = q + np.outer(1.0 / np.arange(1, rows), q * (mm - 1))
        T = np.cumprod(T, axis=0)
    if not np.all(np.isfinite(T)):
        raise BudgetOverflow("re-expansion coefficients overflow")
    u = tau / q if q > 0 else 1.0
    c = np.exp(1j * np.angle(am)) * u ** (-mm if shift else 0)
    if q == 0:
        T[1:] = 0.0
    if not shift:
        return (T @ c) * u ** np.arange(N + 1)
    # b_n = u^n sum_m T[n - m, m] c_m: skew the columns by m and add
    W = np.zeros((M, rows + M), dtype=complex)
    W[:, :rows] = T.T * c[:, None]
    skew = W.ravel()[:M * (rows + M - 1)].reshape(M, rows + M - 1).sum(axis=0)
    out = np.zeros(N + 1, dtype=complex)
    out[1:] = skew[:N]
    return out * u ** np.arange(N + 1)


def _reexpand(a, sigma, tau, budget, shift, cap):
    """Re-expand sum_m a_m x^m with x = sigma*y/(1 - tau*y) in powers of y.

    (1 - tau y)^(-m) = sum_j C(m+j-1, j) tau^j y^j. The new index is n = m+j
    for a pole shift (shift=True) and n = j for the final polynomial
    expansion. On K we have |y| <= 1 and |tau y| <= q = |tau|.

    Truncation is two-stage: a negative-binomial bound fixes a long
    expansion whose remainder is below budget/2; the explicit coefficients
    are then cut at the smallest degree whose dropped coefficients sum to at
    most the other half. Returns (coefficients from index 1 or 0, bound).
    """
    m = np.arange(1, a.size + 1)
    nz = np.abs(a) > 0
    m, a = m[nz], a[nz]
    q = abs(tau)
    with np.errstate(divide="ignore"):
        logA = np.log(np.abs(a)) + m * math.log(abs(sigma))
    first = 1 if shift else 0
    hard = 4 * cap
    N = first + (int(m.max()) if shift else 0)

    def tail(n):
        return _neg_binom_tail(logA, m, (n - m + 1) if shift else np.full(m.size, n + 1), q)

    far, lo, step = tail(N), None, 8
    while far > budget / 2:
        if N >= hard:
            raise BudgetOverflow(f"series degree would exceed the cap {cap}", tail=far)
        lo, N = N, min(hard, N + step)
        step = min(2 * step, 256)
        far = tail(N)
    # bisect back to the smallest N in (lo, N] that still meets budget/2
    while lo is not None and N - lo > 1:
        mid = (lo + N) // 2
        fm = tail(mid)
        if fm <= budget / 2:
            N, far = mid, fm
        else:
            lo = mid
    b = _series_compose(a, m, sigma, tau, N, shift)[first:]
    # dropped[k] = sum of |b| beyond position k
    dropped = np.concatenate([np.cumsum(np.abs(b)[::-1])[::-1][1:], [0.0]])
    keep = int(np.flatnonzero(dropped + far <= budget)[0]) + 1
    if keep - 1 + first > cap:
        raise BudgetOverflow(f"series degree {keep - 1 + first} exceeds the cap {cap}")
    return b[:keep], float(dropped[keep - 1] + far)


# --------------------------------------------------------------------------
# routing


class PoleRouter:
    """Shortest paths from complement points to their assigned poles.

    Dijkstra runs on the free cells of the raster, 8-connected, with edge
    weight length / dist(cell, K); paths therefore keep away from K, which
    keeps the number of re-expansion steps small. One search per target is
    cached and reused for every start point.
    """

    def __init__(self, K: PlanarCompact, comps=None):
        self.K = K
        self.comps = comps or complement_components(K)
        lab = self.comps.labels
        ny, nx = lab.shape
        self.shape = (ny, nx)
        self.centers = K.cell_centers().ravel()
        free = (lab >= 0).ravel()
        self.free = free
        dist = np.zeros(ny * nx)
        dist[free] = K.distance(self.centers[free])
        self.dist = np.maximum(dist, K.grid_h / 4)
        idx = np.arange(ny * nx).reshape(ny, nx)
        rows, cols, w = [], [], []
        for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
            y0, y1 = max(0, -dy), ny - max(0, dy)
            x0, x1 = max(0, -dx), nx - max(0, dx)
            a = idx[y0:y1, x0:x1].ravel()
            b = idx[y0 + dy:y1 + dy, x0 + dx:x1 + dx].ravel()
            keep = free[a] & free[b]
            a, b = a[keep], b[keep]
            length = K.grid_h * math.hypot(dx, dy)
            rows.append(a)
            cols.append(b)
            w.append(length * 0.5 * (1 / self.dist[a] + 1 / self.dist[b]))
        n = ny * nx + 1
        r, c, ww = np.concatenate(rows), np.concatenate(cols), np.concatenate(w)
        # finite targets must not shortcut through the node at infinity
        self.graph_finite = sparse.coo_matrix((ww, (r, c)), shape=(n, n)).tocsr()
        # a virtual node joined to every free border cell stands for infinity
        self.inf_node = ny * nx
        border = np.zeros((ny, nx), dtype=bool)
        border[0, :] = border[-1, :] = border[:, 0] = border[:, -1] = True
        bidx = idx[border & (lab == 0)]
        rows.append(bidx)
        cols.append(np.full(bidx.size, self.inf_node))
        w.append(np.full(bidx.size, 1e-9))
        r, c, ww = np.concatenate(rows), np.concatenate(cols), np.concatenate(w)
        self.graph = sparse.coo_matrix((ww, (r, c)), shape=(ny * nx + 1, ny * nx + 1)).tocsr()
        self._pred = {}

    def _entry(self, z, cid):
        """A free cell in component cid reachable from z by a segment missing K."""
        cell = self.K.cell_of(z)
        if cell is None:
            return None
        k = cell[0] * self.shape[1] + cell[1]
        if self.free[k] and self.comps.labels[cell] == cid:
            return k
        r = float(self.K.distance(np.array([z]))[0])
        gap = np.abs(self.centers - z)
        ok = self.free & (self.comps.labels.ravel() == cid) & (gap < r)
        if not ok.any():
            raise PathNotFound(f"no free cell next to {z}")
        return int(np.argmin(np.where(ok, gap, np.inf)))

    def _predecessors(self, target, cid):
        key = pole_key(target)
        if key not in self._pred:
            src = self.inf_node if is_inf(target) else self._entry(complex(target), cid)
            if src is None:
                # a pole beyond the raster: leave through the border cell nearest to it,
                # the final segment then stays outside the grid box
                ring = np.zeros(self.shape, dtype=bool)
                ring[0, :] = ring[-1, :] = ring[:, 0] = ring[:, -1] = True
                cand = np.flatnonzero((ring & (self.comps.labels == 0)).ravel())
                src = int(cand[np.argmin(np.abs(self.centers[cand] - complex(target)))])
            graph = self.graph if is_inf(target) else self.graph_finite
            _, pred = dijkstra(graph, directed=False, indices=src, return_predecessors=True)
            self._pred[key] = (src, pred)
        return self._pred[key]

    def route(self, z, target):
        """Polyline from z towards target (finite pole or INF)."""
        z = complex(z)
        cz = component_of(self.K, self.comps, z)
        if cz is None:
            raise PathNotFound(f"start point {z} lies in K")
        ct = self.comps.unbounded_id if is_inf(target) else component_of(self.K, self.comps, complex(target))
        if cz != ct:
            raise PathNotFound(f"{z} and pole {target} lie in different complement components")
        pts = [z]
        start = self._entry(z, cz)
        if start is None:
            # outside the raster: only the unbounded component lives there
            return np.array(pts + [self._ray_end(z) if is_inf(target) else complex(target)])
        src, pred = self._predecessors(target, ct)
        k = start
        guard = 0
        while k != src and k >= 0:
            if k < self.inf_node:
                pts.append(self.centers[k])
            nxt = pred[k]
            if nxt == src or nxt < 0:
                break
            k = nxt
            guard += 1
            if guard > pred.size:
                raise PathNotFound("predecessor chain does not terminate")
        if pred[start] < 0 and start != src:
            raise PathNotFound(f"no raster path from {z} to {target}")
        if is_inf(target):
            pts.append(self._ray_end(pts[-1]))
        else:
            pts.append(complex(target))
        return np.array(pts)

    def _ray_end(self, z):
        c, R = self.K.enclosing_disc
        d = z - c
        d = d / abs(d) if abs(d) > 0 else 1.0
        return c + d * 3 * R


def _densify(path, spacing):
    out = [path[:1]]
    for a, b in zip(path[:-1], path[1:]):
        n = max(1, int(math.ceil(abs(b - a) / spacing)))
        out.append(a + (b - a) * np.arange(1, n + 1) / n)
    return np.concatenate(out)


def waypoints(K: PlanarCompact, path, target):
    """Greedy admissible waypoints: |p' - p| <= dist(p', K) / 2 for each step.

    The walk stops at the first waypoint from which the final jump is
    admissible: |p - target| <= dist(target, K)/2 for a finite target, or
    |p - c| >= 2R (outside twice the enclosing disc) for infinity.
    """
    c, R = K.enclosing_disc
    dens = _densify(np.asarray(path, dtype=complex), K.grid_h / 8)
    dist = K.distance(dens)
    tdist = None if is_inf(target) else float(K.distance(np.array([complex(target)]))[0])

    def done(p):
        if is_inf(target):
            return abs(p - c) >= 2 * R
        return abs(p - complex(target)) <= tdist / 2

    wp = [dens[0]]
    i = 0
    while not done(wp[-1]):
        p = wp[-1]
        ok = np.abs(dens[i + 1:] - p) <= dist[i + 1:] / 2
        if not ok.size or not ok[0]:
            if i + 1 >= dens.size:
                raise PathNotFound("path ended before reaching the target")
            raise PathNotFound(f"path passes too close to K near {dens[i + 1]}")
        bad = np.flatnonzero(~ok)
        j = i + (int(bad[0]) if bad.size else ok.size)
        wp.append(dens[j])
        i = j
    return wp


# --------------------------------------------------------------------------
# pole pushing


@dataclass(frozen=True)
class PushReport:
    steps: int
    degree: int
    bound: float
    waypoints: tuple


def push_pole(zeta, K: PlanarCompact, target, eps: float, router: PoleRouter | None = None,
              cap: int = DEGREE_CAP, var: int = 0, return_report: bool = False):
    """Rational r with poles in {target} and sup_K |1/(zeta - z) - r| <= eps.

    The pole walks through admissible waypoints; step k spends at most
    eps * 2^-(k+1) of the budget on truncation. For a finite target the
    last step lands on the target. For infinity the final polynomial
    expansion converges from any waypoint outside the enclosing disc; it is
    tried at each such waypoint and the lowest degree wins.
    """
    zeta = complex(zeta)
    target = pole_key(target)
    router = router or PoleRouter(K)
    path = router.route(zeta, target)
    wp = waypoints(K, path, target)
    # 1/(zeta - z) = -(1/s) * s/(z - zeta)
    p = zeta
    s = float(K.distance(np.array([p]))[0])
    a = np.array([-1.0 / s], dtype=complex)
    total = 0.0
    if is_inf(target):
        c, R = K.enclosing_disc
        best = None
        for step, p_next in enumerate(list(wp[1:]) + [None]):
            budget = eps * 2.0 ** (-step - 1)
            if abs(p - c) > FINAL_RATIO_MIN * R:
                try:
                    poly, tail = _reexpand(a, -s / (p - c), R / (p - c), budget, shift=False, cap=cap)
                    tail += rounding_bound(poly)
                    if total + tail <= eps and (best is None or poly.size < best[0].size):
                        best = (poly, total + tail, step)
                except BudgetOverflow:
                    pass
            if p_next is None:
                break
            s2 = float(K.distance(np.array([p_next]))[0])
            try:
                a, tail = _reexpand(a, s / s2, (p - p_next) / s2, budget, shift=True, cap=cap)
            except BudgetOverflow:
                break
            total += tail
            p, s = p_next, s2
        if best is None:
            raise BudgetOverflow(f"no admissible polynomial expansion of degree <= {cap} for pole {zeta}")
        poly, total, steps = best
        r = RationalUnivariate(var, c, R, poly)
    else:
        steps = 0
        for p_next in list(wp[1:]) + [target]:
            budget = eps * 2.0 ** (-steps - 1)
            s2 = float(K.distance(np.array([p_next]))[0])
            a, tail = _reexpand(a, s / s2, (p - p_next) / s2, budget, shift=True, cap=cap)
            total += tail
            p, s = p_next, s2
            steps += 1
        total += rounding_bound(a)
        if total > eps:
            raise BudgetOverflow(f"rounding in the principal part exceeds eps for pole {zeta}", bound=total)
        r = RationalUnivariate(var, principal=(PrincipalPart(p, s, a),))
    if return_report:
        return r, PushReport(steps + 1 if is_inf(target) else steps, r.degree, total, tuple(wp))
    return r


# --------------------------------------------------------------------------
# kernel bases


@dataclass(frozen=True, eq=False)
class KernelBasis:
    """Pushed kernels R_k ~ 1/(zeta_k - z) stored as rows of one coefficient matrix.

    Column layout: polynomial coefficients in v = (z - c)/R, then for each
    finite pole its principal-part coefficients in u = s/(z - p), then the
    Arnoldi blocks of fitted kernels. Linear combinations of kernels are
    therefore matrix products.
    """

    var: int
    center: complex
    scale: float
    poles: tuple  # (pole, scale, order)
    poly_len: int
    matrix: np.ndarray  # (M, ncoef)
    bounds: np.ndarray  # eps used per kernel
    arnoldi: tuple = ()  # (ArnoldiPart template, length)
    fitted: int = 0  # kernels that fell back to a least-squares fit

    def combine(self, coeffs, var=None) -> RationalUnivariate:
        row = np.asarray(coeffs, dtype=complex) @ self.matrix
        return self.from_row(row, var)

    def from_row(self, row, var=None) -> RationalUnivariate:
        var = self.var if var is None else var
        poly = row[:self.poly_len].copy()
        parts = []
        off = self.poly_len
        for p, s, n in self.poles:
            parts.append(PrincipalPart(p, s, row[off:off + n].copy()))
            off += n
        arn = []
        for tpl, n in self.arnoldi:
            arn.append(tpl.with_coeffs(row[off:off + n].copy()))
            off += n
        return RationalUnivariate(var, self.center, self.scale, poly, tuple(parts), tuple(arn))

    def row_norms(self):
        return np.abs(self.matrix).sum(axis=1)

    def evaluate(self, z):
        """Matrix R_k(z) of shape (len(z), M)."""
        z = np.asarray(z, dtype=complex).ravel()
        cols = []
        if self.poly_len:
            v = (z - self.center) / self.scale
            cols.append(v[:, None] ** np.arange(self.poly_len)[None, :])
        for p, s, n in self.poles:
            u = s / (z - p)
            cols.append(u[:, None] ** np.arange(1, n + 1)[None, :])
        for tpl, n in self.arnoldi:
            cols.append(tpl.basis(z, n))
        B = np.concatenate(cols, axis=1) if cols else np.zeros((z.size, 0))
        return B @ self.matrix.T


def _arnoldi(w, n):
    """Vandermonde with Arnoldi: basis values on w (columns scaled to rms 1) and the Hessenberg matrix."""
    m = w.size
    Q = np.zeros((m, n + 1), dtype=complex)
    H = np.zeros((n + 1, n), dtype=complex)
    Q[:, 0] = 1.0
    for k in range(n):
        v = w * Q[:, k]
        for _ in range(2):  # re-orthogonalize once
            h = Q[:, :k + 1].conj().T @ v / m
            v = v - Q[:, :k + 1] @ h
            H[:k + 1, k] += h
        H[k + 1, k] = np.linalg.norm(v) / math.sqrt(m)
        Q[:, k + 1] = v / H[k + 1, k]
    return Q, H


FIT_SPACING = 1 / 16  # boundary spacing for Arnoldi fits, in units of the pitch


def arnoldi_block(K: PlanarCompact, target, n: int, B=None):
    """Arnoldi basis of degree n in the normalized variable of ``target``, built on boundary points of K.

    Returns (template ArnoldiPart, basis values on B, B). The boundary is
    sampled finely (FIT_SPACING) because the recurrence is only stable when
    the sample resolves polynomials of the requested degree.
    """
    B = K.boundary_sample(K.grid_h * FIT_SPACING) if B is None else B
    if is_inf(target):
        origin, scale = K.enclosing_disc
        pole = INF
    else:
        pole, origin = complex(target), 0j
        scale = float(K.distance(np.array([pole]))[0])
    n = min(n, max(1, B.size // 4))
    probe = ArnoldiPart(pole, float(scale), complex(origin), np.zeros((1, 0)), np.zeros(0), np.zeros(0))
    QB, H = _arnoldi(probe.w(B), n)
    tag = hashlib.sha1(H.tobytes()).hexdigest()[:16]
    tpl = ArnoldiPart(pole, float(scale), complex(origin), H, np.abs(QB).max(axis=0),
                      np.zeros(0, dtype=complex), 0, tag)
    return tpl, QB, B


def fit_kernels(K: PlanarCompact, target, zetas, taus, cap: int = DEGREE_CAP, var: int = 0):
    """Least-squares stand-in for push_pole when re-expansion overflows.

    All kernels 1/(zeta_k - z) headed for the same pole are fitted at once
    by polynomials in the normalized variable w of that pole, using the
    Arnoldi basis orthonormal on boundary points of K (the error is
    holomorphic near K, so the boundary carries its maximum). The lowest
    degree whose error on the check sample meets every kernel's tau wins.
    Returns (template ArnoldiPart, coefficient matrix with one row per kernel).
    """
    zetas = np.asarray(zetas, dtype=complex)
    taus = np.asarray(taus, dtype=float)
    tpl, QB, B = arnoldi_block(K, target, cap)
    n = QB.shape[1] - 1
    S = np.concatenate([check_sample(K), B])
    QS = tpl.basis(S, n + 1)
    FB = 1.0 / (zetas[None, :] - B[:, None])
    FS = 1.0 / (zetas[None, :] - S[:, None])
    C = QB.conj().T @ FB / B.size  # projections; truncations are least-squares fits
    worst = math.inf
    for deg in range(FIT_STEP, n + FIT_STEP, FIT_STEP):
        deg = min(deg, n)
        err = np.abs(QS[:, :deg + 1] @ C[:deg + 1] - FS).max(axis=0)
        worst = float(np.max(err / taus))
        if worst <= 1.0:
            return tpl, C[:deg + 1].T
    raise BudgetOverflow(f"no fit of degree <= {n} meets the kernel budgets towards {target}", ratio=worst)


def kernel_basis(K: PlanarCompact, L: PoleSet, nodes, tau, router=None, comps=None,
                 cap: int = DEGREE_CAP, var: int = 0, fit: bool = True) -> KernelBasis:
    """Push 1/(zeta_k - z) into L for every node, each within tau (scalar or per node).

    Kernels whose re-expansion overflows the degree cap are fitted by
    ``fit_kernels`` instead, grouped by target pole (unless ``fit`` is off,
    in which case the overflow propagates).
    """
    comps = comps or complement_components(K)
    router = router or PoleRouter(K, comps)
    nodes = np.asarray(nodes, dtype=complex)
    taus = np.broadcast_to(np.asarray(tau, dtype=float), nodes.shape)
    pushed = [None] * nodes.size
    overflow = {}
    for k, (z, t) in enumerate(zip(nodes, taus)):
        cid = component_of(K, comps, z)
        if cid is None or cid not in L.assignment:
            raise PathNotFound(f"node {z} has no assigned pole")
        target = L.assignment[cid]
        try:
            pushed[k] = push_pole(z, K, target, float(t), router, cap, var)
        except BudgetOverflow:
            if not fit:
                raise
            overflow.setdefault(pole_key(target), []).append(k)
    fits = []
    for target, ks in sorted(overflow.items(), key=lambda kv: str(kv[0])):
        tpl, C = fit_kernels(K, target, nodes[ks], taus[ks], cap, var)
        fits.append((tpl, C, ks))
    c, R = K.enclosing_disc
    done = [r for r in pushed if r is not None]
    poly_len = max([r.poly.size for r in done] + [0])
    orders = {}
    for r in done:
        for pp in r.principal:
            orders[pp.pole] = (pp.scale, max(orders.get(pp.pole, (0, 0))[1], pp.coeffs.size))
    poles = tuple((p, s, n) for p, (s, n) in sorted(orders.items(), key=lambda kv: (kv[0].real, kv[0].imag)))
    ncoef = poly_len + sum(n for _, _, n in poles) + sum(C.shape[1] for _, C, _ in fits)
    M = np.zeros((nodes.size, ncoef), dtype=complex)
    for k, r in enumerate(pushed):
        if r is None:
            continue
        M[k, :r.poly.size] = r.poly
        off = poly_len
        for p, s, n in poles:
            for pp in r.principal:
                if pp.pole == p:
                    M[k, off:off + pp.coeffs.size] = pp.coeffs
            off += n
    off = poly_len + sum(n for _, _, n in poles)
    arn = []
    for tpl, C, ks in fits:
        M[ks, off:off + C.shape[1]] = C
        arn.append((tpl, C.shape[1]))
        off += C.shape[1]
    return KernelBasis(var, c, R, poles, poly_len, M, np.asarray(taus, dtype=float), tuple(arn),
                       sum(len(ks) for _, _, ks in fits))


# --------------------------------------------------------------------------
# the univariate theorem


@dataclass
class UnivariateReport:
    sampled_sup_error: float
    argmax: complex
    sample_count: int
    riemann_error: float
    richardson: float
    push_budget: float
    nodes: int
    degree: int
    delta: float

    def to_json(self):
        return {"sampled_sup_error": self.sampled_sup_error,
                "argmax": [self.argmax.real, self.argmax.imag],
                "sample_count": self.sample_count, "riemann_error": self.riemann_error,
                "richardson": self.richardson, "push_budget": self.push_budget,
                "nodes": self.nodes, "degree": self.degree, "delta": self.delta}


def approximate_univariate(g, K: PlanarCompact, L: PoleSet, eps: float, margin: float | None = None,
                           delta: float | None = None, var: int = 0, cap: int = DEGREE_CAP,
                           return_report: bool = False):
    """Rational approximant of g on K with poles in L and sampled error <= eps."""
    comps = complement_components(K)
    validate_pole_set(K, L, comps)
    margin = margin if margin is not None else getattr(g, "margin", 0.5)
    S = check_sample(K)
    gS = np.asarray(g(S), dtype=complex)
    if np.all(np.ptp(gS.real) == 0) and np.all(np.ptp(gS.imag) == 0) and getattr(g, "is_constant", False):
        r = RationalUnivariate.constant(var, complex(gS.flat[0]))
        rep = UnivariateReport(0.0, complex(S[0]), S.size, 0.0, 0.0, 0.0, 0, 0, 0.0)
        return (r, rep) if return_report else r
    dlt = cycle_delta(K, margin, delta)
    cyc = build_cycle(K, dlt)

    def evaluate(quad):
        vals = quad.apply(np.asarray(g(quad.nodes), dtype=complex), S)
        return float(np.max(np.abs(vals - gS), initial=0.0)), vals

    quad, rerr, rich = refine_quadrature(cyc, evaluate, eps / 2, 4 * cyc.clearance)
    _check_clearance(K, quad)
    cg = quad.weights * np.asarray(g(quad.nodes), dtype=complex)
    weight = float(np.abs(cg).sum())
    tau = (eps / 2) / max(weight, 1e-300)
    basis = kernel_basis(K, L, quad.nodes, tau, comps=comps, cap=cap, var=var)
    r = basis.combine(cg)
    err = np.abs(r(S) - gS)
    k = int(np.argmax(err))
    rep = UnivariateReport(float(err[k]), complex(S[k]), S.size, rerr, rich, eps / 2, quad.size, r.degree, dlt)
    return (r, rep) if return_report else r
