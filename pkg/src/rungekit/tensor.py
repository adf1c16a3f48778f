"""Rational approximation of special type on products of planar compacta.

The recursion peels off one coordinate at a time. For the last coordinate
z and the others w, the Cauchy sum

    f(w, z) ~ sum_k c_k f(w, zeta_k) / (zeta_k - z)

is accurate on the product; w -> f(w, zeta_k) is approximated recursively
and every kernel 1/(zeta_k - z) is pushed into the pole set of that
coordinate. Unrolled, the output is

    sum over (k_1..k_d) of  prod_i c^i_{k_i} * f(zeta^1_{k_1}, ..., zeta^d_{k_d}) * prod_i R^i_{k_i}(z_i)

with the first coordinate's kernels folded into one rational per term.

Budget at level i (eps_d = eps): eps_i/2 for the Riemann sum, eps_i/4 for
the recursive error (eps_{i-1} = (eps_i/4) / sum_k |c_k|/D_k, with D_k the
node-to-K distance), eps_i/4 for the pushed kernels. Level 1 spends eps_1/2
on its Riemann sum and eps_1/2 on its kernels.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from itertools import product as iproduct

import numpy as np

from .errors import (
    CertificationFailed,
    DimensionMismatch,
    MarginTooSmall,
    PullbackNotHolomorphic,
    RungeKitError,
    TermBlowup,
)
from .geometry import (
    PlanarCompact,
    PoleSet,
    assign_poles,
    build_cycle,
    complement_components,
    validate_pole_set,
)
from .rexpr import RationalUnivariate, Term, TensorRationalExpr
from .runge1d import (
    DEGREE_CAP,
    PoleRouter,
    _check_clearance,
    approximate_univariate,
    check_sample,
    cycle_delta,
    kernel_basis,
    refine_quadrature,
)

PRUNE_FRACTION = 1e-3
CHECK_POINTS = 2000
VERIFY_POINTS = 40_000
MAX_COEFFS = 50_000_000


def max_terms_default():
    return int(os.environ.get("RUNGEKIT_MAX_TERMS", 10 ** 6))


@dataclass(frozen=True, eq=False)
class ProductDomain:
    """K = K_1 x ... x K_d with a pole set per factor."""

    factors: tuple  # of (PlanarCompact, PoleSet)

    def __post_init__(self):
        if len(self.factors) < 1:
            raise ValueError("a product needs at least one factor")
        for K, L in self.factors:
            validate_pole_set(K, L)

    @classmethod
    def build(cls, sets, poles):
        """From compacts and raw pole lists (assigned per component)."""
        return cls(tuple((K, assign_poles(K, P)) for K, P in zip(sets, poles)))

    @property
    def dim(self):
        return len(self.factors)

    @property
    def sets(self):
        return [K for K, _ in self.factors]

    def verification_axes(self, total=VERIFY_POINTS):
        """Per-coordinate samples whose product has at least ``total`` points.

        Half of each axis is taken from the boundary, half from the interior
        lattice (all boundary when there is no interior).
        """
        n = int(math.ceil(total ** (1.0 / self.dim)))
        return [_axis_sample(K, n) for K in self.sets]

    def random_points(self, n, rng):
        cols = []
        for K in self.sets:
            S = check_sample(K)
            cols.append(S[rng.integers(0, S.size, n)])
        return np.stack(cols, axis=-1)


def _axis_sample(K: PlanarCompact, n):
    h = K.grid_h
    bnd = K.boundary_sample(h / 4)
    S = K.sample(h / 2, h / 2)
    inner = S[~np.isin(S, bnd)]
    nb = n if inner.size == 0 else (n + 1) // 2
    ni = n - nb

    def pick(a, k):
        if a.size <= k:
            return a
        return a[np.round(np.linspace(0, a.size - 1, k)).astype(int)]

    out = np.concatenate([pick(bnd, nb), pick(inner, ni)])
    if out.size < n and S.size > out.size:
        extra = S[~np.isin(S, out)]
        out = np.concatenate([out, pick(extra, n - out.size)])
    return out


@dataclass
class ApproxReport:
    eps: float
    sampled_sup_error: float = 0.0
    argmax: tuple = ()
    sample_count: int = 0
    ledger: list = field(default_factory=list)
    nodes: list = field(default_factory=list)
    term_count: int = 0
    dropped: float = 0.0
    certificate: float = 0.0
    derivative_errors: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_json(self):
        def c(z):
            return [float(np.real(z)), float(np.imag(z))]
        return {
            "eps": self.eps,
            "sampled_sup_error": self.sampled_sup_error,
            "argmax": [c(z) for z in self.argmax],
            "sample_count": self.sample_count,
            "ledger": self.ledger,
            "nodes": list(self.nodes),
            "term_count": self.term_count,
            "dropped": self.dropped,
            "certificate": self.certificate,
            "derivative_errors": self.derivative_errors,
            "notes": list(self.notes),
            "extra": self.extra,
        }


def _oracle_margin(f, margin):
    if margin is not None:
        return float(margin)
    return float(getattr(f, "margin", 0.5))


def _eval_f(f, coords):
    return np.asarray(f(*coords), dtype=complex)


def verify(f, expr: TensorRationalExpr, axes):
    """Sampled sup |f - expr| on the product of the axis samples."""
    grids = np.ix_(*axes)
    fv = np.broadcast_to(_eval_f(f, grids), tuple(a.size for a in axes))
    av = expr.eval_grid(axes)
    err = np.abs(fv - av)
    k = np.unravel_index(int(np.argmax(err)), err.shape)
    return float(err[k]), tuple(complex(a[i]) for a, i in zip(axes, k)), err.size


def approximate_product(f, dom: ProductDomain, eps: float, margin: float | None = None,
                        perm=None, delta: float | None = None, seed: int = 0,
                        max_terms: int | None = None, cap: int = DEGREE_CAP,
                        verify_points: int = VERIFY_POINTS, certify: bool = True):
    """Approximate f on the product with poles in the prescribed sets.

    ``perm`` lists the coordinates in the order of the recursion: the last
    entry is split off first. Returns (expression, report).
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    d = dom.dim
    fdim = getattr(f, "dim", d)
    if fdim != d:
        raise DimensionMismatch(f"function has {fdim} variables, domain has {d}")
    rho = _oracle_margin(f, margin)
    if not rho > 0:
        raise ValueError("margin must be positive")
    perm = list(range(d)) if perm is None else [int(p) for p in perm]
    if sorted(perm) != list(range(d)):
        raise ValueError(f"perm must be a permutation of 0..{d - 1}")
    report = ApproxReport(eps)
    axes = dom.verification_axes(verify_points)

    if getattr(f, "is_constant", False):
        c = complex(np.asarray(_eval_f(f, [np.zeros(1)] * d)).ravel()[0])
        expr = TensorRationalExpr.constant(d, c)
        report.notes.append("constant function: exact")
    elif d == 1:
        K, L = dom.factors[0]
        r, urep = approximate_univariate(lambda z: _eval_f(f, [z]), K, L, eps, margin=rho,
                                         delta=delta, cap=cap, return_report=True)
        expr = TensorRationalExpr.from_factor(1, r)
        report.ledger.append({"level": 1, "var": 0, "eps_level": eps, "riemann": urep.riemann_error,
                              "riemann_budget": eps / 2, "push_budget": eps / 2, "recursive_budget": 0.0,
                              "nodes": urep.nodes, "delta": urep.delta})
        report.nodes = [urep.nodes]
        report.certificate = eps
    else:
        expr = _recursion(f, dom, eps, rho, perm, delta, seed,
                          max_terms or max_terms_default(), cap, report)
    report.term_count = expr.term_count
    err, arg, n = verify(f, expr, axes)
    report.sampled_sup_error, report.argmax, report.sample_count = err, arg, n
    report.notes.append("sup norm certified on a dense sample, not on all of K")
    if certify and err > eps:
        raise CertificationFailed(f"sampled error {err:.3g} exceeds eps {eps:.3g}", report=report.to_json())
    return expr, report


def _recursion(f, dom, eps, rho, perm, delta, seed, max_terms, cap, report):
    d = dom.dim
    rng = np.random.default_rng(seed)
    sets = dom.sets
    samples = [check_sample(K) for K in sets]
    level_var = {i: perm[i - 1] for i in range(1, d + 1)}
    quads, taus, eps_level = {}, {}, {}
    e = eps * (1 - PRUNE_FRACTION)
    for i in range(d, 0, -1):
        v = level_var[i]
        K = sets[v]
        eps_level[i] = e
        dlt = cycle_delta(K, rho, delta)
        cyc = build_cycle(K, dlt)
        n = CHECK_POINTS
        cols = [None] * d
        for j in range(1, d + 1):
            u = level_var[j]
            if j < i:
                cols[u] = samples[u][rng.integers(0, samples[u].size, n)]
            elif j > i:
                nodes = quads[j].nodes
                cols[u] = nodes[rng.integers(0, nodes.size, n)]
        # cover every sample point of the current coordinate
        zi = np.resize(rng.permutation(samples[v]), n)
        cols[v] = zi
        fP = _eval_f(f, [c if c is not None else zi for c in cols])
        state = {}

        def evaluate(quad, cols=cols, v=v, zi=zi, fP=fP, state=state):
            args = [c[:, None] for c in cols]
            args[v] = quad.nodes[None, :]
            G = np.broadcast_to(_eval_f(f, args), (zi.size, quad.size))
            vals = (G * quad.weights[None, :] / (quad.nodes[None, :] - zi[:, None])).sum(axis=1)
            for old in sorted(state)[:-1]:  # the accepted level is at most one behind
                del state[old]
            state[quad.size] = G
            return float(np.max(np.abs(vals - fP))), vals

        quad, rerr, rich = refine_quadrature(cyc, evaluate, e / 2, 4 * cyc.clearance)
        D = _check_clearance(K, quad)
        quads[i] = quad
        G = state[quad.size]
        absc = np.abs(quad.weights)
        gsup = 1.1 * np.max(np.abs(G), axis=0)
        entry = {"level": i, "var": v, "eps_level": e, "riemann": rerr, "richardson": rich,
                 "riemann_budget": e / 2, "nodes": quad.size, "delta": dlt}
        if i > 1:
            S = float((absc / D).sum())
            e_next = (e / 4) / S
            taus[i] = (e / 4) / float((absc * (gsup + e_next)).sum())
            entry.update(push_budget=e / 4, recursive_budget=e / 4, tau=taus[i])
            e = e_next
        else:
            taus[i] = (e / 2) / max(float((absc * gsup).sum()), 1e-300)
            entry.update(push_budget=e / 2, recursive_budget=0.0, tau=taus[i])
        report.ledger.append(entry)
    report.nodes = [quads[i].size for i in range(1, d + 1)]
    T = int(np.prod([quads[i].size for i in range(2, d + 1)]))
    if T > max_terms:
        raise TermBlowup(f"{T} terms exceed the cap {max_terms}")
    if T * quads[1].size > MAX_COEFFS:
        raise TermBlowup(f"{T * quads[1].size} node evaluations exceed {MAX_COEFFS}")

    bases = {}
    for i in range(1, d + 1):
        v = level_var[i]
        K, L = dom.factors[v]
        comps = complement_components(K)
        bases[i] = kernel_basis(K, L, quads[i].nodes, taus[i], router=PoleRouter(K, comps),
                                comps=comps, cap=cap, var=v)

    # coefficient tensor over levels 1..d
    args = []
    for i in range(1, d + 1):
        shape = [1] * d
        shape[i - 1] = quads[i].size
        args.append(quads[i].nodes.reshape(shape))
    coords = [None] * d
    for i in range(1, d + 1):
        coords[level_var[i]] = args[i - 1]
    W = np.broadcast_to(_eval_f(f, coords), tuple(quads[i].size for i in range(1, d + 1))).copy()
    for i in range(1, d + 1):
        shape = [1] * d
        shape[i - 1] = quads[i].size
        W *= quads[i].weights.reshape(shape)
    rows1 = W.reshape(quads[1].size, T).T @ bases[1].matrix  # (T, ncoef)
    kern = {i: [bases[i].from_row(bases[i].matrix[k]) for k in range(quads[i].size)] for i in range(2, d + 1)}
    norms = {i: bases[i].row_norms() for i in range(2, d + 1)}
    mag = np.abs(rows1).sum(axis=1)
    for i, idx in zip(range(2, d + 1), _multi_index_columns([quads[i].size for i in range(2, d + 1)])):
        mag = mag * norms[i][idx]
    thresh = PRUNE_FRACTION * eps / T
    keep = mag >= thresh
    report.dropped = float(mag[~keep].sum())
    terms = []
    multi = list(iproduct(*[range(quads[i].size) for i in range(2, d + 1)]))
    for t in np.flatnonzero(keep):
        ks = multi[t]
        factors = [bases[1].from_row(rows1[t])] + [kern[i][k] for i, k in zip(range(2, d + 1), ks)]
        terms.append(Term(1.0 + 0j, tuple(factors)))
    report.certificate = float(eps * (1 - PRUNE_FRACTION) + report.dropped)
    report.notes.append(f"{int((~keep).sum())} of {T} terms pruned")
    if not terms:
        return TensorRationalExpr.constant(d, 0.0)
    return TensorRationalExpr(d, tuple(terms))


def _multi_index_columns(sizes):
    """Per-position index arrays of the row-major enumeration of a grid."""
    if not sizes:
        return []
    grids = np.meshgrid(*[np.arange(s) for s in sizes], indexing="ij")
    return [g.ravel() for g in grids]


# --------------------------------------------------------------------------
# derivatives


def _fd_partial(f, coords, alpha, step):
    """Centered finite difference of order alpha (holomorphic f: real steps suffice)."""
    stencil = [((), 1.0)]
    for v, k in enumerate(alpha):
        for _ in range(k):
            stencil = [(s + ((v, +1),), w / (2 * step)) for s, w in stencil] + \
                      [(s + ((v, -1),), -w / (2 * step)) for s, w in stencil]
    out = 0
    for shifts, w in stencil:
        cs = list(coords)
        for v, sgn in shifts:
            cs[v] = cs[v] + sgn * step
        out = out + w * _eval_f(f, cs)
    return out


def approximate_with_derivatives(f, dom: ProductDomain, eps: float, orders=(0,),
                                 margin: float | None = None, seed: int = 0, perm=None,
                                 fd_step: float = 1e-4, verify_points: int = 10_000, **kw):
    """Approximant whose partial derivatives of the given orders are eps-close.

    The product is enlarged by delta = margin/4 in every coordinate and f is
    approximated there within eps' = eps * min_alpha delta^|alpha| / alpha!;
    Cauchy estimates on polydiscs of radius delta then bound every
    derivative error by eps on K.
    """
    orders = sorted(set(int(o) for o in orders))
    if orders == [0]:
        return approximate_product(f, dom, eps, margin=margin, seed=seed, perm=perm, **kw)
    rho = _oracle_margin(f, margin)
    dlt = rho / 4
    d = dom.dim
    alphas = list(iproduct(orders, repeat=d))
    factor = min(dlt ** sum(a) / math.prod(math.factorial(k) for k in a) for a in alphas)
    eps1 = eps * factor
    big = []
    for K, L in dom.factors:
        if dlt < 2 * K.grid_h:
            raise MarginTooSmall(f"enlargement {dlt:.3g} is below twice the pitch {K.grid_h}")
        try:
            Kb = K.dilated(dlt)
            big.append((Kb, assign_poles(Kb, L.poles)))
            validate_pole_set(*big[-1])
        except RungeKitError as exc:
            raise MarginTooSmall(f"poles do not survive the enlargement by {dlt:.3g}: {exc}") from exc
    bdom = ProductDomain(tuple(big))
    expr, report = approximate_product(f, bdom, eps1, margin=rho - dlt, seed=seed, perm=perm,
                                       certify=False, **kw)
    report.eps = eps
    report.notes.append(f"approximated on the {dlt:.3g}-enlargement within {eps1:.3g}")
    axes = dom.verification_axes(verify_points)
    err0, arg0, n0 = verify(f, expr, axes)
    report.sampled_sup_error, report.argmax, report.sample_count = err0, arg0, n0
    grids = np.ix_(*axes)
    worst = 0.0
    for a in alphas:
        if sum(a) == 0:
            report.derivative_errors[_akey(a)] = {"error": err0, "bound": eps1}
            worst = max(worst, err0)
            continue
        step = fd_step * 10 ** (sum(a) - 1)
        fd = np.broadcast_to(_fd_partial(f, list(grids), a, step), tuple(x.size for x in axes))
        ad = expr.derivative(a).eval_grid(axes)
        e_a = float(np.max(np.abs(fd - ad)))
        bound = eps1 * math.prod(math.factorial(k) for k in a) / dlt ** sum(a)
        report.derivative_errors[_akey(a)] = {"error": e_a, "bound": bound, "fd_step": step}
        worst = max(worst, e_a)
    if worst > eps:
        raise CertificationFailed(f"derivative error {worst:.3g} exceeds eps {eps:.3g}", report=report.to_json())
    return expr, report


def _akey(a):
    return ",".join(str(k) for k in a)


# --------------------------------------------------------------------------
# graphs


def approximate_on_graph(f_graph, omega, K1: PlanarCompact, L1: PoleSet, eps: float,
                         margin: float | None = None, threshold: float | None = None):
    """Approximate f_graph on the graph of omega over K1 by q(z), lifted as Q(z, w) = q(z).

    The pullback z -> f_graph(z, omega(z)) must pass the holomorphy check
    on the interior of K1, otherwise PullbackNotHolomorphic is raised.
    """
    from .adcheck import univariate_cr_check

    def pull(z):
        z = np.asarray(z, dtype=complex)
        return _eval_f(f_graph, [z, _eval_f(omega, [z])])

    verdict = univariate_cr_check(pull, K1, threshold=threshold)
    if verdict["verdict"] == "fail":
        raise PullbackNotHolomorphic(
            f"pullback has Cauchy-Riemann residual {verdict['residual']:.3g} at {verdict['witness']}",
            **{k: verdict[k] for k in ("residual", "threshold")})
    rho = _oracle_margin(f_graph, margin)
    q, urep = approximate_univariate(pull, K1, L1, eps, margin=rho, return_report=True)
    S = check_sample(K1)
    err = np.abs(pull(S) - q(S))
    k = int(np.argmax(err))
    report = ApproxReport(eps, float(err[k]), (complex(S[k]), complex(_eval_f(omega, [S[k:k + 1]])[0])),
                          S.size, nodes=[urep.nodes], term_count=1, certificate=eps)
    report.ledger.append(urep.to_json())
    report.notes.append(f"holomorphy pre-check: {verdict['verdict']}")
    return q, report


def lift_graph(q: RationalUnivariate) -> TensorRationalExpr:
    """Q(z, w) = q(z) as a two-variable expression."""
    return TensorRationalExpr.from_factor(2, q.with_var(0))
