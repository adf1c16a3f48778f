"""One-variable rationals with prescribed poles, and sums of products of them.

A :class:`RationalUnivariate` is stored in partial-fraction form with
normalized bases, which keeps coefficient magnitudes meaningful::

    r(z) = sum_n a_n v**n + sum_p sum_m b_{p,m} u_p**m
    v   = (z - center) / scale          (polynomial part)
    u_p = s_p / (z - p)                 (principal part at p)

When ``scale`` bounds |z - center| on the target set and ``s_p`` is the
distance from p to it, every basis function has modulus <= 1 there and the
coefficient l1-norm bounds the sup norm.

A third kind of part, :class:`ArnoldiPart`, holds a polynomial in one of
the normalized variables written in a basis orthonormalized on samples of
the target set. It has the same single pole but stays well conditioned
where monomials would need huge, cancelling coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product as iproduct

import numpy as np

from .errors import PoleConstraintViolated, PoleHit, VariableCollisionInProduct
from .geometry import INF, is_inf


def _horner(coeffs, x, start_power=0):
    """sum_k coeffs[k] x**(k + start_power)."""
    acc = np.zeros(np.shape(x), dtype=complex)
    for c in coeffs[::-1]:
        acc = acc * x + c
    if start_power:
        acc = acc * x ** start_power
    return acc


def _cjson(z):
    z = complex(z)
    return [z.real, z.imag]


def _carr(a):
    return [[float(c.real), float(c.imag)] for c in np.asarray(a, dtype=complex)]


def _from_carr(v):
    return np.array([complex(x, y) for x, y in v], dtype=complex)


@dataclass(frozen=True, eq=False)
class PrincipalPart:
    pole: complex
    scale: float
    coeffs: np.ndarray  # coefficient of u**1, u**2, ...

    @property
    def order(self):
        nz = np.flatnonzero(self.coeffs)
        return int(nz[-1]) + 1 if nz.size else 0


_EVAL_BLOCK = 2048


def _w_jet(z, pole, scale, origin, order):
    """Taylor coefficients of w(z + e) in e up to e**order."""
    if is_inf(pole):
        jet = np.zeros(z.shape + (order + 1,), dtype=complex)
        jet[..., 0] = (z - origin) / scale
        if order:
            jet[..., 1] = 1.0 / scale
        return jet
    w = scale / (z - pole)
    return w[..., None] * (-w / scale)[..., None] ** np.arange(order + 1)


@dataclass(frozen=True, eq=False)
class ArnoldiPart:
    """sum_k coeffs[k] q_k(w), with q_k the Arnoldi basis encoded by ``hess``.

    w = scale/(z - pole) for a finite pole and w = (z - origin)/scale for
    INF, so the part is a polynomial in w and its only pole is that of w.
    q_0 = 1 and h[k+1,k] q_{k+1} = w q_k - sum_{j<=k} h[j,k] q_j; the basis is
    orthonormal on the sample it was built from, which keeps coefficients
    small where monomials in w would need huge cancelling ones. ``dorder``
    > 0 stands for that derivative in z (evaluated with Taylor jets).
    """

    pole: object  # complex or INF
    scale: float
    origin: complex
    hess: np.ndarray  # (n+1, n)
    qmax: np.ndarray  # max |q_k| on the fitting sample
    coeffs: np.ndarray
    dorder: int = 0
    tag: str = ""

    @property
    def key(self):
        return (self.pole, self.scale, self.origin, self.tag, self.dorder)

    @property
    def order(self):
        nz = np.flatnonzero(self.coeffs)
        return int(nz[-1]) if nz.size else 0

    def w(self, z):
        if is_inf(self.pole):
            return (z - self.origin) / self.scale
        return self.scale / (z - self.pole)

    def basis(self, z, n=None):
        """Values q_0..q_{n-1} at z (derivative order 0), shape (len(z), n)."""
        z = np.asarray(z, dtype=complex).ravel()
        n = self.coeffs.size if n is None else n
        Q = np.zeros((z.size, n), dtype=complex)
        if n == 0:
            return Q
        w = self.w(z)
        H = self.hess
        Q[:, 0] = 1.0
        for k in range(n - 1):
            v = w * Q[:, k] - Q[:, :k + 1] @ H[:k + 1, k]
            Q[:, k + 1] = v / H[k + 1, k]
        return Q

    def _jets(self, z, n):
        d = self.dorder
        wj = _w_jet(z, self.pole, self.scale, self.origin, d)
        Q = np.zeros((z.size, n, d + 1), dtype=complex)
        Q[:, 0, 0] = 1.0
        H = self.hess
        for k in range(n - 1):
            q = Q[:, k, :]
            prod = np.zeros_like(q)
            for i in range(d + 1):
                prod[:, i:] += wj[:, i:i + 1] * q[:, :d + 1 - i]
            v = prod - np.einsum("pjd,j->pd", Q[:, :k + 1, :], H[:k + 1, k])
            Q[:, k + 1, :] = v / H[k + 1, k]
        return Q[:, :, d] * math.factorial(d)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        out = np.zeros(flat.size, dtype=complex)
        n = self.order + 1 if self.coeffs.size else 0
        if n == 0:
            return out.reshape(z.shape)
        for i in range(0, flat.size, _EVAL_BLOCK):
            zz = flat[i:i + _EVAL_BLOCK]
            B = self.basis(zz, n) if self.dorder == 0 else self._jets(zz, n)
            out[i:i + _EVAL_BLOCK] = B @ self.coeffs[:n]
        return out.reshape(z.shape)

    def with_coeffs(self, c):
        return ArnoldiPart(self.pole, self.scale, self.origin, self.hess, self.qmax,
                           np.asarray(c, dtype=complex), self.dorder, self.tag)

    def norm_bound(self):
        n = min(self.coeffs.size, self.qmax.size)
        return float(np.abs(self.coeffs[:n]) @ self.qmax[:n])

    def derivative(self):
        return ArnoldiPart(self.pole, self.scale, self.origin, self.hess, self.qmax, self.coeffs,
                           self.dorder + 1, self.tag)

    def to_json(self):
        pole = INF if is_inf(self.pole) else _cjson(self.pole)
        return {"pole": pole, "scale": self.scale, "origin": _cjson(self.origin), "dorder": self.dorder,
                "tag": self.tag, "hess_shape": list(self.hess.shape), "hess": _carr(self.hess.ravel()),
                "qmax": [float(x) for x in self.qmax], "coeffs": _carr(self.coeffs)}

    @classmethod
    def from_json(cls, d):
        pole = INF if is_inf(d["pole"]) else complex(*d["pole"])
        H = _from_carr(d["hess"]).reshape(d["hess_shape"])
        return cls(pole, float(d["scale"]), complex(*d["origin"]), H, np.array(d["qmax"], dtype=float),
                   _from_carr(d["coeffs"]), int(d["dorder"]), d["tag"])


@dataclass(frozen=True, eq=False)
class RationalUnivariate:
    var: int
    center: complex = 0j
    scale: float = 1.0
    poly: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    principal: tuple = ()
    arnoldi: tuple = ()

    # construction -----------------------------------------------------

    @classmethod
    def constant(cls, var, c, center=0j, scale=1.0):
        return cls(var, center, scale, np.array([complex(c)]))

    @classmethod
    def monomial(cls, var, power=1, coeff=1.0):
        a = np.zeros(power + 1, dtype=complex)
        a[power] = coeff
        return cls(var, 0j, 1.0, a)

    @classmethod
    def simple_pole(cls, var, pole, residue=1.0, scale=1.0):
        """residue / (z - pole)."""
        return cls(var, principal=(PrincipalPart(complex(pole), scale, np.array([residue / scale], dtype=complex)),))

    # evaluation -------------------------------------------------------

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = _horner(self.poly, (z - self.center) / self.scale) if self.poly.size else np.zeros(z.shape, complex)
        for pp in self.principal:
            d = z - pp.pole
            if np.any(d == 0):
                raise PoleHit(self.var, pp.pole)
            out = out + _horner(pp.coeffs, pp.scale / d, start_power=1)
        for cp in self.arnoldi:
            if not is_inf(cp.pole) and np.any(z == cp.pole):
                raise PoleHit(self.var, cp.pole)
            out = out + cp(z)
        return out

    eval = __call__

    def poles(self):
        ps = {pp.pole for pp in self.principal if pp.order > 0}
        if np.flatnonzero(self.poly[1:]).size:
            ps.add(INF)
        for cp in self.arnoldi:
            if cp.order > 0:
                ps.add(INF if is_inf(cp.pole) else cp.pole)
        return ps

    @property
    def degree(self):
        """Largest order among the polynomial part and principal parts."""
        nz = np.flatnonzero(self.poly)
        d = int(nz[-1]) if nz.size else 0
        return max([d] + [pp.order for pp in self.principal] + [cp.order for cp in self.arnoldi])

    def norm_bound(self):
        """Sum of |coefficients|; bounds sup|r| where all basis moduli are <= 1.

        For Arnoldi parts the basis moduli are measured on the fitting
        sample, so that contribution is an estimate rather than a guarantee.
        """
        return float(np.abs(self.poly).sum() + sum(np.abs(pp.coeffs).sum() for pp in self.principal)
                     + sum(cp.norm_bound() for cp in self.arnoldi))

    def truncated(self, tol):
        """Drop trailing coefficients of total modulus <= tol; returns (r, dropped).

        The polynomial and principal-part bases have modulus <= 1 on the set
        they were built for, so ``dropped`` bounds the change of sup|r| there.
        Arnoldi parts are left alone.
        """
        share = tol / (1 + len(self.principal))

        def cut(c):
            tail = np.cumsum(np.abs(c)[::-1])[::-1]  # tail[k] = sum_{j>=k} |c_j|
            k = int(np.searchsorted(-tail, -share, side="left"))  # first k with tail[k] <= share
            k = max(k, 1) if c.size else 0
            return c[:k], float(tail[k]) if k < c.size else 0.0

        poly, dropped = cut(self.poly)
        parts = []
        for pp in self.principal:
            c, dr = cut(pp.coeffs)
            parts.append(PrincipalPart(pp.pole, pp.scale, c))
            dropped += dr
        return RationalUnivariate(self.var, self.center, self.scale, poly, tuple(parts), self.arnoldi), dropped

    # algebra ----------------------------------------------------------

    def scaled(self, a):
        a = complex(a)
        return RationalUnivariate(self.var, self.center, self.scale, self.poly * a,
                                  tuple(PrincipalPart(p.pole, p.scale, p.coeffs * a) for p in self.principal),
                                  tuple(cp.with_coeffs(cp.coeffs * a) for cp in self.arnoldi))

    def __add__(self, other):
        if not isinstance(other, RationalUnivariate) or other.var != self.var:
            return NotImplemented
        if self.poly.size and other.poly.size and (self.center != other.center or self.scale != other.scale):
            raise ValueError("polynomial parts use different bases")
        n = max(self.poly.size, other.poly.size)
        poly = np.zeros(n, dtype=complex)
        poly[:self.poly.size] += self.poly
        poly[:other.poly.size] += other.poly
        center, scale = (self.center, self.scale) if self.poly.size else (other.center, other.scale)
        parts = {}
        for pp in self.principal + other.principal:
            if pp.pole in parts:
                q = parts[pp.pole]
                c = pp.coeffs * (pp.scale / q.scale) ** np.arange(1, pp.coeffs.size + 1)
                m = max(q.coeffs.size, c.size)
                acc = np.zeros(m, dtype=complex)
                acc[:q.coeffs.size] += q.coeffs
                acc[:c.size] += c
                parts[pp.pole] = PrincipalPart(q.pole, q.scale, acc)
            else:
                parts[pp.pole] = pp
        arn = {}
        for cp in self.arnoldi + other.arnoldi:
            if cp.key in arn:
                q = arn[cp.key]
                n = max(q.coeffs.size, cp.coeffs.size)
                acc = np.zeros(n, dtype=complex)
                acc[:q.coeffs.size] += q.coeffs
                acc[:cp.coeffs.size] += cp.coeffs
                arn[cp.key] = q.with_coeffs(acc)
            else:
                arn[cp.key] = cp
        return RationalUnivariate(self.var, center, scale, poly, tuple(parts.values()), tuple(arn.values()))

    def derivative(self, k=1):
        r = self
        for _ in range(k):
            r = r._d1()
        return r

    def _d1(self):
        n = self.poly.size
        poly = (self.poly[1:] * np.arange(1, n) / self.scale) if n > 1 else np.zeros(0, dtype=complex)
        parts = []
        for pp in self.principal:
            # d/dz u**m = -(m/s) u**(m+1)
            m = np.arange(1, pp.coeffs.size + 1)
            c = np.concatenate([[0j], -pp.coeffs * m / pp.scale])
            parts.append(PrincipalPart(pp.pole, pp.scale, c))
        arn = tuple(cp.derivative() for cp in self.arnoldi)
        return RationalUnivariate(self.var, self.center, self.scale, poly, tuple(parts), arn)

    def with_var(self, var):
        return RationalUnivariate(var, self.center, self.scale, self.poly, self.principal, self.arnoldi)

    # io ---------------------------------------------------------------

    def to_json(self):
        d = {"var": self.var, "poly": {"center": _cjson(self.center), "scale": self.scale, "coeffs": _carr(self.poly)}}
        d["principal"] = [{"pole": _cjson(p.pole), "scale": p.scale, "coeffs": _carr(p.coeffs)}
                          for p in self.principal]
        if self.arnoldi:
            d["arnoldi"] = [cp.to_json() for cp in self.arnoldi]
        return d

    @classmethod
    def from_json(cls, d):
        if "parts" in d:
            return UnivariateProduct.from_json(d)
        if "compose" in d:
            return ComposedRational.from_json(d)
        p = d["poly"]
        parts = tuple(PrincipalPart(complex(*q["pole"]), float(q["scale"]), _from_carr(q["coeffs"]))
                      for q in d.get("principal", []))
        arn = tuple(ArnoldiPart.from_json(q) for q in d.get("arnoldi", []))
        return cls(int(d["var"]), complex(*p["center"]), float(p["scale"]), _from_carr(p["coeffs"]), parts, arn)

    def pretty(self):
        name = f"z{self.var + 1}"
        bits = []
        if self.poly.size:
            bits.append(f"poly deg {max(0, self.poly.size - 1)} in ({name}-{_fmt(self.center)})/{self.scale:g}")
        for pp in self.principal:
            bits.append(f"pole {_fmt(pp.pole)} order {pp.order}")
        for cp in self.arnoldi:
            where = "inf" if is_inf(cp.pole) else _fmt(cp.pole)
            bits.append(f"arnoldi at {where} degree {cp.order}" + (f" d{cp.dorder}" if cp.dorder else ""))
        return f"R[{name}: " + "; ".join(bits or ["0"]) + "]"


@dataclass(frozen=True, eq=False)
class UnivariateProduct:
    """A product of rationals in the same variable, kept in factored form."""

    var: int
    parts: tuple

    def __call__(self, z):
        out = np.ones(np.shape(z), dtype=complex)
        for p in self.parts:
            out = out * p(z)
        return out

    eval = __call__

    def poles(self):
        s = set()
        for p in self.parts:
            s |= p.poles()
        return s

    @property
    def degree(self):
        return sum(p.degree for p in self.parts)

    def norm_bound(self):
        return math.prod(p.norm_bound() for p in self.parts)

    def scaled(self, a):
        return UnivariateProduct(self.var, (self.parts[0].scaled(a),) + self.parts[1:])

    def with_var(self, var):
        return UnivariateProduct(var, tuple(p.with_var(var) for p in self.parts))

    def leibniz(self, k):
        """k-th derivative as a list of UnivariateProducts (Leibniz rule)."""
        out = []
        for orders in iproduct(range(k + 1), repeat=len(self.parts)):
            if sum(orders) != k:
                continue
            coef = math.factorial(k) / math.prod(math.factorial(o) for o in orders)
            ps = tuple(p.derivative(o) for p, o in zip(self.parts, orders))
            out.append(UnivariateProduct(self.var, (ps[0].scaled(coef),) + ps[1:]))
        return out

    def to_json(self):
        return {"var": self.var, "parts": [p.to_json() for p in self.parts]}

    @classmethod
    def from_json(cls, d):
        return cls(int(d["var"]), tuple(RationalUnivariate.from_json(p) for p in d["parts"]))

    def pretty(self):
        return " * ".join(p.pretty() for p in self.parts)


@dataclass(frozen=True, eq=False)
class ComposedRational:
    """p(base(z)) for a polynomial p (monomial coefficients) and a one-variable rational base.

    A polynomial in a rational has the poles of that rational, so the
    pole constraint is inherited. Used to sharpen near-indicators.
    """

    base: object
    coeffs: np.ndarray

    @property
    def var(self):
        return self.base.var

    def __call__(self, z):
        return _horner(self.coeffs, self.base(np.asarray(z, dtype=complex)))

    eval = __call__

    def poles(self):
        return self.base.poles() if np.flatnonzero(self.coeffs[1:]).size else set()

    @property
    def degree(self):
        nz = np.flatnonzero(self.coeffs)
        return (int(nz[-1]) if nz.size else 0) * self.base.degree

    def norm_bound(self):
        return float(_horner(np.abs(self.coeffs), np.array(self.base.norm_bound())).real)

    def scaled(self, a):
        return ComposedRational(self.base, self.coeffs * complex(a))

    def with_var(self, var):
        return ComposedRational(self.base.with_var(var), self.coeffs)

    def derivative(self, k=1):
        """First derivative p'(base) * base' as a UnivariateProduct."""
        if k == 0:
            return self
        if k != 1:
            raise NotImplementedError("only first derivatives of composed rationals are supported")
        n = self.coeffs.size
        dp = self.coeffs[1:] * np.arange(1, n) if n > 1 else np.zeros(1, dtype=complex)
        return UnivariateProduct(self.var, (ComposedRational(self.base, dp), self.base.derivative(1)))

    def to_json(self):
        return {"compose": _carr(self.coeffs), "base": self.base.to_json()}

    @classmethod
    def from_json(cls, d):
        return cls(RationalUnivariate.from_json(d["base"]), _from_carr(d["compose"]))

    def pretty(self):
        return f"poly deg {self.coeffs.size - 1} of ({self.base.pretty()})"


def multiply_univariate(a, b):
    if a.var != b.var:
        raise VariableCollisionInProduct("factors must share the variable")
    pa = a.parts if isinstance(a, UnivariateProduct) else (a,)
    pb = b.parts if isinstance(b, UnivariateProduct) else (b,)
    return UnivariateProduct(a.var, pa + pb)


def _fmt(z):
    z = complex(z)
    if z.imag == 0:
        return f"{z.real:g}"
    return f"({z.real:g}{z.imag:+g}i)"


@dataclass(frozen=True, eq=False)
class Term:
    scalar: complex
    factors: tuple  # distinct variables


@dataclass(frozen=True, eq=False)
class TensorRationalExpr:
    """Finite sum of scalar * product of one-variable rationals."""

    dim: int
    terms: tuple = ()

    def __post_init__(self):
        for t in self.terms:
            vs = [f.var for f in t.factors]
            if len(set(vs)) != len(vs):
                raise VariableCollisionInProduct(f"repeated variable in a term: {vs}")
            if any(v < 0 or v >= self.dim for v in vs):
                raise ValueError(f"factor variable out of range for dimension {self.dim}: {vs}")

    @classmethod
    def constant(cls, dim, c):
        return cls(dim, (Term(complex(c), ()),))

    @classmethod
    def from_factor(cls, dim, factor, scalar=1.0):
        return cls(dim, (Term(complex(scalar), (factor,)),))

    @property
    def term_count(self):
        return len(self.terms)

    # evaluation -------------------------------------------------------

    def __call__(self, z):
        """Evaluate at points z of shape (..., dim); terms summed in stored order."""
        z = np.asarray(z, dtype=complex)
        if z.shape[-1] != self.dim:
            raise ValueError(f"expected points with {self.dim} coordinates")
        out = np.zeros(z.shape[:-1], dtype=complex)
        for t in self.terms:
            v = np.full(z.shape[:-1], t.scalar, dtype=complex)
            for f in t.factors:
                v = v * f(z[..., f.var])
            out = out + v
        return out

    eval = __call__

    def eval_grid(self, axes):
        """Values on the product grid axes[0] x ... x axes[dim-1]."""
        axes = [np.asarray(a, dtype=complex) for a in axes]
        if len(axes) != self.dim:
            raise ValueError("one axis per variable required")
        if not self.terms:
            return np.zeros(tuple(a.size for a in axes), dtype=complex)
        T = len(self.terms)
        tables = []
        for i, a in enumerate(axes):
            tab = np.ones((T, a.size), dtype=complex)
            seen = {}  # factors are often shared between terms
            for k, t in enumerate(self.terms):
                for f in t.factors:
                    if f.var == i:
                        if id(f) not in seen:
                            seen[id(f)] = f(a)
                        tab[k] = seen[id(f)]
            tables.append(tab)
        scal = np.array([t.scalar for t in self.terms], dtype=complex)
        if self.dim == 1:
            return scal @ tables[0]
        if self.dim == 2:
            return (tables[0] * scal[:, None]).T @ tables[1]
        letters = "abcdefghijklmnopqrs"[:self.dim]
        spec = "t," + ",".join("t" + c for c in letters) + "->" + letters
        return np.einsum(spec, scal, *tables, optimize=True)

    # algebra ----------------------------------------------------------

    def scale(self, a):
        a = complex(a)
        return TensorRationalExpr(self.dim, tuple(Term(t.scalar * a, t.factors) for t in self.terms))

    def __add__(self, other):
        if not isinstance(other, TensorRationalExpr) or other.dim != self.dim:
            return NotImplemented
        return TensorRationalExpr(self.dim, self.terms + other.terms)

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-other)

    def product(self, other):
        """Product with an expression in a disjoint set of variables."""
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        mine, theirs = self.variables(), other.variables()
        if mine & theirs:
            raise VariableCollisionInProduct(f"variables {sorted(mine & theirs)} appear on both sides")
        terms = tuple(Term(a.scalar * b.scalar, a.factors + b.factors) for a in self.terms for b in other.terms)
        return TensorRationalExpr(self.dim, terms)

    def times(self, factors):
        """Multiply every term by prod(factors), one factor per distinct variable.

        Factors sharing a variable with a term's factor are kept as a
        UnivariateProduct rather than expanded.
        """
        vs = [f.var for f in factors]
        if len(set(vs)) != len(vs):
            raise VariableCollisionInProduct(f"repeated variable among factors: {vs}")
        terms = []
        for t in self.terms:
            fs = {f.var: f for f in t.factors}
            for g in factors:
                fs[g.var] = multiply_univariate(fs[g.var], g) if g.var in fs else g
            terms.append(Term(t.scalar, tuple(fs[v] for v in sorted(fs))))
        return TensorRationalExpr(self.dim, tuple(terms))

    def variables(self):
        return {f.var for t in self.terms for f in t.factors}

    def partial(self, var, order=1):
        """Exact partial derivative of the given order in one variable."""
        if order == 0:
            return self
        terms = []
        for t in self.terms:
            f = next((f for f in t.factors if f.var == var), None)
            if f is None:
                continue
            rest = tuple(g for g in t.factors if g.var != var)
            ds = f.leibniz(order) if isinstance(f, UnivariateProduct) else [f.derivative(order)]
            terms.extend(Term(t.scalar, rest + (d,)) for d in ds)
        return TensorRationalExpr(self.dim, tuple(terms))

    def derivative(self, alpha):
        e = self
        for i, a in enumerate(alpha):
            e = e.partial(i, a)
        return e

    def pruned(self, threshold):
        """Drop terms whose sup bound is below threshold; returns (expr, dropped bound)."""
        keep, dropped = [], 0.0
        for t in self.terms:
            b = abs(t.scalar) * math.prod(f.norm_bound() for f in t.factors)
            if b < threshold:
                dropped += b
            else:
                keep.append(t)
        return TensorRationalExpr(self.dim, tuple(keep)), dropped

    def compacted(self, budget):
        """Truncate the factors of every term; returns (expr, dropped bound).

        Each term gets budget/terms, shared among its factors in proportion
        to the product of the other factors' norm bounds, so the total change
        of sup|e| on the product set is at most ``dropped`` <= budget.
        """
        if not self.terms:
            return self, 0.0
        per_term = budget / len(self.terms)
        terms, dropped = [], 0.0
        for t in self.terms:
            nb = [f.norm_bound() for f in t.factors]
            new = list(t.factors)
            for k, f in enumerate(t.factors):
                if not isinstance(f, RationalUnivariate):
                    continue
                others = abs(t.scalar) * math.prod(nb[:k] + nb[k + 1:])
                if others == 0:
                    continue
                new[k], dr = f.truncated(per_term / (len(nb) * others))
                dropped += dr * others
            terms.append(Term(t.scalar, tuple(new)))
        return TensorRationalExpr(self.dim, tuple(terms)), dropped

    def recompressed(self, budget):
        """Low-rank rewrite of a two-variable expression; returns (expr, dropped bound).

        Factors are flattened to coefficient vectors in their shared
        normalized bases, C = sum_t s_t a_t b_t^T is formed and truncated by
        SVD. Entries of the dropped part sum to at most sqrt(n1 n2) times
        its Frobenius norm, which bounds the change of sup|e| on the set.
        Expressions that do not fit this layout are returned unchanged.
        """
        lay = [_coefficient_layout([f for t in self.terms for f in t.factors if f.var == v]) for v in (0, 1)]
        if self.dim != 2 or not self.terms or None in lay:
            return self, 0.0
        A = np.zeros((len(self.terms), lay[0].size), dtype=complex)
        B = np.zeros((len(self.terms), lay[1].size), dtype=complex)
        for k, t in enumerate(self.terms):
            fs = {f.var: f for f in t.factors}
            for v, M in ((0, A), (1, B)):
                if v in fs:
                    M[k] = lay[v].flatten(fs[v])
                else:
                    M[k] = lay[v].flatten(RationalUnivariate.constant(v, 1.0))
            A[k] *= t.scalar
        U, S, Vh = np.linalg.svd(A.T @ B, full_matrices=False)
        root = math.sqrt(A.shape[1] * B.shape[1])
        tail = np.sqrt(np.cumsum((S ** 2)[::-1])[::-1])  # tail[r] = Frobenius norm of the part beyond rank r
        tail = np.append(tail, 0.0)
        rank = int(np.flatnonzero(root * tail <= budget)[0])
        dropped = float(root * tail[rank])
        terms = tuple(Term(1.0 + 0j, (lay[0].build(U[:, k] * S[k]), lay[1].build(Vh[k])))
                      for k in range(rank))
        if not terms:
            return TensorRationalExpr.constant(2, 0.0), dropped
        return TensorRationalExpr(2, terms), dropped

    # io ---------------------------------------------------------------

    def to_json(self):
        return {"dim": self.dim,
                "terms": [{"scalar": _cjson(t.scalar), "factors": [f.to_json() for f in t.factors]}
                          for t in self.terms]}

    @classmethod
    def from_json(cls, d):
        terms = tuple(Term(complex(*t["scalar"]), tuple(RationalUnivariate.from_json(f) for f in t["factors"]))
                      for t in d["terms"])
        return cls(int(d["dim"]), terms)

    def pretty(self, max_terms=20):
        lines = [f"{self.term_count} term(s) in {self.dim} variable(s)"]
        for t in self.terms[:max_terms]:
            lines.append(f"  {_fmt(t.scalar)} * " + (" * ".join(f.pretty() for f in t.factors) or "1"))
        if self.term_count > max_terms:
            lines.append(f"  ... {self.term_count - max_terms} more")
        return "\n".join(lines)


@dataclass(frozen=True)
class _Layout:
    """Common coefficient layout of univariate factors (polynomial part, then principal parts)."""

    var: int
    center: complex
    scale: float
    npoly: int
    parts: tuple  # (pole, scale, length)

    @property
    def size(self):
        return self.npoly + sum(n for _, _, n in self.parts)

    def flatten(self, f):
        out = np.zeros(self.size, dtype=complex)
        out[:f.poly.size] = f.poly
        off = self.npoly
        got = {pp.pole: pp for pp in f.principal}
        for pole, _, n in self.parts:
            if pole in got:
                c = got[pole].coeffs
                out[off:off + c.size] = c
            off += n
        return out

    def build(self, v):
        off = self.npoly
        parts = []
        for pole, sc, n in self.parts:
            parts.append(PrincipalPart(pole, sc, np.array(v[off:off + n], dtype=complex)))
            off += n
        return RationalUnivariate(self.var, self.center, self.scale, np.array(v[:self.npoly], dtype=complex),
                                  tuple(parts))


def _coefficient_layout(factors):
    """Layout shared by all factors, or None when bases differ or other kinds occur."""
    if not factors:
        return None
    center = scale = None
    npoly, parts = 1, {}
    for f in factors:
        if type(f) is not RationalUnivariate or f.arnoldi:
            return None
        if f.poly.size:
            if np.flatnonzero(f.poly[1:]).size:
                if center is not None and (center, scale) != (f.center, f.scale):
                    return None
                center, scale = f.center, f.scale
            npoly = max(npoly, f.poly.size)
        for pp in f.principal:
            if pp.pole in parts and parts[pp.pole][0] != pp.scale:
                return None
            n = max(parts.get(pp.pole, (pp.scale, 0))[1], pp.coeffs.size)
            parts[pp.pole] = (pp.scale, n)
    if center is None:
        center, scale = 0j, 1.0
    return _Layout(factors[0].var, center, scale, npoly,
                   tuple((p, sc, n) for p, (sc, n) in sorted(parts.items(), key=lambda kv: (kv[0].real, kv[0].imag))))


def poles_of(e):
    """Per-variable pole sets (INF stands for the point at infinity)."""
    if isinstance(e, (RationalUnivariate, UnivariateProduct, ComposedRational)):
        return e.poles()
    out = [set() for _ in range(e.dim)]
    for t in e.terms:
        for f in t.factors:
            out[f.var] |= f.poles()
    return out


def check_pole_constraint(e, allowed):
    """Raise unless poles_of(e)[i] is inside allowed[i] for every variable."""
    for i, (got, ok) in enumerate(zip(poles_of(e), allowed)):
        ok = {INF if is_inf(p) else complex(p) for p in ok}
        bad = got - ok
        if bad:
            raise PoleConstraintViolated(f"variable {i} has poles {sorted(map(str, bad))} outside {sorted(map(str, ok))}")
    return True
