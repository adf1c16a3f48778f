"""Expression oracles for holomorphic functions of several complex variables.

Grammar::

    expr    = term { ("+" | "-") term }
    term    = unary { ("*" | "/") unary }
    unary   = ("-" | "+") unary | power
    power   = call [ ("^" | "**") unary ]        exponent: integer constant
    call    = NAME "(" expr ")" | atom
    atom    = NUMBER [ "i" | "j" ] | NAME | "(" expr ")"

Names are ``z1 .. z9`` (``z`` and ``w`` alias ``z1`` and ``z2``), the
constants ``i``, ``pi`` and ``e``, and the functions ``exp sin cos log
sqrt`` (holomorphic, principal branches) and ``abs conj re im``
(accepted so that non-holomorphic test functions can be written).
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BranchCutError,
    DimensionMismatch,
    EvalSingularity,
    ExprSyntaxError,
    PatchTooSmall,
    UnknownIdentifier,
)

HOLOMORPHIC_FUNCS = ("exp", "sin", "cos", "log", "sqrt")
OTHER_FUNCS = ("abs", "conj", "re", "im")
CONSTANTS = {"i": 1j, "pi": math.pi, "e": math.e}

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?[ij]?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/^(),])
""", re.VERBOSE)


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: complex
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Var:
    index: int
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Neg:
    arg: object
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: object
    pos: int = field(default=-1, compare=False)


def _tokenize(src):
    toks = []
    i = 0
    while i < len(src):
        m = _TOKEN.match(src, i)
        if not m:
            raise ExprSyntaxError(f"unexpected character {src[i]!r}", i)
        kind = m.lastgroup
        if kind != "ws":
            toks.append((kind, m.group(), i))
        i = m.end()
    toks.append(("end", "", len(src)))
    return toks


class _Parser:
    def __init__(self, src, dim):
        self.toks = _tokenize(src)
        self.k = 0
        self.dim = dim

    def peek(self):
        return self.toks[self.k]

    def take(self):
        t = self.toks[self.k]
        self.k += 1
        return t

    def expect(self, text):
        kind, val, pos = self.take()
        if val != text:
            raise ExprSyntaxError(f"expected {text!r}" + (f", got {val!r}" if val else ", got end of input"), pos)

    def parse(self):
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            _, op, pos = self.take()
            node = BinOp(op, node, self.term(), pos)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            _, op, pos = self.take()
            node = BinOp(op, node, self.unary(), pos)
        return node

    def unary(self):
        kind, val, pos = self.peek()
        if val == "-":
            self.take()
            return Neg(self.unary(), pos)
        if val == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.call()
        kind, val, pos = self.peek()
        if val in ("^", "**"):
            self.take()
            epos = self.peek()[2]
            exp = self.unary()
            n = _const_int(exp)
            if n is None:
                raise ExprSyntaxError("exponent must be an integer constant", epos)
            return Pow(base, n, pos)
        return base

    def call(self):
        kind, val, pos = self.peek()
        if kind == "name" and self.toks[self.k + 1][1] == "(":
            if val not in HOLOMORPHIC_FUNCS + OTHER_FUNCS:
                raise UnknownIdentifier(f"unknown function {val!r} at offset {pos}")
            self.take()
            self.take()
            arg = self.expr()
            self.expect(")")
            return Call(val, arg, pos)
        return self.atom()

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            if val[-1] in "ij":
                return Num(complex(0, float(val[:-1])), pos)
            return Num(complex(float(val)), pos)
        if kind == "name":
            return self.name(val, pos)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprSyntaxError("unexpected end of input" if kind == "end" else f"unexpected {val!r}", pos)

    def name(self, val, pos):
        if val in CONSTANTS:
            return Num(complex(CONSTANTS[val]), pos)
        idx = {"z": 0, "w": 1}.get(val)
        m = re.fullmatch(r"z([1-9])", val)
        if m:
            idx = int(m.group(1)) - 1
        if idx is None:
            raise UnknownIdentifier(f"unknown identifier {val!r} at offset {pos}")
        if self.dim is not None and idx >= self.dim:
            raise DimensionMismatch(f"variable {val!r} exceeds dimension {self.dim}")
        return Var(idx, pos)


def _const_int(node):
    if isinstance(node, Num) and node.value.imag == 0 and float(node.value.real).is_integer():
        return int(node.value.real)
    if isinstance(node, Neg):
        n = _const_int(node.arg)
        return None if n is None else -n
    return None


def parse_expr(src: str, dim: int | None = None):
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(src, dim).parse()


# --------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _num_str(z):
    z = complex(z)
    if z.imag == 0:
        s = repr(float(z.real))
        return s[:-2] if s.endswith(".0") and "e" not in s else s
    if z.real == 0:
        s = repr(float(z.imag))
        s = s[:-2] if s.endswith(".0") and "e" not in s else s
        return f"{s}i" if not s.startswith("-") else f"(-{s[1:]}i)"
    return f"({_num_str(z.real)}{'+' if z.imag >= 0 else '-'}{_num_str(abs(z.imag))}i)"


def to_source(node, prec=0):
    """Print an AST; parse(to_source(parse(s))) == parse(s)."""
    if isinstance(node, Num):
        s = _num_str(node.value)
        return f"({s})" if (s.startswith("-") and prec > 0) else s
    if isinstance(node, Var):
        return f"z{node.index + 1}"
    if isinstance(node, Neg):
        s = "-" + to_source(node.arg, 3)
        return f"({s})" if prec > 1 else s
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        s = f"{to_source(node.left, p)} {node.op} {to_source(node.right, p + 1)}"
        return f"({s})" if p < prec else s
    if isinstance(node, Pow):
        e = str(node.exponent) if node.exponent >= 0 else f"({node.exponent})"
        s = f"{to_source(node.base, 4)}^{e}"
        return f"({s})" if prec >= 4 else s
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    raise TypeError(node)


# --------------------------------------------------------------------------
# evaluation


class _ZeroDivision(Exception):
    def __init__(self, mask, kind="zero"):
        self.mask = mask
        self.kind = kind


def _eval(node, env, branch_clearance):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.index]
    if isinstance(node, Neg):
        return -_eval(node.arg, env, branch_clearance)
    if isinstance(node, BinOp):
        a = _eval(node.left, env, branch_clearance)
        b = _eval(node.right, env, branch_clearance)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        zero = np.asarray(b) == 0
        if np.any(zero):
            raise _ZeroDivision(zero)
        return a / b
    if isinstance(node, Pow):
        a = _eval(node.base, env, branch_clearance)
        if node.exponent < 0:
            zero = np.asarray(a) == 0
            if np.any(zero):
                raise _ZeroDivision(zero)
            return 1.0 / a ** (-node.exponent)
        return a ** node.exponent
    if isinstance(node, Call):
        a = np.asarray(_eval(node.arg, env, branch_clearance), dtype=complex)
        f = node.func
        if f in ("log", "sqrt"):
            cut = (a.real <= 0) & (np.abs(a.imag) <= branch_clearance)
            if np.any(cut):
                raise _ZeroDivision(cut, kind="cut")
            return np.log(a) if f == "log" else np.sqrt(a)
        return {"exp": np.exp, "sin": np.sin, "cos": np.cos,
                "abs": lambda x: np.abs(x) + 0j, "conj": np.conj,
                "re": lambda x: x.real + 0j, "im": lambda x: x.imag + 0j}[f](a)
    raise TypeError(node)


def _walk(node):
    yield node
    for child in ("arg", "left", "right", "base"):
        sub = getattr(node, child, None)
        if sub is not None and not isinstance(sub, (int, str)):
            yield from _walk(sub)


def substitute(node, mapping):
    """Replace Var(i) by mapping[i] (an AST) where present."""
    if isinstance(node, Var):
        return mapping.get(node.index, node)
    if isinstance(node, Neg):
        return Neg(substitute(node.arg, mapping))
    if isinstance(node, BinOp):
        return BinOp(node.op, substitute(node.left, mapping), substitute(node.right, mapping))
    if isinstance(node, Pow):
        return Pow(substitute(node.base, mapping), node.exponent)
    if isinstance(node, Call):
        return Call(node.func, substitute(node.arg, mapping))
    return node


@dataclass(frozen=True, eq=False)
class HolomorphicOracle:
    """A parsed expression in ``dim`` variables plus its holomorphy margin."""

    ast: object
    dim: int
    margin: float = 0.5
    singularities: tuple = ()
    branch_clearance: float = 0.0
    source: str = ""

    def variables(self):
        return {n.index for n in _walk(self.ast) if isinstance(n, Var)}

    @property
    def is_constant(self):
        return not self.variables()

    @property
    def holomorphic_syntax(self):
        return not any(isinstance(n, Call) and n.func in OTHER_FUNCS for n in _walk(self.ast))

    def __call__(self, *coords):
        """Evaluate with one (broadcastable) array per variable."""
        if len(coords) != self.dim:
            raise DimensionMismatch(f"oracle takes {self.dim} coordinates, got {len(coords)}")
        env = [np.asarray(c, dtype=complex) for c in coords]
        try:
            out = _eval(self.ast, env, self.branch_clearance)
        except _ZeroDivision as exc:
            bshape = np.broadcast_shapes(*(e.shape for e in env)) if env else ()
            mask = np.broadcast_to(exc.mask, np.broadcast_shapes(bshape, np.shape(exc.mask)))
            idx = tuple(np.argwhere(mask)[0]) if mask.ndim else ()
            point = tuple(complex(np.broadcast_to(e, mask.shape)[idx]) for e in env)
            if exc.kind == "cut":
                raise BranchCutError(point, "argument on a branch cut") from None
            raise EvalSingularity(point) from None
        shape = np.broadcast_shapes(*(e.shape for e in env)) if env else ()
        return np.broadcast_to(np.asarray(out, dtype=complex), shape).copy() if shape else complex(out)

    def at(self, z):
        """Evaluate at points of shape (..., dim)."""
        z = np.asarray(z, dtype=complex)
        return self(*[z[..., i] for i in range(self.dim)])

    def to_source(self):
        return to_source(self.ast)

    def restricted(self, fixed):
        """Oracle in the remaining variables with some coordinates fixed.

        ``fixed`` maps variable index -> value; the remaining variables are
        renumbered in increasing order.
        """
        keep = [i for i in range(self.dim) if i not in fixed]
        mapping = {i: Num(complex(v)) for i, v in fixed.items()}
        mapping.update({i: Var(k) for k, i in enumerate(keep)})
        return HolomorphicOracle(substitute(self.ast, mapping), len(keep), self.margin,
                                 self.singularities, self.branch_clearance)


def parse(src: str, dim: int | None = None, margin: float = 0.5, **kw) -> HolomorphicOracle:
    """Parse ``src`` into an oracle; dim defaults to the largest variable used."""
    ast = parse_expr(src, dim)
    if dim is None:
        used = [n.index for n in _walk(ast) if isinstance(n, Var)]
        dim = max(used) + 1 if used else 1
    if not margin > 0:
        raise ValueError("margin must be positive")
    return HolomorphicOracle(ast, dim, float(margin), source=src, **kw)


def eval_oracle(o: HolomorphicOracle, z):
    """Evaluate at a single point given as a sequence of dim complex numbers."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    return complex(o(*[z[i] for i in range(o.dim)]))


# --------------------------------------------------------------------------
# discrete Cauchy-Riemann residual


def cr_residual(values, h, return_argmax=False):
    """Normalized Cauchy-Riemann defect of samples on a square lattice.

    ``values[iy, ix]`` holds f(x0 + ix*h + 1j*(y0 + iy*h)); NaN marks nodes
    outside the patch. At every node whose four neighbours are present the
    centered differences give fx, fy and the defect
    |fx + i fy| / (1 + |df/dz|) with df/dz = (fx - i fy)/2. The maximum is
    returned: 0 for holomorphic f up to O(h^2), 2 for conj, 2/3 for |w|.
    """
    F = np.asarray(values, dtype=complex)
    if F.ndim != 2 or F.shape[0] < 3 or F.shape[1] < 3:
        raise PatchTooSmall(f"patch of shape {F.shape} has fewer than 3x3 nodes")
    fx = (F[1:-1, 2:] - F[1:-1, :-2]) / (2 * h)
    fy = (F[2:, 1:-1] - F[:-2, 1:-1]) / (2 * h)
    dbar = np.abs(fx + 1j * fy)
    dz = np.abs(fx - 1j * fy) / 2
    res = dbar / (1 + dz)
    ok = np.isfinite(res)
    if not ok.any():
        raise PatchTooSmall("no node of the patch has all four neighbours")
    res = np.where(ok, res, -1.0)
    k = int(np.argmax(res))
    if return_argmax:
        iy, ix = np.unravel_index(k, res.shape)
        return float(res.flat[k]), (int(iy) + 1, int(ix) + 1)
    return float(res.flat[k])


def patch_grid(center, radius, h):
    """Lattice nodes of the disc patch D(center, radius), NaN-padded square."""
    n = int(math.floor(radius / h))
    t = np.arange(-n, n + 1) * h
    X, Y = np.meshgrid(t, t)
    Z = complex(center) + X + 1j * Y
    inside = np.abs(X + 1j * Y) <= radius + 1e-12
    return Z, inside


def sample_patch(f, center, radius, h):
    """Values of a callable on a disc patch, NaN outside the disc."""
    Z, inside = patch_grid(center, radius, h)
    vals = np.full(Z.shape, np.nan, dtype=complex)
    vals[inside] = f(Z[inside])
    return vals
