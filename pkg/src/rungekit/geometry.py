"""Planar compact sets, complement topology, pole sets and polygonal cycles.

A compact set is a finite union of closed primitives minus a finite union of
open holes. Three views of the same set are kept side by side:

* exact primitives, used for membership, interior clearance and sampling;
* a shapely geometry ``outer`` that contains the set (discs are replaced by
  circumscribed polygons), used for conservative distances and dilations;
* a boolean raster ``mask`` whose cells intersect ``outer``, used for the
  complement topology (flood fill) and for routing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import shapely
from scipy import ndimage
from shapely.geometry import MultiPoint, Point, Polygon as ShapelyPolygon, box
from shapely.geometry.polygon import orient

from .errors import (
    DilationOverflow,
    EmptyShapeList,
    MissingPoleInComponent,
    NonpositivePitch,
    PointOnCycle,
    PoleInsideSet,
    SceneError,
    WindingCheckFailed,
)

INF = "inf"  # the point at infinity in pole lists

_QUAD_SEGS = 64
_NSEG = 4 * _QUAD_SEGS
_CIRCUM = 1.0 / math.cos(math.pi / _NSEG)


def is_inf(p) -> bool:
    return isinstance(p, str) and p == INF


def _xy(z):
    z = np.asarray(z, dtype=complex)
    return np.column_stack([z.real.ravel(), z.imag.ravel()])


def _lattice(lo: complex, hi: complex, spacing: float) -> np.ndarray:
    """Points of the global lattice spacing*Z^2 inside the box [lo, hi]."""
    xs = np.arange(math.ceil(lo.real / spacing), math.floor(hi.real / spacing) + 1) * spacing
    ys = np.arange(math.ceil(lo.imag / spacing), math.floor(hi.imag / spacing) + 1) * spacing
    if xs.size == 0 or ys.size == 0:
        return np.zeros(0, dtype=complex)
    X, Y = np.meshgrid(xs, ys)
    return (X + 1j * Y).ravel()


def _circle(center: complex, radius: float, spacing: float) -> np.ndarray:
    n = max(8, int(math.ceil(2 * math.pi * radius / spacing)))
    t = 2 * math.pi * np.arange(n) / n
    return center + radius * np.exp(1j * t)


def _segment_points(a: complex, b: complex, spacing: float) -> np.ndarray:
    n = max(1, int(math.ceil(abs(b - a) / spacing)))
    return a + (b - a) * np.arange(n) / n


def segment_distance(z, a, b):
    """Distance from points z to the segments [a, b] (broadcasting)."""
    ab = b - a
    denom = np.abs(ab) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(denom > 0, ((z - a) * np.conj(ab)).real / np.where(denom > 0, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    return np.abs(z - (a + t * ab))


def _polygon_contains(z, verts):
    """Even-odd point-in-polygon test (boundary points count as inside)."""
    z = np.asarray(z, dtype=complex)
    x, y = z.real, z.imag
    inside = np.zeros(z.shape, dtype=bool)
    n = len(verts)
    for k in range(n):
        a, b = verts[k], verts[(k + 1) % n]
        cond = (a.imag > y) != (b.imag > y)
        with np.errstate(invalid="ignore", divide="ignore"):
            xc = a.real + (y - a.imag) * (b.real - a.real) / (b.imag - a.imag)
        inside ^= cond & (x < xc)
    return inside | (_polygon_boundary_distance(z, verts) <= 1e-12 * (1 + np.abs(z)))


def _polygon_boundary_distance(z, verts):
    z = np.asarray(z, dtype=complex)
    a = np.asarray(verts, dtype=complex)
    b = np.roll(a, -1)
    d = segment_distance(z[..., None], a, b)
    return d.min(axis=-1)


# --------------------------------------------------------------------------
# primitives


@dataclass(frozen=True)
class Disc:
    center: complex
    radius: float

    def bounds(self):
        r = self.radius
        return (self.center - r - 1j * r, self.center + r + 1j * r)

    def contains(self, z):
        return np.abs(np.asarray(z) - self.center) <= self.radius * (1 + 1e-12)

    def contains_open(self, z):
        return np.abs(np.asarray(z) - self.center) < self.radius

    def inner_clearance(self, z):
        return self.radius - np.abs(np.asarray(z) - self.center)

    def outside_distance(self, z):
        return np.abs(np.asarray(z) - self.center) - self.radius

    def boundary_sample(self, spacing):
        return _circle(self.center, self.radius, spacing)

    def farthest(self, c):
        return abs(self.center - c) + self.radius

    def outer(self):
        return Point(self.center.real, self.center.imag).buffer(self.radius * _CIRCUM, quad_segs=_QUAD_SEGS)

    def inner(self):
        return Point(self.center.real, self.center.imag).buffer(self.radius, quad_segs=_QUAD_SEGS)

    def to_json(self):
        return {"disc": {"c": [self.center.real, self.center.imag], "r": self.radius}}


@dataclass(frozen=True)
class Annulus:
    """Closed annulus r_in <= |z - c| <= r_out; r_in == r_out gives a circle."""

    center: complex
    r_in: float
    r_out: float

    def bounds(self):
        r = self.r_out
        return (self.center - r - 1j * r, self.center + r + 1j * r)

    def contains(self, z):
        a = np.abs(np.asarray(z) - self.center)
        tol = 1e-12 * self.r_out
        return (a <= self.r_out + tol) & (a >= self.r_in - tol)

    def inner_clearance(self, z):
        a = np.abs(np.asarray(z) - self.center)
        return np.minimum(self.r_out - a, a - self.r_in)

    def boundary_sample(self, spacing):
        pts = [_circle(self.center, self.r_out, spacing)]
        if self.r_in > 0:
            pts.append(_circle(self.center, self.r_in, spacing))
        return np.concatenate(pts)

    def farthest(self, c):
        return abs(self.center - c) + self.r_out

    def outer(self):
        c = Point(self.center.real, self.center.imag)
        g = c.buffer(self.r_out * _CIRCUM, quad_segs=_QUAD_SEGS)
        if self.r_in > 0:
            g = g.difference(c.buffer(self.r_in, quad_segs=_QUAD_SEGS))
        return g

    def to_json(self):
        return {"annulus": {"c": [self.center.real, self.center.imag], "r_in": self.r_in, "r_out": self.r_out}}


@dataclass(frozen=True)
class Rect:
    lo: complex
    hi: complex

    def bounds(self):
        return (self.lo, self.hi)

    def contains(self, z):
        z = np.asarray(z)
        t = 1e-12 * (1 + abs(self.hi - self.lo))
        return ((z.real >= self.lo.real - t) & (z.real <= self.hi.real + t)
                & (z.imag >= self.lo.imag - t) & (z.imag <= self.hi.imag + t))

    def contains_open(self, z):
        z = np.asarray(z)
        return ((z.real > self.lo.real) & (z.real < self.hi.real)
                & (z.imag > self.lo.imag) & (z.imag < self.hi.imag))

    def inner_clearance(self, z):
        z = np.asarray(z)
        return np.minimum.reduce([z.real - self.lo.real, self.hi.real - z.real,
                                  z.imag - self.lo.imag, self.hi.imag - z.imag])

    def outside_distance(self, z):
        z = np.asarray(z)
        dx = np.maximum.reduce([self.lo.real - z.real, np.zeros(z.shape), z.real - self.hi.real])
        dy = np.maximum.reduce([self.lo.imag - z.imag, np.zeros(z.shape), z.imag - self.hi.imag])
        out = np.hypot(dx, dy)
        return np.where(out > 0, out, -self.inner_clearance(z))

    def _verts(self):
        lo, hi = self.lo, self.hi
        return [lo, complex(hi.real, lo.imag), hi, complex(lo.real, hi.imag)]

    def boundary_sample(self, spacing):
        v = self._verts()
        return np.concatenate([_segment_points(v[k], v[(k + 1) % 4], spacing) for k in range(4)])

    def farthest(self, c):
        return max(abs(v - c) for v in self._verts())

    def outer(self):
        return box(self.lo.real, self.lo.imag, self.hi.real, self.hi.imag)

    inner = outer

    def to_json(self):
        return {"rect": {"lo": [self.lo.real, self.lo.imag], "hi": [self.hi.real, self.hi.imag]}}


@dataclass(frozen=True)
class Polygon:
    vertices: tuple

    def bounds(self):
        v = np.asarray(self.vertices)
        return (complex(v.real.min(), v.imag.min()), complex(v.real.max(), v.imag.max()))

    def contains(self, z):
        return _polygon_contains(z, self.vertices)

    def contains_open(self, z):
        z = np.asarray(z, dtype=complex)
        return _polygon_contains(z, self.vertices) & (_polygon_boundary_distance(z, self.vertices) > 0)

    def inner_clearance(self, z):
        z = np.asarray(z, dtype=complex)
        d = _polygon_boundary_distance(z, self.vertices)
        return np.where(_polygon_contains(z, self.vertices), d, -d)

    def outside_distance(self, z):
        return -self.inner_clearance(z)

    def boundary_sample(self, spacing):
        v = self.vertices
        return np.concatenate([_segment_points(v[k], v[(k + 1) % len(v)], spacing) for k in range(len(v))])

    def farthest(self, c):
        return max(abs(v - c) for v in self.vertices)

    def outer(self):
        return ShapelyPolygon([(v.real, v.imag) for v in self.vertices])

    inner = outer

    def to_json(self):
        return {"poly": [[v.real, v.imag] for v in self.vertices]}


@dataclass(frozen=True)
class Points:
    points: tuple

    def bounds(self):
        v = np.asarray(self.points)
        return (complex(v.real.min(), v.imag.min()), complex(v.real.max(), v.imag.max()))

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        p = np.asarray(self.points)
        return (np.abs(z[..., None] - p) <= 1e-12 * (1 + np.abs(p))).any(axis=-1)

    def inner_clearance(self, z):
        return np.full(np.shape(z), -np.inf)

    def boundary_sample(self, spacing):
        return np.asarray(self.points, dtype=complex)

    def farthest(self, c):
        return max(abs(p - c) for p in self.points)

    def outer(self):
        return MultiPoint([(p.real, p.imag) for p in self.points])

    def to_json(self):
        return {"points": [[p.real, p.imag] for p in self.points]}


def _c(pair) -> complex:
    if isinstance(pair, (int, float)):
        return complex(pair)
    if len(pair) != 2:
        raise SceneError(f"expected [re, im], got {pair!r}")
    return complex(float(pair[0]), float(pair[1]))


def shape_from_json(obj):
    """Parse one shape entry of a scene document."""
    if not isinstance(obj, dict) or len(obj) != 1:
        raise SceneError(f"shape entry must be a single-key object, got {obj!r}")
    (kind, v), = obj.items()
    try:
        if kind == "disc":
            r = float(v["r"])
            if not r > 0:
                raise SceneError("disc radius must be positive")
            return Disc(_c(v["c"]), r)
        if kind == "annulus":
            return Annulus(_c(v["c"]), float(v["r_in"]), float(v["r_out"]))
        if kind == "circle":
            r = float(v["r"])
            return Annulus(_c(v["c"]), r, r)
        if kind == "rect":
            lo, hi = _c(v["lo"]), _c(v["hi"])
            return Rect(complex(min(lo.real, hi.real), min(lo.imag, hi.imag)),
                        complex(max(lo.real, hi.real), max(lo.imag, hi.imag)))
        if kind == "poly":
            return Polygon(tuple(_c(p) for p in v))
        if kind == "points":
            return Points(tuple(_c(p) for p in v))
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneError(f"malformed {kind} shape: {exc}") from exc
    raise SceneError(f"unknown shape kind {kind!r}")


# --------------------------------------------------------------------------
# the compact set


@dataclass(frozen=True, eq=False)
class PlanarCompact:
    """Union of closed ``shapes`` minus the union of open ``holes``, rasterized."""

    shapes: tuple
    holes: tuple
    grid_h: float
    origin: complex
    mask: np.ndarray = field(repr=False)

    @property
    def bbox(self):
        ny, nx = self.mask.shape
        return (self.origin, self.origin + self.grid_h * complex(nx, ny))

    @cached_property
    def outer(self):
        g = shapely.union_all([s.outer() for s in self.shapes])
        if self.holes:
            g = g.difference(shapely.union_all([h.inner() for h in self.holes]))
        shapely.prepare(g)
        return g

    @cached_property
    def enclosing_disc(self):
        lo = complex(min(s.bounds()[0].real for s in self.shapes), min(s.bounds()[0].imag for s in self.shapes))
        hi = complex(max(s.bounds()[1].real for s in self.shapes), max(s.bounds()[1].imag for s in self.shapes))
        c = (lo + hi) / 2
        return c, max(s.farthest(c) for s in self.shapes)

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        inside = np.zeros(z.shape, dtype=bool)
        for s in self.shapes:
            inside |= s.contains(z)
        for h in self.holes:
            inside &= ~h.contains_open(z)
        return inside

    def distance(self, z):
        """Lower bound for dist(z, K), exact up to polygonization of discs."""
        z = np.asarray(z, dtype=complex)
        d = shapely.distance(self.outer, shapely.points(_xy(z)))
        return np.asarray(d).reshape(z.shape)

    def interior_clearance(self, z):
        """r > 0 such that the open disc D(z, r) lies in the interior (conservative)."""
        z = np.asarray(z, dtype=complex)
        c = np.full(z.shape, -np.inf)
        for s in self.shapes:
            c = np.maximum(c, s.inner_clearance(z))
        for h in self.holes:
            c = np.minimum(c, h.outside_distance(z))
        return c

    @property
    def has_interior(self):
        return any(not isinstance(s, Points) and not (isinstance(s, Annulus) and s.r_in >= s.r_out)
                   for s in self.shapes)

    def boundary_sample(self, spacing):
        pts = [s.boundary_sample(spacing) for s in self.shapes]
        pts += [h.boundary_sample(spacing) for h in self.holes]
        z = np.concatenate(pts)
        keep = np.zeros(z.shape, dtype=bool)
        for s in self.shapes:
            keep |= s.contains(z)
        for h in self.holes:
            keep &= ~h.contains_open(z)
        return z[keep]

    def sample(self, spacing, interior_spacing=None):
        """Boundary points at arc spacing plus interior lattice points."""
        bnd = self.boundary_sample(spacing)
        lo, hi = self.bbox
        lat = _lattice(lo, hi, interior_spacing or spacing)
        lat = lat[self.contains(lat)]
        return np.concatenate([bnd, lat])

    # raster helpers -----------------------------------------------------

    def cell_of(self, z):
        """(iy, ix) of the cell containing z, or None outside the grid."""
        w = (complex(z) - self.origin) / self.grid_h
        ix, iy = int(math.floor(w.real)), int(math.floor(w.imag))
        ny, nx = self.mask.shape
        if 0 <= ix < nx and 0 <= iy < ny:
            return iy, ix
        return None

    def cell_centers(self):
        ny, nx = self.mask.shape
        h = self.grid_h
        X, Y = np.meshgrid((np.arange(nx) + 0.5) * h, (np.arange(ny) + 0.5) * h)
        return self.origin + X + 1j * Y

    def with_pitch(self, grid_h):
        return rasterize(self.shapes, grid_h, holes=self.holes)

    def dilated(self, delta):
        """The closed delta-neighbourhood, as a new compact (same pitch)."""
        shapes, holes = _dilate_shapes(self.shapes, self.holes, delta)
        return rasterize(shapes, self.grid_h, holes=holes)

    def to_json(self):
        d = {"shapes": [s.to_json() for s in self.shapes]}
        if self.holes:
            d["holes"] = [h.to_json() for h in self.holes]
        return d


def _dilate_shapes(shapes, holes, delta):
    out = []
    for s in shapes:
        if isinstance(s, Disc):
            out.append(Disc(s.center, s.radius + delta))
        elif isinstance(s, Annulus):
            out.append(Disc(s.center, s.r_out + delta) if s.r_in <= delta
                       else Annulus(s.center, s.r_in - delta, s.r_out + delta))
        elif isinstance(s, Points):
            out.extend(Disc(p, delta) for p in s.points)
        else:
            g = s.outer().buffer(delta * _CIRCUM, quad_segs=_QUAD_SEGS)
            out.append(Polygon(tuple(complex(x, y) for x, y in list(g.exterior.coords)[:-1])))
    new_holes = []
    for h in holes:
        if isinstance(h, Disc):
            if h.radius > delta:
                new_holes.append(Disc(h.center, h.radius - delta))
        else:
            g = h.inner().buffer(-delta)
            if not g.is_empty and g.geom_type == "Polygon":
                new_holes.append(Polygon(tuple(complex(x, y) for x, y in list(g.exterior.coords)[:-1])))
    return tuple(out), tuple(new_holes)


def rasterize(shapes, grid_h, holes=(), margin=None) -> PlanarCompact:
    """Build a PlanarCompact with a conservative cell mask.

    A cell is marked when its closed square meets the outer geometry. The
    grid extends ``margin`` (default max(3h, half the extent)) past the
    shapes so the unbounded complement component touches the grid edge.
    """
    shapes = tuple(shapes)
    if not shapes:
        raise EmptyShapeList("shape list is empty")
    if not grid_h > 0:
        raise NonpositivePitch(f"grid pitch must be positive, got {grid_h}")
    lo = complex(min(s.bounds()[0].real for s in shapes), min(s.bounds()[0].imag for s in shapes))
    hi = complex(max(s.bounds()[1].real for s in shapes), max(s.bounds()[1].imag for s in shapes))
    extent = max(hi.real - lo.real, hi.imag - lo.imag)
    if margin is None:
        margin = max(3 * grid_h, 0.5 * extent)
    margin = max(margin, 2 * grid_h)
    x0 = math.floor((lo.real - margin) / grid_h) * grid_h
    y0 = math.floor((lo.imag - margin) / grid_h) * grid_h
    nx = int(math.ceil((hi.real + margin - x0) / grid_h)) + 1
    ny = int(math.ceil((hi.imag + margin - y0) / grid_h)) + 1
    K = PlanarCompact(shapes, tuple(holes), float(grid_h), complex(x0, y0), np.zeros((ny, nx), dtype=bool))
    centers = K.cell_centers()
    d = K.distance(centers)
    mask = d <= grid_h / 2
    unsure = (~mask) & (d <= grid_h * math.sqrt(0.5) * (1 + 1e-9))
    if unsure.any():
        c = centers[unsure]
        h2 = grid_h / 2
        boxes = shapely.box(c.real - h2, c.imag - h2, c.real + h2, c.imag + h2)
        mask[unsure] = shapely.intersects(boxes, K.outer)
    K.mask[...] = mask
    K.mask.flags.writeable = False
    return K


def mask_islands(K: PlanarCompact) -> int:
    """Number of 8-connected islands of the set mask."""
    _, n = ndimage.label(K.mask, structure=np.ones((3, 3), dtype=int))
    return n


# --------------------------------------------------------------------------
# complement topology


@dataclass(frozen=True, eq=False)
class ComplementComponents:
    labels: np.ndarray  # -1 on set cells, 0 unbounded, 1.. bounded
    unbounded_id: int
    bounded_ids: tuple

    @property
    def count(self):
        return 1 + len(self.bounded_ids)


def complement_components(K: PlanarCompact) -> ComplementComponents:
    """4-connected flood fill of the complement cells."""
    raw, n = ndimage.label(~K.mask, structure=ndimage.generate_binary_structure(2, 1))
    edge = np.concatenate([raw[0], raw[-1], raw[:, 0], raw[:, -1]])
    edge_ids = set(int(v) for v in edge if v > 0)
    # the margin ring is all complement, hence a single label
    assert len(edge_ids) == 1, "grid margin is not fully outside the set"
    unb = edge_ids.pop()
    remap = np.full(n + 1, -1, dtype=int)
    remap[unb] = 0
    nxt = 1
    for lab in range(1, n + 1):
        if lab != unb:
            remap[lab] = nxt
            nxt += 1
    labels = remap[raw]
    labels.flags.writeable = False
    return ComplementComponents(labels, 0, tuple(range(1, nxt)))


def component_of(K: PlanarCompact, comps: ComplementComponents, z) -> int | None:
    """Complement component containing z (None if z lies in K)."""
    if is_inf(z):
        return comps.unbounded_id
    z = complex(z)
    cell = K.cell_of(z)
    if cell is None:
        return comps.unbounded_id
    lab = int(comps.labels[cell])
    if lab >= 0:
        return lab
    if bool(K.contains(np.array([z]))[0]):
        return None
    # z sits in a conservatively marked cell; the open disc of radius
    # dist(z, K) misses K, so any complement cell meeting it is in z's component
    r = float(K.distance(np.array([z]))[0])
    centers = K.cell_centers()
    free = comps.labels >= 0
    gap = np.abs(centers - z)
    near = free & (gap < r)
    if near.any():
        idx = np.argmin(np.where(near, gap, np.inf))
        return int(comps.labels.ravel()[idx])
    return None


@dataclass(frozen=True)
class PoleSet:
    poles: tuple
    assignment: dict  # component id -> pole (complex or INF)


def pole_key(p):
    return INF if is_inf(p) else complex(p)


def assign_poles(K: PlanarCompact, poles, comps: ComplementComponents | None = None) -> PoleSet:
    """Attach each pole to its complement component; first pole wins."""
    comps = comps or complement_components(K)
    assignment = {}
    for p in poles:
        p = pole_key(p)
        if not is_inf(p) and bool(K.contains(np.array([p]))[0]):
            raise PoleInsideSet(f"pole {p} lies in the compact set", pole=p)
        cid = component_of(K, comps, p)
        if cid is None:
            raise PoleInsideSet(f"pole {p} cannot be separated from the set at pitch {K.grid_h}", pole=p)
        assignment.setdefault(cid, p)
    return PoleSet(tuple(pole_key(p) for p in poles), assignment)


def validate_pole_set(K: PlanarCompact, L: PoleSet, comps: ComplementComponents | None = None) -> bool:
    """True when every complement component carries an admissible pole."""
    comps = comps or complement_components(K)
    for cid in (comps.unbounded_id,) + comps.bounded_ids:
        if cid not in L.assignment:
            raise MissingPoleInComponent(cid)
        p = L.assignment[cid]
        if is_inf(p):
            if cid != comps.unbounded_id:
                raise PoleInsideSet(f"infinity assigned to bounded component {cid}")
            continue
        if bool(K.contains(np.array([p]))[0]):
            raise PoleInsideSet(f"pole {p} lies in the compact set", pole=p)
        if component_of(K, comps, p) != cid:
            raise PoleInsideSet(f"pole {p} is not inside component {cid}", pole=p)
    return True


# --------------------------------------------------------------------------
# cycles


@dataclass(frozen=True, eq=False)
class Cycle:
    loops: tuple  # each an array of vertices, closed implicitly
    orientation: tuple  # +1 counterclockwise, -1 clockwise
    clearance: float
    length: float

    def edges(self):
        """All edges as two arrays (start, end)."""
        a = np.concatenate([lp for lp in self.loops])
        b = np.concatenate([np.roll(lp, -1) for lp in self.loops])
        return a, b


def winding_number(c: Cycle, p):
    """Winding number of the cycle around p (scalar or array of points)."""
    p = np.asarray(p, dtype=complex)
    scalar = p.ndim == 0
    pts = p.reshape(-1)
    a, b = c.edges()
    scale = max(1.0, float(np.max(np.abs(a))))
    total = np.zeros(pts.shape)
    for chunk in range(0, pts.size, 2048):
        q = pts[chunk:chunk + 2048, None]
        if (segment_distance(q, a, b).min(axis=1) <= 1e-12 * scale).any():
            raise PointOnCycle("point lies on the cycle")
        total[chunk:chunk + 2048] = np.angle((b - q) / (a - q)).sum(axis=1) / (2 * math.pi)
    w = np.rint(total)
    if np.max(np.abs(total - w), initial=0.0) >= 0.25:
        raise WindingCheckFailed("winding number rounding residual too large")
    w = w.astype(int)
    return int(w[0]) if scalar else w.reshape(p.shape)


def cycle_from_loops(loops, clearance=float("nan")) -> Cycle:
    loops = tuple(np.asarray(lp, dtype=complex) for lp in loops)
    orient_ = []
    length = 0.0
    for lp in loops:
        nxt = np.roll(lp, -1)
        area = 0.5 * np.sum(lp.real * nxt.imag - nxt.real * lp.imag)
        orient_.append(1 if area > 0 else -1)
        length += float(np.abs(nxt - lp).sum())
    return Cycle(loops, tuple(orient_), clearance, length)


def build_cycle(K: PlanarCompact, delta: float, avoid: PlanarCompact | None = None,
                sample_spacing=None) -> Cycle:
    """Polygonal cycle around K at distance about delta.

    The loops are the boundary of the delta-dilation of K, outer rings
    counterclockwise and hole rings clockwise. Winding 1 is verified on a
    sample of K and, when ``avoid`` is given, winding 0 on a sample of it.
    """
    if not delta > 0:
        raise DilationOverflow(f"delta must be positive, got {delta}")
    lo, hi = K.bbox
    margin = min(K.outer.bounds[0] - lo.real, K.outer.bounds[1] - lo.imag,
                 hi.real - K.outer.bounds[2], hi.imag - K.outer.bounds[3])
    if delta > margin - K.grid_h:
        raise DilationOverflow(f"delta {delta} exceeds the grid margin {margin - K.grid_h}")
    # few long edges keep the panel count low; clearance is re-checked below
    dil = K.outer.buffer(delta, quad_segs=8).simplify(delta / 10, preserve_topology=True)
    polys = list(dil.geoms) if dil.geom_type == "MultiPolygon" else [dil]
    loops = []
    rings = []
    for poly in polys:
        poly = orient(poly, sign=1.0)
        for ring in [poly.exterior, *poly.interiors]:
            xy = np.asarray(ring.coords)[:-1]
            loops.append(xy[:, 0] + 1j * xy[:, 1])
            rings.append(ring)
    clearance = float(min(shapely.distance(r, K.outer) for r in rings))
    if clearance < delta / 2:
        raise WindingCheckFailed(f"cycle clearance {clearance} below delta/2")
    cyc = cycle_from_loops(loops, clearance)
    s = sample_spacing or max(K.grid_h, delta / 2)
    pts = K.sample(s, 4 * s)
    if np.any(winding_number(cyc, pts) != 1):
        raise WindingCheckFailed("cycle does not wind once around the set")
    if avoid is not None:
        apts = avoid.sample(s, 4 * s)
        if apts.size and np.any(winding_number(cyc, apts) != 0):
            raise WindingCheckFailed("cycle winds around a set it must avoid")
    return cyc
