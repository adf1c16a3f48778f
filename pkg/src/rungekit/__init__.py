"""Constructive rational approximation with prescribed poles on products of planar compacta."""

from .errors import RungeKitError
from .geometry import INF, Annulus, Disc, PlanarCompact, Points, Polygon, Rect, assign_poles, rasterize
from .oracle import parse
from .rexpr import RationalUnivariate, TensorRationalExpr, poles_of
from .runge1d import approximate_univariate, push_pole
from .tensor import ProductDomain, approximate_product, approximate_with_derivatives
from .unions import DisjointProductFamily, approximate_union

__all__ = [
    "INF", "Annulus", "Disc", "DisjointProductFamily", "PlanarCompact", "Points", "Polygon",
    "ProductDomain", "RationalUnivariate", "Rect", "RungeKitError", "TensorRationalExpr",
    "approximate_product", "approximate_union", "approximate_univariate", "approximate_with_derivatives",
    "assign_poles", "parse", "poles_of", "push_pole", "rasterize",
]
