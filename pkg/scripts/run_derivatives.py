"""Simultaneous approximation of exp(z1 + z2) and its partial derivatives on a bidisc."""

from dataclasses import asdict, dataclass

import numpy as np

from _common import Timer, parse_config, save
from rungekit.geometry import INF, Disc, rasterize
from rungekit.oracle import parse
from rungekit.tensor import ProductDomain, approximate_with_derivatives


@dataclass
class Config:
    expr: str = "exp(z1 + z2)"
    radius: float = 0.8
    pitch: float = 0.05
    eps: float = 1e-2
    margin: float = 0.5
    orders: str = "0,1"
    fd_step: float = 1e-4
    out: str = ""


def main(cfg: Config):
    K = rasterize([Disc(0j, cfg.radius)], cfg.pitch)
    dom = ProductDomain.build([K, K], [[INF], [INF]])
    f = parse(cfg.expr, dim=2, margin=cfg.margin)
    orders = [int(x) for x in cfg.orders.split(",")]
    with Timer() as t:
        e, rep = approximate_with_derivatives(f, dom, cfg.eps, orders=orders)
    axes = dom.verification_axes(2500)
    Z1, Z2 = np.meshgrid(*axes, indexing="ij")
    h = cfg.fd_step
    rows = {}
    for alpha, (d1, d2) in {(1, 0): (h, 0), (0, 1): (0, h)}.items():
        fd = (f(Z1 + d1, Z2 + d2) - f(Z1 - d1, Z2 - d2)) / (2 * h)
        rows[str(alpha)] = float(np.max(np.abs(e.derivative(alpha).eval_grid(axes) - fd)))
    print(f"{e.term_count} terms in {t.seconds:.1f} s; first partials vs finite differences: {rows}")
    result = {"config": asdict(cfg), "seconds": t.seconds, "fd_errors": rows,
              "derivative_errors": rep.derivative_errors}
    save(cfg.out, result)
    return result


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
