"""Approximate 1/(3 - z1 - z2) on the closed unit bidisc by a polynomial in two variables."""

from dataclasses import asdict, dataclass

import numpy as np

from _common import Timer, parse_config, save
from rungekit.geometry import INF, Disc, rasterize
from rungekit.oracle import parse
from rungekit.rexpr import poles_of
from rungekit.tensor import ProductDomain, approximate_product


@dataclass
class Config:
    expr: str = "1/(3 - z1 - z2)"
    radius: float = 1.0
    pitch: float = 0.05
    eps: float = 1e-3
    margin: float = 0.5
    check_points: int = 40_000
    seed: int = 0
    out: str = ""


def main(cfg: Config):
    K = rasterize([Disc(0j, cfg.radius)], cfg.pitch)
    dom = ProductDomain.build([K, K], [[INF], [INF]])
    f = parse(cfg.expr, dim=2, margin=cfg.margin)
    with Timer() as t:
        e, rep = approximate_product(f, dom, cfg.eps, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    z = cfg.radius * np.sqrt(rng.uniform(0, 1, (cfg.check_points, 2))) \
        * np.exp(2j * np.pi * rng.uniform(0, 1, (cfg.check_points, 2)))
    dense = float(np.max(np.abs(e(z) - f(z[:, 0], z[:, 1]))))
    result = {"config": asdict(cfg), "seconds": t.seconds, "terms": e.term_count,
              "poles": [sorted(map(str, p)) for p in poles_of(e)], "sampled_sup_error": rep.sampled_sup_error,
              "random_check_error": dense, "nodes": rep.nodes}
    print(f"{e.term_count} terms, sampled error {rep.sampled_sup_error:.3g}, "
          f"random-point error {dense:.3g}, {t.seconds:.1f} s")
    save(cfg.out, result)
    return result


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
