"""Membership checks and the two counterexamples: |w| on {0} x D and 1/z on the circle."""

from dataclasses import asdict, dataclass

from _common import parse_config, save
from rungekit.adcheck import check_membership, holo_distance_lower_bound_abs, polynomial_obstruction_demo
from rungekit.geometry import Disc, Points, rasterize, shape_from_json
from rungekit.oracle import parse


@dataclass
class Config:
    pitch: float = 0.02
    fit_degree: int = 10
    circle_degree: int = 30
    out: str = ""


def main(cfg: Config):
    D = rasterize([Disc(0j, 1.0)], cfg.pitch)
    P = rasterize([Points((0j,))], cfg.pitch)
    checks = {
        "z*w on bidisc": check_membership(parse("z1*z2", dim=2), [D, D]),
        "|w| on {0} x D": check_membership(parse("abs(z2)", dim=2), [P, D]),
        "conj(z1) on bidisc": check_membership(parse("conj(z1)", dim=2), [D, D]),
    }
    for name, r in checks.items():
        print(f"{name:20s} {r.verdict:5s} residuals {r.residuals}")
    abs_demo = holo_distance_lower_bound_abs(degree=cfg.fit_degree)
    print(f"|w| vs holomorphic fits: smallest sup error {abs_demo['min_sup_error']:.4f} (bound 1/2)")
    C = rasterize([shape_from_json({"circle": {"c": [0, 0], "r": 1}})], cfg.pitch)
    obs = polynomial_obstruction_demo(C, 0j, degree=cfg.circle_degree)
    print(f"circle, 1/z: max |zQ - 1| = {obs['max_defect_on_boundary']:.4f} for the degree-{cfg.circle_degree} fit")
    result = {"config": asdict(cfg), "membership": {k: v.to_json() for k, v in checks.items()},
              "abs_counterexample": abs_demo, "circle_obstruction": obs}
    save(cfg.out, result)
    return result


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
