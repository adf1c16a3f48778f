"""Four disjoint polydiscs with poles {100} x {5i}: approximate the indicator of the first member."""

from dataclasses import asdict, dataclass

import numpy as np

from _common import SCENES, Timer, parse_config, save
from rungekit.cli import load_family_scene, load_json
from rungekit.oracle import parse
from rungekit.rexpr import poles_of
from rungekit.unions import approximate_union, validate_family


@dataclass
class Config:
    scene: str = str(SCENES / "four_polydiscs.json")
    member: int = 0
    eps: float = 1e-2
    pitch: float = 0.5
    out: str = ""


def main(cfg: Config):
    fam = load_family_scene(load_json(cfg.scene), cfg.pitch)
    validate_family(fam)
    fs = [parse("1" if j == cfg.member else "0", dim=fam.dim) for j in range(fam.m)]
    with Timer() as t:
        out, rep = approximate_union(fs, fam, cfg.eps)
    ct = np.array(rep.extra["crosstalk"])
    limit = cfg.eps / (2 * fam.m)
    print(f"sampled error {rep.sampled_sup_error:.3g} over {fam.m} members, {out.term_count} terms, "
          f"{t.seconds:.0f} s")
    print(f"cross-talk of member {cfg.member}: {np.round(ct[cfg.member], 12).tolist()} (limit {limit:g})")
    result = {"config": asdict(cfg), "seconds": t.seconds, "sampled_sup_error": rep.sampled_sup_error,
              "member_errors": rep.extra["member_errors"], "crosstalk": ct.tolist(), "terms": out.term_count,
              "poles": [sorted(map(str, p)) for p in poles_of(out)]}
    save(cfg.out, result)
    return result


if __name__ == "__main__":
    main(parse_config(Config, __doc__))
