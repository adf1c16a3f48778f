"""Command-line front end: scenes in, result JSON and verification CSV out.

Exit codes: 0 certified success, 2 certified failure (a mathematical
verdict such as a missing pole or a non-holomorphic pullback), 1 anything
else (bad input, internal error).

Scene files::

    {"pitch": 0.05,
     "coords": [{"shapes": [{"disc": {"c": [0, 0], "r": 1}}], "holes": [], "poles": ["inf"]},
                ...]}

Family scenes replace "coords" by "members": [{"coords": [{"shapes": ...}, ...]}, ...]
and give the pole lists once, as "poles": [[...], [...]] (one list per
coordinate). Poles are "inf" or [re, im].
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import adcheck
from .errors import RungeKitError, SceneError
from .geometry import INF, assign_poles, complement_components, rasterize, shape_from_json, validate_pole_set
from .oracle import parse
from .rexpr import poles_of
from .tensor import ProductDomain, approximate_product, approximate_with_derivatives
from .unions import DisjointProductFamily, approximate_union, validate_family

SCHEMA_VERSION = 1
CSV_MAX_ROWS = 50_000


@dataclass
class RunConfig:
    command: str
    scene: str | None = None
    f: str | None = None
    f_per_member: str | None = None
    eps: float = 1e-3
    margin: float = 0.5
    pitch: float | None = None
    orders: str | None = None
    perm: str | None = None
    seed: int = 0
    sequential: bool = True
    out: str | None = None
    csv: str | None = None
    threshold: float | None = None
    degree: int | None = None
    extra: dict = field(default_factory=dict)

    def validate(self):
        if not self.eps > 0:
            raise SceneError("eps must be positive")
        if not self.margin > 0:
            raise SceneError("margin must be positive")
        if self.pitch is not None and not self.pitch > 0:
            raise SceneError("pitch must be positive")


# --------------------------------------------------------------------------
# scenes


def _pole(p):
    if isinstance(p, str):
        if p.lower() in ("inf", "infinity"):
            return INF
        raise SceneError(f"unknown pole {p!r}")
    try:
        x, y = p
        return complex(float(x), float(y))
    except (TypeError, ValueError) as exc:
        raise SceneError(f"pole must be 'inf' or [re, im], got {p!r}") from exc


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SceneError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}",
                         path=str(path)) from exc
    except OSError as exc:
        raise SceneError(f"{path}: {exc.strerror}", path=str(path)) from exc


def _compact(entry, pitch):
    if not isinstance(entry, dict) or "shapes" not in entry:
        raise SceneError("each coordinate needs a 'shapes' list")
    shapes = [shape_from_json(s) for s in entry["shapes"]]
    holes = [shape_from_json(s) for s in entry.get("holes", [])]
    return rasterize(shapes, pitch, holes=holes)


def _pitch(doc, override):
    h = override if override is not None else doc.get("pitch", 0.05)
    if not float(h) > 0:
        raise SceneError("pitch must be positive")
    return float(h)


def load_product_scene(doc, pitch=None) -> ProductDomain:
    h = _pitch(doc, pitch)
    coords = doc.get("coords")
    if not coords:
        raise SceneError("scene needs a non-empty 'coords' list")
    sets = [_compact(c, h) for c in coords]
    poles = [[_pole(p) for p in c.get("poles", [INF])] for c in coords]
    return ProductDomain.build(sets, poles)


def load_family_scene(doc, pitch=None) -> DisjointProductFamily:
    h = _pitch(doc, pitch)
    members = doc.get("members")
    if not members:
        raise SceneError("family scene needs a non-empty 'members' list")
    sets = [[_compact(c, h) for c in m["coords"]] for m in members]
    d = len(sets[0])
    poles = doc.get("poles", [[INF]] * d)
    return DisjointProductFamily.build(sets, [[_pole(p) for p in ps] for ps in poles])


# --------------------------------------------------------------------------
# output


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def dump_result(doc, path):
    text = json.dumps(_jsonable(doc), sort_keys=True, indent=1, allow_nan=True) + "\n"
    if path:
        Path(path).write_text(text)
    return text


def write_csv(path, f, expr, axes):
    """Verification rows on the product of the axes (subsampled to CSV_MAX_ROWS)."""
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    if pts.shape[0] > CSV_MAX_ROWS:
        pts = pts[np.linspace(0, pts.shape[0] - 1, CSV_MAX_ROWS).astype(int)]
    fv = np.broadcast_to(np.asarray(f(*[pts[:, i] for i in range(pts.shape[1])]), dtype=complex), pts.shape[:1])
    av = expr(pts)
    err = np.abs(fv - av)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = []
        for i in range(pts.shape[1]):
            head += [f"z{i + 1}_re", f"z{i + 1}_im"]
        w.writerow(head + ["oracle_re", "oracle_im", "approx_re", "approx_im", "abs_error"])
        for k in range(pts.shape[0]):
            row = []
            for z in pts[k]:
                row += [repr(float(z.real)), repr(float(z.imag))]
            row += [repr(float(fv[k].real)), repr(float(fv[k].imag)),
                    repr(float(av[k].real)), repr(float(av[k].imag)), repr(float(err[k]))]
            w.writerow(row)
    return float(err.max(initial=0.0))


def _poles_json(expr):
    """Per-variable pole lists, "inf" or [re, im], in a fixed order."""
    return [sorted((INF if p == INF else [p.real, p.imag] for p in ps), key=str) for ps in poles_of(expr)]


def _read_expr(s):
    p = Path(s)
    if p.suffix == ".expr" and p.is_file():
        return p.read_text().strip()
    return s


# --------------------------------------------------------------------------
# commands


def cmd_approx_product(cfg: RunConfig):
    dom = load_product_scene(load_json(cfg.scene), cfg.pitch)
    if not cfg.f:
        raise SceneError("--f is required")
    f = parse(_read_expr(cfg.f), dim=dom.dim, margin=cfg.margin)
    perm = [int(x) for x in cfg.perm.split(",")] if cfg.perm else None
    orders = [int(x) for x in cfg.orders.split(",")] if cfg.orders else [0]
    if orders == [0]:
        expr, report = approximate_product(f, dom, cfg.eps, margin=cfg.margin, perm=perm, seed=cfg.seed)
    else:
        expr, report = approximate_with_derivatives(f, dom, cfg.eps, orders=orders, margin=cfg.margin,
                                                    perm=perm, seed=cfg.seed)
    doc = {"expression": expr.to_json(), "report": report.to_json(), "poles": _poles_json(expr),
           "summary": {"sampled_sup_error": report.sampled_sup_error, "eps": cfg.eps,
                       "term_count": expr.term_count, "certified": True}}
    if cfg.csv:
        doc["csv"] = cfg.csv
        doc["summary"]["csv_max_error"] = write_csv(cfg.csv, f, expr, dom.verification_axes(10_000))
    return 0, doc


def cmd_approx_union(cfg: RunConfig):
    fam = load_family_scene(load_json(cfg.scene), cfg.pitch)
    if cfg.f_per_member:
        srcs = [_read_expr(s.strip()) for s in cfg.f_per_member.split(",")]
    elif cfg.f:
        srcs = [_read_expr(cfg.f)] * fam.m
    else:
        raise SceneError("--f or --f-per-member is required")
    if len(srcs) != fam.m:
        raise SceneError(f"{len(srcs)} expressions for {fam.m} members")
    fs = [parse(s, dim=fam.dim, margin=cfg.margin) for s in srcs]
    expr, report = approximate_union(fs, fam, cfg.eps, margin=cfg.margin, seed=cfg.seed)
    doc = {"expression": expr.to_json(), "report": report.to_json(), "poles": _poles_json(expr),
           "summary": {"sampled_sup_error": report.sampled_sup_error, "eps": cfg.eps,
                       "term_count": expr.term_count, "certified": True}}
    if cfg.csv:
        doc["csv"] = cfg.csv
        paths = []
        worst = 0.0
        for j in range(fam.m):
            p = f"{Path(cfg.csv).with_suffix('')}_member{j}.csv"
            worst = max(worst, write_csv(p, fs[j], expr, fam.member_domain(j).verification_axes(2_500)))
            paths.append(p)
        doc["csv_members"] = paths
        doc["summary"]["csv_max_error"] = worst
    return 0, doc


def cmd_check_ad(cfg: RunConfig):
    doc_in = load_json(cfg.scene)
    if not cfg.f:
        raise SceneError("--f is required")
    if cfg.f.endswith(".csv"):
        raise SceneError("sampled input is not supported by the checker; pass an expression")
    h = _pitch(doc_in, cfg.pitch)
    sets = [_compact(c, h) for c in doc_in.get("coords", [])]
    if not sets:
        raise SceneError("scene needs a non-empty 'coords' list")
    f = parse(_read_expr(cfg.f), dim=len(sets), margin=cfg.margin)
    rep = adcheck.check_membership(f, sets, threshold=cfg.threshold, pitch=h, seed=cfg.seed)
    code = {"pass": 0, "fail": 2}.get(rep.verdict, 1)
    return code, {"membership": rep.to_json(), "summary": {"verdict": rep.verdict}}


def cmd_demo(cfg: RunConfig):
    which = cfg.extra.get("demo")
    if which == "abs-counterexample":
        res = adcheck.holo_distance_lower_bound_abs(degree=cfg.degree or 10, seed=cfg.seed)
        ok = res["min_sup_error"] >= 0.49
        return (0 if ok else 1), {"demo": which, "result": res,
                                  "summary": {"bound": res["bound"], "min_sup_error": res["min_sup_error"]}}
    if which == "circle-obstruction":
        h = cfg.pitch or 0.02
        K = rasterize([shape_from_json({"circle": {"c": [0, 0], "r": 1}})], h)
        res = adcheck.polynomial_obstruction_demo(K, 0j, degree=cfg.degree or 30)
        ann = rasterize([shape_from_json({"annulus": {"c": [0, 0], "r_in": 0.5, "r_out": 1}})], h)
        try:
            validate_pole_set(ann, assign_poles(ann, [INF]))
            res["annulus_inf_only"] = "accepted"
        except RungeKitError as exc:
            res["annulus_inf_only"] = exc.code
        summary = {k: res[k] for k in ("max_defect_on_boundary", "certified_lower_bound", "annulus_inf_only")}
        return 0, {"demo": which, "result": res, "summary": summary}
    raise SceneError(f"unknown demo {which!r}")


def cmd_inspect(cfg: RunConfig):
    doc_in = load_json(cfg.scene)
    h = _pitch(doc_in, cfg.pitch)
    out = []
    if "members" in doc_in:
        fam = load_family_scene(doc_in, cfg.pitch)
        validate_family(fam)
        coords = [(K, fam.poles[i]) for i, K in enumerate(fam.unions)]
    else:
        coords = [(_compact(c, h), [_pole(p) for p in c.get("poles", [INF])]) for c in doc_in.get("coords", [])]
    for K, poles in coords:
        comps = complement_components(K)
        c, R = K.enclosing_disc
        entry = {"grid": list(K.mask.shape), "pitch": K.grid_h, "enclosing_disc": {"c": c, "r": R},
                 "bounded_components": len(comps.bounded_ids), "has_interior": bool(K.has_interior)}
        try:
            validate_pole_set(K, assign_poles(K, poles, comps), comps)
            entry["poles"] = "ok"
        except RungeKitError as exc:
            entry["poles"] = exc.code
        out.append(entry)
    return 0, {"coords": out, "summary": {"poles": [c["poles"] for c in out],
                                          "bounded_components": [c["bounded_components"] for c in out]}}


COMMANDS = {
    "approx-product": cmd_approx_product,
    "approx-union": cmd_approx_union,
    "check-ad": cmd_check_ad,
    "demo": cmd_demo,
    "inspect-geometry": cmd_inspect,
}


def run(cfg: RunConfig):
    """Execute one command; returns (exit code, result document)."""
    try:
        cfg.validate()
        code, doc = COMMANDS[cfg.command](cfg)
        status = {0: "certified", 2: "certified_failure"}.get(code, "error")
    except RungeKitError as exc:
        code = 2 if exc.certified_failure else 1
        status = "certified_failure" if code == 2 else "error"
        doc = {"error": {"code": exc.code, "message": str(exc), "details": exc.details}}
    cfg_doc = asdict(cfg)
    doc.update({"schema_version": SCHEMA_VERSION, "command": cfg.command, "status": status, "config": cfg_doc})
    return code, doc


# --------------------------------------------------------------------------
# argument parsing


def _common(p, scene=True):
    if scene:
        p.add_argument("--scene", required=True)
    p.add_argument("--f")
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--margin", type=float, default=0.5)
    p.add_argument("--pitch", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sequential", action="store_true", help="deterministic single-process mode (the default)")
    p.add_argument("--out")
    p.add_argument("--csv")


def build_parser():
    ap = argparse.ArgumentParser(prog="rungekit", description="Rational approximation with prescribed poles.")
    sub = ap.add_subparsers(dest="group", required=True)
    approx = sub.add_parser("approx").add_subparsers(dest="what", required=True)
    p = approx.add_parser("product")
    _common(p)
    p.add_argument("--orders")
    p.add_argument("--perm")
    p = approx.add_parser("union")
    _common(p)
    p.add_argument("--f-per-member")
    check = sub.add_parser("check").add_subparsers(dest="what", required=True)
    p = check.add_parser("ad")
    _common(p)
    p.add_argument("--threshold", type=float)
    demo = sub.add_parser("demo").add_subparsers(dest="what", required=True)
    for name in ("abs-counterexample", "circle-obstruction"):
        p = demo.add_parser(name)
        _common(p, scene=False)
        p.add_argument("--degree", type=int)
    p = sub.add_parser("inspect-geometry")
    _common(p)
    return ap


def config_from_args(ns) -> RunConfig:
    if ns.group == "demo":
        command, extra = "demo", {"demo": ns.what}
    elif ns.group == "inspect-geometry":
        command, extra = "inspect-geometry", {}
    else:
        command, extra = f"{ns.group}-{ns.what}", {}
    keys = RunConfig.__dataclass_fields__
    kw = {k: v for k, v in vars(ns).items() if k in keys and k != "command"}
    kw["sequential"] = True
    return RunConfig(command=command, extra=extra, **kw)


def main(argv=None):
    ns = build_parser().parse_args(argv)
    cfg = config_from_args(ns)
    try:
        code, doc = run(cfg)
    except Exception as exc:  # anything unforeseen is an internal error
        code, doc = 1, {"schema_version": SCHEMA_VERSION, "command": cfg.command, "status": "error",
                        "error": {"code": "internal", "message": f"{type(exc).__name__}: {exc}"},
                        "config": asdict(cfg)}
    dump_result(doc, cfg.out)
    summary = doc.get("summary") or doc.get("error") or {"status": doc["status"]}
    stream = sys.stdout if code == 0 else sys.stderr
    print(json.dumps(_jsonable({"status": doc["status"], **summary}), sort_keys=True), file=stream)
    return code


if __name__ == "__main__":
    sys.exit(main())
