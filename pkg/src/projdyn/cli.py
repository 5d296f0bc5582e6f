"""Command-line front end: ``projdyn run|fiber|green|presets|validate``.

Exit codes: 0 all verdicts pass, 2 a verdict failed, 3 inconclusive, 1 bad
config, bad map or a numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import measures as ms
from .config import DEFAULT, Tolerances
from .errors import ConfigError, ProjdynError
from .fibers import backward_orbit, write_cloud_binary, write_cloud_csv
from .green import green_value, write_green_csv
from .projective import PRESETS, HomogeneousPolynomial, map_from_dict, point

TOP_KEYS = {"map", "experiment", "params", "tolerances", "seed", "out_dir", "deterministic"}
EXIT_OK, EXIT_ERROR, EXIT_FAIL, EXIT_INCONCLUSIVE = 0, 1, 2, 3


@dataclass
class RunConfig:
    map: object
    experiment: str
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    out_dir: str = "out"
    deterministic: bool = True

    @classmethod
    def from_dict(cls, obj):
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object", "<root>")
        for k in obj:
            if k not in TOP_KEYS:
                raise ConfigError(f"unknown config key {k!r}", k)
        for k in ("map", "experiment"):
            if k not in obj:
                raise ConfigError(f"missing required key {k!r}", k)
        name = obj["experiment"]
        name = name[4:] if isinstance(name, str) and name.startswith("exp_") else name
        if name not in ex.EXPERIMENTS:
            raise ConfigError(f"unknown experiment {obj['experiment']!r}; known: {', '.join(ex.EXPERIMENTS)}",
                              "experiment")
        tols = obj.get("tolerances", {})
        if not isinstance(tols, dict):
            raise ConfigError("tolerances must be an object", "tolerances")
        for k in tols:
            if k not in Tolerances.field_names():
                raise ConfigError(f"unknown tolerance {k!r}", f"tolerances.{k}")
        params = obj.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("params must be an object", "params")
        seed = obj.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError("seed must be a nonnegative integer", "seed")
        return cls(obj["map"], name, params, tols, seed, str(obj.get("out_dir", "out")),
                   bool(obj.get("deterministic", True)))

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}", "<file>") from exc
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}", "<file>") from exc
        return cls.from_dict(obj)

    def canonical(self):
        """Inputs that determine the results (the output location and thread count do not)."""
        return {"map": self.map, "experiment": self.experiment, "params": self.params,
                "tolerances": self.tolerances, "seed": self.seed, "deterministic": self.deterministic}

    @property
    def digest(self):
        return ex.digest(self.canonical())

    def tol(self):
        try:
            return DEFAULT.updated(**self.tolerances)
        except TypeError as exc:
            raise ConfigError(str(exc), "tolerances") from exc


# --- JSON decoding of experiment inputs ----------------------------------------------

def parse_coords(obj, key):
    """[2, 1], [[0.3, 0.7], [1, 0]] or the string "2,1" (Python complex syntax per entry), unnormalized."""
    try:
        if isinstance(obj, str):
            return np.array([complex(s.strip().replace(" ", "")) for s in obj.split(",")])
        return np.array([complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in obj])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad point {obj!r}: {exc}", key) from exc


def parse_point(obj, key):
    try:
        return point(*parse_coords(obj, key))
    except (TypeError, ValueError, ProjdynError) as exc:
        raise ConfigError(f"bad point {obj!r}: {exc}", key) from exc


def _check_keys(obj, allowed, key):
    if not isinstance(obj, dict):
        raise ConfigError(f"expected an object, got {obj!r}", key)
    for k in obj:
        if k not in allowed:
            raise ConfigError(f"unknown key {k!r}", f"{key}.{k}")


def parse_test_function(obj, key):
    kind = obj.get("kind") if isinstance(obj, dict) else None
    spec = {"trig_moment": {"m"}, "bump": {"center", "radius"}, "holder_kernel": {"center", "alpha"},
            "constant": {"value"}}
    if kind not in spec:
        raise ConfigError(f"unknown test function {obj!r}; kinds: {', '.join(spec)}", key)
    _check_keys(obj, spec[kind] | {"kind"}, key)
    try:
        if kind == "trig_moment":
            return ms.trig_moment(obj.get("m", 1))
        if kind == "bump":
            return ms.bump(parse_point(obj["center"], f"{key}.center"), obj.get("radius", 0.5))
        if kind == "holder_kernel":
            return ms.holder_kernel(parse_point(obj["center"], f"{key}.center"), obj.get("alpha", 1.0))
        return ms.constant(obj.get("value", 1.0))
    except KeyError as exc:
        raise ConfigError(f"missing {exc.args[0]!r}", f"{key}.{exc.args[0]}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), key) from exc


def parse_set(obj, key):
    kind = obj.get("kind") if isinstance(obj, dict) else None
    spec = {"sector": {"center_angle", "half_width"}, "disc": {"center", "radius"}, "half_plane": {"angle"},
            "everything": set(), "empty": set()}
    if kind not in spec:
        raise ConfigError(f"unknown set {obj!r}; kinds: {', '.join(spec)}", key)
    _check_keys(obj, spec[kind] | {"kind"}, key)
    if kind == "sector":
        return ms.Sector(obj.get("center_angle", 0.0), obj.get("half_width", math.pi / 4))
    if kind == "half_plane":
        return ms.HalfPlane(obj.get("angle", 0.0))
    if kind == "disc":
        c = obj.get("center", 0.0)
        return ms.Disc(complex(*c) if isinstance(c, list) else complex(c), obj.get("radius", 0.5))
    return ms.Everything() if kind == "everything" else ms.Empty()


def parse_polynomial(obj, n_vars, key):
    """{"degree": q, "terms": [{"exps": [...], "re": .., "im": ..}, ...]}."""
    _check_keys(obj, {"degree", "terms"}, key)
    try:
        return HomogeneousPolynomial.from_json(n_vars, obj["degree"], obj["terms"])
    except KeyError as exc:
        raise ConfigError(f"missing {exc.args[0]!r}", f"{key}.{exc.args[0]}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), key) from exc


def parse_grid(obj, dim, key):
    kind = obj.get("kind") if isinstance(obj, dict) else None
    spec = {"annulus": {"n_angles", "n_radii", "width"}, "circle": {"count"}, "torus": {"side"},
            "points": {"points"}}
    if kind not in spec:
        raise ConfigError(f"unknown grid {obj!r}; kinds: {', '.join(spec)}", key)
    _check_keys(obj, spec[kind] | {"kind"}, key)
    if kind in ("annulus", "circle") and dim != 1:
        raise ConfigError(f"{kind} grids live on P^1", key)
    if kind == "torus" and dim != 2:
        raise ConfigError("torus grids live on P^2", key)
    if kind == "annulus":
        return ex.annulus_grid(obj.get("n_angles", 20), obj.get("n_radii", 20), obj.get("width", 1e-4))
    if kind == "circle":
        return ex.circle_grid(obj.get("count", 400))
    if kind == "torus":
        return ex.torus_grid(obj.get("side", 30))
    return np.stack([parse_point(p, f"{key}.points").coords for p in obj["points"]])


def parse_ns(obj, key):
    """A list of integers or the inclusive range string "a..b"."""
    try:
        if isinstance(obj, str):
            lo, hi = obj.split("..")
            return list(range(int(lo), int(hi) + 1))
        ns = [int(n) for n in obj]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad index list {obj!r}", key) from exc
    if not ns:
        raise ConfigError("empty index list", key)
    return ns


_DEFAULT_H = {"degree": 1, "terms": [{"exps": [1, 0], "re": 1.0}, {"exps": [0, 1], "re": -1.0}]}

PARAMS = {
    "point_equidistribution": {"a", "phis", "ns", "ref_base", "ref_depth", "lambda"},
    "exceptional": {"a", "phis", "ns", "ref_base", "ref_depth", "lambda"},
    "counting": {"a", "b", "sets", "ns", "ref_base", "ref_depth", "lambda"},
    "mixing": {"phi", "psi", "ns", "sample_size", "burn_in", "start", "lambda"},
    "birkhoff": {"phis", "checkpoints", "a", "burn_in", "start", "ref_base", "ref_depth"},
    "hypersurface": {"h", "grid", "ns", "lambda"},
    "exponential_estimate": {"h", "sample_size", "scale", "mass_safety"},
    "holder_modulus": {"phi", "pairs", "ns"},
}


def build_call(cfg: RunConfig, f, threads):
    """Translate cfg.params into keyword arguments of the experiment function."""
    name = cfg.experiment
    p = cfg.params
    _check_keys(p, PARAMS[name], "params")
    tol = cfg.tol()
    kw = {"tol": tol, "config_digest": cfg.digest}

    def pt(k, default):
        return parse_point(p.get(k, default), f"params.{k}")

    def phis(k, default):
        items = p.get(k, default)
        if not isinstance(items, list) or not items:
            raise ConfigError("expected a nonempty list of test functions", f"params.{k}")
        return [parse_test_function(o, f"params.{k}[{i}]") for i, o in enumerate(items)]

    def ns(k, default):
        return parse_ns(p.get(k, default), f"params.{k}")

    if "lambda" in p:
        kw["lam"] = float(p["lambda"])
    if name in ("point_equidistribution", "exceptional", "counting", "birkhoff"):
        kw["ref_base"] = pt("ref_base", [5, 2])
        if "ref_depth" in p:
            kw["ref_depth"] = int(p["ref_depth"])
    if name in ("point_equidistribution", "exceptional", "counting", "birkhoff", "holder_modulus"):
        kw["threads"] = threads
    trig = [{"kind": "trig_moment", "m": m} for m in (1, 2, 3)]
    if name == "point_equidistribution":
        return ex.exp_point_equidistribution, (f, pt("a", [2, 1]), phis("phis", trig), ns("ns", "1..12")), kw
    if name == "exceptional":
        a = pt("a", [0, 1])
        default = [{"kind": "bump", "center": [[c.real, c.imag] for c in a.coords], "radius": 0.5}]
        return ex.exp_exceptional, (f, a, phis("phis", default), ns("ns", "1..8")), kw
    if name == "counting":
        sets = p.get("sets", [{"kind": "sector"}])
        if not isinstance(sets, list) or not sets:
            raise ConfigError("expected a nonempty list of sets", "params.sets")
        U = [parse_set(o, f"params.sets[{i}]") for i, o in enumerate(sets)]
        return ex.exp_counting, (f, pt("a", [2, 1]), pt("b", [3, 1]), U, ns("ns", "8..12")), kw
    if name == "mixing":
        phi = parse_test_function(p.get("phi", trig[0]), "params.phi")
        psi = parse_test_function(p.get("psi", trig[0]), "params.psi")
        kw.update(burn_in=int(p.get("burn_in", 50)), start=pt("start", [[0.3, 0.7], [1, 0]]))
        return ex.exp_mixing, (f, phi, psi, ns("ns", "1..8"), int(p.get("sample_size", 10000)), cfg.seed), kw
    if name == "birkhoff":
        kw.update(seed=cfg.seed, burn_in=int(p.get("burn_in", 100)), start=pt("start", [[0.3, 0.7], [1, 0]]))
        if "a" in p:
            kw["a"] = pt("a", None)
        return ex.exp_birkhoff, (f, phis("phis", [trig[0]]), ns("checkpoints", [10, 100, 1000, 10000])), kw
    if name == "hypersurface":
        h = parse_polynomial(p.get("h", _DEFAULT_H), f.dim + 1, "params.h")
        grid = parse_grid(p.get("grid", {"kind": "annulus" if f.dim == 1 else "torus"}), f.dim, "params.grid")
        return ex.exp_hypersurface, (f, h, grid, ns("ns", "1..12")), kw
    if name == "exponential_estimate":
        h = parse_polynomial(p.get("h", _DEFAULT_H), f.dim + 1, "params.h")
        kw.update(scale=float(p.get("scale", 1.0)), mass_safety=float(p.get("mass_safety", 1.0)))
        seeds = (cfg.seed, cfg.seed + 1, cfg.seed + 2)
        return ex.exp_exponential_estimate, (f, h, int(p.get("sample_size", 20000)), seeds), kw
    phi = parse_test_function(p.get("phi", {"kind": "bump", "center": [1, 1], "radius": 0.8}), "params.phi")
    if "pairs" not in p:
        raise ConfigError("holder_modulus needs point pairs", "params.pairs")
    pairs = [(parse_point(x, f"params.pairs[{i}]"), parse_point(y, f"params.pairs[{i}]"))
             for i, (x, y) in enumerate(p["pairs"])]
    return ex.exp_holder_modulus, (f, phi, pairs, ns("ns", [0, 2, 4, 6])), kw


def build_map(spec, tol, key="map"):
    try:
        return map_from_dict(spec, tol=tol)
    except KeyError as exc:
        raise ConfigError(f"map definition lacks {exc.args[0]!r}", f"{key}.{exc.args[0]}") from exc
    except ProjdynError as exc:
        raise ConfigError(f"{type(exc).__name__}: {exc}", key) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), key) from exc


# --- subcommands ------------------------------------------------------------------

def _load_config(args):
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if args.deterministic:
        cfg.deterministic = True
    return cfg


def cmd_run(args):
    cfg = _load_config(args)
    f = build_map(cfg.map, cfg.tol())
    fn, pos, kw = build_call(cfg, f, args.threads)
    report = fn(*pos, **kw)
    report.seed = cfg.seed if report.seed is None else report.seed
    out = report.write(cfg.out_dir)
    (out / "config.json").write_text(json.dumps(cfg.canonical(), indent=2, sort_keys=True) + "\n")
    for v in report.verdicts:
        print(v.line())
    print(f"outcome: {report.outcome}  ->  {out}")
    return {ex.PASS: EXIT_OK, ex.FAIL: EXIT_FAIL, ex.INCONCLUSIVE: EXIT_INCONCLUSIVE}[report.outcome]


def cmd_validate(args):
    cfg = _load_config(args)
    f = build_map(cfg.map, cfg.tol())
    build_call(cfg, f, args.threads)
    c = f.certificate
    print(f"config ok: experiment={cfg.experiment} digest={cfg.digest}")
    print(f"map {f.name}: P^{f.dim}, degree {f.degree}, certificate {c.method} witness={c.witness:.6g}"
          + (" (heuristic)" if c.heuristic else ""))
    return EXIT_OK


def cmd_presets(args):
    for desc in PRESETS.values():
        print(desc)
    return EXIT_OK


def _map_arg(text, dim=1):
    spec = text
    if Path(text).exists():
        spec = json.loads(Path(text).read_text())
    elif text.lstrip().startswith("{"):
        spec = json.loads(text)
    elif dim != 1:
        spec = {"dim": dim, "components": text}
    return build_map(spec, DEFAULT, "--map")


def cmd_fiber(args):
    f = _map_arg(args.map)
    target = parse_point(args.target, "--target")
    cloud = backward_orbit(f, target, args.depth, threads=args.threads)
    if args.out:
        (write_cloud_binary if args.format == "binary" else write_cloud_csv)(cloud, args.out)
    print(f"total weight {cloud.total_weight}")
    print(f"distinct atoms {len(cloud)}")
    return EXIT_OK


def _read_points(path):
    text = Path(path).read_text()
    if text.lstrip().startswith("["):
        return [parse_coords(p, "--points") for p in json.loads(text)]
    return [parse_coords(line, "--points") for line in text.splitlines() if line.strip()
            and not line.lstrip().startswith("#")]


def cmd_green(args):
    if args.depth < 1:
        raise ConfigError("depth must be at least 1", "--depth")
    f = _map_arg(args.map, args.dim)
    raw = [parse_coords(p, "--point") for p in args.point or []]
    if args.points:
        raw += _read_points(args.points)
    if not raw:
        raise ConfigError("no points given", "--points")
    # explicit coordinates are evaluated as given, not rescaled
    for z in raw:
        if len(z) != f.dim + 1:
            raise ConfigError(f"point {z} has {len(z)} coordinates, map acts on P^{f.dim}", "--points")
    est = [green_value(f, z, args.depth) for z in raw]
    write_green_csv(args.out or sys.stdout, raw, est)
    return EXIT_OK


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="worker threads for fiber expansion")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", default=None, help="output directory (run) or file (fiber, green)")
    common.add_argument("--deterministic", action="store_true", help="force deterministic mode")

    ap = argparse.ArgumentParser(prog="projdyn", description="equidistribution experiments for endomorphisms of P^k")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (("run", cmd_run, "run an experiment from a config file"),
                               ("validate", cmd_validate, "check a config and its map without running")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--config", required=True)
        p.set_defaults(func=fn)
    p = sub.add_parser("presets", parents=[common], help="list preset maps")
    p.set_defaults(func=cmd_presets)
    p = sub.add_parser("fiber", parents=[common], help="write the exact depth-n fiber of a point")
    p.add_argument("--map", required=True, help="preset name, JSON file or inline JSON")
    p.add_argument("--target", required=True, help='point such as "1,1" or "0.5+1j,1"')
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--format", choices=("csv", "binary"), default="csv")
    p.set_defaults(func=cmd_fiber)
    p = sub.add_parser("green", parents=[common], help="finite-depth Green function at points")
    p.add_argument("--map", required=True)
    p.add_argument("--dim", type=int, default=1, help="dimension k for preset maps")
    p.add_argument("--points", help="file of points: JSON list or one comma-separated point per line")
    p.add_argument("--point", action="append", help="inline point, repeatable")
    p.add_argument("--depth", type=int, required=True)
    p.set_defaults(func=cmd_green)
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error [{exc.key}]: {exc}", file=sys.stderr)
    except (ProjdynError, OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
