"""Batch front end: JSON config in, tidy CSV or JSON out.

Usage: ifcexp <command> --config run.json [--out path] [--resolution m]
       [--threads k] [--seed s] [--format csv|json]

Exit codes: 0 ok, 1 invalid config, 2 compute guard or failed check.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import itertools
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .channels import (HkMaps, make_hk_virtual_channel, make_two_user_dmc, make_z_channel,
                       marginal_channel)
from .errors import ComputeGuardError, IfcError, ValidationError
from .hk import HkExponent, HkRates, region_hk
from .ordinary import OrdinaryExponent, RatePair, region_ordinary
from .simplexopt import GridSpec

COMMANDS = ("exponent-ordinary", "exponent-hk", "region", "simulate", "verify-lemmas")
DEFAULT_M = {"ordinary": 6, "hk": 3}
HK_RATES = ("R11", "R12", "R21", "R22")


class ConfigError(ValidationError):
    def __init__(self, message):
        super().__init__(message, "INVALID_CONFIG")


# --- config ingestion -----------------------------------------------------------

def load_config(path):
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def apply_overrides(cfg, args):
    cfg = copy.deepcopy(cfg)
    if args.resolution is not None:
        cfg.setdefault("grid", {})["m"] = args.resolution
    if args.threads is not None:
        cfg["threads"] = args.threads
    if args.seed is not None:
        for key in ("simulation", "verify"):
            cfg.setdefault(key, {})["seed"] = args.seed
        cfg["seed"] = args.seed
    out = cfg.setdefault("output", {})
    if args.out is not None:
        out["path"] = args.out
    if args.format is not None:
        out["format"] = args.format
    return cfg


def config_hash(cfg):
    """sha256 of the canonical config without the fields that cannot change
    results (thread count and output location)."""
    core = {k: v for k, v in cfg.items() if k not in ("threads", "output")}
    blob = json.dumps(core, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def build_channel(spec):
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("channel must be an object with a 'type'")
    kind = spec["type"]
    if kind == "zchannel":
        return make_z_channel(spec.get("p", 0.01))
    if kind == "generic":
        if "sizes" not in spec or "table" not in spec:
            raise ConfigError("generic channel needs 'sizes' and 'table'")
        return make_two_user_dmc(spec["sizes"], spec["table"])
    raise ConfigError(f"unknown channel type {kind!r}")


def _uniform(k):
    return [1.0 / k] * k


def input_pmfs(cfg, dmc):
    inp = cfg.get("inputs", {})
    nx1, nx2 = dmc.table.shape[:2]
    return inp.get("p_x1", _uniform(nx1)), inp.get("p_x2", _uniform(nx2))


def _axis_values(spec, name):
    if isinstance(spec, (int, float)):
        return [float(spec)]
    if isinstance(spec, list):
        return [float(v) for v in spec]
    if isinstance(spec, dict) and {"start", "stop", "step"} <= set(spec):
        start, stop, step = (float(spec[k]) for k in ("start", "stop", "step"))
        if not step > 0:
            raise ConfigError(f"sweep step for {name} must be > 0")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        if count < 1:
            raise ConfigError(f"empty sweep for {name}")
        return [round(start + i * step, 12) for i in range(count)]
    raise ConfigError(f"cannot read rate specification for {name}")


def rate_points(cfg, names):
    """Rate tuples from a single point, explicit points, or per-coordinate
    values/sweeps (cartesian product, first coordinate outermost)."""
    spec = cfg.get("rates")
    if spec is None:
        raise ConfigError("config has no 'rates'")
    scale = math.log(2.0) if cfg.get("units", "nats") == "bits" else 1.0
    if cfg.get("units", "nats") not in ("nats", "bits"):
        raise ConfigError("units must be 'nats' or 'bits'")
    if isinstance(spec, dict) and "points" in spec:
        pts = [tuple(float(v) for v in p) for p in spec["points"]]
        if any(len(p) != len(names) for p in pts):
            raise ConfigError(f"each rate point needs {len(names)} coordinates")
    elif isinstance(spec, dict):
        axes = [_axis_values(spec.get(n, 0.0), n) for n in names]
        pts = list(itertools.product(*axes))
    else:
        raise ConfigError("'rates' must be an object")
    return [tuple(v * scale for v in p) for p in pts]


def grid_of(cfg, kind):
    g = cfg.get("grid", {})
    try:
        return GridSpec(int(g.get("m", DEFAULT_M[kind])), bool(g.get("refine", False)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad grid: {exc}") from exc


def engine_options(cfg):
    opt = cfg.get("options", {})
    l_set = opt.get("l_set", "proof")
    if l_set not in ("proof", "display"):
        raise ConfigError("options.l_set must be 'proof' or 'display'")
    return {"l_set": l_set, "t0_constrained": not bool(opt.get("t0_unconstrained_x2", False))}


def build_hk(cfg, dmc):
    hk = cfg.get("hk")
    if not isinstance(hk, dict):
        raise ConfigError("exponent-hk needs an 'hk' section with z_sizes, g1, g2")
    try:
        z_sizes = [int(v) for v in hk["z_sizes"]]
        maps = HkMaps(np.array(hk["g1"], dtype=np.int64), np.array(hk["g2"], dtype=np.int64))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad hk section: {exc}") from exc
    vch = make_hk_virtual_channel(marginal_channel(dmc, 1), maps, z_sizes)
    p_z = hk.get("p_z", [_uniform(k) for k in z_sizes])
    return vch, p_z


# --- formatting -----------------------------------------------------------------

def fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def render_csv(columns, rows, meta):
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(columns)
    for r in rows:
        wr.writerow([fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, (np.floating, np.integer)):
        return _json_safe(v.item())
    return v


def render_json(columns, rows, meta):
    doc = {"meta": meta, "columns": list(columns),
           "rows": [{c: _json_safe(r.get(c)) for c in columns} for r in rows]}
    return json.dumps(doc, indent=2) + "\n"


def write_atomic(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".ifcexp-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- commands -------------------------------------------------------------------

def _timed(timing):
    t = time.perf_counter()
    return lambda: round(time.perf_counter() - t, 3) if timing else ""


def cmd_exponent_ordinary(cfg, threads, timing):
    dmc = build_channel(cfg.get("channel"))
    p1, p2 = input_pmfs(cfg, dmc)
    grid = grid_of(cfg, "ordinary")
    pts = rate_points(cfg, ("R1", "R2"))
    calc = OrdinaryExponent(dmc, p1, p2, grid, threads=threads, **engine_options(cfg))
    region = region_ordinary(dmc, p1, p2)
    rows = []
    for r1, r2 in pts:
        clock = _timed(timing)
        rates = RatePair(r1, r2)
        res = calc.exponent(rates)
        rows.append({"R1": r1, "R2": r2, "exponent": float(res.value),
                     "region_member": region.contains(rates), "m": grid.m,
                     "bracket_width": float(res.tau), "wall_time": clock()})
    cols = ["R1", "R2", "exponent", "region_member", "m", "bracket_width", "wall_time"]
    return cols, rows, {"grid_m": grid.m}


def cmd_exponent_hk(cfg, threads, timing):
    dmc = build_channel(cfg.get("channel"))
    vch, p_z = build_hk(cfg, dmc)
    grid = grid_of(cfg, "hk")
    pts = rate_points(cfg, HK_RATES)
    calc = HkExponent(vch, p_z, grid, threads=threads, **engine_options(cfg))
    region = region_hk(vch, p_z)
    rows = []
    for p in pts:
        clock = _timed(timing)
        rates = HkRates(*p)
        res = calc.exponent(rates)
        row = {"R1": rates.R1, "R2": rates.R2, **dict(zip(HK_RATES, p)),
               "exponent": float(res.value), "region_member": region.contains(rates),
               "m": grid.m, "bracket_width": float(res.tau)}
        for v, val in res.details["per_pattern"].items():
            row[f"E_v{v}"] = float(val)
        row["wall_time"] = clock()
        rows.append(row)
    cols = (["R1", "R2", *HK_RATES, "exponent", "region_member", "m", "bracket_width"]
            + [f"E_v{v}" for v in range(1, 8)] + ["wall_time"])
    return cols, rows, {"grid_m": grid.m}


def cmd_region(cfg, threads, timing):
    which = cfg.get("region", {}).get("which", "hk" if "hk" in cfg else "ordinary")
    dmc = build_channel(cfg.get("channel"))
    rows = []
    if which == "ordinary":
        p1, p2 = input_pmfs(cfg, dmc)
        reg = region_ordinary(dmc, p1, p2)
        consts = {"I(X1;Y1)": reg.i_x1_y1, "I(X1;Y1|X2)": reg.i_x1_y1_given_x2,
                  "I(X1,X2;Y1)": reg.i_x1x2_y1}
        names = ("R1", "R2")
        member = lambda p: reg.contains(RatePair(*p))  # noqa: E731
    elif which == "hk":
        vch, p_z = build_hk(cfg, dmc)
        reg = region_hk(vch, p_z)
        consts = {f"bound_u{u}": b for u, b in enumerate(reg.bounds, start=1)}
        names = HK_RATES
        member = lambda p: reg.contains(HkRates(*p))  # noqa: E731
    else:
        raise ConfigError("region.which must be 'ordinary' or 'hk'")
    for k, v in consts.items():
        rows.append({"record": "constant", "name": k, "value": float(v)})
    if "rates" in cfg:
        for p in rate_points(cfg, names):
            row = {"record": "member", "member": member(p)}
            row.update(dict(zip(names, p)))
            rows.append(row)
    cols = ["record", "name", "value", *names, "member"]
    return cols, rows, {"region": which}


def cmd_simulate(cfg, threads, timing):
    from .verification import simulate_hk, simulate_ordinary

    sim = cfg.get("simulation", {})
    which = sim.get("which", "ordinary")
    ns = sim.get("n", [6])
    ns = [int(v) for v in (ns if isinstance(ns, list) else [ns])]
    trials = int(sim.get("trials", 1000))
    seed = int(sim.get("seed", cfg.get("seed", 0)))
    y_mode = sim.get("y_mode", "auto")
    if y_mode not in ("auto", "exact", "sampled"):
        raise ConfigError("simulation.y_mode must be auto, exact or sampled")
    dmc = build_channel(cfg.get("channel"))
    rows = []
    if which == "ordinary":
        p1, p2 = input_pmfs(cfg, dmc)
        names = ("R1", "R2")
        run = lambda p, n: simulate_ordinary(dmc, p1, p2, RatePair(*p), n, trials, seed,  # noqa: E731
                                             threads, y_mode)
    elif which == "hk":
        vch, p_z = build_hk(cfg, dmc)
        names = HK_RATES
        run = lambda p, n: simulate_hk(vch, p_z, HkRates(*p), n, trials, seed, threads,  # noqa: E731
                                       y_mode)
    else:
        raise ConfigError("simulation.which must be 'ordinary' or 'hk'")
    for p in rate_points(cfg, names):
        for n in ns:
            clock = _timed(timing)
            rep = run(p, n)
            row = dict(zip(names, p))
            row.update({"n": n, "trials": trials, "p_error": rep.p_error, "ci_low": rep.ci[0],
                        "ci_high": rep.ci[1], "ties": rep.ties, "mode": rep.mode,
                        "messages": "x".join(map(str, rep.messages)), "seed": seed,
                        "wall_time": clock()})
            rows.append(row)
    cols = [*names, "n", "trials", "p_error", "ci_low", "ci_high", "ties", "mode", "messages",
            "seed", "wall_time"]
    return cols, rows, {"seed": seed, "simulation": which}


def cmd_verify_lemmas(cfg, threads, timing):
    from .verification import lemmas as L

    v = cfg.get("verify", {})
    seed = int(v.get("seed", cfg.get("seed", 0)))
    rng = np.random.default_rng(seed)
    shape = {k: int(v[k]) for k in ("K", "max_size", "max_count", "max_n") if k in v}
    out = []

    def record(name, results):
        results = list(results)
        out.append({"check": name, "instances": len(results), "passed": sum(results),
                    "failed": len(results) - sum(results)})

    def upper_ok(inst):
        exact = L.exact_union_probability(inst)
        return exact <= L.lemma3_bounds(inst).upper + 1e-12

    def sandwich_ok(inst):
        exact = L.exact_union_probability(inst)
        b = L.lemma3_bounds(inst)
        return b.conditions_hold and b.lower - 1e-12 <= exact <= b.upper + 1e-12

    record("lemma3_upper", (upper_ok(L.random_lemma_instance(rng, **shape))
                            for _ in range(int(v.get("instances", 1000)))))
    record("lemma3_sandwich", (sandwich_ok(L.constancy_lemma_instance(
        rng, **{k: shape[k] for k in ("K", "max_count", "max_n") if k in shape}))
        for _ in range(int(v.get("constancy_instances", 200)))))

    groups = int(v.get("groups", 3))

    def lemma4_ok(inst, need_lower):
        exact = L.exact_union_probability(inst)
        b = L.lemma4_bounds(inst)
        ok = exact <= b.upper + 1e-12
        if need_lower:
            ok = ok and b.conditions_hold and b.lower - 1e-12 <= exact
        return ok

    record("lemma4_upper", (lemma4_ok(L.random_union_instance(rng, groups), False)
                            for _ in range(int(v.get("lemma4_instances", 200)))))
    record("lemma4_sandwich", (lemma4_ok(L.constancy_union_instance(rng, groups), True)
                               for _ in range(int(v.get("lemma4_instances", 200)))))

    def decaen_ok():
        n_atoms = int(rng.integers(2, 9))
        probs = rng.dirichlet(np.ones(n_atoms))
        ev = rng.random((int(rng.integers(1, 6)), n_atoms)) < 0.4
        return L.decaen_lower_bound(ev, probs) <= L.union_probability(ev, probs) + 1e-12

    record("decaen", (decaen_ok() for _ in range(int(v.get("decaen_instances", 1000)))))

    def pairwise_ok():
        q = int(rng.choice([2, 3, 5, 7]))
        k = int(rng.integers(1, q + 1))
        subsets = [np.flatnonzero(rng.random(q) < rng.random()) for _ in range(k)]
        ev, pr = L.pairwise_independent_family(q, subsets)
        lo, up = L.truncated_union_bounds(ev, pr)
        exact = L.union_probability(ev, pr)
        return lo - 1e-12 <= exact <= up + 1e-12

    record("truncated_union", (pairwise_ok() for _ in range(int(v.get("pairwise_instances", 500)))))
    cols = ["check", "instances", "passed", "failed"]
    return cols, out, {"seed": seed}


HANDLERS = {
    "exponent-ordinary": cmd_exponent_ordinary,
    "exponent-hk": cmd_exponent_hk,
    "region": cmd_region,
    "simulate": cmd_simulate,
    "verify-lemmas": cmd_verify_lemmas,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="ifcexp", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", help="output file (default: config output.path or stdout)")
    ap.add_argument("--resolution", type=int, help="grid resolution m")
    ap.add_argument("--threads", type=int, help="worker threads")
    ap.add_argument("--seed", type=int, help="master seed (u64)")
    ap.add_argument("--format", choices=("csv", "json"))
    return ap


def run(argv=None, stdout=None):
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    t_start = time.perf_counter()
    try:
        cfg = apply_overrides(load_config(args.config), args)
        out = cfg["output"]
        fmt_name = out.get("format", "csv")
        if fmt_name not in ("csv", "json"):
            raise ConfigError("output.format must be csv or json")
        timing = bool(out.get("timing", True))
        threads = int(cfg.get("threads", 1))
        if threads < 1:
            raise ConfigError("threads must be >= 1")
        seed = cfg.get("seed", cfg.get("simulation", {}).get("seed", ""))
        if seed != "" and not (isinstance(seed, int) and 0 <= seed < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")
        cols, rows, extra = HANDLERS[args.command](cfg, threads, timing)
    except ComputeGuardError as exc:
        print(f"ifcexp: {exc}", file=sys.stderr)
        return 2
    except (IfcError, ValueError, KeyError, TypeError) as exc:
        print(f"ifcexp: invalid configuration: {exc}", file=sys.stderr)
        return 1
    except FloatingPointError as exc:
        print(f"ifcexp: numerical failure: {exc}", file=sys.stderr)
        return 2
    meta = {"version": __version__, "command": args.command, "config_sha256": config_hash(cfg),
            "seed": seed}
    meta.update(extra)
    if timing:
        meta["wall_time_s"] = round(time.perf_counter() - t_start, 3)
    render = render_csv if fmt_name == "csv" else render_json
    text = render(cols, rows, meta)
    if out.get("path"):
        write_atomic(out["path"], text)
    else:
        stdout.write(text)
    if args.command == "verify-lemmas" and any(r["failed"] for r in rows):
        print("ifcexp: some checks failed", file=sys.stderr)
        return 2
    return 0


def main(argv=None):
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
