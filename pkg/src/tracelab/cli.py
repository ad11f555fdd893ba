"""Command-line entry points.

Every command reads an optional JSON configuration file (top-level keys are
shared settings, a section named after the command holds its own settings);
command-line flags override the file.  Exit codes: 0 success, 2 configuration
error, 3 step budget exhausted, 4 level collides with a voltage value, 5
invariant violated.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import bd_chain, planar_spiral, potential, subdivision, traces
from .chain_core import (KILLED, ChainError, FiniteChain, Measure, counting_measure, cycle_lift_kernel,
                         line_walk_kernel, parse_state, read_kernel, read_measure, truncate)

log = logging.getLogger("tracelab")

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_DELTA, EXIT_INVARIANT = 0, 2, 3, 4, 5

DEFAULTS = {
    "common": {"out": "tracelab_out", "seed": 0, "runs": 1, "jobs": 1},
    "simulate-bd": {"weights": "kozma", "s": 0, "weights_file": None, "level": 1024, "max_steps": 10**9,
                    "cut_times": False, "k": [4, 8], "min_crossings": 3, "ratio_threshold": None},
    "simulate-z2": {"R": 32, "variant": planar_spiral.KOZMA, "engine": "auto", "max_steps": 10**9,
                    "boxes": None},
    "potential": {"chain": "bd:2pow", "kernel": None, "measure": None, "cap": None, "radii": "8..4096",
                  "delta_sweep": None, "check": [], "prop32_level": 64,
                  "assert_invariants": False},
    "subdivide": {"chain": "bd:2pow", "kernel": None, "measure": None, "level": 9, "delta": 0.3,
                  "on_tie": "raise", "export": False, "tol": 1e-10},
    "trace": {"ledger": [], "radii": None, "expected": False, "chain": "bd:2pow", "kernel": None,
              "measure": None},
}


class ConfigError(ValueError):
    pass


class BudgetExhausted(RuntimeError):
    pass


class InvariantViolation(RuntimeError):
    pass


# --------------------------------------------------------------------------- parsing helpers

def parse_radii(text) -> list[int]:
    """``"8..4096"`` means powers of two from 8 to 4096; otherwise a comma list."""
    if isinstance(text, (list, tuple)):
        return [int(r) for r in text]
    text = str(text)
    if ".." in text:
        lo, hi = (int(t) for t in text.split(".."))
        if lo < 1 or hi < lo:
            raise ConfigError(f"bad radius range {text!r}")
        out, r = [], lo
        while r <= hi:
            out.append(r)
            r *= 2
        return out
    return [int(t) for t in text.split(",") if t]


def parse_sweep(text) -> list[float]:
    """``"0.1:0.9:0.1"`` (inclusive) or a comma list."""
    if isinstance(text, (list, tuple)):
        return [float(d) for d in text]
    text = str(text)
    if ":" in text:
        lo, hi, step = (float(t) for t in text.split(":"))
        n = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return [round(lo + i * step, 12) for i in range(n)]
    return [float(t) for t in text.split(",") if t]


def _weights(name: str, s: int = 0, weights_file=None) -> bd_chain.BDWeights:
    if weights_file:
        return bd_chain.BDWeights.from_array(np.loadtxt(weights_file, ndmin=1), tag="custom")
    if name.startswith("kozma-"):
        name, s = "kozma", int(name.split("-", 1)[1])
    if name.endswith("pow"):
        try:
            return bd_chain.geometric_weights(float(name[:-3]))
        except ValueError:
            pass
    try:
        return bd_chain.weights_by_name(name, s)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def infinite_chain(spec: str):
    """(kernel, measure) for ``bd:<family>``, ``walk:<p>`` or ``lift:<family>``."""
    kind, _, arg = spec.partition(":")
    if kind == "bd":
        w = _weights(arg)
        return w.kernel(), w.measure
    if kind == "walk":
        return line_walk_kernel(float(arg or 2 / 3)), counting_measure()
    if kind == "lift":
        w = _weights(arg)
        pi = Measure(lambda x: w.measure(x[0]), stationary=True, name="lift")
        return cycle_lift_kernel(w.log_weight, log=True), pi
    raise ConfigError(f"unknown chain {spec!r}; use bd:<family>, walk:<p> or lift:<family>")


def finite_chain(opts: dict, level: int | None = None) -> tuple[FiniteChain, Measure]:
    """Killed chain from kernel/measure files, or a finite cut of a named chain."""
    if opts.get("kernel"):
        if not opts.get("measure"):
            raise ConfigError("--kernel needs --measure")
        return read_kernel(opts["kernel"]), read_measure(opts["measure"])
    spec = opts["chain"]
    if spec.startswith("bd:"):
        w = _weights(spec[3:])
        return w.trace_chain(int(level or opts.get("level") or 64)), w.measure
    kernel, pi = infinite_chain(spec)
    return truncate(kernel, int(level or opts.get("level") or 64), KILLED), pi


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    log.info("wrote %s", path)


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (set, frozenset)):
        return sorted(map(str, x))
    return str(x)


def _fraction(flags) -> dict:
    flags = np.asarray(flags, dtype=float)
    n = flags.size
    f = float(flags.mean()) if n else 0.0
    return {"fraction": f, "se": math.sqrt(f * (1 - f) / n) if n else 0.0, "runs": n}


def _map(fn, tasks, jobs: int):
    if jobs <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


# --------------------------------------------------------------------------- simulate-bd

def _bd_run(task) -> dict:
    opts, run, out = task
    w = _weights(opts["weights"], opts["s"], opts["weights_file"])
    seed = opts["seed"] + run
    led = bd_chain.simulate(w, level=opts["level"], max_steps=opts["max_steps"], seed=seed,
                            record_path=bool(opts["cut_times"]))
    led.save(out / f"run_{run:04d}")
    L = opts["level"]
    N = led.up[:L] + led.down[:L]
    res = {"run": run, "seed": seed, "status": led.status, "steps": int(led.steps),
           "min_crossings": int(N.min()) if led.complete else None}
    if led.complete:
        k = np.arange(1, L)
        res["min_ratio"] = float(np.min(N[1:] / k))
        sums = traces.harmonic_crossing_sum(N)
        res["harmonic"] = {str(2 ** j): float(sums[2 ** j - 1]) for j in range(int(math.log2(L)) + 1)}
    if opts["cut_times"] and led.path is not None:
        res["regeneration"] = {}
        for k in opts["k"]:
            if k ** 3 <= L:
                X, Xp = bd_chain.local_regenerations(led.path, k)
                res["regeneration"][str(k)] = {"X": len(X), "X_prime": len(Xp)}
    return res


def cmd_simulate_bd(opts: dict) -> int:
    out = opts["out_dir"] / "simulate-bd"
    out.mkdir(parents=True, exist_ok=True)
    if opts["level"] < 2:
        raise ConfigError("level must be at least 2")
    _weights(opts["weights"], opts["s"], opts["weights_file"])
    runs = _map(_bd_run, [(opts, r, out) for r in range(opts["runs"])], opts["jobs"])
    done = [r for r in runs if r["status"] == "complete"]
    summary = {"config": _public(opts), "runs": len(runs), "complete": len(done),
               "seeds": [r["seed"] for r in runs],
               "all_edges_crossed": _fraction([r["min_crossings"] >= opts["min_crossings"] for r in done])}
    if opts["ratio_threshold"] is not None:
        summary["min_ratio_above"] = _fraction([r["min_ratio"] >= opts["ratio_threshold"] for r in done])
    if done:
        summary["harmonic_increasing"] = all(
            np.all(np.diff(list(r["harmonic"].values())) > 0) for r in done)
    if opts["cut_times"]:
        table = {}
        for k in opts["k"]:
            xs = [r["regeneration"][str(k)] for r in done if str(k) in r.get("regeneration", {})]
            if xs:
                X = np.array([x["X"] for x in xs], float)
                Xp = np.array([x["X_prime"] > 0 for x in xs], float)
                table[str(k)] = {"mean_X": float(X.mean()), "se_X": float(X.std(ddof=1) / math.sqrt(len(X)))
                                 if len(X) > 1 else 0.0, "p_X_prime_nonempty": float(Xp.mean())}
        summary["regeneration"] = table
    summary["per_run"] = runs
    _write_json(out / "summary.json", summary)
    if len(done) < len(runs):
        raise BudgetExhausted(f"{len(runs) - len(done)} run(s) spent the step budget; partial ledgers kept")
    return EXIT_OK


# --------------------------------------------------------------------------- simulate-z2

def _z2_run(task) -> dict:
    opts, run, out, boxes = task
    cfg = planar_spiral.SpiralConfig(opts["variant"], opts["R"], opts["max_steps"], opts["seed"] + run)
    cov = planar_spiral.simulate(cfg, opts["engine"])
    cov.save(out / f"run_{run:04d}")
    return {"run": run, "seed": cfg.seed, "status": cov.status, "steps": int(cov.steps),
            "covered": {str(b): planar_spiral.box_covered(cov, b) for b in boxes},
            "n_up": cov.n_up.tolist(), "n_down": cov.n_down.tolist()}


def cmd_simulate_z2(opts: dict) -> int:
    if opts["variant"] not in planar_spiral.VARIANTS:
        raise ConfigError(f"unknown variant {opts['variant']!r}; choose from {planar_spiral.VARIANTS}")
    if opts["R"] < 1:
        raise ConfigError("R must be positive")
    out = opts["out_dir"] / "simulate-z2"
    out.mkdir(parents=True, exist_ok=True)
    boxes = parse_radii(opts["boxes"]) if opts["boxes"] else parse_radii(f"4..{opts['R']}")
    runs = _map(_z2_run, [(opts, r, out, boxes) for r in range(opts["runs"])], opts["jobs"])
    done = [r for r in runs if r["status"] == "complete"]
    cfg = planar_spiral.SpiralConfig(opts["variant"], opts["R"])
    q = cfg.q_out()
    up = np.sum([r["n_up"] for r in runs], axis=0)
    dn = np.sum([r["n_down"] for r in runs], axis=0)
    qtab = []
    for k in range(opts["R"]):
        n = int(up[k] + dn[k])
        if n:
            qtab.append({"k": k, "n": n, "empirical": float(up[k] / n), "exact": float(q[k]),
                         "se": math.sqrt(q[k] * (1 - q[k]) / n)})
    summary = {"config": _public(opts), "runs": len(runs), "complete": len(done),
               "seeds": [r["seed"] for r in runs],
               "coverage": {str(b): _fraction([r["covered"][str(b)] for r in done]) for b in boxes},
               "q_table": qtab}
    _write_json(out / "summary.json", summary)
    if len(done) < len(runs):
        raise BudgetExhausted(f"{len(runs) - len(done)} run(s) spent the step budget; partial outputs kept")
    return EXIT_OK


# --------------------------------------------------------------------------- potential

def cmd_potential(opts: dict) -> int:
    out = opts["out_dir"] / "potential"
    out.mkdir(parents=True, exist_ok=True)
    radii = parse_radii(opts["radii"])
    report = {"config": _public(opts)}
    failures = []
    if opts["kernel"]:
        chain, pi = finite_chain(opts)
        chains = [chain]
    else:
        kernel, pi = infinite_chain(opts["chain"])
        chains = [truncate(kernel, R, KILLED) for R in radii]
    origin = chains[-1].origin
    C = [parse_state(c) for c in opts["cap"]] if opts["cap"] else [origin]
    est = potential.capacity(chains, pi, C)
    potential.write_records(est, out / "capacity.json", out / "capacity.csv")
    report["capacity"] = {"value": est.value, "monotone": est.monotone}
    if not est.monotone:
        failures.append("capacity sequence not monotone")
    deltas = parse_sweep(opts["delta_sweep"]) if opts["delta_sweep"] else [0.1, 0.3, 0.5, 0.7, 0.9]
    checks = opts["check"] or []
    for check in checks:
        if check not in ("capadel", "prop32"):
            raise ConfigError(f"unknown check {check!r}; use capadel or prop32")
    if "capadel" in checks:
        rows = [potential.level_set_capacity(chains[-2:], pi, d).as_dict() for d in deltas]
        report["capadel"] = rows
        failures += [f"capadel fails at delta={r['delta']}" for r in rows if not r["holds"]]
    if "prop32" in checks:
        target = chains[-1] if opts["kernel"] else truncate(kernel, opts["prop32_level"], KILLED)
        rows = [potential.expected_crossing_level_capacity(target, pi, d).as_dict() for d in deltas]
        for r in rows:
            r["holds"] = r["value"] <= 2 + 1e-8
        report["prop32"] = rows
        failures += [f"prop32 fails at delta={r['delta']}" for r in rows if not r["holds"]]
    report["failures"] = failures
    _write_json(out / "report.json", report)
    if failures and opts["assert_invariants"]:
        raise InvariantViolation("; ".join(failures))
    return EXIT_OK


# --------------------------------------------------------------------------- subdivide

def cmd_subdivide(opts: dict) -> int:
    out = opts["out_dir"] / "subdivide"
    out.mkdir(parents=True, exist_ok=True)
    chain, pi = finite_chain(opts)
    if not chain.has_outside:
        raise ConfigError("subdivision needs a killed chain")
    aux = subdivision.build_aux(chain, pi, delta=float(opts["delta"]), on_tie=opts["on_tie"])
    rep = subdivision.verify_properties(aux)
    sets = subdivision.remark_sets(aux)
    lv = aux.level
    report = {"config": _public(opts), "delta": lv.delta, "J": [list(p) for p in lv.J],
              "Z": [repr(z) for z in aux.Z], "properties": rep.as_dict(), "remark": sets.identities,
              "ok": rep.ok(opts["tol"]) and sets.ok}
    if opts["export"]:
        subdivision.export(aux, out / "aux")
    _write_json(out / "report.json", report)
    if not report["ok"]:
        raise InvariantViolation(f"property deviation {rep.max():.3e} above tolerance {opts['tol']:g}")
    return EXIT_OK


# --------------------------------------------------------------------------- trace

def cmd_trace(opts: dict) -> int:
    out = opts["out_dir"] / "trace"
    out.mkdir(parents=True, exist_ok=True)
    results = {}
    if opts["expected"]:
        radii = parse_radii(opts["radii"] or "2..4096")
        if opts["kernel"]:
            chain, pi = finite_chain(opts)
        else:
            chain, pi = infinite_chain(opts["chain"])
        try:
            prof = traces.expected_network_profile(chain, pi, radii=radii)
        except potential.NonTransient as exc:
            results["expected"] = {"abstained": str(exc)}
        else:
            prof.save_csv(out / "expected_profile.csv")
            results["expected"] = prof.as_dict()
    for prefix in opts["ledger"]:
        tr = traces.load_trace(prefix)
        rmax = int(max(traces.sup_radius(v) for v in tr.network.vertices))
        radii = parse_radii(opts["radii"] or f"2..{rmax}")
        radii = [r for r in radii if r <= rmax]
        prof = traces.trace_resistance_profile(tr, radii)
        name = f"{Path(prefix).parent.name}_{Path(prefix).name}".lstrip("_")
        prof.save_csv(out / f"{name}_profile.csv")
        results[name] = {**prof.as_dict(), "meta": tr.meta, "problems": tr.check()}
    if not results:
        raise ConfigError("trace needs --ledger files or --expected")
    _write_json(out / "profiles.json", results)
    return EXIT_OK


COMMANDS = {
    "simulate-bd": cmd_simulate_bd,
    "simulate-z2": cmd_simulate_z2,
    "potential": cmd_potential,
    "subdivide": cmd_subdivide,
    "trace": cmd_trace,
}


# --------------------------------------------------------------------------- argument handling

def _public(opts: dict) -> dict:
    return {k: v for k, v in opts.items() if k not in ("out", "out_dir", "jobs")}


def build_parser() -> argparse.ArgumentParser:
    # shared options are accepted before or after the command name
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--out", help="output directory (flag > TRACE_LAB_OUT > config)")
    common.add_argument("--seed", type=int, help="base seed; run r uses seed + r")
    common.add_argument("--runs", type=int)
    common.add_argument("--jobs", type=int, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="tracelab", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    bd = sub.add_parser("simulate-bd", parents=[common], help="birth-death runs with crossing ledgers")
    bd.add_argument("--weights", help="kozma, kozma-<s>, jlp, logsq, 2pow")
    bd.add_argument("--weights-file", help="custom weights, one per line")
    bd.add_argument("--s", type=int)
    bd.add_argument("--level", type=int)
    bd.add_argument("--max-steps", type=int)
    bd.add_argument("--cut-times", action="store_true", default=None)
    bd.add_argument("--k", type=int, nargs="+")
    bd.add_argument("--min-crossings", type=int)
    bd.add_argument("--ratio-threshold", type=float)

    z2 = sub.add_parser("simulate-z2", parents=[common], help="planar spiral runs with edge coverage tables")
    z2.add_argument("--R", type=int)
    z2.add_argument("--variant")
    z2.add_argument("--engine", choices=["auto", "event", "step"])
    z2.add_argument("--max-steps", type=int)
    z2.add_argument("--boxes", help="box radii, e.g. 4..32 or 4,8,16")

    for name, helptext in (("potential", "capacities and level-set checks"),
                           ("subdivide", "subdivided chain and its property report"),
                           ("trace", "resistance profiles of traces")):
        sp_ = sub.add_parser(name, parents=[common], help=helptext)
        sp_.add_argument("--chain", help="bd:<family>, walk:<p> or lift:<family>")
        sp_.add_argument("--kernel", help="kernel triple file (x y prob)")
        sp_.add_argument("--measure", help="measure file (x weight)")
        if name == "potential":
            sp_.add_argument("--cap", nargs="+", help="states of the capacity set")
            sp_.add_argument("--radii", help="truncation radii, e.g. 8..4096")
            sp_.add_argument("--delta-sweep", help="e.g. 0.1:0.9:0.1")
            sp_.add_argument("--check", action="append", choices=["capadel", "prop32"])
            sp_.add_argument("--prop32-level", type=int, help="truncation used by the prop32 check")
            sp_.add_argument("--assert-invariants", action="store_true", default=None)
        elif name == "subdivide":
            sp_.add_argument("--level", type=int, help="cut level for named chains")
            sp_.add_argument("--delta", type=float)
            sp_.add_argument("--on-tie", choices=["raise", "snap"])
            sp_.add_argument("--export", action="store_true", default=None)
            sp_.add_argument("--tol", type=float)
        else:
            sp_.add_argument("--ledger", nargs="+", help="ledger prefixes (without extension)")
            sp_.add_argument("--radii")
            sp_.add_argument("--expected", action="store_true", default=None)
    return p


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the configuration file, then the environment, then flags."""
    opts = dict(DEFAULTS["common"])
    opts.update(DEFAULTS[args.command])
    config = getattr(args, "config", None)
    if config:
        try:
            with open(config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        section = cfg.get(args.command, {})
        shared = {k: v for k, v in cfg.items() if k not in COMMANDS}
        for src in (shared, section):
            for k, v in src.items():
                key = k.replace("-", "_")
                if key not in opts:
                    raise ConfigError(f"unknown config key {k!r}")
                opts[key] = v
    if os.environ.get("TRACE_LAB_OUT"):
        opts["out"] = os.environ["TRACE_LAB_OUT"]
    for k, v in vars(args).items():
        if k in ("config", "command", "verbose") or v is None:
            continue
        opts[k] = v
    if opts["runs"] < 1 or opts["jobs"] < 1:
        raise ConfigError("runs and jobs must be positive")
    opts["out_dir"] = Path(opts["out"])
    return opts


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(message)s")
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExhausted as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except potential.DeltaCollision as exc:
        print(f"delta collides with a voltage value; perturb delta or pass --on-tie snap: {exc}",
              file=sys.stderr)
        return EXIT_DELTA
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ChainError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
