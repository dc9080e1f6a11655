"""Command line interface: one subcommand per experiment.

Every run writes ``<outdir>/<command>-<seed>.json`` and ``.csv`` and prints
one summary line starting with PASS, FAIL or REPORT.  Exit codes: 0 pass or
report, 1 threshold failure, 2 invalid usage.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from . import bessel, noise, stats
from .errors import WienerSetsError
from .indexation import nestedness_audit, random_nested_items, split_columns
from .paths import GridSpec, sample_path
from .reports import SCHEMA_VERSION, format_csv
from .rng import derive_seed
from .sets import dyadic_pairs


@dataclass
class Param:
    name: str
    type: object
    default: object
    help: str


def _floats(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in str(text).split(",") if x.strip()]


COMMON = [
    Param("seed", int, 0, "master seed (64-bit)"),
    Param("threads", int, 1, "worker threads; results do not depend on it"),
    Param("outdir", str, ".", "directory for the JSON and CSV reports"),
]


class Command:
    name = ""
    summary = ""
    criterion = ""
    params: list = []

    def run(self, cfg: dict):
        raise NotImplementedError


def _ladder_payload(res):
    return {"levels": res.levels, "fractions": res.fractions,
            "counts": [list(c) for c in res.counts], "check": res.check}


class SamplePath(Command):
    name = "sample-path"
    summary = "sample a two-sided Brownian path on a dyadic grid"
    criterion = "REPORT only (no threshold); CSV columns t,value"
    params = [Param("left", float, 0.0, "left end of the window"),
              Param("right", float, 1.0, "right end of the window"),
              Param("level", int, 10, "grid level (step 2^-level)")]

    def run(self, cfg):
        path = sample_path(GridSpec(cfg["left"], cfg["right"], cfg["level"]), cfg["seed"])
        buf = io.StringIO()
        path.to_csv(buf)
        return "REPORT", {"nodes": path.grid.size, "step": path.step}, buf.getvalue()


class ExtractSet(Command):
    name = "extract-set"
    summary = "enumerate a set (minima, maxima, extrema, bessel:<d>) over dyadic windows"
    criterion = "REPORT only; CSV columns p,q,value (empty value = coffin)"
    params = [Param("builder", str, "minima", "minima | maxima | extrema | bessel:<d>"),
              Param("left", float, 0.0, "left end of the window"),
              Param("right", float, 1.0, "right end of the window"),
              Param("level", int, 14, "grid level"),
              Param("depth", int, 6, "deepest dyadic level of the window family")]

    def run(self, cfg):
        path = sample_path(GridSpec(cfg["left"], cfg["right"], cfg["level"]), cfg["seed"])
        pairs = dyadic_pairs(cfg["left"], cfg["right"], cfg["depth"])
        es = stats.builder_from_name(cfg["builder"])(path, pairs)
        buf = io.StringIO()
        es.to_csv(buf)
        return "REPORT", {"entries": len(es), "points": int(es.points().size)}, buf.getvalue()


class Slln(Command):
    name = "slln"
    summary = "slope of the log-integral of 1/Z after the last zero"
    criterion = "PASS iff |estimate - 1/(2-d)| <= band * 1/(2-d) (band 0.15)"
    params = [Param("d", float, 1.0, "dimension in (0, 2)"),
              Param("T", float, 1.0, "horizon"),
              Param("level", int, 20, "grid level"),
              Param("n", int, 2000, "number of driver paths"),
              Param("eps_exponents", _ints, [4, 12], "eps = 2^-j for j in [a, b]"),
              Param("scheme", str, bessel.DEFAULT_SCHEME, "implicit_sqrt | full_truncation_euler"),
              Param("band", float, 0.15, "relative tolerance")]

    def run(self, cfg):
        a, b = cfg["eps_exponents"]
        eps = [2.0 ** -j for j in range(a, b + 1)]
        rep = stats.slln_slope(cfg["d"], cfg["T"], cfg["level"], eps, cfg["n"], cfg["seed"],
                               cfg["threads"], cfg["scheme"], band=cfg["band"])
        rows = rep.extra.pop("rows")
        csv = format_csv(["replicate", "g", "slope", "eps_used"], rows)
        status = "PASS" if rep.extra["passed"] else "FAIL"
        return status, rep.to_dict(), csv


class Disjoint(Command):
    name = "disjoint"
    summary = "coincidence of last-zero sets for two dimensions on one driver"
    criterion = ("PASS iff the coincidence fraction has no increase beyond 3 binomial standard "
                 "errors between consecutive levels, ends strictly below its first value and "
                 "ends below final_max (0.05)")
    negated = False
    params = [Param("d1", float, 0.5, "first dimension"),
              Param("d2", float, 1.5, "second dimension"),
              Param("levels", _ints, [12, 14, 16, 18, 20], "grid level ladder"),
              Param("n", int, 1000, "number of shared drivers"),
              Param("depth", int, 9, "deepest dyadic level of the window family"),
              Param("min_depth", int, 6, "shallowest dyadic level (the unit window is always used)"),
              Param("final_max", float, 0.05, "threshold at the last level")]

    def run(self, cfg):
        fn = stats.disjoint_negated if self.negated else stats.disjointness
        res = fn(cfg["d1"], cfg["d2"], cfg["levels"], cfg["n"], cfg["seed"], cfg["threads"],
                 cfg["depth"], cfg["min_depth"], cfg["final_max"])
        csv = format_csv(["level", "fraction", "both_inside", "coincident"], res.rows())
        return ("PASS" if res.check["passed"] else "FAIL"), _ladder_payload(res), csv


class DisjointNeg(Disjoint):
    name = "disjoint-neg"
    summary = "coincidence of the d1 set of B with the d2 set of -B"
    negated = True
    params = [Param("d1", float, 1.0, "first dimension, in [1, 2)"),
              Param("d2", float, 1.5, "second dimension, in [1, 2)")] + Disjoint.params[2:]


class SplitIndep(Command):
    name = "split-indep"
    summary = "independence of pre- and post-tau features at an exponential time"
    criterion = ("PASS iff the Bonferroni-corrected smallest chi-square p-value over all "
                 "pre/post feature pairs exceeds alpha (0.01) and the adversarial pair has p < 1e-6")
    params = [Param("indexer", str, "min", "min | max | drifted_min:<kappa> | bessel:<d>"),
              Param("lam", float, 1.0, "rate of the exponential time"),
              Param("n", int, 10000, "number of replicates"),
              Param("k", int, 4, "quantile bins per feature"),
              Param("level", int, 12, "grid level"),
              Param("pad", float, 0.5, "path margin around [0, e]"),
              Param("alpha", float, 0.01, "significance level")]

    def run(self, cfg):
        ix = stats.indexer_from_name(cfg["indexer"])
        batch = stats.split_batch(ix, cfg["lam"], cfg["n"], cfg["seed"], cfg["level"], cfg["pad"],
                                  "split", cfg["threads"])
        rep = stats.splitting_independence(ix, cfg["lam"], cfg["n"], cfg["k"], cfg["seed"],
                                           cfg["level"], cfg["pad"], alpha=cfg["alpha"], batch=batch)
        csv = format_csv(split_columns(), [s.row() for s in batch])
        return ("PASS" if rep.extra["passed"] else "FAIL"), rep.to_dict(), csv


class SplitDual(Command):
    name = "split-dual"
    summary = "law of e - tau_e against the dual indexation's tau-hat_e"
    criterion = ("PASS iff both KS p-values exceed alpha (0.01) and the KS rejection rate on "
                 "synthetic nulls is within 3 sigma of 5% over calib_reps repetitions")
    params = [Param("indexer", str, "min", "min | max | drifted_min:<kappa> | bessel:<d>"),
              Param("lam", float, 1.0, "rate of the exponential time"),
              Param("n", int, 10000, "replicates per sample"),
              Param("level", int, 12, "grid level"),
              Param("pad", float, 0.5, "path margin around [0, e]"),
              Param("alpha", float, 0.01, "significance level"),
              Param("calib_reps", int, 200, "synthetic null repetitions")]

    def run(self, cfg):
        ix = stats.indexer_from_name(cfg["indexer"])
        rep = stats.splitting_duality(ix, cfg["lam"], cfg["n"], cfg["seed"], cfg["level"], cfg["pad"],
                                      cfg["threads"], cfg["alpha"])
        cal = stats.calibration("ks", cfg["calib_reps"], 2000, cfg["seed"])
        rows = rep.extra.pop("rows")
        rep.extra["calibration"] = cal
        ok = rep.extra["passed"] and cal["passed"]
        csv = format_csv(["replicate", "e_minus_tau", "tau_hat"], rows)
        return ("PASS" if ok else "FAIL"), rep.to_dict(), csv


class Triviality(Command):
    name = "triviality"
    summary = "probability that tau_e lies near another set, along a tolerance ladder"
    criterion = ("PASS iff the estimate for `other` at least halves each time tol halves and "
                 "the estimate for `control` equals 1 at every tol")
    params = [Param("indexer", str, "min", "honest indexer"),
              Param("other", str, "maxima", "the other set"),
              Param("control", str, "minima", "set containing tau_e ('none' to skip)"),
              Param("lam", float, 1.0, "rate of the exponential time"),
              Param("n", int, 1000, "replicates"),
              Param("level", int, 20, "grid level"),
              Param("depth", int, 6, "deepest dyadic level of the set's window family"),
              Param("tols", _floats, [2.0 ** -8, 2.0 ** -9, 2.0 ** -10], "tolerance ladder")]

    def run(self, cfg):
        ix = stats.indexer_from_name(cfg["indexer"])
        rep = stats.membership_triviality(ix, cfg["other"], cfg["lam"], cfg["n"], cfg["tols"],
                                          cfg["seed"], cfg["level"], cfg["depth"], cfg["threads"])
        rows = rep.extra.pop("rows")
        payload = {"other": rep.to_dict()}
        ok = rep.extra["halves"]
        if cfg["control"] != "none":
            ctl = stats.membership_triviality(ix, cfg["control"], cfg["lam"], cfg["n"], cfg["tols"],
                                              cfg["seed"], cfg["level"], cfg["depth"], cfg["threads"])
            ctl.extra.pop("rows")
            payload["control"] = ctl.to_dict()
            ok = ok and ctl.extra["always_one"]
        csv = format_csv(["replicate", "e", "tau", "distance"], rows)
        return ("PASS" if ok else "FAIL"), payload, csv


class Supermult(Command):
    name = "supermult"
    summary = "f(s+t) >= f(s) f(t) for f(t) = P(tau_{0,t} near another set)"
    criterion = "PASS iff no (s, t) pair has f(s+t) - f(s) f(t) < -3 stderr"
    params = [Param("indexer", str, "min", "honest indexer"),
              Param("other", str, "maxima", "the other set"),
              Param("s_values", _floats, [0.25, 0.5, 1.0], "values combined into (s, t) pairs"),
              Param("n", int, 2000, "replicates"),
              Param("tol", float, 2.0 ** -8, "distance tolerance"),
              Param("level", int, 16, "grid level"),
              Param("depth", int, 8, "deepest dyadic level of the set's window family")]

    def run(self, cfg):
        ix = stats.indexer_from_name(cfg["indexer"])
        res = stats.supermultiplicativity(ix, cfg["other"], cfg["s_values"], cfg["n"], cfg["tol"],
                                          cfg["seed"], cfg["level"], cfg["depth"], threads=cfg["threads"])
        rows = [[r["s"], r["t"], r["f_s"], r["f_t"], r["f_st"], r["diff"], r["stderr"], r["ok"]]
                for r in res["table"]]
        csv = format_csv(["s", "t", "f_s", "f_t", "f_st", "diff", "stderr", "ok"], rows)
        return ("PASS" if res["passed"] else "FAIL"), res, csv


class AvoidStopping(Command):
    name = "avoid-stopping"
    summary = "how often a stopping time lands on a set point, along a level ladder"
    criterion = ("PASS iff the coincidence fraction has no increase beyond 3 binomial standard "
                 "errors between consecutive levels, ends strictly below its first value and "
                 "below final_max (0.05), and the negative control (the "
                 "set's own point for (0,1)) has fraction >= control_min (0.95) at the top level")
    params = [Param("builder", str, "bessel:1", "set builder"),
              Param("stopper", str, "hit_level:0.5", "hit_level:<a> | first_zero_after:<u>"),
              Param("levels", _ints, [12, 14, 16, 18, 20], "grid level ladder"),
              Param("n", int, 1000, "driver paths"),
              Param("horizon", float, 2.0, "paths live on [0, horizon]"),
              Param("depth", int, 8, "deepest dyadic level of the window family"),
              Param("min_depth", int, 4, "shallowest dyadic level (the window (0,1) is always used)"),
              Param("final_max", float, 0.05, "threshold at the last level"),
              Param("control_n", int, 200, "paths for the negative control"),
              Param("control_min", float, 0.95, "lower bound for the control fraction")]

    def run(self, cfg):
        res = stats.stopping_time_avoidance(cfg["builder"], cfg["stopper"], cfg["levels"], cfg["n"],
                                            cfg["seed"], cfg["horizon"], cfg["depth"], cfg["threads"],
                                            cfg["final_max"], cfg["min_depth"])
        ctl = stats.stopping_time_avoidance(cfg["builder"], "own", [max(cfg["levels"])], cfg["control_n"],
                                            cfg["seed"], cfg["horizon"], cfg["depth"], cfg["threads"],
                                            None, cfg["min_depth"])
        ok = res.check["passed"] and ctl.fractions[-1] >= cfg["control_min"]
        payload = {"ladder": _ladder_payload(res), "control": _ladder_payload(ctl)}
        rows = res.rows() + [["control:" + str(r[0])] + r[1:] for r in ctl.rows()]
        csv = format_csv(["level", "fraction", "valid", "coincident"], rows)
        return ("PASS" if ok else "FAIL"), payload, csv


class Stabilise(Command):
    name = "stabilise"
    summary = "agreement of an entry with its shifted copy as the shift shrinks"
    criterion = "PASS iff agreement is nondecreasing as h decreases and the last value exceeds 0.95"
    params = [Param("builder", str, "minima", "set builder"),
              Param("k", int, 0, "entry index"),
              Param("h_ladder", _floats, [0.25, 0.1, 0.01], "decreasing shifts"),
              Param("n", int, 1000, "paths"),
              Param("level", int, 18, "grid level"),
              Param("window", _floats, [0.0, 16.0], "window (p, q) of the entry"),
              Param("final_min", float, 0.95, "threshold for the last agreement")]

    def run(self, cfg):
        p, q = cfg["window"]
        res = stats.shift_stabilisation(cfg["builder"], cfg["k"], cfg["h_ladder"], cfg["n"], cfg["seed"],
                                        cfg["level"], [(p, q)], cfg["threads"], cfg["final_min"])
        csv = format_csv(["h", "agreement"], [[h, a] for h, a in zip(res["h"], res["agreement"])])
        return ("PASS" if res["passed"] else "FAIL"), res, csv


class ChaosCheck(Command):
    name = "chaos-check"
    summary = "conditional expectations of the sign model against the brute-force oracle"
    criterion = ("PASS iff max |CE - oracle| <= tol (1e-12), Parseval holds to tol, singleton terms "
                 "are invariant under separating partitions and the pair-term norm decreases "
                 "along a 4-step partition refinement")
    params = [Param("m", int, 12, "largest number of points"),
              Param("n", int, 1000, "random instances"),
              Param("tol", float, 1e-12, "tolerance")]

    def run(self, cfg):
        res = noise.chaos_check(cfg["n"], cfg["m"], cfg["seed"], cfg["tol"])
        rows = res.pop("rows")
        csv = format_csv(["instance", "m", "ce_error", "parseval_error"], rows)
        return ("PASS" if res["passed"] else "FAIL"), res, csv


class SpectralCheck(Command):
    name = "spectral-check"
    summary = "conditional spectral measure computed directly and through conditioning"
    criterion = "PASS iff the two computations agree within tol (1e-12) on every instance"
    params = [Param("m", int, 10, "largest number of points"),
              Param("n", int, 1000, "random instances"),
              Param("tol", float, 1e-12, "tolerance")]

    def run(self, cfg):
        res = noise.spectral_check(cfg["n"], cfg["m"], cfg["seed"], cfg["tol"])
        rows = res.pop("rows")
        csv = format_csv(["instance", "m", "direct", "conditional"], rows)
        return ("PASS" if res["passed"] else "FAIL"), res, csv


class Nestedness(Command):
    name = "nestedness"
    summary = "audit tau_{s,t} = tau_{u,v} on {tau_{s,t} in (u,v)} over random nested windows"
    criterion = ("PASS iff the violation fraction is 0 for min/max kinds and below max_fraction "
                 "(0.01) otherwise")
    params = [Param("indexer", str, "bessel:0.5", "honest indexer"),
              Param("level", int, 18, "grid level"),
              Param("paths", int, 10, "number of paths"),
              Param("n", int, 100, "nested triples per path"),
              Param("max_fraction", float, 0.01, "threshold for non-argmin kinds")]

    def run(self, cfg):
        from .parallel import map_replicates

        ix = stats.indexer_from_name(cfg["indexer"])

        def one(i):
            path = sample_path(GridSpec(0.0, 1.0, cfg["level"]), derive_seed(cfg["seed"], "nested", i))
            items = random_nested_items((0.0, 1.0), cfg["level"], cfg["n"],
                                        derive_seed(cfg["seed"], "nested-items", i))
            return nestedness_audit(ix, path, items)

        audits = map_replicates(one, cfg["paths"], cfg["threads"])
        n = sum(a["n"] for a in audits)
        bad = sum(a["violations"] for a in audits)
        frac = bad / n if n else 0.0
        exact = ix.kind in ("min", "max", "drifted_min")
        ok = (bad == 0) if exact else frac < cfg["max_fraction"]
        rows = [[i, a["n"], a["applicable"], a["violations"]] for i, a in enumerate(audits)]
        csv = format_csv(["path", "triples", "applicable", "violations"], rows)
        return ("PASS" if ok else "FAIL"), {"n": n, "violations": bad, "fraction": frac,
                                            "applicable": sum(a["applicable"] for a in audits)}, csv


COMMANDS = {c.name: c for c in (SamplePath(), ExtractSet(), Slln(), Disjoint(), DisjointNeg(),
                                 SplitIndep(), SplitDual(), Triviality(), Supermult(),
                                 AvoidStopping(), Stabilise(), ChaosCheck(), SpectralCheck(),
                                 Nestedness())}


class ConfigError(Exception):
    pass


def _convert(p: Param, value):
    try:
        return p.type(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {p.name}: {value!r} ({exc})") from exc


def read_config(path: str) -> dict:
    """Plain-text ``key = value`` lines; '#' starts a comment."""
    out = {}
    with open(path, encoding="utf8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{n}: expected 'key = value'")
            k, v = (x.strip() for x in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wienersets", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"wienersets {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for cmd in COMMANDS.values():
        sp = sub.add_parser(cmd.name, help=cmd.summary,
                            description=f"{cmd.summary}.\n\nPASS criterion: {cmd.criterion}.",
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("--config", default=None, help="key = value file; flags override it")
        for p in COMMON + cmd.params:
            sp.add_argument("--" + p.name.replace("_", "-"), dest=p.name, default=None,
                            help=f"{p.help} (default: {p.default})")
    return parser


def resolve(cmd: Command, args: argparse.Namespace) -> dict:
    params = {p.name: p for p in COMMON + cmd.params}
    cfg = {name: p.default for name, p in params.items()}
    if args.config:
        for k, v in read_config(args.config).items():
            if k not in params:
                raise ConfigError(f"unknown config key {k!r} for {cmd.name}")
            cfg[k] = _convert(params[k], v)
    for name, p in params.items():
        v = getattr(args, name, None)
        if v is not None:
            cfg[name] = _convert(p, v)
    if cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    if not 0 <= cfg["seed"] < 2 ** 64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    for key in ("n", "paths", "calib_reps", "control_n"):
        if key in cfg and cfg[key] < 1:
            raise ConfigError(f"{key} must be >= 1")
    return cfg


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    if not args.command:
        parser.print_help(sys.stderr)
        return 2
    cmd = COMMANDS[args.command]
    try:
        cfg = resolve(cmd, args)
        status, payload, csv = cmd.run(cfg)
    except (ConfigError, WienerSetsError) as exc:
        print(f"{cmd.name}: error: {exc}", file=sys.stderr)
        return 2
    os.makedirs(cfg["outdir"], exist_ok=True)
    stem = os.path.join(cfg["outdir"], f"{cmd.name}-{cfg['seed']}")
    doc = {"schema_version": SCHEMA_VERSION, "command": cmd.name, "version": __version__,
           "status": status, "criterion": cmd.criterion,
           "config": {k: v for k, v in cfg.items() if k not in ("outdir", "threads")},
           "threads": cfg["threads"], "results": payload}
    with open(stem + ".json", "w", encoding="utf8") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(stem + ".csv", "w", encoding="utf8", newline="") as fh:
        fh.write(csv)
    print(f"{status} {cmd.name} seed={cfg['seed']} -> {stem}.csv")
    return 1 if status == "FAIL" else 0


if __name__ == "__main__":
    sys.exit(main())
