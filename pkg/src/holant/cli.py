"""`holant` command line: exact, approx, spin, verify-decay, gen, experiment.

Reports go to stdout as JSON (byte-stable for fixed inputs); timings and
warnings go to stderr.  Exit status is 0 iff the command's postcondition held.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from fractions import Fraction

from . import __version__
from .bounds import (
    C0_THM2,
    C_THM3,
    CONSTANT,
    IDENTITY,
    REGIME_KINDS,
    ParameterBox,
    RegimeError,
    compute_clamp_bounds,
    forced_regime,
    regime_box,
    regime_for,
    verify_decay_on_box,
)
from .core import INF, FibonacciFamilyParams, HolantError, family_params, load_instance
from .experiments import (
    convergence_rows,
    convergence_slopes,
    oracle_rows,
    region_rows,
)
from .gen import MODELS, generate
from .oracle import brute_force_marginal, brute_force_Z
from .recursion import estimate_Z, instance_family
from .spin import (
    TwoSpinSystem,
    classify_spin,
    estimate_spin_Z,
    graph_from_json,
    load_spin_problem,
)

log = logging.getLogger("holant")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def fmt(x) -> str:
    """17 significant digits; rationals as 'p/q'."""
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def number(x):
    """JSON-ready view of a number: exact rationals carry both forms."""
    if isinstance(x, Fraction):
        return {"rational": fmt(x), "decimal": fmt(float(x))}
    if isinstance(x, float):
        return fmt(x)
    return x


def digest(path=None, payload=None) -> str:
    h = hashlib.sha256()
    if path is not None:
        with open(path, "rb") as fh:
            h.update(fh.read())
    if payload is not None:
        h.update(json.dumps(payload, sort_keys=True, default=str).encode())
    return h.hexdigest()[:16]


def emit(report: dict, out=None):
    text = json.dumps(report, indent=1, sort_keys=True, default=str) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def write_csv(rows, columns, out):
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r[c]) for c in columns])
    finally:
        if out:
            fh.close()


# ---------------------------------------------------------------- commands


def cmd_exact(args) -> int:
    inst = load_instance(args.file)
    Z = brute_force_Z(inst, cap=args.oracle_cap)
    outputs = {"Z": number(Z)}
    if args.marginal is not None:
        if Z == 0:
            raise HolantError("Z = 0; marginal undefined")
        outputs["P(sigma(e)=0)"] = number(brute_force_marginal(inst, [args.marginal], [0], cap=args.oracle_cap))
    emit({"command": "exact", "input": digest(args.file), "outputs": outputs})
    return EXIT_OK


def resolve_regime(params, kind: str, force: bool, L=None):
    regime = regime_for(params, kind, L=L)
    if regime is not None:
        return regime
    if not force:
        raise RegimeError(f"no certified {kind} regime for family {params}")
    log.warning("no certified regime; running uncertified (--force)")
    return forced_regime(params)


def instance_regime(inst, kind: str, force: bool):
    """Regime for an instance.  Without any arity >= 2 vertex the Fibonacci
    parameter is unconstrained, so each theorem's c is tried in turn."""
    if family_params(inst)[0] is not None:
        choices = [None]
    else:
        choices = [FibonacciFamilyParams(c, c, 1, 1, 1, 1) for c in (C0_THM2, 1, C_THM3)]
    try:
        fams = [instance_family(inst, fb) for fb in choices]
    except RegimeError:
        if not force:
            raise
        log.warning("signatures outside every Fibonacci family; running uncertified (--force)")
        return forced_regime(None)
    for params in fams:
        regime = regime_for(params, kind)
        if regime is not None:
            return regime
    return resolve_regime(fams[0], kind, force)


def cmd_approx(args) -> int:
    inst = load_instance(args.file)
    regime = instance_regime(inst, args.regime, args.force)
    est = estimate_Z(inst, args.eps, regime, force=args.force, depth=args.depth, threshold=args.threshold)
    report = {
        "command": "approx",
        "input": digest(args.file),
        "outputs": {"Z_hat": fmt(est.value)},
        "diagnostics": {
            "eps": args.eps,
            "t": est.depth,
            "regime": {k: number(v) if isinstance(v, float) else v for k, v in regime.describe().items()},
            "nodes": est.stats.nodes,
            "exact_leaves": est.stats.exact,
            "cache_hits": est.stats.cache_hits,
            "clamped": est.stats.clamped,
        },
    }
    if args.check:
        Z = brute_force_Z(inst, cap=args.oracle_cap)
        rel = abs(est.value - float(Z)) / float(Z)
        report["outputs"]["Z"] = number(Z)
        report["outputs"]["rel_err"] = fmt(rel)
        emit(report)
        return EXIT_OK if rel <= args.eps else EXIT_FAIL
    emit(report)
    return EXIT_OK


def cmd_spin(args) -> int:
    if args.problem:
        spin, graph = load_spin_problem(args.problem)
    else:
        if args.beta is None or args.gamma is None:
            raise HolantError("give --problem or --beta and --gamma")
        spin = TwoSpinSystem(args.beta, args.gamma, args.mu)
        graph = None
        if args.graph:
            with open(args.graph) as fh:
                graph = graph_from_json(json.load(fh))
    verdict = classify_spin(spin)
    report = {"command": "spin", "input": digest(args.problem or args.graph,
                                                {"beta": spin.beta, "gamma": spin.gamma, "mu": spin.mu}),
              "outputs": {"verdict": verdict.to_json()}}
    if args.classify or graph is None:
        emit(report)
        return EXIT_OK
    if not verdict.tractable:
        report["outputs"]["error"] = f"outside the tractable region: {verdict.reason}"
        emit(report)
        return EXIT_FAIL
    z, _, regime = estimate_spin_Z(spin, graph, args.eps)
    report["outputs"]["Z_hat"] = fmt(z)
    report["diagnostics"] = {"regime": regime.describe() if regime else None, "eps": args.eps}
    emit(report)
    return EXIT_OK


def cmd_verify_decay(args) -> int:
    kind = args.regime
    lam_max = args.lambda_max
    c, p = args.c, args.p
    if kind == "thm2":
        params = FibonacciFamilyParams(c, args.c_max or c, p, INF, 1, lam_max)
    elif kind == "thm3":
        params = FibonacciFamilyParams(c, c, max(p, c / 2), c + 2 / c, args.lambda_min, lam_max)
    else:
        params = FibonacciFamilyParams(c, c, p, args.q, args.lambda_min, lam_max)
    bounds = compute_clamp_bounds(params, args.L)
    phi = CONSTANT if kind == "thm1" else IDENTITY
    variant = "free" if kind == "thm2" else "pinned"
    box = regime_box(params, bounds)
    if args.unbounded:
        box = ParameterBox(c=box.c, lam=box.lam, x=(bounds.R1, INF), y=(bounds.R1, INF), z=(bounds.R1, INF),
                           mu=box.mu)
    rep = verify_decay_on_box(box, phi=phi, grid_n=args.grid, variant=variant)
    emit({"command": "verify-decay", "input": digest(payload=vars_clean(args)),
          "outputs": rep.to_json(), "diagnostics": {"L": bounds.L, "R1": fmt(bounds.R1), "R2": fmt(bounds.R2)}},
         args.out)
    return EXIT_OK if rep.sup_alpha < 1 else EXIT_FAIL


def cmd_gen(args) -> int:
    inst = generate(args.model, args.n, args.param, args.c, args.f0, args.f1, args.lam, args.seed, args.dangling)
    if inst.edges and not args.force:
        params = instance_family(inst)
        if regime_for(params, "auto") is None:
            log.error("generated family %s has no certified regime (use --force)", params)
            return EXIT_FAIL
    text = inst.dumps()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.suite == "convergence":
        rows = convergence_rows(args.count or 30, args.seed, threads=args.threads)
        write_csv(rows, ["instance", "t", "estimate", "exact", "abs_err"], args.out)
        slopes = convergence_slopes(rows)
        worst = max(slopes.values())
        log.info("worst fitted slope %.4f (bound %.4f)", worst, math.log(0.9) + 0.02)
        return EXIT_OK if worst <= math.log(0.9) + 0.02 else EXIT_FAIL
    if args.suite == "region":
        rows = region_rows(args.count or 61)
        write_csv(rows, ["beta", "gamma1", "gamma2", "gamma3", "gamma"], args.out)
        ok = all(1 < r["gamma"] < r["beta"] for r in rows if r["beta"] > 1)
        return EXIT_OK if ok else EXIT_FAIL
    rows = oracle_rows(args.count or 100, args.seed, args.eps, args.threads)
    for r in rows:
        r["Z_decimal"] = float(r["Z"])
    write_csv(rows, ["family", "seed", "n", "m", "Z", "Z_decimal", "Z_hat", "rel_err"], args.out)
    worst = max(r["rel_err"] for r in rows)
    log.info("max relative error %.3g (eps %g)", worst, args.eps)
    return EXIT_OK if worst <= args.eps else EXIT_FAIL


def vars_clean(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func", "config")}


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="holant", description="Fibonacci Holant counting toolkit",
                                 allow_abbrev=False)
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("--config", help="JSON file of flag defaults (keys as flag names)")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--oracle-cap", type=int, default=None, help="brute-force edge cap")
    ap.add_argument("--log-level", default="WARNING")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="exact Z by enumeration", allow_abbrev=False)
    p.add_argument("file")
    p.add_argument("--marginal", type=int, default=None, help="edge id for P(sigma(e)=0)")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("approx", help="correlation-decay estimate of Z", allow_abbrev=False)
    p.add_argument("file")
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--regime", choices=REGIME_KINDS, default="auto")
    p.add_argument("--force", action="store_true", help="run without a certified regime")
    p.add_argument("--depth", type=int, default=None, help="override the recursion depth")
    p.add_argument("--threshold", type=int, default=None, help="override the shallow-path threshold")
    p.add_argument("--check", action="store_true", help="compare with brute force")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("spin", help="ferromagnetic two-spin systems", allow_abbrev=False)
    p.add_argument("--problem", help="spin problem JSON")
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--graph", help='graph JSON {"n", "edges"}')
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--classify", action="store_true")
    p.set_defaults(func=cmd_spin)

    p = sub.add_parser("verify-decay", help="grid check of the decay rates", allow_abbrev=False)
    p.add_argument("--regime", choices=("thm1", "thm2", "thm3"), default="thm2")
    p.add_argument("--c", type=float, default=1.17)
    p.add_argument("--c-max", type=float, default=None)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--q", type=float, default=INF)
    p.add_argument("--lambda-min", type=float, default=1.0)
    p.add_argument("--lambda-max", type=float, default=3.0)
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--unbounded", action="store_true", help="let x, y, z range up to +inf")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify_decay)

    p = sub.add_parser("gen", help="seeded instance generator", allow_abbrev=False)
    p.add_argument("--model", choices=MODELS, default="gnp")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--param", default="0.4", help="edge probability, degree, or extra edges")
    p.add_argument("--c", default="1.17:3", help="value or lo:hi range")
    p.add_argument("--f0", default="1")
    p.add_argument("--f1", default="1:3")
    p.add_argument("--lambda", dest="lam", default="1:3")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dangling", action="store_true", help="add one dangling edge at vertex 0")
    p.add_argument("--force", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("experiment", help="acceptance-style tables as CSV", allow_abbrev=False)
    p.add_argument("--suite", choices=("convergence", "region", "oracle"), required=True)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--out")
    p.set_defaults(func=cmd_experiment)
    return ap


def apply_config(ap: argparse.ArgumentParser, argv):
    """Re-parse with defaults taken from --config; explicit flags still win."""
    args = ap.parse_args(argv)
    if not args.config:
        return args
    with open(args.config) as fh:
        cfg = {k.replace("-", "_"): v for k, v in json.load(fh).items()}
    if "lambda" in cfg:
        cfg["lam"] = cfg.pop("lambda")
    ap.set_defaults(**{k: v for k, v in cfg.items() if k in ("threads", "oracle_cap", "log_level")})
    for action in ap._subparsers._group_actions:
        for name, sp in action.choices.items():
            sp.set_defaults(**cfg)
    return ap.parse_args(argv)


def main(argv=None) -> int:
    ap = build_parser()
    args = apply_config(ap, argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    saved = os.environ.get("HOLANT_ORACLE_CAP")
    if args.oracle_cap is not None:
        # deep helpers read the cap from the environment; restore it afterwards
        os.environ["HOLANT_ORACLE_CAP"] = str(args.oracle_cap)
    start = time.perf_counter()
    try:
        code = args.func(args)
    except (HolantError, OSError, ValueError) as err:
        log.error("%s", err)
        code = EXIT_FAIL if isinstance(err, RegimeError) else EXIT_USAGE
    finally:
        if saved is None:
            os.environ.pop("HOLANT_ORACLE_CAP", None)
        else:
            os.environ["HOLANT_ORACLE_CAP"] = saved
    log.info("wall time %.3fs", time.perf_counter() - start)
    return code


if __name__ == "__main__":
    sys.exit(main())
