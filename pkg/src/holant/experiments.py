"""Experiment suites behind `holant experiment` and the acceptance tests."""
from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .bounds import select_regime
from .core import simple_path_reaches
from .gen import SUITE_FAMILIES, family_instance
from .oracle import brute_force_Z, ratio_pair, the_dangling_edge
from .recursion import Estimator, estimate_Z
from .spin import gamma1, gamma2, gamma3, gamma_curve

MAX_ORACLE_EDGES = 12


def pmap(fn, items, threads: int = 1):
    """Ordered map; a process pool when threads > 1 (results are identical)."""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def fit_slope(ts, errs, floor: float = 1e-13):
    """Least-squares slope of log(max(err, floor)) against t.

    Errors at machine precision are clamped to the floor rather than dropped,
    so an estimate that becomes exact still counts as converging.  An error
    already at the floor for the whole range is reported as -inf."""
    if all(e <= floor for e in errs):
        return -math.inf
    pts = [(t, math.log(max(e, floor))) for t, e in zip(ts, errs)]
    x = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------- convergence


def deep_thm2_instance(seed: int, threshold: int):
    """A THM2-family dangling instance whose simple paths from e exceed the threshold."""
    fam = SUITE_FAMILIES["thm2"]
    rng = random.Random(seed)
    for attempt in range(100):
        n = rng.randint(11, 15)
        inst = family_instance(fam, "sparse", n, rng.randint(2, 5), seed * 1000 + attempt, dangling=True)
        if simple_path_reaches(inst, the_dangling_edge(inst), threshold)[0] and len(inst.edges) <= 20:
            return inst
    raise RuntimeError("no deep instance found")


def convergence_case(seed: int, tmax: int = 12):
    fam = SUITE_FAMILIES["thm2"]
    regime = select_regime(fam)
    est = Estimator(regime)
    inst = deep_thm2_instance(seed, est.threshold).as_float()
    z0, z1 = ratio_pair(inst)
    exact = float(z1) / float(z0)
    rows = []
    for t in range(tmax + 1):
        r = est.ratio(inst, t).value
        rows.append({"instance": seed, "t": t, "estimate": r, "exact": exact, "abs_err": abs(r - exact)})
    return rows


def convergence_rows(count: int = 30, seed: int = 0, tmax: int = 12, threads: int = 1):
    cases = pmap(convergence_case, range(seed, seed + count), threads)
    return [row for case in cases for row in case]


def convergence_slopes(rows, t_lo: int = 2, t_hi: int = 12):
    by = {}
    for r in rows:
        if t_lo <= r["t"] <= t_hi:
            by.setdefault(r["instance"], []).append((r["t"], r["abs_err"]))
    return {k: fit_slope([t for t, _ in v], [e for _, e in v]) for k, v in by.items()}


# ---------------------------------------------------------------- clamp windows


def deep_instance(kind: str, seed: int, depth: int, max_edges: int = 18):
    """A suite-family dangling instance with a simple path of at least ``depth`` edges through e."""
    fam = SUITE_FAMILIES[kind]
    rng = random.Random(seed)
    for attempt in range(200):
        n = rng.randint(depth, depth + 4)
        inst = family_instance(fam, "sparse", n, rng.randint(1, 4), seed * 1000 + attempt, dangling=True)
        if len(inst.edges) <= max_edges and simple_path_reaches(inst, the_dangling_edge(inst), depth - 1)[0]:
            return inst
    raise RuntimeError("no deep instance found")


def clamp_case(arg):
    """Exact R of a deep instance against the regime's clamp window."""
    kind, seed = arg
    regime = select_regime(SUITE_FAMILIES[kind])
    inst = deep_instance(kind, seed, regime.L).as_float()
    z0, z1 = ratio_pair(inst)
    R = float(z1) / float(z0)
    return {"family": kind, "seed": seed, "m": len(inst.edges), "R": R, "R1": regime.R1, "R2": regime.R2,
            "inside": regime.R1 * (1 - 1e-12) <= R <= regime.R2 * (1 + 1e-12)}


def clamp_rows(per_family: int = 200, seed: int = 0, threads: int = 1, kinds=("thm1", "thm2", "thm3")):
    args = [(k, seed + i) for k in kinds for i in range(per_family)]
    return pmap(clamp_case, args, threads)


# ---------------------------------------------------------------- region


def region_rows(n: int = 61, beta_max: float = 1e4):
    betas = np.logspace(0, math.log10(beta_max), n)
    rows = []
    for b in betas:
        b = float(b)
        rows.append({"beta": b, "gamma1": gamma1(b), "gamma2": gamma2(b), "gamma3": gamma3(b),
                     "gamma": gamma_curve(b)})
    return rows


# ---------------------------------------------------------------- oracle


def oracle_instance(kind: str, seed: int):
    """Random instance of a suite family with n <= 8 and at most 12 edges."""
    fam = SUITE_FAMILIES[kind]
    rng = random.Random(seed)
    while True:
        n = rng.randint(2, 8)
        inst = family_instance(fam, "gnp", n, rng.uniform(0.35, 0.75), rng.randrange(10**9))
        if len(inst.edges) <= MAX_ORACLE_EDGES:
            return inst


def oracle_case(arg):
    kind, seed, eps = arg
    regime = select_regime(SUITE_FAMILIES[kind])
    inst = oracle_instance(kind, seed)
    Z = brute_force_Z(inst)
    est = estimate_Z(inst, eps, regime)
    rel = abs(est.value - float(Z)) / float(Z)
    return {"family": kind, "seed": seed, "n": len(inst.vertices), "m": len(inst.edges),
            "Z": Z, "Z_hat": est.value, "rel_err": rel, "depth": est.depth}


def oracle_rows(per_family: int = 100, seed: int = 0, eps: float = 0.05, threads: int = 1,
                kinds=("thm1", "thm2", "thm3")):
    args = [(k, seed + i, eps) for k in kinds for i in range(per_family)]
    return pmap(oracle_case, args, threads)
