"""Seeded instance generators.

Random draws are quantized to rationals with denominator 1000 so generated
files parse back exactly and the brute-force oracle can run in rational
arithmetic.
"""
from __future__ import annotations

import random
from fractions import Fraction

import networkx as nx

from .core import (
    INF,
    Edge,
    FibonacciFamilyParams,
    HolantError,
    HolantInstance,
    build_fibonacci_signature,
    classify_signature,
)

QUANTUM = 1000
MODELS = ("gnp", "regular", "tree", "sparse")


def parse_range(text):
    """'1.5' -> (3/2, 3/2); '1:3' -> (1, 3)."""
    if isinstance(text, (tuple, list)):
        return Fraction(str(text[0])), Fraction(str(text[1]))
    parts = str(text).split(":")
    if len(parts) == 1:
        x = Fraction(parts[0])
        return x, x
    if len(parts) != 2:
        raise HolantError(f"bad range {text!r}")
    lo, hi = Fraction(parts[0]), Fraction(parts[1])
    if lo > hi:
        raise HolantError(f"empty range {text!r}")
    return lo, hi


def draw(rng: random.Random, lo, hi) -> Fraction:
    if lo == hi:
        return Fraction(lo)
    a, b = Fraction(lo), Fraction(hi)
    k = rng.randint(0, QUANTUM)
    return a + (b - a) * Fraction(k, QUANTUM)


def graph_edges(model: str, n: int, param, seed: int) -> list:
    """Edge list (u < v, sorted) of a seeded random graph."""
    if model == "gnp":
        g = nx.gnp_random_graph(n, float(param), seed=seed)
    elif model == "regular":
        d = int(param)
        if (d * n) % 2 or d >= n:
            raise HolantError("regular graph needs d < n and d n even")
        g = nx.random_regular_graph(d, n, seed=seed)
    elif model == "tree":
        g = nx.random_labeled_tree(n, seed=seed) if n > 1 else nx.empty_graph(n)
    elif model == "sparse":
        # tree plus int(param) extra edges: long simple paths with a few cycles
        rng = random.Random(seed)
        g = nx.random_labeled_tree(n, seed=seed) if n > 1 else nx.empty_graph(n)
        extra = int(param)
        tries = 0
        while extra > 0 and tries < 100 * n:
            u, v = rng.sample(range(n), 2)
            tries += 1
            if not g.has_edge(u, v):
                g.add_edge(u, v)
                extra -= 1
    else:
        raise HolantError(f"unknown model {model!r}")
    return sorted((min(u, v), max(u, v)) for u, v in g.edges())


def build_instance(n: int, edges, c, f0, f1, lam, seed: int, dangling_at=None, max_tries: int = 200,
                   family: FibonacciFamilyParams = None) -> HolantInstance:
    """Fibonacci instance on a graph.  c, f0, f1, lam are (lo, hi) ranges drawn
    per vertex / per edge.  With ``family`` set, each vertex signature is
    redrawn until its consecutive ratios lie in [p, q]."""
    rng = random.Random(seed)
    deg = [0] * n
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    es = [Edge(i, u, v, draw(rng, *lam)) for i, (u, v) in enumerate(edges)]
    dangling = {}
    if dangling_at is not None:
        dangling[len(es)] = dangling_at
        deg[dangling_at] += 1
    verts = {}
    for v in range(n):
        for _ in range(max_tries):
            sig = build_fibonacci_signature(draw(rng, *c), draw(rng, *f0), draw(rng, *f1), deg[v])
            if family is None or _in_family(sig, family):
                break
        else:
            raise HolantError(f"no signature in family after {max_tries} draws")
        verts[v] = sig
    return HolantInstance(verts, es, dangling)


def _in_family(sig, fam: FibonacciFamilyParams) -> bool:
    m = classify_signature(sig)
    if m.p is None:
        return True
    return m.p >= fam.p and (fam.q == INF or m.q <= fam.q)


def generate(model: str, n: int, param, c, f0, f1, lam, seed: int, dangling: bool = False) -> HolantInstance:
    edges = graph_edges(model, n, param, seed)
    return build_instance(n, edges, parse_range(c), parse_range(f0), parse_range(f1), parse_range(lam),
                          seed, 0 if dangling else None)


# ---------------------------------------------------------------- suite families

SUITE_FAMILIES = {
    "thm1": FibonacciFamilyParams(1, 1, 1, 2, Fraction(98, 100), Fraction(102, 100)),
    "thm2": FibonacciFamilyParams(Fraction(117, 100), 3, 1, INF, 1, 3),
    "thm3": FibonacciFamilyParams(Fraction(13, 5), Fraction(13, 5), Fraction(13, 10),
                                  Fraction(13, 5) + Fraction(10, 13), Fraction(1, 2), 2),
}


def family_ranges(fam: FibonacciFamilyParams, f1_cap=3) -> dict:
    """Generator ranges that stay inside a family: f0 = 1, f1 in [p, min(q, cap)]."""
    q = fam.q if fam.q != INF else max(Fraction(f1_cap), fam.p)
    return {"c": (fam.c1, fam.c2), "f0": (1, 1), "f1": (fam.p, q), "lam": (fam.lambda_lo, fam.lambda_hi)}


def family_instance(fam: FibonacciFamilyParams, model: str, n: int, param, seed: int,
                    dangling: bool = False) -> HolantInstance:
    edges = graph_edges(model, n, param, seed)
    r = family_ranges(fam)
    at = None
    if dangling:
        at = random.Random(seed + 7919).randrange(n)
    return build_instance(n, edges, r["c"], r["f0"], r["f1"], r["lam"], seed, at, family=fam)
