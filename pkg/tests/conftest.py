"""Shared fixtures: tiny hand-built instances, an independent enumerator and
hypothesis strategies for small rational Fibonacci instances."""
from __future__ import annotations

import itertools
import sys
from fractions import Fraction

from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from holant.core import Edge, HolantInstance, SymmetricSignature, build_fibonacci_signature

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

F = Fraction


def sig(*vals):
    return SymmetricSignature(tuple(F(v) for v in vals))


def instance(sigs, edges, dangling=None):
    """sigs: list of value tuples; edges: (u, v) or (u, v, lam); dangling: {id: vertex}."""
    es = []
    for i, e in enumerate(edges):
        lam = e[2] if len(e) > 2 else 1
        es.append(Edge(i, e[0], e[1], F(lam)))
    return HolantInstance({v: sig(*s) for v, s in enumerate(sigs)}, es, dangling or {})


def naive_Z(inst, fixed=None):
    """Sum over every 0/1 assignment with plain loops; shares no code with the oracle."""
    fixed = fixed or {}
    ids = sorted(set(inst.edges) | set(inst.dangling))
    free = [i for i in ids if i not in fixed]
    total = F(0)
    for bits in itertools.product((0, 1), repeat=len(free)):
        a = dict(fixed)
        a.update(zip(free, bits))
        w = F(1)
        for i, e in inst.edges.items():
            if a[i]:
                w *= e.lam
        ones = {v: 0 for v in inst.vertices}
        for i, e in inst.edges.items():
            ones[e.u] += a[i]
            ones[e.v] += a[i]
        for i, v in inst.dangling.items():
            ones[v] += a[i]
        for v, s in inst.vertices.items():
            w *= s.values[ones[v]]
        total += w
    return total


def triangle_amo():
    return instance([(1, 1, 0)] * 3, [(0, 1), (1, 2), (0, 2)])


def k4_exact_one():
    es = [(u, v) for u in range(4) for v in range(u + 1, 4)]
    return instance([(0, 1, 0, 0)] * 4, es)


# ---------------------------------------------------------------- strategies

small_frac = st.fractions(min_value=F(1, 4), max_value=3, max_denominator=8)
pos_frac = st.fractions(min_value=F(1, 8), max_value=4, max_denominator=8)


@st.composite
def fib_instances(draw, max_n=5, max_edges=7, dangling=0, min_edges=0, connected_to_dangling=False):
    """Random rational Fibonacci multigraph instance (no self-loops)."""
    n = draw(st.integers(1 if min_edges == 0 else 2, max_n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = []
    if pairs:
        k = draw(st.integers(min_edges, max_edges))
        edges = [draw(st.sampled_from(pairs)) for _ in range(k)]
    c = draw(st.fractions(min_value=0, max_value=3, max_denominator=4))
    deg = [0] * n
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1
    dang = {}
    for j in range(dangling):
        at = draw(st.integers(0, n - 1))
        dang[len(edges) + j] = at
        deg[at] += 1
    verts = {}
    for v in range(n):
        f0, f1 = draw(pos_frac), draw(pos_frac)
        verts[v] = build_fibonacci_signature(c, f0, f1, deg[v])
    es = [Edge(i, u, v, draw(pos_frac)) for i, (u, v) in enumerate(edges)]
    return HolantInstance(verts, es, dang)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
