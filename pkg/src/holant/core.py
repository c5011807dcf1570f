"""Weighted Holant instances with symmetric signatures.

Instances are treated as immutable values: every transformation returns a new
instance.  Numbers are kept as ``Fraction`` when the inputs are rational and
fall back to floats otherwise (irrational bases, square roots).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping

INF = math.inf
REL_TOL = 1e-9


class HolantError(ValueError):
    """Raised for malformed instances or invalid structural operations."""


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def as_number(x):
    """Parse a JSON scalar (number or decimal string) exactly when possible."""
    if isinstance(x, bool):
        raise HolantError(f"not a number: {x!r}")
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x)) if math.isfinite(x) else x
    if isinstance(x, str):
        s = x.strip()
        if s.lower() in ("inf", "+inf", "infinity"):
            return INF
        try:
            return Fraction(s)
        except ValueError:
            return float(s)
    raise HolantError(f"not a number: {x!r}")


def close(a, b, tol=REL_TOL) -> bool:
    if is_exact(a) and is_exact(b):
        return a == b
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def exact_sqrt(x):
    """Square root, exact for perfect-square rationals, float otherwise."""
    if is_exact(x):
        x = Fraction(x)
        if x < 0:
            raise HolantError("negative square root")
        n, d = x.numerator, x.denominator
        rn, rd = math.isqrt(n), math.isqrt(d)
        if rn * rn == n and rd * rd == d:
            return Fraction(rn, rd)
    return math.sqrt(x)


def rho_of(c):
    """Positive root of t^2 = c t + 1."""
    return (c + exact_sqrt(c * c + 4)) / 2


# ---------------------------------------------------------------- signatures


@dataclass(frozen=True)
class SymmetricSignature:
    """Symmetric vertex function [f_0, ..., f_d] indexed by Hamming weight."""

    values: tuple
    fib_c: object = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        for f in self.values:
            if f < 0:
                raise HolantError(f"negative signature entry in {self.values}")

    @property
    def arity(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, k):
        return self.values[k]

    def shift(self, k: int = 1) -> "SymmetricSignature":
        """Signature seen after fixing k incident edges to 1."""
        return SymmetricSignature(self.values[k:], self.fib_c)

    def truncate(self, arity: int) -> "SymmetricSignature":
        return SymmetricSignature(self.values[: arity + 1], self.fib_c)

    def blend(self, tau) -> "SymmetricSignature":
        """(1 - tau) F(. 0) + tau F(. 1) on one incident edge."""
        v = self.values
        return SymmetricSignature(
            tuple((1 - tau) * v[i] + tau * v[i + 1] for i in range(len(v) - 1)), self.fib_c
        )

    def scaled(self, s) -> "SymmetricSignature":
        return SymmetricSignature(tuple(s * f for f in self.values), self.fib_c)

    def as_float(self) -> "SymmetricSignature":
        c = None if self.fib_c is None else float(self.fib_c)
        return SymmetricSignature(tuple(float(f) for f in self.values), c)

    def fibonacci_c(self, tol=REL_TOL):
        """The Fibonacci parameter, or None when the signature has none."""
        if self.fib_c is not None:
            return self.fib_c
        return classify_signature(self, tol).c

    def to_json(self):
        return {"values": [_num_json(f) for f in self.values]}


@dataclass(frozen=True)
class FamilyMembership:
    c: object
    p: object
    q: object

    @property
    def is_fibonacci(self) -> bool:
        return self.c is not None


def ratio_bounds(values) -> tuple:
    """(min, max) of consecutive ratios f_{i+1}/f_i; zero denominators give inf."""
    p, q = INF, 0
    for a, b in zip(values, values[1:]):
        if a == 0 and b == 0:
            continue
        r = INF if a == 0 else Fraction(b) / a if is_exact(a) and is_exact(b) else b / a
        p = min(p, r)
        q = max(q, r)
    if p == INF and q == 0:
        return (None, None)
    return (p, q)


def classify_signature(sig: SymmetricSignature, tol=REL_TOL) -> FamilyMembership:
    """Detect f_{i+2} = c f_{i+1} + f_i and the ratio bounds of a signature.

    Arity 0/1 signatures satisfy the recurrence for every c; they are reported
    with c = None but callers treat them as compatible with any family.
    """
    v = sig.values
    p, q = ratio_bounds(v)
    if len(v) < 3:
        return FamilyMembership(None, p, q)
    c = None
    for i in range(len(v) - 2):
        if v[i + 1] != 0:
            c = (v[i + 2] - v[i]) / (Fraction(v[i + 1]) if is_exact(v[i + 1]) else v[i + 1])
            break
    if c is None:
        # all odd-position entries zero: only [a, 0, a, 0, ...] with c free;
        # we do not treat it as Fibonacci
        return FamilyMembership(None, p, q)
    for i in range(len(v) - 2):
        if not close(v[i + 2], c * v[i + 1] + v[i], tol):
            return FamilyMembership(None, p, q)
    return FamilyMembership(c, p, q)


def build_fibonacci_signature(c, f0, f1, arity: int) -> SymmetricSignature:
    if arity < 0:
        raise HolantError("arity must be non-negative")
    if f0 == 0 and f1 == 0:
        raise HolantError("(f0, f1) = (0, 0) gives the zero signature")
    vals = [f0, f1]
    while len(vals) < arity + 1:
        nxt = c * vals[-1] + vals[-2]
        if nxt < 0:
            raise HolantError(f"Fibonacci recurrence with c={c} went negative")
        vals.append(nxt)
    return SymmetricSignature(tuple(vals[: arity + 1]), c)


def decomposition_gadget(c, arity: int) -> SymmetricSignature:
    """The [1, 0, 1, c, ...] signature used to split a Fibonacci vertex."""
    one, zero = (Fraction(1), Fraction(0)) if is_exact(c) else (1.0, 0.0)
    return build_fibonacci_signature(c, one, zero, arity)


# ---------------------------------------------------------------- instances


@dataclass(frozen=True)
class Edge:
    id: int
    u: int
    v: int
    lam: object

    def other(self, w: int) -> int:
        return self.v if w == self.u else self.u


@dataclass(frozen=True)
class FibonacciFamilyParams:
    c1: float
    c2: float
    p: float
    q: float
    lambda_lo: float
    lambda_hi: float

    def __post_init__(self):
        if not (0 < self.c1 <= self.c2):
            raise HolantError(f"need 0 < c1 <= c2, got {self.c1}, {self.c2}")
        if not (0 < self.p <= self.q):
            raise HolantError(f"need 0 < p <= q, got {self.p}, {self.q}")
        if not (0 < self.lambda_lo <= self.lambda_hi):
            raise HolantError("need 0 < lambda_lo <= lambda_hi")

    @property
    def rho(self) -> float:
        return rho_of(float(self.c1))

    @property
    def single_c(self) -> bool:
        return math.isclose(self.c1, self.c2, rel_tol=1e-12)

    def to_json(self):
        return {k: _num_json(getattr(self, k)) for k in ("c1", "c2", "p", "q", "lambda_lo", "lambda_hi")}


class HolantInstance:
    """Multigraph with symmetric signatures, edge weights and dangling half-edges.

    ``vertices`` maps vertex id -> SymmetricSignature, ``edges`` maps edge id ->
    Edge, ``dangling`` maps half-edge id -> vertex id.  Edge and dangling ids
    share one namespace.
    """

    __slots__ = ("vertices", "edges", "dangling", "__dict__")

    def __init__(self, vertices: Mapping, edges: Mapping | Iterable = (), dangling: Mapping = None,
                 validate: bool = True):
        if not isinstance(edges, Mapping):
            edges = {e.id: e for e in edges}
        self.vertices = MappingProxyType(dict(vertices))
        self.edges = MappingProxyType(dict(edges))
        self.dangling = MappingProxyType(dict(dangling or {}))
        if validate:
            self._validate()

    def _validate(self):
        ids = set(self.edges)
        if ids & set(self.dangling):
            raise HolantError(f"edge ids reused for dangling edges: {sorted(ids & set(self.dangling))}")
        for e in self.edges.values():
            if e.u == e.v:
                raise HolantError(f"self-loop on edge {e.id}")
            if e.u not in self.vertices or e.v not in self.vertices:
                raise HolantError(f"edge {e.id} references a missing vertex")
            if e.lam < 0:
                raise HolantError(f"negative weight on edge {e.id}")
        for d, v in self.dangling.items():
            if v not in self.vertices:
                raise HolantError(f"dangling edge {d} references a missing vertex")
        for v, sig in self.vertices.items():
            deg = len(self.incident[v])
            if sig.arity != deg:
                raise HolantError(f"vertex {v}: signature arity {sig.arity} != degree {deg}")

    # -- derived structure -------------------------------------------------

    @cached_property
    def incident(self) -> dict:
        """vertex -> sorted list of incident edge ids (regular and dangling)."""
        inc = {v: [] for v in self.vertices}
        for e in self.edges.values():
            inc[e.u].append(e.id)
            inc[e.v].append(e.id)
        for d, v in self.dangling.items():
            inc[v].append(d)
        for v in inc:
            inc[v].sort()
        return inc

    @cached_property
    def key(self) -> tuple:
        """Hashable canonical form used for memoization."""
        return (
            tuple(sorted((v, s.values) for v, s in self.vertices.items())),
            tuple(sorted((e.id, min(e.u, e.v), max(e.u, e.v), e.lam) for e in self.edges.values())),
            tuple(sorted(self.dangling.items())),
        )

    def __eq__(self, other):
        return isinstance(other, HolantInstance) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"HolantInstance(n={len(self.vertices)}, m={len(self.edges)}, dangling={sorted(self.dangling)})"

    @property
    def all_edge_ids(self) -> list:
        return sorted(list(self.edges) + list(self.dangling))

    def is_exact(self) -> bool:
        return all(is_exact(f) for s in self.vertices.values() for f in s.values) and all(
            is_exact(e.lam) for e in self.edges.values()
        )

    def as_float(self) -> "HolantInstance":
        return HolantInstance(
            {v: s.as_float() for v, s in self.vertices.items()},
            {i: Edge(i, e.u, e.v, float(e.lam)) for i, e in self.edges.items()},
            self.dangling,
            validate=False,
        )

    def fresh_vertex_id(self) -> int:
        return max(self.vertices, default=-1) + 1

    def fresh_edge_id(self) -> int:
        return max(list(self.edges) + list(self.dangling), default=-1) + 1

    def neighbors(self, v) -> list:
        return [self.edges[i].other(v) for i in self.incident[v] if i in self.edges]

    def endpoint_of(self, e):
        return self.dangling[e] if e in self.dangling else None

    def component(self, v) -> set:
        seen = {v}
        stack = [v]
        while stack:
            w = stack.pop()
            for u in self.neighbors(w):
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return seen

    def restrict(self, verts) -> "HolantInstance":
        """Sub-instance induced on a union of connected components."""
        verts = set(verts)
        return HolantInstance(
            {v: s for v, s in self.vertices.items() if v in verts},
            {i: e for i, e in self.edges.items() if e.u in verts},
            {d: v for d, v in self.dangling.items() if v in verts},
            validate=False,
        )

    def config_weight(self, sigma: Mapping) -> object:
        w = 1
        for i, e in self.edges.items():
            if sigma[i]:
                w = w * e.lam
        for v, inc in self.incident.items():
            w = w * self.vertices[v][sum(sigma[i] for i in inc)]
        return w

    # -- JSON ----------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "vertices": [{"id": v, "signature": self.vertices[v].to_json()} for v in sorted(self.vertices)],
            "edges": [
                {"id": e.id, "u": e.u, "v": e.v, "lambda": _num_str(e.lam)}
                for e in sorted(self.edges.values(), key=lambda e: e.id)
            ],
            "dangling": [{"id": d, "v": v} for d, v in sorted(self.dangling.items())],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)


def _num_json(x):
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else str(x)
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else "-inf"
    return x


def _num_str(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    return repr(x)


def instance_from_json(obj) -> HolantInstance:
    if isinstance(obj, str):
        obj = json.loads(obj, parse_float=Fraction)
    vertices = {}
    for item in obj.get("vertices", []):
        vid = int(item["id"])
        if vid in vertices:
            raise HolantError(f"duplicate vertex id {vid}")
        s = item["signature"]
        if "values" in s:
            vertices[vid] = SymmetricSignature(tuple(as_number(x) for x in s["values"]))
        elif "fib" in s:
            f = s["fib"]
            vertices[vid] = build_fibonacci_signature(
                as_number(f["c"]), as_number(f["f0"]), as_number(f["f1"]), int(f["arity"])
            )
        else:
            raise HolantError(f"vertex {vid}: signature needs 'values' or 'fib'")
    edges = {}
    for item in obj.get("edges", []):
        eid = int(item["id"])
        if eid in edges:
            raise HolantError(f"duplicate edge id {eid}")
        lam = as_number(item.get("lambda", 1))
        edges[eid] = Edge(eid, int(item["u"]), int(item["v"]), lam)
    dangling = {}
    for item in obj.get("dangling", []):
        did = int(item["id"])
        if did in dangling:
            raise HolantError(f"duplicate dangling id {did}")
        dangling[did] = int(item["v"])
    return HolantInstance(vertices, edges, dangling)


def load_instance(path) -> HolantInstance:
    with open(path) as fh:
        return instance_from_json(json.load(fh, parse_float=Fraction))


# ---------------------------------------------------------------- operations


def pin_edge(inst: HolantInstance, e: int, tau) -> HolantInstance:
    """Remove edge e, contracting its endpoint signatures at value tau.

    Regular edges accept tau in {0, 1} only; dangling edges accept any blend.
    Pinning a regular edge to 1 drops its weight, so
    Z(inst) = Z(pin0) + lam_e * Z(pin1).
    """
    verts = dict(inst.vertices)
    if e in inst.edges:
        if tau not in (0, 1):
            raise HolantError("fractional pinning is only defined on dangling edges")
        ed = inst.edges[e]
        for w in (ed.u, ed.v):
            verts[w] = verts[w].shift(int(tau)) if tau else verts[w].truncate(verts[w].arity - 1)
        edges = {i: x for i, x in inst.edges.items() if i != e}
        return HolantInstance(verts, edges, inst.dangling, validate=False)
    if e in inst.dangling:
        if not 0 <= tau <= 1:
            raise HolantError("tau must lie in [0, 1]")
        w = inst.dangling[e]
        s = verts[w]
        if tau == 0:
            verts[w] = s.truncate(s.arity - 1)
        elif tau == 1:
            verts[w] = s.shift(1)
        else:
            verts[w] = s.blend(tau)
        dangling = {i: x for i, x in inst.dangling.items() if i != e}
        return HolantInstance(verts, inst.edges, dangling, validate=False)
    raise HolantError(f"unknown edge {e}")


def pin_many(inst: HolantInstance, assignment: Mapping) -> HolantInstance:
    for e, tau in assignment.items():
        inst = pin_edge(inst, e, tau)
    return inst


def decompose_vertex(inst: HolantInstance, v: int, E1, E2, new_edge: int = None,
                     new_vertex: int = None) -> HolantInstance:
    """Split a Fibonacci vertex v into v' (keeps id v) and a gadget vertex v''.

    v' carries E1 plus the new connecting edge and has signature
    [f_0, ..., f_{|E1|+1}]; v'' carries E2 plus the connecting edge with the
    [1, 0, 1, c, ...] gadget.  The connecting edge has weight 1.
    """
    E1, E2 = list(E1), list(E2)
    inc = inst.incident[v]
    if sorted(E1 + E2) != inc or not E1 or not E2:
        raise HolantError("E1, E2 must partition the incident edges of v and be nonempty")
    sig = inst.vertices[v]
    c = sig.fibonacci_c()
    if c is None:
        if sig.arity <= 1:
            raise HolantError("nothing to decompose")
        raise HolantError(f"vertex {v} is not Fibonacci: {sig.values}")
    vp = inst.fresh_vertex_id() if new_vertex is None else new_vertex
    ne = inst.fresh_edge_id() if new_edge is None else new_edge
    one = Fraction(1) if is_exact(c) and all(is_exact(f) for f in sig.values) else 1.0
    verts = dict(inst.vertices)
    verts[v] = SymmetricSignature(sig.values[: len(E1) + 2], c)
    verts[vp] = decomposition_gadget(c if is_exact(one) else float(c), len(E2) + 1)
    edges = {}
    moved = set(E2)
    for i, ed in inst.edges.items():
        if i in moved:
            ed = Edge(i, vp if ed.u == v else ed.u, vp if ed.v == v else ed.v, ed.lam)
        edges[i] = ed
    edges[ne] = Edge(ne, v, vp, one)
    dangling = {i: (vp if i in moved else w) for i, w in inst.dangling.items()}
    return HolantInstance(verts, edges, dangling)


def attach_free_end(inst: HolantInstance, e: int, lam=None) -> HolantInstance:
    """Close dangling edge e with a fresh [1, 1] vertex."""
    if e not in inst.dangling:
        raise HolantError(f"{e} is not a dangling edge")
    exact = inst.is_exact()
    one = Fraction(1) if exact else 1.0
    w = inst.fresh_vertex_id()
    verts = dict(inst.vertices)
    verts[w] = SymmetricSignature((one, one))
    edges = dict(inst.edges)
    edges[e] = Edge(e, inst.dangling[e], w, one if lam is None else lam)
    dangling = {i: x for i, x in inst.dangling.items() if i != e}
    return HolantInstance(verts, edges, dangling)


def close_all_dangling(inst: HolantInstance) -> HolantInstance:
    for d in sorted(inst.dangling):
        inst = attach_free_end(inst, d)
    return inst


def detach_edge(inst: HolantInstance, e: int, keep: int, new_id: int = None) -> HolantInstance:
    """Turn regular edge e into a dangling half-edge at endpoint ``keep``.

    The other endpoint loses this edge slot, so the caller must remove or
    re-sign it; the edge weight is dropped.
    """
    ed = inst.edges[e]
    if keep not in (ed.u, ed.v):
        raise HolantError("keep must be an endpoint")
    edges = {i: x for i, x in inst.edges.items() if i != e}
    dangling = dict(inst.dangling)
    dangling[e if new_id is None else new_id] = keep
    return HolantInstance(inst.vertices, edges, dangling, validate=False)


def remove_vertex(inst: HolantInstance, v: int, drop=()) -> HolantInstance:
    """Delete v; its regular edges become dangling at their other endpoints.

    Edge ids in ``drop`` (e.g. a dangling edge of v) are discarded.
    """
    verts = {w: s for w, s in inst.vertices.items() if w != v}
    edges, dangling = {}, {i: w for i, w in inst.dangling.items() if w != v}
    for i, ed in inst.edges.items():
        if v in (ed.u, ed.v):
            if i not in drop:
                dangling[i] = ed.other(v)
        else:
            edges[i] = ed
    return HolantInstance(verts, edges, dangling, validate=False)


def infer_lab(sig: SymmetricSignature, b):
    """The a with f_{i+2} = a f_{i+1} + b f_i, or None if inconsistent."""
    v = sig.values
    if len(v) < 3:
        return None
    a = None
    for i in range(len(v) - 2):
        if v[i + 1] != 0:
            a = (v[i + 2] - b * v[i]) / (Fraction(v[i + 1]) if is_exact(v[i + 1]) else v[i + 1])
            break
    if a is None:
        return None
    for i in range(len(v) - 2):
        if not close(v[i + 2], a * v[i + 1] + b * v[i]):
            return None
    return a


def infer_common_b(inst: HolantInstance):
    """Infer b from vertices of arity >= 3 (two equations fix a and b)."""
    found = set()
    for s in inst.vertices.values():
        v = s.values
        if len(v) < 4:
            continue
        # solve f2 = a f1 + b f0, f3 = a f2 + b f1
        det = v[1] * v[1] - v[0] * v[2]
        if det == 0:
            continue
        b = (v[1] * v[3] - v[2] * v[2]) / (Fraction(det) if is_exact(det) else det)
        found.add(b)
    if not found:
        raise HolantError("cannot infer b: no vertex of arity >= 3 with a determined recurrence")
    bs = sorted(found)
    if not all(close(bs[0], x) for x in bs):
        raise HolantError(f"mixed b values {bs}")
    return bs[0]


def lab_rescale(inst: HolantInstance, b=None) -> HolantInstance:
    """Map an L_{a,b} instance (common b > 0) to a Fibonacci instance.

    g_i = f_i / b^{i/2}.  Each endpoint of an edge multiplies its weight by
    sqrt(b), so every edge weight becomes lam * b.  Z of a regular instance is
    unchanged; each dangling edge assigned 1 picks up a factor 1/sqrt(b), so
    dangling ratios scale by 1/sqrt(b).
    """
    if b is None:
        b = infer_common_b(inst)
    if b <= 0:
        raise HolantError("b must be positive")
    for vid, s in inst.vertices.items():
        if s.arity >= 2 and infer_lab(s, b) is None:
            raise HolantError(f"vertex {vid} is not in L_(a,b) with b={b}")
    rb = exact_sqrt(b)
    verts = {}
    for vid, s in inst.vertices.items():
        vals = tuple(f / rb**i for i, f in enumerate(s.values))
        a = infer_lab(s, b)
        verts[vid] = SymmetricSignature(vals, None if a is None else a / rb)
    edges = {i: Edge(i, e.u, e.v, e.lam * rb * rb) for i, e in inst.edges.items()}
    return HolantInstance(verts, edges, inst.dangling)


def simple_path_reaches(inst: HolantInstance, e: int, threshold: int) -> tuple:
    """Whether a simple path through dangling edge e has more than ``threshold`` edges.

    Returns (reached, length) where length is the longest path length found,
    capped at threshold + 1.  The path starts with e itself (length 1) and
    may end on another dangling half-edge.
    """
    v = inst.dangling[e]
    cap = threshold + 1
    best = 1
    if best >= cap:
        return True, cap
    inc = inst.incident
    visited = {v}

    def dfs(w, length):
        nonlocal best
        if length > best:
            best = length
        if best >= cap:
            return True
        for i in inc[w]:
            if i == e:
                continue
            if i in inst.dangling:
                if length + 1 > best:
                    best = length + 1
                    if best >= cap:
                        return True
                continue
            u = inst.edges[i].other(w)
            if u in visited:
                continue
            visited.add(u)
            if dfs(u, length + 1):
                return True
            visited.discard(u)
        return False

    dfs(v, 1)
    return best > threshold, min(best, cap)


def longest_simple_path(inst: HolantInstance, e: int, limit: int = 64) -> int:
    return simple_path_reaches(inst, e, limit)[1]


def family_params(inst: HolantInstance) -> tuple:
    """(c1, c2, p, q, lam_lo, lam_hi) observed in an instance.

    c-values come from vertices of arity >= 2; ratios from all vertices.
    Returns None entries when a quantity is absent.
    """
    cs, ps, qs = [], [], []
    for s in inst.vertices.values():
        m = classify_signature(s)
        if s.arity >= 2:
            if m.c is None:
                raise HolantError(f"non-Fibonacci signature {s.values}")
            cs.append(m.c)
        if m.p is not None:
            ps.append(m.p)
            qs.append(m.q)
    lams = [e.lam for e in inst.edges.values()]
    return (
        min(cs, default=None), max(cs, default=None),
        min(ps, default=None), max(qs, default=None),
        min(lams, default=None), max(lams, default=None),
    )
