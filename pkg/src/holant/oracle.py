"""Ground truth: brute-force partition functions, basis transforms and the
shallow-instance solver (holographic transform + self-avoiding-walk tree).
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Mapping

import numpy as np

from .core import (
    INF,
    Edge,
    HolantError,
    HolantInstance,
    SymmetricSignature,
    classify_signature,
    close,
    is_exact,
    rho_of,
)

DEFAULT_CAP = 24
# components at most this large go through brute force inside the shallow solver
BRUTE_COMPONENT_LIMIT = 14
_CHUNK = 1 << 15


class OracleCapError(HolantError):
    pass


class UndefinedDistribution(HolantError):
    pass


def oracle_cap(cap=None) -> int:
    if cap is not None:
        return int(cap)
    return int(os.environ.get("HOLANT_ORACLE_CAP", DEFAULT_CAP))


# ---------------------------------------------------------------- brute force


def _lcm(a, b):
    return a * b // math.gcd(a, b)


def brute_force_Z(inst: HolantInstance, fixed: Mapping = None, cap=None):
    """Sum of config weights over all assignments agreeing with ``fixed``.

    Exact (Fraction) when every number in the instance is rational, float
    otherwise.  Dangling edges are summed over both values with no weight.
    """
    fixed = dict(fixed or {})
    ids = [i for i in inst.all_edge_ids if i not in fixed]
    limit = oracle_cap(cap)
    if len(inst.edges) + len(inst.dangling) > limit:
        raise OracleCapError(
            f"instance has {len(inst.edges) + len(inst.dangling)} edges, oracle cap is {limit}"
        )
    exact = inst.is_exact()
    col = {i: k for k, i in enumerate(ids)}
    m = len(ids)

    # integer scaling keeps the exact path in machine-friendly Python ints
    denom = Fraction(1)
    const = 1
    vert_tables, vert_base, vert_cols = [], [], []
    for v, inc in inst.incident.items():
        vals = inst.vertices[v].values
        if exact:
            d = reduce(_lcm, (Fraction(f).denominator for f in vals), 1)
            table = np.array([int(Fraction(f) * d) for f in vals], dtype=object)
            denom *= d
        else:
            table = np.array([float(f) for f in vals], dtype=float)
        base = sum(1 for i in inc if fixed.get(i, 0))
        cols = [col[i] for i in inc if i in col]
        if not cols:
            const = const * table[base]
            continue
        vert_tables.append(table)
        vert_base.append(base)
        vert_cols.append(cols)
    edge_cols, edge_on = [], []
    for i, e in inst.edges.items():
        lam = Fraction(e.lam) if exact else float(e.lam)
        if exact:
            a, b = lam.numerator, lam.denominator
            denom *= b
        else:
            a, b = lam, 1.0
        if i in col:
            edge_cols.append(col[i])
            edge_on.append(np.array([b, a], dtype=object if exact else float))
        else:
            const = const * (a if fixed[i] else b)

    total = 0
    shifts = np.arange(m, dtype=np.int64)
    for start in range(0, 1 << m, _CHUNK):
        idx = np.arange(start, min(1 << m, start + _CHUNK), dtype=np.int64)
        bits = (idx[:, None] >> shifts) & 1
        w = np.ones(len(idx), dtype=object if exact else float)
        for table, base, cols in zip(vert_tables, vert_base, vert_cols):
            w = w * table[base + bits[:, cols].sum(axis=1)]
        for k, table in zip(edge_cols, edge_on):
            w = w * table[bits[:, k]]
        total = total + w.sum()
    total = total * const
    if exact:
        return Fraction(total) / denom
    return float(total)


def brute_force_marginal(inst: HolantInstance, E0, alpha, cap=None):
    """P(sigma restricted to E0 equals alpha)."""
    E0 = list(E0)
    alpha = [int(a) for a in alpha]
    Z = brute_force_Z(inst, cap=cap)
    if Z == 0:
        raise UndefinedDistribution("Z = 0, marginals undefined")
    return brute_force_Z(inst, dict(zip(E0, alpha)), cap=cap) / Z


def the_dangling_edge(inst: HolantInstance, e=None) -> int:
    if e is not None:
        if e not in inst.dangling:
            raise HolantError(f"{e} is not a dangling edge")
        return e
    if len(inst.dangling) != 1:
        raise HolantError(f"expected one dangling edge, found {len(inst.dangling)}")
    return next(iter(inst.dangling))


def ratio_pair(inst: HolantInstance, e=None, cap=None) -> tuple:
    """(Z(sigma(e)=0), Z(sigma(e)=1)) by brute force."""
    e = the_dangling_edge(inst, e) if e is None or e in inst.dangling else e
    return brute_force_Z(inst, {e: 0}, cap), brute_force_Z(inst, {e: 1}, cap)


def ratio_exact(inst: HolantInstance, e=None, cap=None):
    """R = P(sigma(e)=1) / P(sigma(e)=0) by brute force."""
    z0, z1 = ratio_pair(inst, e, cap)
    if z0 == 0:
        raise UndefinedDistribution("P(sigma(e)=0) = 0: infinite ratio")
    return z1 / z0


# ---------------------------------------------------------------- transforms


@dataclass(frozen=True)
class BasisTransform:
    T: tuple

    def __post_init__(self):
        T = tuple(tuple(r) for r in self.T)
        object.__setattr__(self, "T", T)
        if abs(self.det) <= 1e-12:
            raise HolantError("basis transform is singular")

    @property
    def det(self):
        (a, b), (c, d) = self.T
        return a * d - b * c

    def inverse(self) -> "BasisTransform":
        (a, b), (c, d) = self.T
        det = self.det
        return BasisTransform(((d / det, -b / det), (-c / det, a / det)))

    def transpose(self) -> "BasisTransform":
        (a, b), (c, d) = self.T
        return BasisTransform(((a, c), (b, d)))

    def array(self, exact=False):
        return np.array(self.T, dtype=object if exact else float)


def bridge_basis(rho, t) -> BasisTransform:
    """The basis [[1, t], [rho, -t/rho]]."""
    return BasisTransform(((1, t), (rho, -t / rho)))


MAX_TENSOR_ARITY = 12


def sig_to_tensor(sig: SymmetricSignature, exact=None) -> np.ndarray:
    d = sig.arity
    if d > MAX_TENSOR_ARITY:
        raise HolantError(f"arity {d} exceeds tensor guard {MAX_TENSOR_ARITY}")
    exact = all(is_exact(f) for f in sig.values) if exact is None else exact
    out = np.empty((2,) * d, dtype=object if exact else float)
    for idx in np.ndindex(*out.shape):
        out[idx] = sig.values[sum(idx)]
    return out


def tensor_to_sig(t: np.ndarray, tol=1e-10) -> SymmetricSignature:
    d = t.ndim
    vals = [None] * (d + 1)
    for idx in np.ndindex(*t.shape):
        k = sum(idx)
        x = t[idx] if d else t[()]
        if vals[k] is None:
            vals[k] = x
        elif not (x == vals[k] or abs(x - vals[k]) <= tol * max(1.0, abs(x), abs(vals[k]))):
            raise HolantError("transformed tensor is not symmetric")
    if d == 0:
        vals = [t[()]]
    return _raw_signature(vals)


def _raw_signature(vals) -> SymmetricSignature:
    # transformed signatures may be negative; bypass the non-negativity check
    s = object.__new__(SymmetricSignature)
    object.__setattr__(s, "values", tuple(vals))
    object.__setattr__(s, "fib_c", None)
    return s


def apply_tensor_power(M: np.ndarray, tensor: np.ndarray) -> np.ndarray:
    """(M^{(x) d}) tensor: contract M's column index with every tensor axis."""
    out = tensor
    for k in range(tensor.ndim):
        out = np.moveaxis(np.tensordot(M, out, axes=([1], [k])), 0, k)
    return out


def transform_signature(T: BasisTransform, sig: SymmetricSignature, mode: str = "contravariant",
                        tol=1e-10) -> SymmetricSignature:
    """Contravariant: T^{(x)d} G.  Covariant: R T^{(x)d}, i.e. (T^t)^{(x)d} R."""
    exact = all(is_exact(f) for f in sig.values) and all(is_exact(x) for r in T.T for x in r)
    M = T.array(exact)
    if mode == "covariant":
        M = M.T
    elif mode != "contravariant":
        raise HolantError(f"unknown mode {mode}")
    if sig.arity == 0:
        return sig
    return tensor_to_sig(apply_tensor_power(M, sig_to_tensor(sig, exact)), tol)


def to_bipartite(inst: HolantInstance) -> tuple:
    """Subdivide every edge with a [1, 0, lam] vertex; all edge weights become 1.

    Returns (instance, left vertex ids, right vertex ids).
    """
    exact = inst.is_exact()
    one, zero = (Fraction(1), Fraction(0)) if exact else (1.0, 0.0)
    verts = dict(inst.vertices)
    nv = inst.fresh_vertex_id()
    ne = inst.fresh_edge_id()
    edges = {}
    right = []
    for i in sorted(inst.edges):
        e = inst.edges[i]
        verts[nv] = _raw_signature((one, zero, e.lam))
        right.append(nv)
        edges[i] = Edge(i, e.u, nv, one)
        edges[ne] = Edge(ne, nv, e.v, one)
        nv += 1
        ne += 1
    out = HolantInstance(verts, edges, inst.dangling, validate=False)
    return out, sorted(inst.vertices), right


def holographic_transform(inst: HolantInstance, left, T: BasisTransform) -> HolantInstance:
    """Transform a bipartite instance: left side covariantly by T, right side
    contravariantly by T^{-1}.  Z is unchanged (Holant theorem).
    """
    left = set(left)
    Ti = T.inverse()
    verts = {}
    for v, s in inst.vertices.items():
        verts[v] = transform_signature(T, s, "covariant") if v in left else transform_signature(Ti, s)
    return HolantInstance(verts, inst.edges, inst.dangling, validate=False)


def signed_Z(inst: HolantInstance, fixed=None):
    """Brute force Z that tolerates negative signature entries."""
    return brute_force_Z(inst, fixed)


# ---------------------------------------------------------------- extended spin


@dataclass(frozen=True)
class ExtendedTwoSpinInstance:
    """Two-spin system allowing arbitrary real vertex and edge weights.

    ``weights[v] = (w0, w1)``; ``edges[i] = (u, v, M)`` with M[s_u][s_v].
    ``root`` carries the former dangling edge; ``readout`` maps the spin pair
    at the root back to the dangling edge values:
    Z(e = x) = sum_s readout[x][s] * Z_spin(sigma_root = s).
    """

    weights: dict
    edges: dict
    root: int
    readout: tuple

    def adjacency(self) -> dict:
        adj = {v: [] for v in self.weights}
        for i in sorted(self.edges):
            u, v, M = self.edges[i]
            adj[u].append((i, v, M))
            adj[v].append((i, u, ((M[0][0], M[1][0]), (M[0][1], M[1][1]))))
        return adj


def fibonacci_coefficients(sig: SymmetricSignature, rho, tol=1e-9) -> tuple:
    """(A, B) with f_k = A rho^k + B (-rho)^{-k}; raises if no such pair."""
    v = sig.values
    if len(v) == 1:
        return v[0], v[0] * 0
    A = (v[1] + v[0] / rho) / (rho + 1 / rho)
    B = v[0] - A
    for k, f in enumerate(v):
        g = A * rho**k + B * (-1 / rho) ** k
        if not close(f, g, tol):
            raise HolantError(f"signature {v} is not Fibonacci with rho={rho}")
    return A, B


def common_c(inst: HolantInstance, tol=1e-9):
    """The shared Fibonacci parameter of all arity >= 2 vertices, or raise."""
    c = None
    for v, s in inst.vertices.items():
        if s.arity < 2:
            continue
        cv = s.fib_c if s.fib_c is not None else classify_signature(s, tol).c
        if cv is None:
            raise HolantError(f"vertex {v} is not Fibonacci")
        if c is None:
            c = cv
        elif not close(c, cv, tol):
            raise HolantError(f"mixed Fibonacci parameters {c} and {cv}")
    return c


def holant_to_extended_spin(inst: HolantInstance, rho=None, t=1) -> ExtendedTwoSpinInstance:
    """Holographic transform of a single-dangling Fibonacci instance.

    Vertex v of arity n becomes a spin vertex with weights (A_v, B_v / t^n);
    an edge of weight lam becomes the matrix T^t diag(1, lam) T.  Only the
    component of the dangling edge is kept.
    """
    e = the_dangling_edge(inst)
    root = inst.dangling[e]
    comp = inst.restrict(inst.component(root))
    c = common_c(comp)
    if rho is None:
        rho = rho_of(c) if c is not None else 1
    elif c is not None and not close(rho, rho_of(c), 1e-9):
        raise HolantError(f"rho={rho} does not match c={c}")
    if t == 0 or abs(t) > 1:
        raise HolantError("need 0 < |t| <= 1")
    T = bridge_basis(rho, t).T
    weights = {}
    for v, s in comp.vertices.items():
        A, B = fibonacci_coefficients(s, rho)
        weights[v] = (A, B / t**s.arity)
    edges = {}
    for i, ed in comp.edges.items():
        lam = ed.lam
        M = tuple(
            tuple(T[0][a] * T[0][b] + lam * T[1][a] * T[1][b] for b in range(2)) for a in range(2)
        )
        edges[i] = (ed.u, ed.v, M)
    return ExtendedTwoSpinInstance(weights, edges, root, T)


def _normalize(pair):
    a, b = pair
    if is_exact(a) and is_exact(b):
        return pair
    s = max(abs(a), abs(b))
    if s == 0 or not math.isfinite(s):
        return pair
    return (a / s, b / s)


def saw_pair(spin: ExtendedTwoSpinInstance, v=None) -> tuple:
    """(Z(sigma_v = 0), Z(sigma_v = 1)) up to a common factor, by the
    self-avoiding-walk tree with pinned copies of revisited vertices.

    Never divides: the pair is a projective representation of the ratio.
    """
    v = spin.root if v is None else v
    adj = spin.adjacency()

    def rec(weights, w, removed):
        removed = removed | {w}
        nbrs = [(i, u, M) for (i, u, M) in adj[w] if u not in removed]
        z0, z1 = weights[w]
        for k, (i, u, M) in enumerate(nbrs):
            mod = dict(weights)
            for j, (_, uj, Mj) in enumerate(nbrs):
                if j == k:
                    continue
                s = 1 if j < k else 0
                a, b = mod[uj]
                mod[uj] = (a * Mj[s][0], b * Mj[s][1])
            p0, p1 = rec(mod, u, removed)
            z0 = z0 * (M[0][0] * p0 + M[0][1] * p1)
            z1 = z1 * (M[1][0] * p0 + M[1][1] * p1)
            z0, z1 = _normalize((z0, z1))
        return z0, z1

    return rec(dict(spin.weights), v, frozenset())


def saw_ratio(spin: ExtendedTwoSpinInstance, v=None):
    z0, z1 = saw_pair(spin, v)
    if z0 == 0:
        return INF if z1 != 0 else math.nan
    return z1 / z0


def spin_readout(spin: ExtendedTwoSpinInstance, pair) -> tuple:
    s0, s1 = pair
    R = spin.readout
    return (R[0][0] * s0 + R[0][1] * s1, R[1][0] * s0 + R[1][1] * s1)


def shallow_exact_pair(inst: HolantInstance, method: str = "auto", t=1) -> tuple:
    """(Z(e=0), Z(e=1)) up to a common factor for a single-dangling instance.

    ``auto`` uses brute force on components of at most BRUTE_COMPONENT_LIMIT
    edges and the transform + SAW route otherwise, falling back to brute
    force up to the oracle cap when the component mixes Fibonacci parameters.
    """
    e = the_dangling_edge(inst)
    comp = inst.restrict(inst.component(inst.dangling[e]))
    size = len(comp.edges) + len(comp.dangling)
    if method == "brute" or (method == "auto" and size <= BRUTE_COMPONENT_LIMIT):
        return ratio_pair(comp, e, cap=max(size, 1))
    try:
        spin = holant_to_extended_spin(comp, t=t)
    except HolantError as err:
        # mixed c has no common transform; brute force while it fits the cap
        if method == "auto" and size <= oracle_cap():
            return ratio_pair(comp, e)
        raise HolantError(f"shallow solver: {err}; component has {size} edges") from err
    pair = spin_readout(spin, saw_pair(spin))
    if pair[0] == 0 and pair[1] == 0:
        if size <= oracle_cap():
            return ratio_pair(comp, e)
        raise HolantError("degenerate SAW pair (0, 0)")
    return pair


def shallow_exact_ratio(inst: HolantInstance, method: str = "auto", t=1):
    z0, z1 = shallow_exact_pair(inst, method, t)
    if z0 == 0:
        if z1 == 0:
            raise UndefinedDistribution("Z = 0")
        return INF
    return z1 / z0
