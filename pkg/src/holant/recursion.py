"""Computation-tree estimator for dangling-edge ratios, regular-edge marginals
and the partition function by sequential pinning.

Ratios are carried internally as projective pairs (Z0, Z1) so that
instances with P(sigma(e)=0) = 0 (infinite ratio) need no special casing.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .bounds import (
    ClampBounds,
    RecursionRegime,
    RegimeError,
    depth_for_eps,
)
from .core import (
    INF,
    FibonacciFamilyParams,
    HolantError,
    HolantInstance,
    close_all_dangling,
    decompose_vertex,
    family_params,
    pin_edge,
    remove_vertex,
    simple_path_reaches,
)
from .oracle import shallow_exact_pair, the_dangling_edge

log = logging.getLogger(__name__)

HALF = 0.5
FORCED_DEPTH = 16  # depth used when an uncertified regime gives no error bound


class NumericFault(HolantError):
    pass


# ---------------------------------------------------------------- step maps


def _pair(x):
    return (0.0, 1.0) if x == INF else (1.0, x)


def _ratio(pair):
    z0, z1 = pair
    if z0 == 0:
        return INF if z1 != 0 else math.nan
    return z1 / z0


def h_pair(f, lam, X):
    X0, X1 = X
    return (f[0] * X0 + lam * f[1] * X1, f[1] * X0 + lam * f[2] * X1)


def g_pair(c, lam, X, Y, Z):
    X0, X1 = X
    Y0, Y1 = Y
    Z0, Z1 = Z
    num = lam * Y1 * X0 * Z0 + X1 * Y0 * Z0 + c * lam * X1 * Y0 * Z1
    den = X0 * Y0 * Z0 + lam * X1 * Y0 * Z1
    return (den, num)


def ghat_pair(c, lam, X, Y):
    return g_pair(c, lam, X, Y, Y)


def gfree_pair(c, lam, X, Y, Z):
    X0, X1 = X
    Y0, Y1 = Y
    Z0, Z1 = Z
    Ys, Zs = Y0 + Y1, Z0 + Z1
    num = X1 * Ys * Z0 + lam * Y1 * Zs * X0 + lam * c * X1 * Ys * Z1
    den = Zs * X0 * Y0 + lam * X1 * Ys * Z1
    return (den, num)


def step_h(x, mu, c, lam):
    """(mu + (c mu + 1) lam x) / (1 + lam mu x)."""
    return _ratio(h_pair((1, mu, c * mu + 1), lam, _pair(x)))


def step_g(x, y, z, c, lam):
    """(lam y + x + c lam x z) / (1 + lam x z)."""
    return _ratio(g_pair(c, lam, _pair(x), _pair(y), _pair(z)))


def step_g_hat(x, y, c, lam):
    return _ratio(ghat_pair(c, lam, _pair(x), _pair(y)))


def step_g_free(x, y, z, c, lam):
    """(x(1+y) + lam y(1+z) + lam c x(1+y) z) / (1 + z + lam x(1+y) z)."""
    return _ratio(gfree_pair(c, lam, _pair(x), _pair(y), _pair(z)))


def med(a, b, c):
    return sorted((a, b, c))[1]


# ---------------------------------------------------------------- sub-instances


@dataclass
class SubBundle:
    """How R of an instance is expressed through smaller instances.

    kind: "h" (one child), "g" / "gfree" (three children), "ghat" (two).
    """

    kind: str
    subs: tuple
    lam: object
    c: object = None
    f: tuple = None
    e1: int = None


def build_subinstances(inst: HolantInstance, scheme: str = "pinned", e=None):
    """Split off the attaching vertex of the dangling edge; None at the base case."""
    e = the_dangling_edge(inst, e)
    v = inst.dangling[e]
    others = [i for i in inst.incident[v] if i != e]
    if not others:
        return None
    for i in others:
        if i not in inst.edges:
            raise HolantError("recursion needs a single dangling edge")
    e1 = others[0]
    edge1 = inst.edges[e1]
    lam = edge1.lam
    sig = inst.vertices[v]
    if len(others) == 1:
        sub = remove_vertex(inst, v, drop={e})
        return SubBundle("h", (sub,), lam, f=sig.values[:3], e1=e1)

    c = sig.fibonacci_c()
    if c is None:
        raise HolantError(f"vertex {v} is not Fibonacci")
    connector = inst.fresh_edge_id()
    split = decompose_vertex(inst, v, others[1:], [e, e1], new_edge=connector)
    gadget = split.edges[connector].other(v)
    two = remove_vertex(split, gadget, drop={e})
    # the connector is now the dangling edge e' at v; give it e's id back
    dangling = dict(two.dangling)
    dangling[e] = dangling.pop(connector)
    two = HolantInstance(two.vertices, two.edges, dangling, validate=False)

    w = edge1.other(v)
    connected = w in two.component(v)
    if not connected:
        x_inst = pin_edge(two, e1, 0)
        y_inst = pin_edge(two, e, 0)
        return SubBundle("ghat", (x_inst, y_inst), lam, c=c, e1=e1)
    x_inst = pin_edge(two, e1, HALF if scheme == "free" else 0)
    y_inst = pin_edge(two, e, 0)
    z_inst = pin_edge(two, e, 1)
    kind = "gfree" if scheme == "free" else "g"
    return SubBundle(kind, (x_inst, y_inst, z_inst), lam, c=c, e1=e1)


def combine(bundle: SubBundle, pairs):
    if bundle.kind == "h":
        return h_pair(bundle.f, bundle.lam, pairs[0])
    if bundle.kind == "g":
        return g_pair(bundle.c, bundle.lam, *pairs)
    if bundle.kind == "gfree":
        return gfree_pair(bundle.c, bundle.lam, *pairs)
    if bundle.kind == "ghat":
        return ghat_pair(bundle.c, bundle.lam, *pairs)
    raise HolantError(bundle.kind)


# ---------------------------------------------------------------- estimator


@dataclass(frozen=True)
class RatioEstimate:
    value: float
    depth_used: int
    exact: bool

    @property
    def p0(self) -> float:
        """P(sigma(e) = 0) implied by the ratio."""
        return 0.0 if self.value == INF else 1.0 / (1.0 + self.value)


@dataclass
class Stats:
    nodes: int = 0
    exact: int = 0
    clamped: int = 0
    cache_hits: int = 0


def instance_family(inst: HolantInstance, fallback: FibonacciFamilyParams = None):
    """FibonacciFamilyParams observed in an instance; absent quantities are
    taken from ``fallback`` (they impose no constraint)."""
    c1, c2, p, q, l1, l2 = family_params(inst)
    fb = fallback
    if c1 is None:
        c1, c2 = (fb.c1, fb.c2) if fb else (1, 1)
    if p is None:
        p, q = (fb.p, fb.q) if fb else (1, 1)
    if l1 is None:
        l1, l2 = (fb.lambda_lo, fb.lambda_hi) if fb else (1, 1)
    try:
        return FibonacciFamilyParams(c1, c2, p, q, l1, l2)
    except HolantError as err:
        raise RegimeError(f"instance outside every Fibonacci family: {err}") from err


class Estimator:
    """Clamped computation-tree estimator R^t with memoization.

    Instances with SP <= threshold (default 2L) are solved exactly; otherwise
    R^0 = R1 and R^t = Med(R1, recursion(R^{t-1} of children), R2).
    """

    def __init__(self, regime: RecursionRegime, threshold: int = None, use_cache: bool = True,
                 shallow_method: str = "auto"):
        self.regime = regime
        self.threshold = 2 * regime.L if threshold is None else threshold
        self.use_cache = use_cache
        self.shallow_method = shallow_method
        self.cache = {}
        self.exact_cache = {}
        self.stats = Stats()

    def check(self, inst: HolantInstance, force: bool = False):
        if not self.regime.certified:
            if not force:
                raise RegimeError("regime is not certified; pass force to run anyway")
            log.warning("running with an uncertified regime")
            return
        fam = instance_family(inst, self.regime.params)
        if not self.regime.covers(fam):
            if not force:
                raise RegimeError(f"instance family {fam} outside regime {self.regime.kind}")
            log.warning("instance outside the certified family; results carry no guarantee")

    def pair(self, inst: HolantInstance, t: int) -> tuple:
        """Normalized (Z0, Z1) of the estimate R^t and whether it is exact."""
        e = the_dangling_edge(inst)
        comp = inst.restrict(inst.component(inst.dangling[e]))
        self.stats.nodes += 1
        key = comp.key
        if self.use_cache and key in self.exact_cache:
            self.stats.cache_hits += 1
            return self.exact_cache[key], True
        if self.use_cache and (key, t) in self.cache:
            self.stats.cache_hits += 1
            return self.cache[(key, t)], False
        deep, _ = simple_path_reaches(comp, e, self.threshold)
        if not deep:
            pair = _norm(shallow_exact_pair(comp, self.shallow_method))
            self.stats.exact += 1
            if self.use_cache:
                self.exact_cache[key] = pair
            return pair, True
        R1, R2 = self.regime.R1, self.regime.R2
        if t <= 0:
            pair = _pair(R1)
        else:
            bundle = build_subinstances(comp, self.regime.scheme, e)
            kids = [self.pair(s, t - 1)[0] for s in bundle.subs]
            raw = _ratio(combine(bundle, kids))
            if math.isnan(raw):
                raise NumericFault("0/0 in recursion")
            clamped = med(R1, raw, R2)
            if clamped != raw:
                self.stats.clamped += 1
            pair = _norm(_pair(clamped))
        if self.use_cache:
            self.cache[(key, t)] = pair
        return pair, False

    def ratio(self, inst: HolantInstance, t: int) -> RatioEstimate:
        pair, exact = self.pair(inst, t)
        return RatioEstimate(_ratio(pair), t, exact)

    # -- tolerance bookkeeping --------------------------------------------

    def depth_for_ratio_tol(self, tol: float) -> int:
        r = self.regime
        C = r.error_constant()
        if not math.isfinite(C):
            raise RegimeError("clamp window unbounded; cannot size the recursion depth")
        return depth_for_eps(r.alpha, C, tol)

    def depth_for_marginal(self, eps: float) -> int:
        """Depth so that every chained dangling marginal has relative error
        <= eps/10, which keeps a regular-edge marginal within eps."""
        if not self.regime.certified:
            return FORCED_DEPTH
        delta = eps / 10
        lo = min(1.0, self.regime.R1, float(self.regime.params.p))
        if lo <= 0:
            raise RegimeError("ratio lower bound is 0; give an explicit depth")
        return self.depth_for_ratio_tol(delta * lo / 2)


def _norm(pair):
    a, b = float(pair[0]), float(pair[1])
    s = abs(a) + abs(b)
    if s == 0 or not math.isfinite(s):
        if math.isinf(b) and math.isfinite(a):
            return (0.0, 1.0)
        return (a, b)
    return (a / s, b / s)


def estimate_ratio(inst: HolantInstance, t: int, regime: RecursionRegime, bounds: ClampBounds = None,
                   force: bool = False, threshold: int = None, use_cache: bool = True,
                   estimator: Estimator = None) -> RatioEstimate:
    """R^t of a single-dangling instance under a regime."""
    if bounds is not None and (bounds.R1, bounds.R2, bounds.L) != (regime.R1, regime.R2, regime.L):
        from dataclasses import replace

        regime = replace(regime, bounds=bounds)
    est = estimator or Estimator(regime, threshold, use_cache)
    inst = inst.as_float()
    est.check(inst, force)
    return est.ratio(inst, t)


# ---------------------------------------------------------------- regular edges


def _reduce_endpoint(inst: HolantInstance, e: int, w: int):
    """Decompose endpoint w of e until e's endpoint has degree <= 3."""
    inc = inst.incident[w]
    if len(inc) <= 3:
        return inst, w
    others = [i for i in inc if i != e]
    connector = inst.fresh_edge_id()
    split = decompose_vertex(inst, w, others[1:], [e, others[0]], new_edge=connector)
    return split, split.edges[connector].other(w)


def marginal_of_regular_edge(inst: HolantInstance, e: int, eps: float, regime: RecursionRegime = None,
                             estimator: Estimator = None, depth: int = None, force: bool = False):
    """Estimate P(sigma(e) = 0) for a regular edge to additive error eps.

    The endpoints are removed; the at most four boundary edges become
    dangling, and their joint law factors into a chain of single-dangling
    ratios (earlier edges pinned, later edges half-pinned).
    """
    if estimator is None:
        estimator = Estimator(regime)
        estimator.check(inst.as_float(), force)
    inst = close_all_dangling(inst).as_float() if inst.dangling else inst.as_float()
    if e not in inst.edges:
        raise HolantError(f"{e} is not a regular edge")
    if depth is None:
        depth = estimator.depth_for_marginal(eps)
    ed = inst.edges[e]
    inst, a = _reduce_endpoint(inst, e, ed.u)
    inst, b = _reduce_endpoint(inst, e, inst.edges[e].other(a))
    lam_e = inst.edges[e].lam

    internal, external = [], []
    for i in sorted(set(inst.incident[a]) | set(inst.incident[b])):
        if i == e:
            continue
        x = inst.edges[i]
        (internal if {x.u, x.v} == {a, b} else external).append(i)

    rest = remove_vertex(remove_vertex(inst, a), b)
    rest = HolantInstance(rest.vertices, rest.edges, {i: w for i, w in rest.dangling.items() if i in external},
                          validate=False)

    # chain factorization of the boundary law
    probs = {}

    def chain(prefix):
        k = len(prefix)
        if k == len(external):
            return
        inst_k = rest
        for i, xi in zip(external, prefix):
            inst_k = pin_edge(inst_k, i, xi)
        for i in external[k + 1:]:
            inst_k = pin_edge(inst_k, i, HALF)
        p0 = estimator.ratio(inst_k, depth).p0
        probs[prefix] = p0
        chain(prefix + (0,))
        chain(prefix + (1,))

    chain(())

    Fa, Fb = inst.vertices[a].values, inst.vertices[b].values
    ext_a = [i for i in external if a in (inst.edges[i].u, inst.edges[i].v)]
    num = den = 0.0
    for x in itertools.product((0, 1), repeat=len(external)):
        pd = 1.0
        for k in range(len(external)):
            p0 = probs[x[:k]]
            pd *= p0 if x[k] == 0 else 1.0 - p0
        if pd == 0:
            continue
        wx = 1.0
        na = nb = 0
        for i, xi in zip(external, x):
            if xi:
                wx *= inst.edges[i].lam
                if i in ext_a:
                    na += 1
                else:
                    nb += 1
        for y in itertools.product((0, 1), repeat=len(internal)):
            wy = wx
            for i, yi in zip(internal, y):
                if yi:
                    wy *= inst.edges[i].lam
            ny = sum(y)
            w0 = Fa[na + ny] * Fb[nb + ny]
            w1 = lam_e * Fa[na + ny + 1] * Fb[nb + ny + 1]
            num += pd * wy * w0
            den += pd * wy * (w0 + w1)
    if den == 0:
        raise NumericFault("all boundary assignments have zero weight")
    return num / den


# ---------------------------------------------------------------- partition function


@dataclass
class ZEstimate:
    value: float
    assignment: dict
    marginals: list
    depth: int
    stats: Stats = field(default_factory=Stats)


def estimate_Z(inst: HolantInstance, eps: float, regime: RecursionRegime = None, force: bool = False,
               depth: int = None, threshold: int = None, use_cache: bool = True) -> ZEstimate:
    """Sequential-pinning estimate with (1 - eps) Z <= Z_hat <= (1 + eps) Z
    under the regime's decay guarantee."""
    if regime is None:
        raise RegimeError("no regime given")
    closed = close_all_dangling(inst) if inst.dangling else inst
    order = sorted(closed.edges)
    m = len(order)
    est = Estimator(regime, threshold, use_cache)
    work = closed.as_float()
    est.check(work, force)
    if m == 0:
        return ZEstimate(closed.config_weight({}), {}, [], 0, est.stats)
    eps_m = eps / (6 * m)
    if depth is None:
        depth = est.depth_for_marginal(eps_m)
    assignment, chosen = {}, []
    for e in order:
        p0 = marginal_of_regular_edge(work, e, eps_m, estimator=est, depth=depth)
        if not (-1e-12 <= p0 <= 1 + 1e-12) or math.isnan(p0):
            raise NumericFault(f"marginal estimate {p0} outside [0, 1]")
        x = 0 if p0 >= 0.5 else 1
        P = p0 if x == 0 else 1.0 - p0
        if P <= 0:
            raise NumericFault("chosen marginal is zero")
        assignment[e] = x
        chosen.append(P)
        work = pin_edge(work, e, x)
    w = closed.config_weight(assignment)
    denom = 1.0
    for P in chosen:
        denom *= P
    value = float(w) / denom if not isinstance(w, Fraction) else float(w) / denom
    return ZEstimate(value, assignment, chosen, depth, est.stats)
