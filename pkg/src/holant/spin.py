"""Two-state spin systems through Fibonacci Holant instances.

A ferromagnetic system [[beta, 1], [1, gamma]] with field mu on the
gamma-spin maps, under the basis [[1, t], [rho, -t/rho]], to a Fibonacci
instance with c = rho - 1/rho and uniform edge weight lam.  The tractable
region is bounded by three one-parameter curves; points below a curve are
reached by shrinking |t| along a hyperbola beta * gamma = const.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .bounds import RegimeError, select_regime, thm1_window
from .core import (
    Edge,
    FibonacciFamilyParams,
    HolantError,
    HolantInstance,
    SymmetricSignature,
    ratio_bounds,
)
from .recursion import estimate_Z, instance_family

RHO_G1 = 2.92  # t = 1 branch, c = 2.5775 (above the THM3 threshold)
RHO_G2 = 1.75  # t = -1 branch, c = 1.1786 (above the THM2 threshold)
SPIN_CAP = 24
MATCH_TOL = 1e-9


@dataclass(frozen=True)
class TwoSpinSystem:
    beta: float
    gamma: float
    mu: float = 1.0

    def __post_init__(self):
        if self.beta < 0 or self.gamma < 0:
            raise HolantError("beta, gamma must be non-negative")
        if not 0 < self.mu <= 1:
            raise HolantError("field mu must lie in (0, 1]")

    @property
    def ferromagnetic(self) -> bool:
        return self.beta * self.gamma > 1


@dataclass(frozen=True)
class BridgeParams:
    rho: float
    t: float
    lam: float

    def __post_init__(self):
        if self.lam <= 0 or self.rho < 1 or self.t == 0 or abs(self.t) > 1 + 1e-12:
            raise HolantError(f"invalid bridge parameters {self}")
        if self.t * (1 - self.lam) <= 0:
            raise HolantError("need t(1 - lam) > 0")

    @property
    def c(self) -> float:
        return self.rho - 1 / self.rho

    @property
    def scale(self) -> float:
        """Per-edge factor t(1 - lam) between the Holant and spin edge matrices."""
        return self.t * (1 - self.lam)


def bridge_to_spin(bp: BridgeParams) -> tuple:
    if bp.lam == 1:
        raise HolantError("lam = 1 is singular")
    beta = (1 + bp.lam * bp.rho**2) / (bp.t * (1 - bp.lam))
    gamma = bp.t * (1 + bp.lam / bp.rho**2) / (1 - bp.lam)
    return beta, gamma


# ---------------------------------------------------------------- graphs


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple

    def degrees(self) -> list:
        d = [0] * self.n
        for u, v in self.edges:
            d[u] += 1
            d[v] += 1
        return d

    def to_json(self):
        return {"n": self.n, "edges": [list(e) for e in self.edges]}


def graph_from_json(obj) -> Graph:
    n = int(obj["n"])
    edges = tuple((int(u), int(v)) for u, v in obj["edges"])
    for u, v in edges:
        if u == v or not (0 <= u < n and 0 <= v < n):
            raise HolantError(f"bad edge {(u, v)}")
    return Graph(n, edges)


def load_spin_problem(path):
    with open(path) as fh:
        obj = json.load(fh)
    spin = TwoSpinSystem(float(obj["beta"]), float(obj["gamma"]), float(obj.get("mu", 1.0)))
    return spin, graph_from_json(obj["graph"])


def spin_Z(spin: TwoSpinSystem, graph: Graph, cap: int = SPIN_CAP) -> float:
    """Brute-force sum over all 2^n spin assignments."""
    n = graph.n
    if n > cap:
        raise HolantError(f"{n} vertices exceed the spin brute-force cap {cap}")
    A = np.array([[spin.beta, 1.0], [1.0, spin.gamma]])
    total = 0.0
    chunk = 1 << 15
    for start in range(0, 1 << n, chunk):
        idx = np.arange(start, min(start + chunk, 1 << n), dtype=np.int64)
        bits = (idx[:, None] >> np.arange(n)) & 1
        w = spin.mu ** bits.sum(axis=1).astype(float)
        for u, v in graph.edges:
            w = w * A[bits[:, u], bits[:, v]]
        total += float(w.sum())
    return total


def bridge_signature(bp: BridgeParams, mu: float, n: int, normalize: bool = True) -> SymmetricSignature:
    """rho^k + mu t^n (-rho)^(-k), optionally divided by t(1-lam)^(n/2)."""
    s = bp.scale ** (-n / 2) if normalize else 1.0
    vals = []
    for k in range(n + 1):
        f = bp.rho**k + mu * bp.t**n * (-bp.rho) ** (-k)
        if f < 0:
            if f < -1e-12 * bp.rho**k:
                raise HolantError("negative signature entry")
            f = 0.0
        vals.append(f * s)
    return SymmetricSignature(tuple(vals))


def spin_to_fibonacci(spin: TwoSpinSystem, graph: Graph, bp: BridgeParams, normalize: bool = True,
                      tol: float = MATCH_TOL) -> HolantInstance:
    """Fibonacci instance on the same graph.  With normalize (default) its
    partition function equals the spin one; without, it is larger by the
    factor t(1-lam)^|E|."""
    beta, gamma = bridge_to_spin(bp)
    res = max(abs(beta - spin.beta) / max(1, spin.beta), abs(gamma - spin.gamma) / max(1, spin.gamma))
    if res > tol:
        raise HolantError(f"bridge parameters give ({beta}, {gamma}), residual {res:.3g}")
    deg = graph.degrees()
    verts = {v: bridge_signature(bp, spin.mu, deg[v], normalize) for v in range(graph.n)}
    edges = [Edge(i, u, v, float(bp.lam)) for i, (u, v) in enumerate(graph.edges)]
    return HolantInstance(verts, edges, {})


def bridge_family(rho: float, mu: float, t: float, max_degree: int = 32) -> tuple:
    """(p, q): extreme consecutive ratios of the bridge signatures over arities 1..max_degree."""
    lo, hi = math.inf, 0.0
    for n in range(1, max_degree + 1):
        vals = [rho**k + mu * t**n * (-rho) ** (-k) for k in range(n + 1)]
        vals = [max(v, 0.0) for v in vals]
        a, b = ratio_bounds(vals)
        if a is None:
            continue
        lo, hi = min(lo, a), max(hi, b)
    return lo, hi


# ---------------------------------------------------------------- the curve


def _g1(beta):
    if beta < 1:
        raise HolantError("beta must be >= 1")
    lam = (beta - 1) / (beta + RHO_G1**2)
    return (1 + lam / RHO_G1**2) / (1 - lam)


def _g2(beta):
    if beta <= RHO_G2**2:
        return -math.inf
    lam = (beta + 1) / (beta - RHO_G2**2)
    return (1 + lam / RHO_G2**2) / (lam - 1)


def gamma1(beta: float) -> float:
    return _g1(beta)


def gamma2(beta: float) -> float:
    return _g2(beta)


RHO_GRID = tuple(1 + 10 ** (-3 + 3.5 * i / 95) for i in range(96))


@lru_cache(maxsize=8)
def gamma3_table(mu: float = 1.0) -> tuple:
    """(rho, lam2, beta, gamma) rows of the t = -1 THM1 curve on a rho grid.

    lam2 is the upper end of the decay-certified lam window for the family
    of bridge signatures at (rho, mu, t = -1)."""
    rows = []
    for rho in RHO_GRID:
        c = rho - 1 / rho
        p, q = bridge_family(rho, mu, -1.0)
        if not p > 0:
            continue
        window = thm1_window(c, p, q)
        if window is None or window[1] <= 1:
            continue
        lam2 = window[1]
        beta = (1 + rho**2 * lam2) / (lam2 - 1)
        gamma = (1 + lam2 / rho**2) / (lam2 - 1)
        rows.append((rho, lam2, beta, gamma))
    return tuple(rows)


def _corner(rho, lam2):
    """(beta, gamma) on the t = -1 curve at lam = lam2."""
    return (1 + rho**2 * lam2) / (lam2 - 1), (1 + lam2 / rho**2) / (lam2 - 1)


@lru_cache(maxsize=8)
def _g3_branch(mu: float = 1.0) -> tuple:
    """Table rows up to the smallest corner beta.  Along them beta, gamma and
    beta * gamma all fall as rho grows; the rows past the turn are dominated."""
    rows = gamma3_table(mu)
    if not rows:
        return ()
    k = min(range(len(rows)), key=lambda i: rows[i][2])
    return rows[: k + 1]


def lam2_at(rho: float, mu: float = 1.0):
    """lam2 linearly interpolated in rho over the table; None off the branch."""
    rows = _g3_branch(mu)
    if not rows or not rows[0][0] <= rho <= rows[-1][0]:
        return None
    return float(np.interp(rho, [r[0] for r in rows], [r[1] for r in rows]))


def _bisect_rho(mu, key, target):
    """rho on the branch with key(corner) = target, where key falls with rho.
    Returns the end of the final bracket on the low-key side."""
    rows = _g3_branch(mu)
    vals = [key(r[2], r[3]) for r in rows]
    if len(rows) < 2 or not vals[-1] <= target <= vals[0]:
        return None
    i = next(j for j in range(1, len(rows)) if vals[j] <= target)
    lo, hi = rows[i - 1][0], rows[i][0]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if key(*_corner(mid, lam2_at(mid, mu))) > target:
            lo = mid
        else:
            hi = mid
    return hi


def gamma3(beta: float, mu: float = 1.0) -> float:
    """The t = -1 corner curve rho -> (beta, gamma) at lam = lam2(rho),
    inverted for gamma at the given beta; -inf outside its beta range."""
    rho = _bisect_rho(mu, lambda b, g: b, beta)
    if rho is None:
        return -math.inf
    return _corner(rho, lam2_at(rho, mu))[1]


def gamma_curve(beta: float, mu: float = 1.0) -> float:
    if beta < 1:
        raise HolantError("beta must be >= 1")
    return max(gamma1(beta), gamma2(beta), gamma3(beta, mu))


def gamma_branches(beta: float, mu: float = 1.0) -> tuple:
    return gamma1(beta), gamma2(beta), gamma3(beta, mu)


# ---------------------------------------------------------------- classification


def lam_for_product(rho: float, product: float, positive_t: bool):
    """lam on the |t| = 1 curve with beta * gamma = product.

    With u = |1 - lam|, A = 1 + rho^2, B = 1 + rho^-2 and K = A/rho^2 + B rho^2
    the condition reads (P - 1) u^2 -/+ K u - A B = 0 (minus for lam > 1);
    solving for u avoids the cancellation in 1 - lam near lam = 1."""
    P = product
    if P <= 1:
        return None
    A, B = 1 + rho**2, 1 + rho**-2
    K = A / rho**2 + B * rho**2
    root = math.sqrt(K * K + 4 * (P - 1) * A * B)
    if positive_t:
        u = 2 * A * B / (K + root)
        return 1 - u if u < 1 else None
    return 1 + (K + root) / (2 * (P - 1))


@dataclass(frozen=True)
class SpinVerdict:
    tractable: bool
    witness: BridgeParams = None
    branch: str = None
    swapped: bool = False
    reason: str = ""

    def to_json(self):
        w = None
        if self.witness is not None:
            w = {"rho": self.witness.rho, "t": self.witness.t, "lambda": self.witness.lam}
        return {"tractable": self.tractable, "branch": self.branch, "swapped": self.swapped,
                "witness": w, "reason": self.reason}


def _witness(beta, gamma, rho, positive_t, lam_max=None):
    lam = lam_for_product(rho, beta * gamma, positive_t)
    if lam is None or (lam_max is not None and lam > lam_max):
        return None
    sign = 1.0 if positive_t else -1.0
    beta_star = (1 + lam * rho**2) / (sign * (1 - lam))
    t = sign * beta_star / beta
    if abs(t) > 1 + 1e-12:
        return None
    return BridgeParams(rho, max(-1.0, min(1.0, t)), lam)


def _g3_witness(beta, gamma, mu):
    """Corner with the same product (on the side where lam <= lam2), rescaled."""
    rho = _bisect_rho(mu, lambda b, g: b * g, beta * gamma)
    if rho is None:
        return None
    return _witness(beta, gamma, rho, False, lam2_at(rho, mu))


def classify_spin(spin: TwoSpinSystem) -> SpinVerdict:
    """Tractable iff beta * gamma > 1 and gamma <= Gamma(beta) (after the swap);
    the witness is the boundary point with the same product, rescaled in t."""
    beta, gamma, mu = spin.beta, spin.gamma, spin.mu
    swapped = False
    if gamma > beta:
        if mu != 1:
            return SpinVerdict(False, reason="gamma > beta with a field; the swap needs mu = 1")
        beta, gamma, swapped = gamma, beta, True
    if beta * gamma <= 1:
        return SpinVerdict(False, swapped=swapped, reason="beta * gamma <= 1 (not ferromagnetic)")
    curve = gamma_curve(beta, mu)
    if gamma > curve * (1 + MATCH_TOL):
        return SpinVerdict(False, swapped=swapped,
                           reason=f"gamma = {gamma:.6g} above the tractable curve ({curve:.6g})")
    searches = [
        ("G1", lambda: _witness(beta, gamma, RHO_G1, True)),
        ("G2", lambda: _witness(beta, gamma, RHO_G2, False)),
        ("G3", lambda: _g3_witness(beta, gamma, mu)),
    ]
    searches += [("G3", lambda r=r: _witness(beta, gamma, r[0], False, r[1])) for r in gamma3_table(mu)]
    for branch, search in searches:
        w = search()
        if w is not None:
            return SpinVerdict(True, w, branch, swapped)
    return SpinVerdict(False, swapped=swapped, reason="below the curve but no witness found")


def estimate_spin_Z(spin: TwoSpinSystem, graph: Graph, eps: float, **kwargs):
    """Approximate Z of the spin system; returns (Z_hat, verdict, regime)."""
    verdict = classify_spin(spin)
    if not verdict.tractable:
        raise RegimeError(f"outside the tractable region: {verdict.reason}")
    canon = TwoSpinSystem(spin.gamma, spin.beta, spin.mu) if verdict.swapped else spin
    inst = spin_to_fibonacci(canon, graph, verdict.witness)
    if not inst.edges:
        return float(inst.config_weight({})), verdict, None
    c = verdict.witness.c
    fam = instance_family(inst, FibonacciFamilyParams(c, c, 1, 1, 1, 1))
    params = FibonacciFamilyParams(c, c, fam.p, fam.q, fam.lambda_lo, fam.lambda_hi)
    regime = select_regime(params)
    if regime is None:
        raise RegimeError(f"bridge family {params} has no certified regime")
    est = estimate_Z(inst, eps, regime, **kwargs)
    return est.value, verdict, regime
