"""Clamp windows, amortized decay rates and regime selection.

The recursion maps are

    h(x)      = (mu + (c mu + 1) lam x) / (1 + lam mu x)
    g(x,y,z)  = (lam y + x + c lam x z) / (1 + lam x z)
    ghat(x,y) = g(x, y, y)
    gfree     = (x(1+y) + lam y(1+z) + lam c x(1+y) z) / (1 + z + lam x(1+y) z)

where gfree is the variant in which the first sub-instance keeps the other
edge free.  A potential Phi turns contraction of the maps into
alpha = sum |d map / d arg| Phi(arg) / Phi(map).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .core import INF, FibonacciFamilyParams, HolantError, rho_of

C0_THM2 = 1.17
ALPHA_THM2_G = 0.9
C_THM3 = 4 * math.sqrt(math.sqrt(2) - 1)
BIG = 1e9  # numeric stand-in for +inf on reparameterized grid axes


class UnboundedFamilyError(HolantError):
    pass


class RegimeError(HolantError):
    pass


def thm2_h_bound(p: float) -> float:
    """max{1/2, (1+p+p^2)/((1+p)(1+2p))}."""
    return max(0.5, (1 + p + p * p) / ((1 + p) * (1 + 2 * p)))


# ---------------------------------------------------------------- clamp windows


def _h_corner(c, p, s):
    """h with lam*x folded into s = lam x, including limits at infinity."""
    if s == 0:
        return p
    if c == INF:
        return INF
    if p == INF:
        return c if s == INF else c + 1 / s
    if s == INF:
        return c + 1 / p
    return (p + s + c * p * s) / (1 + p * s)


def interval_step(params: FibonacciFamilyParams, I: tuple) -> tuple:
    """Range of h over the family box and x in I, by corner enumeration.

    h depends on lam and x only through s = lam x and is a Moebius map in
    each of c, p, s separately, so extremes sit at corners (or limits).
    """
    lo, hi = I
    if not (0 <= lo <= hi):
        raise HolantError(f"degenerate interval {I}")
    s_lo = params.lambda_lo * lo
    s_hi = 0.0 if hi == 0 else params.lambda_hi * hi
    vals = [
        _h_corner(c, p, s)
        for c in {params.c1, params.c2}
        for p in {params.p, params.q}
        for s in {s_lo, s_hi}
    ]
    return (min(vals), max(vals))


@dataclass(frozen=True)
class ClampBounds:
    R1: float
    R2: float
    L: int


def compute_clamp_bounds(params: FibonacciFamilyParams, L: int | None = None,
                         max_iter: int = 64, tol: float = 1e-6) -> ClampBounds:
    """Iterate interval_step from [0, inf) L times (or until the width settles)."""
    I = (0.0, INF)
    if L is not None:
        for _ in range(L):
            I = interval_step(params, I)
        if I[1] == INF:
            raise UnboundedFamilyError(f"clamp window still unbounded after L={L} steps")
        return ClampBounds(I[0], I[1], L)
    width = INF
    for k in range(1, max_iter + 1):
        I = interval_step(params, I)
        new_width = I[1] - I[0]
        if new_width < INF and abs(width - new_width) <= tol:
            return ClampBounds(I[0], I[1], k)
        width = new_width
    if I[1] == INF:
        raise UnboundedFamilyError("clamp window unbounded")
    return ClampBounds(I[0], I[1], max_iter)


# ---------------------------------------------------------------- potentials


@dataclass(frozen=True)
class Potential:
    """CONSTANT: Phi = 1, phi(x) = x.  IDENTITY: Phi = x, phi = log."""

    kind: str

    def __post_init__(self):
        if self.kind not in ("CONSTANT", "IDENTITY"):
            raise HolantError(f"unknown potential {self.kind}")

    def Phi(self, x):
        return np.ones_like(x) if self.kind == "CONSTANT" else x

    def phi(self, x):
        return x if self.kind == "CONSTANT" else np.log(x)

    def sup_Phi(self, lo, hi):
        return 1.0 if self.kind == "CONSTANT" else hi

    def error_constant(self, R1, R2) -> float:
        """C with |R^t - R| <= C alpha^t for clamped estimates in [R1, R2]."""
        spread = (R2 - R1) if self.kind == "CONSTANT" else math.log(R2 / R1)
        return max(1.0, self.sup_Phi(R1, R2) * spread)


CONSTANT = Potential("CONSTANT")
IDENTITY = Potential("IDENTITY")


# ---------------------------------------------------------------- maps and derivatives


def h_map(x, mu, c, lam):
    D = 1 + lam * mu * x
    return (mu + (c * mu + 1) * lam * x) / D, lam * (c * mu + 1 - mu * mu) / (D * D)


def g_map(x, y, z, c, lam):
    D = 1 + lam * x * z
    val = (lam * y + x + c * lam * x * z) / D
    gx = (1 + c * lam * z - lam * lam * y * z) / (D * D)
    gy = lam / D
    gz = lam * x * (c - x - lam * y) / (D * D)
    return val, gx, gy, gz


def ghat_map(x, y, c, lam):
    D = 1 + lam * x * y
    val = (lam * y + x + c * lam * x * y) / D
    gx = (1 + c * lam * y - lam * lam * y * y) / (D * D)
    gy = lam * (1 + c * x - x * x) / (D * D)
    return val, gx, gy


def gfree_map(x, y, z, c, lam):
    D = 1 + z + lam * x * (1 + y) * z
    val = (x * (1 + y) + lam * y * (1 + z) + lam * c * x * (1 + y) * z) / D
    D2 = D * D
    gx = -(y + 1) * (z + 1) * (-c * lam * z + lam * lam * y * z - 1) / D2
    gy = (z + 1) * (lam * (c * x * z + z + 1) + lam * lam * x * z + x) / D2
    gz = -x * (y + 1) * (lam * (x - c + y * (lam + x)) + 1) / D2
    return val, gx, gy, gz


RATES = ("a1", "a2", "a3", "a4")


def decay_rate(which: str, point: dict, phi: Potential = IDENTITY, variant: str = "pinned"):
    """Evaluate one amortized decay rate at a point (scalars or arrays).

    point holds x, y, z, mu, lam, c as needed:
      a1: h at (x, mu); a2: g (or gfree) at (x, y, z);
      a3: ghat w.r.t. x at (x, y); a4: ghat w.r.t. y at (x, y).
    """
    P = phi.Phi
    c, lam = point["c"], point["lam"]
    if which == "a1":
        x, mu = point["x"], point["mu"]
        val, d = h_map(x, mu, c, lam)
        return P(x) * abs(d) / P(val)
    if which == "a2":
        x, y, z = point["x"], point["y"], point["z"]
        fn = gfree_map if variant == "free" else g_map
        val, gx, gy, gz = fn(x, y, z, c, lam)
        return (abs(gx) * P(x) + abs(gy) * P(y) + abs(gz) * P(z)) / P(val)
    if which in ("a3", "a4"):
        x, y = point["x"], point["y"]
        val, gx, gy = ghat_map(x, y, c, lam)
        if which == "a3":
            return abs(gx) * P(x) / P(val)
        return abs(gy) * P(y) / P(val)
    raise HolantError(f"unknown rate {which}")


# ---------------------------------------------------------------- grid verification

AXES = ("c", "lam", "x", "y", "z", "mu")


@dataclass(frozen=True)
class ParameterBox:
    """Closed interval per axis; a lower end given as the string "c" ties
    that axis to the current value of c (e.g. x >= c)."""

    c: tuple
    lam: tuple
    x: tuple
    y: tuple = None
    z: tuple = None
    mu: tuple = None

    def to_json(self):
        out = {}
        for a in AXES:
            iv = getattr(self, a)
            if iv is not None:
                out[a] = [_json_num(iv[0]), _json_num(iv[1])]
        return out


def _json_num(v):
    if isinstance(v, str):
        return v
    return "inf" if v == INF else float(v)


def axis_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """n points on [lo, hi]; infinite upper ends use u = v/(1+v)."""
    if lo == hi:
        return np.array([float(lo)])
    if hi == INF:
        u = np.linspace(lo / (1 + lo), 1.0, n)
        with np.errstate(divide="ignore"):
            v = np.where(u < 1, u / np.where(u < 1, 1 - u, 1), BIG)
        v[0] = lo
        return np.minimum(v, BIG)
    return np.linspace(lo, hi, n)


RATE_AXES = {
    "a1": ("x", "mu"),
    "a2": ("x", "y", "z"),
    "a3": ("x", "mu"),   # y exact: taken from the mu axis
    "a4": ("y", "mu"),   # x exact: taken from the mu axis
}


@dataclass
class DecayReport:
    sup_alpha: float
    argmax: dict
    grid_n: int
    box: dict
    per_rate: dict = field(default_factory=dict)
    corner_checked: bool = True

    def to_json(self):
        return {
            "sup_alpha": self.sup_alpha,
            "argmax": self.argmax,
            "grid_n": self.grid_n,
            "box": self.box,
            "per_rate": self.per_rate,
            "corner_checked": self.corner_checked,
        }


def _sup_one(rate, box: ParameterBox, phi, grid_n, variant):
    inner = RATE_AXES[rate]
    best, arg = -INF, None
    for c in axis_grid(*_resolve(box.c, None), grid_n):
        grids = {a: axis_grid(*_resolve(getattr(box, a), c), grid_n) for a in inner}
        lam_grid = axis_grid(*box.lam, grid_n)
        mesh = np.meshgrid(*(grids[a] for a in inner), indexing="ij")
        named = dict(zip(inner, mesh))
        for lam in lam_grid:
            pt = {"c": c, "lam": lam}
            if rate == "a1":
                pt.update(x=named["x"], mu=named["mu"])
            elif rate == "a2":
                pt.update(x=named["x"], y=named["y"], z=named["z"])
            elif rate == "a3":
                pt.update(x=named["x"], y=named["mu"])
            else:
                pt.update(x=named["mu"], y=named["y"])
            with np.errstate(all="ignore"):
                vals = decay_rate(rate, pt, phi, variant)
            vals = np.where(np.isnan(vals), -INF, vals)
            k = int(np.argmax(vals))
            if vals.flat[k] > best:
                best = float(vals.flat[k])
                idx = np.unravel_index(k, vals.shape)
                arg = {"c": float(c), "lam": float(lam)}
                arg.update({a: float(named[a][idx]) for a in inner})
    return best, arg


def _resolve(iv, c):
    if iv is None:
        raise HolantError("axis required by this rate is missing from the box")
    lo, hi = iv
    if isinstance(lo, str):
        lo = c
    if isinstance(hi, str):
        hi = c
    return float(lo), float(hi)


def verify_decay_on_box(box: ParameterBox, rates=RATES, phi: Potential = IDENTITY,
                        grid_n: int = 64, variant: str = "pinned") -> DecayReport:
    """Grid supremum of the requested decay rates over a parameter box.

    Axis endpoints are always grid points, so corners are included.  The
    result is numerical evidence, not a proof.
    """
    if grid_n < 2:
        raise HolantError("grid_n must be at least 2")
    per, best, arg = {}, -INF, None
    for r in rates:
        s, a = _sup_one(r, box, phi, grid_n, variant)
        per[r] = s
        if s > best:
            best, arg = s, dict(a, rate=r)
    return DecayReport(best, arg, grid_n, box.to_json(), per)


# ---------------------------------------------------------------- depth


def depth_for_eps(alpha: float, C: float, eps: float) -> int:
    """Smallest t >= 0 with C alpha^t <= eps."""
    if not (0 < alpha < 1):
        raise HolantError("alpha must lie in (0, 1)")
    if C <= eps:
        return 0
    t = max(0, math.ceil(math.log(C / eps) / math.log(1 / alpha)))
    while C * alpha**t > eps:
        t += 1
    while t > 0 and C * alpha ** (t - 1) <= eps:
        t -= 1
    return t


# ---------------------------------------------------------------- regimes


@dataclass(frozen=True)
class RecursionRegime:
    kind: str  # THM1 | THM2 | THM3 | FORCED
    params: FibonacciFamilyParams
    alpha: float
    bounds: ClampBounds
    potential: Potential
    scheme: str  # "pinned" or "free" (first sub-instance keeps e1 free)
    certified: bool = True
    verified_sup: float = None

    @property
    def L(self) -> int:
        return self.bounds.L

    @property
    def R1(self) -> float:
        return self.bounds.R1

    @property
    def R2(self) -> float:
        return self.bounds.R2

    def error_constant(self) -> float:
        return self.potential.error_constant(self.R1, self.R2)

    def covers(self, params: FibonacciFamilyParams, tol: float = 1e-9) -> bool:
        f = self.params
        return (
            params.c1 >= f.c1 - tol and params.c2 <= f.c2 + tol
            and params.p >= f.p * (1 - tol) and params.q <= f.q * (1 + tol)
            and params.lambda_lo >= f.lambda_lo * (1 - tol)
            and params.lambda_hi <= f.lambda_hi * (1 + tol)
        )

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "L": self.L,
            "R1": self.R1,
            "R2": self.R2,
            "potential": self.potential.kind,
            "scheme": self.scheme,
            "certified": self.certified,
            "verified_sup": self.verified_sup,
            "family": self.params.to_json(),
        }


def float_params(params: FibonacciFamilyParams) -> FibonacciFamilyParams:
    return FibonacciFamilyParams(*(float(getattr(params, k)) for k in
                                   ("c1", "c2", "p", "q", "lambda_lo", "lambda_hi")))


def regime_box(params: FibonacciFamilyParams, bounds: ClampBounds) -> ParameterBox:
    window = (bounds.R1, bounds.R2)
    return ParameterBox(
        c=(params.c1, params.c2),
        lam=(params.lambda_lo, params.lambda_hi),
        x=window, y=window, z=window,
        mu=(params.p, params.q),
    )


def _verified(params, bounds, phi, variant, grid_n):
    return verify_decay_on_box(regime_box(params, bounds), RATES, phi, grid_n, variant)


def thm2_L(params: FibonacciFamilyParams) -> int:
    """Warm-up depth L >= c0^2 + c0/p0 after which R >= c0."""
    return max(1, math.ceil(C0_THM2**2 + C0_THM2 / params.p - 1e-12))


def _thm2(params, grid_n, L):
    bounds = compute_clamp_bounds(params, thm2_L(params) if L is None else L)
    rep = _verified(params, bounds, IDENTITY, "free", grid_n)
    target = max(ALPHA_THM2_G, thm2_h_bound(params.p))
    alpha = target if rep.sup_alpha <= target + 1e-9 else rep.sup_alpha
    if alpha >= 1:
        return None
    return RecursionRegime("THM2", params, alpha, bounds, IDENTITY, "free", True, rep.sup_alpha)


def _thm3(params, grid_n, L):
    bounds = compute_clamp_bounds(params, L)
    rep = _verified(params, bounds, IDENTITY, "pinned", grid_n)
    if rep.sup_alpha >= 1:
        return None
    return RecursionRegime("THM3", params, rep.sup_alpha, bounds, IDENTITY, "pinned", True, rep.sup_alpha)


THM1_MARGIN = 0.02


def _thm1_ok(c, p, q, k, grid_n):
    fam = FibonacciFamilyParams(c, c, p, q, 1 - k, 1 + k)
    try:
        bounds = compute_clamp_bounds(fam)
    except UnboundedFamilyError:
        return False
    rep = _verified(fam, bounds, CONSTANT, "pinned", grid_n)
    return rep.sup_alpha <= 1 - THM1_MARGIN


@lru_cache(maxsize=512)
def thm1_window(c: float, p: float, q: float = INF, grid_n: int = 16, iters: int = 20):
    """Symmetric lam-window [1-k, 1+k] on which the constant-potential decay
    check passes with margin; None when even lam = 1 fails."""
    if not _thm1_ok(c, p, q, 0.0, grid_n):
        return None
    lo, hi = 0.0, 0.99
    if _thm1_ok(c, p, q, hi, grid_n):
        lo = hi
    else:
        for _ in range(iters):
            mid = (lo + hi) / 2
            if _thm1_ok(c, p, q, mid, grid_n):
                lo = mid
            else:
                hi = mid
    k = 0.95 * lo
    return (1 - k, 1 + k)


def _thm1(params, grid_n, L):
    window = thm1_window(float(params.c1), float(params.p), float(params.q), grid_n)
    if window is None:
        return None
    if params.lambda_lo < window[0] - 1e-12 or params.lambda_hi > window[1] + 1e-12:
        return None
    bounds = compute_clamp_bounds(params, L)
    rep = _verified(params, bounds, CONSTANT, "pinned", grid_n)
    if rep.sup_alpha >= 1:
        return None
    return RecursionRegime("THM1", params, rep.sup_alpha, bounds, CONSTANT, "pinned", True, rep.sup_alpha)


@lru_cache(maxsize=256)
def select_regime(params: FibonacciFamilyParams, grid_n: int = 16, L: int | None = None,
                  tol: float = 1e-9):
    """Pick the first applicable theorem regime (THM2, THM3, THM1) or None."""
    params = float_params(params)
    try:
        if params.c1 >= C0_THM2 - tol and params.lambda_lo >= 1 - tol:
            r = _thm2(params, grid_n, L)
            if r is not None:
                return r
        c = params.c1
        if params.single_c and c >= C_THM3 - tol and params.p >= c / 2 - tol and params.q <= c + 2 / c + tol:
            r = _thm3(params, grid_n, L)
            if r is not None:
                return r
        if params.single_c:
            return _thm1(params, grid_n, L)
    except UnboundedFamilyError:
        return None
    return None


def forced_regime(params: FibonacciFamilyParams | None, alpha: float = 0.9, L: int = 1,
                  potential: Potential = IDENTITY, scheme: str = "pinned") -> RecursionRegime:
    """Uncertified regime for force-runs: trivial clamp window [p, q]."""
    if params is None:
        bounds = ClampBounds(0.0, INF, L)
    else:
        bounds = ClampBounds(float(params.p), float(params.q), L)
        if bounds.R2 == INF:
            try:
                bounds = compute_clamp_bounds(params, max(L, 2))
            except UnboundedFamilyError:
                pass
    dummy = params or FibonacciFamilyParams(1, 1, 1, 1, 1, 1)
    return RecursionRegime("FORCED", dummy, alpha, bounds, potential, scheme, False, None)


def with_L(regime: RecursionRegime, L: int) -> RecursionRegime:
    """Same regime with a different clamp depth (window recomputed)."""
    return replace(regime, bounds=compute_clamp_bounds(regime.params, L))


def rho(c) -> float:
    return float(rho_of(float(c)))


REGIME_KINDS = ("auto", "thm1", "thm2", "thm3")


def regime_for(params: FibonacciFamilyParams, kind: str = "auto", grid_n: int = 16, L: int | None = None,
               tol: float = 1e-9):
    """Regime of a named kind for the family, or None when it does not apply."""
    if kind == "auto":
        return select_regime(params, grid_n, L)
    params = float_params(params)
    try:
        if kind == "thm2":
            if params.c1 >= C0_THM2 - tol and params.lambda_lo >= 1 - tol:
                return _thm2(params, grid_n, L)
            return None
        if not params.single_c:
            return None
        if kind == "thm3":
            c = params.c1
            if c >= C_THM3 - tol and params.p >= c / 2 - tol and params.q <= c + 2 / c + tol:
                return _thm3(params, grid_n, L)
            return None
        if kind == "thm1":
            return _thm1(params, grid_n, L)
    except UnboundedFamilyError:
        return None
    raise HolantError(f"unknown regime kind {kind!r}")
