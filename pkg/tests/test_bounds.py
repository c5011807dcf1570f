import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from holant.bounds import (
    CONSTANT,
    IDENTITY,
    INF,
    ParameterBox,
    RegimeError,
    UnboundedFamilyError,
    compute_clamp_bounds,
    decay_rate,
    depth_for_eps,
    g_map,
    gfree_map,
    ghat_map,
    h_map,
    interval_step,
    regime_for,
    rho,
    select_regime,
    thm1_window,
    thm2_h_bound,
    verify_decay_on_box,
)
from holant.core import FibonacciFamilyParams as Fam

GOLDEN = (1 + math.sqrt(5)) / 2


def test_interval_fixed_point():
    lo, hi = interval_step(Fam(1, 1, 1, 1, 1, 1), (GOLDEN, GOLDEN))
    assert lo == pytest.approx(GOLDEN, rel=1e-15) and hi == pytest.approx(GOLDEN, rel=1e-15)


fams = st.builds(
    lambda c, dc, p, dp, l, dl: Fam(c, c + dc, p, p + dp, l, l + dl),
    st.floats(0.1, 3), st.floats(0, 1), st.floats(0.1, 3), st.floats(0, 3), st.floats(0.1, 3), st.floats(0, 3),
)
ends = st.floats(0, 20)


@given(fams, ends, ends, ends, ends)
def test_interval_step_monotone(fam, a, b, c, d):
    inner = tuple(sorted((a, b)))
    outer = (min(inner[0], c), max(inner[1], d))
    i_lo, i_hi = interval_step(fam, inner)
    o_lo, o_hi = interval_step(fam, outer)
    assert o_lo <= i_lo + 1e-12 and i_hi <= o_hi + 1e-12


@given(fams, st.floats(0, 10), st.floats(0, 10), st.floats(0.01, 1), st.data())
def test_interval_step_contains_images(fam, a, b, u, data):
    lo, hi = sorted((a, b))
    x = lo + (hi - lo) * u
    lam = data.draw(st.floats(fam.lambda_lo, fam.lambda_hi))
    c = data.draw(st.floats(fam.c1, fam.c2))
    mu = data.draw(st.floats(fam.p, fam.q))
    y = h_map(x, mu, c, lam)[0]
    out = interval_step(fam, (lo, hi))
    assert out[0] * (1 - 1e-12) <= y <= out[1] * (1 + 1e-12)


def test_thm2_lower_clamp_at_depth_three():
    b = compute_clamp_bounds(Fam(1.17, 3, 1, INF, 1, 3), 3)
    assert b.R1 >= 1.17


def test_window_contracts_to_rho():
    r = rho(1)
    b = compute_clamp_bounds(Fam(1, 1, r, r, 1, 1))
    assert b.R1 <= r <= b.R2
    assert b.R2 - b.R1 < 1e-5


def test_unbounded_family():
    with pytest.raises(UnboundedFamilyError):
        compute_clamp_bounds(Fam(1, 1, 1, INF, 1, 3), 1)


@pytest.mark.parametrize("alpha,C,eps,t", [(0.9, 1, 0.01, 44), (0.9, 1, 2, 0), (0.5, 2, 0.125, 4)])
def test_depth_for_eps(alpha, C, eps, t):
    assert depth_for_eps(alpha, C, eps) == t


def test_thm2_h_bound():
    assert thm2_h_bound(1) == 0.5
    assert thm2_h_bound(0.5) == pytest.approx(7 / 12)


# ---------------------------------------------------------------- regimes

def test_select_thm2():
    r = select_regime(Fam(2, 2, 1, INF, 1, 5))
    assert r.kind == "THM2" and r.alpha == 0.9 and r.potential == IDENTITY


def test_select_thm3():
    r = select_regime(Fam(3, 3, 1.5, 3.6, 0.5, 10))
    assert r.kind == "THM3" and r.alpha < 1


def test_select_thm1():
    r = select_regime(Fam(1, 1, 1, 2, 1, 1))
    assert r.kind == "THM1" and r.potential == CONSTANT
    lo, hi = thm1_window(1.0, 1.0, 2.0)
    assert lo < 1 < hi


def test_named_regime_mismatch():
    assert regime_for(Fam(1, 1, 1, 2, 1, 1), "thm2") is None
    assert regime_for(Fam(2, 2, 1, INF, 1, 5), "thm2").kind == "THM2"


def test_no_regime_for_wide_lambda_at_small_c():
    assert select_regime(Fam(1, 1, 1, 2, 0.1, 10)) is None


def test_regime_error_is_holant_error():
    assert issubclass(RegimeError, ValueError)


# ---------------------------------------------------------------- decay rates

def test_a2_at_fixed_point_below_one():
    r = rho(1)
    a = decay_rate("a2", {"x": r, "y": r, "z": r, "c": 1, "lam": 1}, CONSTANT)
    assert 0 < a < 1


def test_a3_at_thm2_point():
    a = decay_rate("a3", {"x": 1.17, "y": 1.0, "c": 1.17, "lam": 1}, IDENTITY)
    assert a <= thm2_h_bound(1) + 1e-12


def _fd(fn, args, k, h):
    up = list(args)
    dn = list(args)
    up[k] += h
    dn[k] -= h
    return (fn(*up)[0] - fn(*dn)[0]) / (2 * h)


@given(st.floats(0.2, 5), st.floats(0.2, 5), st.floats(0.2, 5), st.floats(0.5, 3), st.floats(0.3, 3))
def test_derivatives_by_finite_differences(x, y, z, c, lam):
    for fn, args in ((h_map, (x, y, c, lam)), (g_map, (x, y, z, c, lam)),
                     (ghat_map, (x, y, c, lam)), (gfree_map, (x, y, z, c, lam))):
        out = fn(*args)
        nvar = len(out) - 1
        for k in range(nvar):
            d = out[k + 1]
            fd = _fd(fn, args, k, 1e-5 * max(1.0, abs(args[k])))
            assert abs(d - fd) <= 1e-6 * max(abs(d), 1e-3)


def test_small_grid_g_box():
    box = ParameterBox(c=(1.17, 1.17), lam=(1, INF), x=(1.17, 50), y=(1.17, 50), z=(1.17, 50))
    rep = verify_decay_on_box(box, ("a2",), IDENTITY, 12, "free")
    assert rep.sup_alpha <= 0.9 + 1e-9
    assert set(rep.to_json()) >= {"sup_alpha", "argmax", "grid_n", "box"}


def test_box_ties_axis_to_c():
    box = ParameterBox(c=(1, 3), lam=(1, INF), x=("c", INF), y=("c", INF), mu=(1, INF))
    rep = verify_decay_on_box(box, ("a3",), IDENTITY, 10)
    assert rep.argmax["x"] >= rep.argmax["c"] - 1e-12
