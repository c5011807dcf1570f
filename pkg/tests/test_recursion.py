import math
from dataclasses import replace
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import fib_instances, instance, triangle_amo
from holant.bounds import RegimeError, forced_regime, rho, select_regime
from holant.core import FibonacciFamilyParams
from holant.experiments import convergence_case, deep_thm2_instance
from holant.gen import SUITE_FAMILIES, family_instance
from holant.oracle import brute_force_Z, ratio_exact, ratio_pair
from holant.recursion import (
    Estimator,
    build_subinstances,
    combine,
    estimate_ratio,
    estimate_Z,
    marginal_of_regular_edge,
    med,
    step_g,
    step_g_free,
    step_g_hat,
    step_h,
)

pos = st.floats(0.05, 20)


# ---------------------------------------------------------------- step maps

def test_h_examples():
    assert step_h(1, 1, 1, 1) == 1.5
    r = rho(1)
    assert math.isclose(step_h(r, r, 1, 1), r, rel_tol=1e-14)
    assert math.isclose(step_h(7.0, 2.5, 1.3, 1e-12), 2.5, rel_tol=1e-9)


def test_g_examples():
    r = rho(2)
    assert math.isclose(step_g(r, r, r, 2, 1), r, rel_tol=1e-14)
    assert step_g(1, 1, 1, 1, 1) == 1.5


def test_g_hat_examples():
    r = rho(1.5)
    assert math.isclose(step_g_hat(r, r, 1.5, 1), r, rel_tol=1e-14)
    assert step_g_hat(1, 1, 2, 1) == 2


def test_g_free_examples():
    r = rho(1)
    assert math.isclose(step_g_free(r, r, r, 1, 1), r, rel_tol=1e-14)
    assert step_g_free(1, 1, 0, 1, 1) == 3


@given(pos, pos, st.floats(0, 4), pos)
def test_g_hat_is_g_with_z_equal_y(x, y, c, lam):
    assert step_g(x, y, y, c, lam) == step_g_hat(x, y, c, lam)


def test_med():
    assert med(1, 5, 3) == 3 and med(2, 0, 1) == 1


# ---------------------------------------------------------------- bundles

def test_star_bundle():
    inst = instance([(1, 1, 2, 3, 5), (1, 1), (1, 2), (2, 1)], [(0, 1), (0, 2), (0, 3)], {3: 0})
    b = build_subinstances(inst)
    assert b.kind == "ghat"
    for sub in b.subs:
        assert len(sub.edges) < len(inst.edges)


def test_h_bundle_and_base_case():
    inst = instance([(1, 1, 2), (1, 1)], [(0, 1)], {1: 0})
    b = build_subinstances(inst)
    assert b.kind == "h" and len(b.subs) == 1
    assert build_subinstances(instance([(1, 3)], [], {0: 0})) is None


def test_cycle_gives_g_bundle():
    inst = instance([(1, 1, 2, 3), (1, 1, 2), (1, 1, 2)], [(0, 1), (1, 2), (0, 2)], {3: 0})
    assert build_subinstances(inst).kind == "g"
    assert build_subinstances(inst, "free").kind == "gfree"


def _bundle_value(inst, scheme):
    b = build_subinstances(inst, scheme)
    pairs = [tuple(float(x) for x in ratio_pair(s)) for s in b.subs]
    z0, z1 = combine(b, pairs)
    return z1 / z0


@given(fib_instances(max_n=5, min_edges=1, max_edges=6, dangling=1), st.sampled_from(["pinned", "free"]))
def test_bundle_identity(inst, scheme):
    """One recursion step on exact children reproduces the exact ratio."""
    e = next(iter(inst.dangling))
    if len(inst.incident[inst.dangling[e]]) < 2:
        return
    want = float(ratio_exact(inst))
    assert math.isclose(_bundle_value(inst, scheme), want, rel_tol=1e-10)


# ---------------------------------------------------------------- estimator

THM2 = select_regime(SUITE_FAMILIES["thm2"])


def test_depth_zero_returns_lower_clamp():
    inst = deep_thm2_instance(1, 2 * THM2.L)
    r = Estimator(THM2).ratio(inst.as_float(), 0)
    assert r.value == pytest.approx(THM2.R1, rel=1e-15) and not r.exact


def test_shallow_is_exact():
    inst = instance([(1, 1, 2), (1, 1)], [(0, 1, F(3, 2))], {1: 0})
    r = Estimator(THM2).ratio(inst.as_float(), 5)
    assert r.exact
    assert math.isclose(r.value, float(ratio_exact(inst)), rel_tol=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_clamp_and_cache_invariants(seed):
    inst = deep_thm2_instance(seed, 2 * THM2.L).as_float()
    cached = Estimator(THM2)
    plain = Estimator(THM2, use_cache=False)
    for t in (3, 6):
        assert cached.ratio(inst, t) == plain.ratio(inst, t)
    for pair in cached.cache.values():
        r = pair[1] / pair[0]
        assert THM2.R1 * (1 - 1e-12) <= r <= THM2.R2 * (1 + 1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_schemes_agree_on_target(seed):
    inst = deep_thm2_instance(seed, 2 * THM2.L).as_float()
    want = float(ratio_exact(inst))
    for scheme in ("pinned", "free"):
        got = Estimator(replace(THM2, scheme=scheme)).ratio(inst, 30).value
        assert math.isclose(got, want, rel_tol=1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_contraction_cumulative(seed):
    rows = convergence_case(seed)
    exact = rows[0]["exact"]
    spread = math.log(THM2.R2 / THM2.R1)
    for row in rows:
        gap = abs(math.log(row["estimate"]) - math.log(exact))
        assert gap <= THM2.alpha ** row["t"] * spread + 1e-12


def test_uncertified_needs_force():
    reg = forced_regime(None)
    inst = instance([(1, 1)], [], {0: 0})
    with pytest.raises(RegimeError):
        estimate_ratio(inst, 3, reg)
    assert estimate_ratio(inst, 3, reg, force=True).value == 1


def test_family_outside_regime_rejected():
    fam = FibonacciFamilyParams(1, 1, F(1, 2), 3, 1, 1)
    inst = family_instance(fam, "tree", 5, 0, 3, dangling=True)
    with pytest.raises(RegimeError):
        estimate_ratio(inst, 3, THM2)


# ---------------------------------------------------------------- marginals and Z

def test_single_edge_marginal():
    inst = instance([(1, 1), (1, 1)], [(0, 1, 2)])
    p0 = marginal_of_regular_edge(inst, 0, 0.1, regime=THM2)
    assert p0 == pytest.approx(1 / 3, abs=1e-15)


def test_triangle_marginal_forced():
    p0 = marginal_of_regular_edge(triangle_amo(), 0, 0.01, regime=forced_regime(None), force=True)
    assert abs(p0 - 0.75) <= 0.01


def test_single_edge_Z():
    inst = instance([(1, 1), (1, 1)], [(0, 1, 2)])
    assert estimate_Z(inst, 0.1, THM2).value == pytest.approx(3, rel=1e-12)


def test_triangle_Z_forced():
    z = estimate_Z(triangle_amo(), 0.01, forced_regime(None), force=True).value
    assert 3.96 <= z <= 4.04


def test_isolated_vertices():
    assert estimate_Z(instance([(2,), (3,)], []), 0.1, THM2).value == 6


@pytest.mark.parametrize("kind", ["thm1", "thm2", "thm3"])
def test_estimate_Z_families(kind):
    fam = SUITE_FAMILIES[kind]
    reg = select_regime(fam)
    for seed in range(3):
        inst = family_instance(fam, "gnp", 7, 0.5, seed)
        Z = float(brute_force_Z(inst))
        a = estimate_Z(inst, 0.05, reg)
        b = estimate_Z(inst, 0.05, reg, use_cache=False)
        assert a.value == b.value
        assert abs(a.value - Z) <= 0.05 * Z


def test_dangling_edges_are_closed():
    inst = instance([(1, 2, 5), (1, 1)], [(0, 1, F(3, 2))], {1: 0})
    Z = float(brute_force_Z(inst))
    assert estimate_Z(inst, 0.05, THM2, force=True).value == pytest.approx(Z, rel=0.05)
