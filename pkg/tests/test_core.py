import itertools
import json
import math
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import fib_instances, instance, naive_Z, sig, triangle_amo
from holant.core import (
    INF,
    HolantError,
    HolantInstance,
    attach_free_end,
    build_fibonacci_signature,
    classify_signature,
    decompose_vertex,
    instance_from_json,
    lab_rescale,
    pin_edge,
    simple_path_reaches,
)
from holant.oracle import brute_force_Z, ratio_exact


# ---------------------------------------------------------------- signatures

def test_fibonacci_numbers():
    assert build_fibonacci_signature(1, 1, 1, 5).values == (1, 1, 2, 3, 5, 8)


def test_parity_when_c_zero():
    assert build_fibonacci_signature(0, 2, 7, 3).values == (2, 7, 2, 7)


def test_gadget_recurrence():
    assert build_fibonacci_signature(1, 1, 0, 4).values == (1, 0, 1, 1, 2)


def test_negative_recurrence_rejected():
    with pytest.raises(HolantError):
        build_fibonacci_signature(-2, 1, 1, 3)


@pytest.mark.parametrize("vals,c,p,q", [
    ((1, 1, 2, 3, 5), 1, 1, 2),  # ratios 1, 2, 3/2, 5/3
    ((1, 0, 1, 1), 1, 0, INF),
    ((1, 2, 4, 8), F(3, 2), 2, 2),
])
def test_classify(vals, c, p, q):
    m = classify_signature(sig(*vals))
    assert (m.c, m.p, m.q) == (c, p, q)


def test_classify_non_fibonacci():
    assert classify_signature(sig(1, 1, 1, 5)).c is None


# ---------------------------------------------------------------- weights

def test_config_weight_single_edge():
    inst = instance([(1, 1), (1, 1)], [(0, 1, 2)])
    assert inst.config_weight({0: 1}) == 2


def test_config_weight_exact_one_kills_single_edge():
    inst = instance([(0, 1, 0)] * 3, [(0, 1), (1, 2), (0, 2)])
    assert inst.config_weight({0: 1, 1: 0, 2: 0}) == 0


def test_config_weight_path():
    inst = instance([(1, 3), (2, 5)], [(0, 1, 4)])
    assert inst.config_weight({0: 1}) == 60


def test_validation_rejects_bad_arity():
    with pytest.raises(HolantError):
        instance([(1, 1, 1), (1, 1)], [(0, 1)])


def test_self_loop_rejected():
    with pytest.raises(HolantError):
        instance([(1, 1, 1)], [(0, 0)])


def test_json_roundtrip():
    inst = instance([(1, 3), (2, 5, 7)], [(0, 1, F(4, 3))], {1: 1})
    back = instance_from_json(json.loads(inst.dumps()))
    assert back == inst
    assert brute_force_Z(back) == brute_force_Z(inst)


# ---------------------------------------------------------------- pinning

def test_pin_dangling_zero():
    inst = instance([(3, 5)], [], {0: 0})
    assert pin_edge(inst, 0, 0).vertices[0].values == (3,)


def test_pin_dangling_half():
    inst = instance([(1, 3)], [], {0: 0})
    assert pin_edge(inst, 0, F(1, 2)).vertices[0].values == (2,)


def test_pin_triangle_edge():
    assert brute_force_Z(pin_edge(triangle_amo(), 0, 0)) == 3


def test_fractional_pin_on_regular_edge_rejected():
    with pytest.raises(HolantError):
        pin_edge(triangle_amo(), 0, F(1, 2))


@given(fib_instances(min_edges=1), st.data())
def test_pin_additivity(inst, data):
    e = data.draw(st.sampled_from(sorted(inst.edges)))
    lam = inst.edges[e].lam
    assert naive_Z(inst) == brute_force_Z(pin_edge(inst, e, 0)) + lam * brute_force_Z(pin_edge(inst, e, 1))


# ---------------------------------------------------------------- decomposition

def _star(center, leaves):
    n = len(leaves) + 1
    return instance([center] + list(leaves), [(0, i) for i in range(1, n)])


def test_decompose_star():
    inst = _star((1, 1, 2, 3), [(1, 2), (2, 1), (1, 1)])
    out = decompose_vertex(inst, 0, [0, 1], [2])
    assert brute_force_Z(out) == naive_Z(inst)


def test_decompose_degree_two():
    inst = _star((1, 1, 2), [(1, 1), (1, 1)])
    out = decompose_vertex(inst, 0, [0], [1])
    assert out.vertices[0].values == (1, 1, 2)
    gadget = out.vertices[max(out.vertices)]
    assert gadget.values == (1, 0, 1)
    assert brute_force_Z(out) == brute_force_Z(inst) == 5


def test_decompose_non_fibonacci_rejected():
    inst = _star((1, 1, 1, 5), [(1, 1)] * 3)
    with pytest.raises(HolantError):
        decompose_vertex(inst, 0, [0], [1, 2])


@given(st.integers(2, 6), st.data())
def test_decompose_every_split(arity, data):
    c = data.draw(st.fractions(0, 3, max_denominator=4))
    center = build_fibonacci_signature(c, data.draw(st.fractions(F(1, 4), 3, max_denominator=5)),
                                       data.draw(st.fractions(F(1, 4), 3, max_denominator=5)), arity)
    leaves = [tuple(data.draw(st.fractions(F(1, 4), 3, max_denominator=5)) for _ in range(2))
              for _ in range(arity)]
    inst = _star(center.values, leaves)
    Z = naive_Z(inst)
    k = data.draw(st.integers(1, arity - 1))
    E1 = sorted(data.draw(st.permutations(range(arity)))[:k])
    E2 = [i for i in range(arity) if i not in E1]
    out = decompose_vertex(inst, 0, E1, E2)
    assert brute_force_Z(out) == Z
    for e in range(arity):
        assert brute_force_Z(out, {e: 0}) * Z == brute_force_Z(inst, {e: 0}) * brute_force_Z(out)


@given(fib_instances(min_edges=2, max_edges=6), st.data())
def test_decompose_random(inst, data):
    big = [v for v, s in inst.vertices.items() if s.arity >= 2]
    if not big:
        return
    v = data.draw(st.sampled_from(big))
    inc = inst.incident[v]
    k = data.draw(st.integers(1, len(inc) - 1))
    E1 = inc[:k]
    out = decompose_vertex(inst, v, E1, inc[k:])
    assert brute_force_Z(out) == naive_Z(inst)


# ---------------------------------------------------------------- free ends

def test_attach_free_end():
    inst = instance([(2, 5)], [], {0: 0})
    assert brute_force_Z(attach_free_end(inst, 0)) == 7


def test_attach_free_end_needs_dangling():
    with pytest.raises(HolantError):
        attach_free_end(triangle_amo(), 0)


# ---------------------------------------------------------------- L_{a,b}

def test_lab_rescale_example():
    # a = 2, b = 4: [1, 1, 6] becomes [1, 1/2, 3/2] with c = 1
    inst = instance([(1, 1, 6), (1, 1), (1, 1)], [(0, 1), (0, 2)])
    out = lab_rescale(inst, 4)
    assert out.vertices[0].values == (1, F(1, 2), F(3, 2))
    assert classify_signature(out.vertices[0]).c == 1
    assert brute_force_Z(out) == brute_force_Z(inst)


def test_lab_rescale_identity_at_b_one():
    inst = instance([(1, 2, 5), (1, 1), (1, 1)], [(0, 1, 3), (0, 2)])
    out = lab_rescale(inst, 1)
    assert out == inst


def test_lab_rescale_single_edge():
    inst = instance([(1, 1), (1, 1)], [(0, 1)])
    out = lab_rescale(inst, 9)
    # sqrt(9) from each endpoint
    assert out.edges[0].lam == 9
    assert brute_force_Z(out) == brute_force_Z(inst) == 2


def test_lab_rescale_irrational_root():
    inst = instance([(1, 1, 3, 5), (1, 2), (2, 1), (1, 1)], [(0, 1), (0, 2), (0, 3)])
    out = lab_rescale(inst)  # b = 2 inferred
    assert math.isclose(float(brute_force_Z(out)), float(brute_force_Z(inst)), rel_tol=1e-12)


def test_lab_rescale_mixed_b_rejected():
    inst = instance([(1, 1, 3, 5), (1, 1, 5, 7), (1, 1), (1, 1), (1, 1), (1, 1)],
                    [(0, 2), (0, 3), (0, 1), (1, 4), (1, 5)])
    with pytest.raises(HolantError):
        lab_rescale(inst)


# ---------------------------------------------------------------- simple paths

def test_sp_path():
    inst = instance([(1, 1, 1)] * 4 + [(1, 1)], [(i, i + 1) for i in range(4)], {4: 0})
    assert simple_path_reaches(inst, 4, 4) == (True, 5)


def test_sp_lone_vertex():
    inst = instance([(1, 1)], [], {0: 0})
    assert simple_path_reaches(inst, 0, 0) == (True, 1)
    assert simple_path_reaches(inst, 0, 1) == (False, 1)


def test_sp_triangle():
    inst = instance([(1, 1, 1, 1), (1, 1, 1), (1, 1, 1)], [(0, 1), (1, 2), (0, 2)], {3: 0})
    assert simple_path_reaches(inst, 3, 2) == (True, 3)
    assert simple_path_reaches(inst, 3, 5) == (False, 3)


def _longest_by_enumeration(inst, e):
    """Longest simple vertex path from e's endpoint; every sequence of edges is tried."""
    start = inst.dangling[e]
    others = [d for d in inst.dangling if d != e]
    best = 1
    ids = sorted(inst.edges)
    for k in range(1, len(ids) + 1):
        for seq in itertools.permutations(ids, k):
            seen, w, ok = {start}, start, True
            for i in seq:
                ed = inst.edges[i]
                if w not in (ed.u, ed.v) or ed.other(w) in seen:
                    ok = False
                    break
                w = ed.other(w)
                seen.add(w)
            if ok:
                best = max(best, 1 + k + (1 if any(inst.dangling[d] == w for d in others) else 0))
        if best < 1 + k:
            break
    if any(inst.dangling[d] == start for d in others):
        best = max(best, 2)
    return best


@given(fib_instances(max_n=5, max_edges=5, dangling=2), st.integers(0, 8))
def test_sp_matches_enumeration(inst, threshold):
    e = min(inst.dangling)
    true = _longest_by_enumeration(inst, e)
    reached, length = simple_path_reaches(inst, e, threshold)
    assert reached == (true > threshold)
    assert length == min(true, threshold + 1)


def test_instance_is_immutable():
    inst = triangle_amo()
    with pytest.raises(TypeError):
        inst.edges[0] = None
    pin_edge(inst, 0, 1)
    assert brute_force_Z(inst) == 4


def test_ratio_example_two_vertex_path():
    inst = instance([(1, 1, 2), (1, 1)], [(0, 1)], {1: 0})
    assert ratio_exact(inst) == F(3, 2)
    assert isinstance(inst, HolantInstance)
