import itertools

import numpy as np
import pytest

from nilpdiv import grouplat as gl
from nilpdiv import modmat as mm
from nilpdiv.grouplat import MatGroup
from nilpdiv.modmat import Mat2

from conftest import brute_gl2, naive_mul


def brute_subgroups(N):
    elems = brute_gl2(N)
    ident = (1, 0, 0, 1)
    subs = set()
    for r in range(1, len(elems) + 1):
        for S in itertools.combinations(elems, r):
            s = set(S)
            if ident in s and all(naive_mul(x, y, N) in s for x in s for y in s):
                subs.add(frozenset(s))
    return subs, elems


def brute_inverse(x, N):
    for y in brute_gl2(N):
        if naive_mul(x, y, N) == (1, 0, 0, 1):
            return y


def test_gl2_f2_subgroups_against_brute_force():
    subs, elems = brute_subgroups(2)
    classes = {frozenset(frozenset(naive_mul(naive_mul(g, h, 2), brute_inverse(g, 2), 2)
                                   for h in S) for g in elems) for S in subs}
    reps = gl.enumerate_subgroups(gl.gl2(2), strategy="full")
    assert len(subs) == 6
    assert len(classes) == len(reps) == 4
    assert sorted(r.order for r in reps) == [1, 2, 3, 6]


@pytest.mark.parametrize("strategy", ["full", "solvable"])
def test_strategies_agree_on_gl2_f3(strategy):
    reps = gl.enumerate_subgroups(gl.gl2(3), strategy=strategy)
    assert len(reps) == 16
    assert sum(r.order == 48 for r in reps) == 1


def test_solvable_strategy_refuses_nonsolvable_ambient():
    with pytest.raises(gl.StrategyError):
        gl.enumerate_subgroups(gl.gl2(5), strategy="solvable")


def test_orders_and_membership():
    for N in (2, 3, 4, 6, 9):
        assert gl.gl2(N).order == mm.gl2_order(N)
        assert gl.sl2(N).order == mm.sl2_order(N)
    B = MatGroup(5, [Mat2(1, 1, 0, 1, 5), Mat2(2, 0, 0, 1, 5), Mat2(1, 0, 0, 2, 5)])
    assert B.order == 80
    assert B.contains(np.array([Mat2(3, 4, 0, 2, 5).code])).all()
    assert not B.contains(np.array([Mat2(1, 0, 1, 1, 5).code])).any()


def test_reduction_and_preimage():
    G = gl.gl2(4)
    assert gl.reduce_group(G, 2) == gl.gl2(2)
    K = gl.kernel_of_reduction(G, 2)
    assert K.order == 16 and K.is_abelian()
    B2 = MatGroup(2, [Mat2(1, 1, 0, 1, 2)])
    assert gl.preimage(B2, 8).order == 2 * 16 * 16


def test_nilpotency_and_solvability():
    assert not gl.gl2(3).is_nilpotent()
    assert gl.gl2(3).is_solvable()
    assert not gl.sl2(5).is_solvable()
    Q8 = MatGroup(3, [Mat2(0, -1, 1, 0, 3), Mat2(1, 1, 1, -1, 3)])
    assert Q8.order == 8 and Q8.is_nilpotent() and not Q8.is_abelian()
    assert Q8.center().order == 2


def test_nilpotency_methods_agree():
    for r in gl.enumerate_subgroups(gl.gl2(3)):
        G = r.group
        assert G.is_nilpotent("sylow") == G.is_nilpotent("lcs")


def test_join_and_conjugacy():
    T = MatGroup(3, [Mat2(1, 1, 0, 1, 3)])
    L = MatGroup(3, [Mat2(1, 0, 1, 1, 3)])
    assert gl.are_conjugate(T, L, gl.gl2(3))
    assert gl.join(T, np.int64(Mat2(1, 0, 1, 1, 3).code)) == gl.sl2(3)


def test_class_list_dedups_conjugates():
    reg = gl.ClassList(gl.gl2(3))
    T = MatGroup(3, [Mat2(1, 1, 0, 1, 3)])
    assert reg.add(T)
    assert not reg.add(MatGroup(3, [Mat2(1, 0, 1, 1, 3)]))


def test_maximal_classes():
    reps = gl.enumerate_subgroups(gl.gl2(2), strategy="full")
    proper = [r for r in reps if r.order < 6]
    assert sorted(r.order for r in gl.maximal_classes(proper, gl.gl2(2))) == [2, 3]


def test_json_round_trip():
    G = gl.gl2(6)
    assert MatGroup.from_json(G.to_json()) == G
    bad = dict(G.to_json(), order=7)
    with pytest.raises(ValueError):
        MatGroup.from_json(bad)
