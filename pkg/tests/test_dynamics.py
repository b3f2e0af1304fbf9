import functools
import random

import numpy as np
import pytest
from hypothesis import given, settings

from morseflow.braid import intersection_number, word_to_diagram
from morseflow.complex import build_complex, cell_dim
from morseflow.dynamics import (InvariantError, analyze_dynamics, compute_lambda,
                                format_lambda_table, lambda_table, morse_preorder, relations,
                                sc_structure, verify_block, verify_block_direct)
from morseflow.order import _bits, scc_condense
from morseflow.algebra import random_down_sets
from morseflow.cli import golden_path

from conftest import fixture_braid, fixture_result
from test_braid import proper_words


@functools.lru_cache(maxsize=None)
def dyn_of(name):
    return fixture_result(name).dynamics


def count_ideals(n, down):
    """Number of down-sets of a poset given by down-closure bitmasks."""
    up = [0] * n
    for b in range(n):
        for a in _bits(down[b]):
            up[a] |= 1 << b

    @functools.lru_cache(maxsize=None)
    def count(alive):
        if not alive:
            return 1
        x = alive.bit_length() - 1
        # ideals avoiding x lose its up-set; ideals containing x contain its down-set
        return count(alive & ~up[x]) + count(alive & ~down[x])

    return count((1 << n) - 1)


# ------------------------------------------------------------------ λ data


def test_example_a_lambda_grid_golden():
    a = dyn_of("exampleA")
    text = format_lambda_table(lambda_table(a.complex, a.lam))
    with open(golden_path("exampleA", "lambda.txt")) as fh:
        assert text == fh.read()


def test_lambda_matches_intersection_number():
    a = dyn_of("exampleA")
    x = a.complex
    for k, t in enumerate(x.top_cells):
        mid = [(c - 1) / 2 + 0.5 for c in x.code(t)]
        assert a.lam.lambda_top[k] == intersection_number(mid, a.braid)


def test_lambda_panel_entries():
    a = dyn_of("exampleA")
    x = a.complex
    i = x.index((2, 1))
    assert (a.lam.lambda_minus[i], a.lam.lambda_plus[i]) == (0, 2)
    top_pos = {int(t): k for k, t in enumerate(x.top_cells)}
    hits = 0
    for i in np.flatnonzero(x.dims == 0):
        s = sorted(a.lam.lambda_top[top_pos[x.index(c)]] for c in x.star(x.code(i)) if cell_dim(c) == 2)
        if s == [2, 4, 4, 6]:
            hits += 1
            assert (a.lam.lambda_minus[i], a.lam.lambda_plus[i]) == (2, 6)
    assert hits > 0


def test_lambda_on_top_cells_is_constant_pair(any_fixture):
    a = dyn_of(any_fixture)
    top = a.complex.top_cells
    assert np.array_equal(a.lam.lambda_minus[top], a.lam.lambda_top)
    assert np.array_equal(a.lam.lambda_plus[top], a.lam.lambda_top)
    assert np.all(a.lam.lambda_minus <= a.lam.lambda_plus)


def test_compute_lambda_rejects_mismatch():
    with pytest.raises(ValueError):
        compute_lambda(build_complex(5, 2), fixture_braid("exampleA"))


def test_lambda_table_requires_d2():
    a = dyn_of("sigma_d3")
    with pytest.raises(ValueError):
        lambda_table(a.complex, a.lam)


@settings(max_examples=100, deadline=None)
@given(proper_words())
def test_lambda_even_on_random_words(wn):
    b = word_to_diagram(*wn)
    x = build_complex(b.m, b.d)
    lam = compute_lambda(x, b)
    assert not np.any(lam.lambda_top % 2)


# --------------------------------------------------------------- relations


def test_etop_is_codim_one_adjacency():
    a = dyn_of("exampleA")
    x = a.complex
    codes = np.array([x.code(t) for t in x.top_cells])
    got = set(zip(a.rel.etop.src.tolist(), a.rel.etop.dst.tolist()))
    ref = {(i, j) for i in range(len(codes)) for j in range(len(codes))
           if np.abs(codes[i] - codes[j]).sum() == 2 and np.count_nonzero(codes[i] != codes[j]) == 1}
    assert got == ref


def test_f_is_monotone_part_of_etop():
    a = dyn_of("exampleA")
    lam = a.lam.lambda_top
    f = set(zip(a.rel.f.src.tolist(), a.rel.f.dst.tolist()))
    for s, t in zip(a.rel.etop.src.tolist(), a.rel.etop.dst.tolist()):
        assert ((s, t) in f) == (lam[s] <= lam[t])


def test_r_against_product_order():
    a = dyn_of("exampleA")
    x = a.complex
    lo, hi = a.lam.lambda_minus, a.lam.lambda_plus
    r = a.rel.relation_r().pairs()
    e = a.rel.relation_e().pairs()
    tops = set(x.top_cells.tolist())
    ref_e = set()
    for t in tops:
        for f in x.closure(x.code(t)):
            i = x.index(f)
            ref_e |= {(i, t), (t, i)}
    assert e == ref_e
    ref_r = {(s, t) for s, t in ref_e if lo[s] <= lo[t] and hi[s] <= hi[t]}
    assert r == ref_r
    selfloops = {s for s, t in r if s == t}
    assert selfloops == tops


def test_equal_lambda_neighbours_are_mutual():
    a = dyn_of("exampleA")
    lam = a.lam.lambda_top
    f = a.rel.f.pairs()
    for s, t in zip(a.rel.etop.src.tolist(), a.rel.etop.dst.tolist()):
        if lam[s] == lam[t]:
            assert (s, t) in f and (t, s) in f


# -------------------------------------------------------------- SC and dyn


def test_example_a_sc_count_and_laps():
    s = dyn_of("exampleA").scd
    assert len(s) == 29
    assert sorted(set(s.lap.tolist())) == list(range(7))
    assert np.array_equal(s.lambda_class, 2 * s.lap)


def test_classes_numbered_by_lap_then_min_cell(small_fixture):
    s = dyn_of(small_fixture).scd
    keys = [(int(s.lap[k]), min(c)) for k, c in enumerate(s.sc.classes)]
    assert keys == sorted(keys)


def test_lambda_constant_on_classes_and_lap_monotone(small_fixture):
    a = dyn_of(small_fixture)
    s = a.scd
    for k, c in enumerate(s.sc.classes):
        assert set(a.lam.lambda_top[list(c)].tolist()) == {s.lambda_class[k]}
    ii, jj = np.nonzero(s.leq)
    assert np.all(s.lap[ii] <= s.lap[jj])


def test_dyn_on_top_cells(small_fixture):
    a = dyn_of(small_fixture)
    assert np.array_equal(a.scd.dyn[a.complex.top_cells], a.scd.top_class)


def test_dyn_order_preserving(small_fixture):
    a = dyn_of(small_fixture)
    rows, cols = a.complex.boundary_matrix().pairs()
    assert np.all(a.scd.leq[a.scd.dyn[rows], a.scd.dyn[cols]])


def test_dyn_is_unique_star_minimum():
    a = dyn_of("exampleA")
    x, s = a.complex, a.scd
    top_pos = {int(t): k for k, t in enumerate(x.top_cells)}
    for i in range(x.n_cells):
        cls = {int(s.top_class[top_pos[x.index(c)]]) for c in x.star(x.code(i)) if cell_dim(c) == x.d}
        minima = [c for c in cls if all(s.leq[c, o] for o in cls)]
        assert minima == [s.dyn[i]]


def test_sc_against_scipy_oracle():
    import scipy.sparse as sp
    from scipy.sparse.csgraph import connected_components
    a = dyn_of("exampleA")
    f = a.rel.f
    g = sp.csr_matrix((np.ones(len(f)), (f.src, f.dst)), shape=(f.n, f.n))
    k, labels = connected_components(g, directed=True, connection="strong")
    assert k == len(a.scd)
    same = labels[:, None] == labels[None, :]
    ours = a.scd.top_class[:, None] == a.scd.top_class[None, :]
    assert np.array_equal(same, ours)


def test_non_unique_minimum_raises():
    # a corrupted order in which two star classes are incomparable
    a = dyn_of("exampleA")
    x = a.complex
    s = a.scd
    leq = np.eye(len(s), dtype=bool)
    from morseflow.dynamics import _dyn
    with pytest.raises(InvariantError):
        _dyn(x, s.lap, s.top_class, leq)


@pytest.mark.parametrize("name", ["exampleA", "sigma_d3", "sigma_d4"])
def test_r_classes_agree_with_dyn_on_top_cells(name):
    a = dyn_of(name)
    sc_r = scc_condense(a.rel.relation_r())
    tops = a.complex.top_cells
    cls = np.array([sc_r.class_of[t] for t in tops.tolist()])
    same_r = cls[:, None] == cls[None, :]
    same_dyn = a.scd.top_class[:, None] == a.scd.top_class[None, :]
    assert np.array_equal(same_r, same_dyn)


# ---------------------------------------------------------- Morse pre-order


def test_morse_preorder_example_a():
    a = dyn_of("exampleA")
    s = a.scd
    pre = morse_preorder(s)
    x = a.complex
    # refines the face order
    rows, cols = x.boundary_matrix().pairs()
    assert all(pre.leq(int(r), int(c)) for r, c in zip(rows, cols))
    # cells of one fiber are mutually related
    fib = np.flatnonzero(s.dyn == s.dyn[0])
    assert all(pre.leq(int(u), int(v)) for u in fib for v in fib)
    # refines R as well
    for u, v in a.rel.relation_r().pairs():
        assert pre.leq(u, v) or pre.leq(v, u)
    # down-sets of the pre-order and of SC are equinumerous
    quot = scc_condense(pre.as_relation())
    assert len(quot) == len(s)
    assert count_ideals(len(quot), quot.order.down) == count_ideals(len(s), s.order.down)


def test_count_ideals_helper():
    from morseflow.order import down_sets
    from test_order import random_poset
    rng = random.Random(2)
    for _ in range(30):
        p = random_poset(rng, rng.randint(1, 8))
        assert count_ideals(p.n, p.down) == len(down_sets(p))


# ------------------------------------------------------------ verify_block


def test_verify_block_trivial_cases():
    a = dyn_of("exampleA")
    assert verify_block(a.complex, a.rel, a.scd, set())
    assert verify_block(a.complex, a.rel, a.scd, set(range(len(a.scd))))


def test_verify_block_rejects_non_down_set():
    a = dyn_of("exampleA")
    top = int(np.argmax(a.scd.lap))
    with pytest.raises(ValueError):
        verify_block(a.complex, a.rel, a.scd, {top})


@pytest.mark.parametrize("name", ["exampleA", "sigma_d3", "sigma_d4"])
def test_verify_block_matches_direct(name):
    a = dyn_of(name)
    s = a.scd
    samples = [set(_bits(s.order.down[k])) for k in range(len(s))]
    samples += [set(d) for d in random_down_sets(s.leq, 20, random.Random(5))]
    for alpha in samples:
        fast = verify_block(a.complex, a.rel, s, alpha)
        assert fast == verify_block_direct(a.complex, a.rel, s, alpha)
        assert fast


def test_verify_block_detects_non_attracting_set():
    # the complement of the bottom class is not attracting
    from morseflow.dynamics import _BlockChecker
    a = dyn_of("exampleA")
    u = ~a.scd.fiber({0})
    assert not _BlockChecker(a.complex, a.rel).check(u)


def test_analyze_dynamics_budget():
    from morseflow.complex import CellBudgetExceeded
    with pytest.raises(CellBudgetExceeded):
        analyze_dynamics(fixture_braid("pseudo_anosov"), cell_budget=1000)


def test_analysis_is_deterministic():
    b = fixture_braid("sigma_d4")
    one, two = analyze_dynamics(b), analyze_dynamics(b)
    assert one.scd.sc.classes == two.scd.sc.classes
    assert np.array_equal(one.scd.dyn, two.scd.dyn)


def test_threads_do_not_change_results(monkeypatch):
    b = fixture_braid("sigma_d5")
    ref = dyn_of("sigma_d5")
    monkeypatch.setenv("MORSEFLOW_THREADS", "3")
    x = build_complex(b.m, b.d)
    lam = compute_lambda(x, b)
    assert np.array_equal(lam.lambda_top, ref.lam.lambda_top)
    scd = sc_structure(x, lam, relations(x, lam))
    assert np.array_equal(scd.dyn, ref.scd.dyn)
