import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ismrlab.classical import (
    Anf,
    BptfCircuit,
    BptfGate,
    Depth2Circuit,
    GateNode,
    Leaf,
    Query,
    Restriction,
    TooLarge,
    WidthMismatch,
    anf_from_truth_table,
    block_independent_set,
    block_intersection_graph,
    canonical_decision_tree,
    canonical_depth,
    canonical_run,
    check_downward_closed,
    complete_tree,
    constant_circuit,
    degree_two_cap,
    dt_to_anf,
    edge_count,
    empirical_multi_switch_prob,
    empirical_switch_prob,
    eval_bptf_gate,
    eval_circuit,
    evaluate_tree,
    extract_witness,
    forest_global_depth,
    halving_target_table,
    lightcones,
    lsb_truth_table,
    multi_switching_bound,
    multi_switching_hypotheses,
    or_gate,
    and_gate,
    pairwise_halving_circuit,
    random_depth2_circuit,
    random_extension,
    random_lightcones,
    random_tree,
    replay_witness,
    restrict_tree,
    sample_restriction,
    switching_bound,
    tree_depth,
    tree_from_json,
    tree_to_json,
    tree_variables,
    truth_table,
    turan_bound,
    valid_parity_check,
    weight_table,
    wilson_interval,
    witness_is_valid,
)
from ismrlab.core import lsb

import oracles


def bits(i, n):
    return tuple((i >> j) & 1 for j in range(n))


# -------------------------------------------------------------- gates


def test_threshold_zero_or_gate_is_or():
    for n in range(1, 6):
        g = or_gate(n)
        for i in range(1 << n):
            assert eval_bptf_gate(g, bits(i, n)) == int(i > 0)
        a = and_gate(n)
        for i in range(1 << n):
            assert a.evaluate(bits(i, n)) == int(i == (1 << n) - 1)


def test_gate_branch_examples():
    g = BptfGate("OrType", 2, 4, Anf.from_sets([(0, 1)]))
    assert g.evaluate((1, 1, 0, 0)) == 1
    assert g.evaluate((1, 0, 0, 0)) == 0
    assert g.evaluate((1, 1, 1, 0)) == 1
    a = BptfGate("AndType", 1, 4, Anf.from_sets([(0,), (2, 3)]))
    assert a.evaluate((0, 1, 1, 1)) == Anf.from_sets([(0,), (2, 3)]).evaluate((0, 1, 1, 1)) == 1
    assert a.evaluate((0, 0, 1, 1)) == 0
    with pytest.raises(WidthMismatch):
        g.evaluate((1, 1))


def random_circuit(n, rng, width=3, layers=2, size=4):
    layer_list = []
    for li in range(layers):
        nodes = []
        for _ in range(size):
            refs = [("x", int(rng.integers(0, n)))] + (
                [("g", li - 1, int(rng.integers(0, size)))] if li else []
            )
            while len(refs) < width:
                refs.append(("x", int(rng.integers(0, n))))
            k = int(rng.integers(0, 2))
            monos = [s for d in range(1, k + 2) for s in itertools.combinations(range(width), d) if rng.random() < 0.5]
            nodes.append(GateNode(BptfGate(str(rng.choice(["OrType", "AndType"])), k, width, Anf.from_sets(monos)), tuple(refs)))
        layer_list.append(tuple(nodes))
    outputs = tuple(("g", layers - 1, j) for j in range(size))
    return BptfCircuit(n, tuple(layer_list), outputs)


def test_restrict_all_alive_and_all_fixed():
    rng = np.random.default_rng(0)
    c = random_circuit(6, rng)
    same = c.restrict(Restriction.alive(6))
    for i in range(64):
        assert eval_circuit(same, bits(i, 6)) == eval_circuit(c, bits(i, 6))
    x = bits(37, 6)
    fixed = c.restrict(Restriction(x))
    assert all(r[0] == "c" for r in fixed.outputs)
    assert tuple(r[1] for r in fixed.outputs) == eval_circuit(c, x)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 9))
def test_restriction_composition(seed, n):
    rng = np.random.default_rng(seed)
    c = random_circuit(n, rng)
    rho = sample_restriction(n, 0.6, rng)
    tau = sample_restriction(n, 0.6, rng)
    lhs = c.restrict(rho).restrict(tau)
    rhs = c.restrict(rho.compose(tau))
    for i in range(1 << n):
        assert eval_circuit(lhs, bits(i, n)) == eval_circuit(rhs, bits(i, n))


def test_sample_restriction_statistics():
    rng = np.random.default_rng(123)
    n, trials, keep = 10, 10_000, 0.3
    stars = 0
    ones = 0
    fixed = 0
    for _ in range(trials):
        r = sample_restriction(n, keep, rng)
        stars += len(r.stars)
        for v in r.values:
            if v is not None:
                fixed += 1
                ones += v
    total = n * trials
    assert abs(stars / total - keep) < 5 * math.sqrt(keep * (1 - keep) / total)
    assert abs(ones / fixed - 0.5) < 5 * math.sqrt(0.25 / fixed)
    a = sample_restriction(20, 0.5, np.random.default_rng(9))
    b = sample_restriction(20, 0.5, np.random.default_rng(9))
    assert a == b


def test_restriction_parse_and_compose():
    r = Restriction.parse("1*0*")
    assert str(r) == "1*0*"
    assert r.stars == (1, 3)
    assert str(r.compose(Restriction.parse("0011"))) == "1001"


# ----------------------------------------------------------------- ANF


def test_anf_examples():
    assert anf_from_truth_table([0] * 8) == Anf()
    and3 = truth_table(lambda x: x[0] & x[1] & x[2], 3)
    assert anf_from_truth_table(and3).sets() == [(0, 1, 2)]
    lsb6 = anf_from_truth_table(lsb_truth_table(6))
    assert lsb6.count_degree(2) == math.comb(6, 2)
    assert set(itertools.combinations(range(6), 2)) <= set(lsb6.sets())
    with pytest.raises(TooLarge):
        anf_from_truth_table(np.zeros(1 << 21, dtype=np.uint8))


def test_lsb_table_matches_core():
    n = 7
    table = lsb_truth_table(n)
    for i in range(1 << n):
        assert table[i] == lsb(bits(i, n))


@settings(max_examples=60)
@given(n=st.integers(0, 8), data=st.data())
def test_anf_round_trip_and_naive_oracle(n, data):
    table = np.array(data.draw(st.lists(st.integers(0, 1), min_size=1 << n, max_size=1 << n)), dtype=np.uint8)
    anf = anf_from_truth_table(table)
    assert set(anf.monomials) == oracles.anf_naive(table, n)
    assert np.array_equal(anf.truth_table(n), table)


@settings(max_examples=40)
@given(seed=st.integers(0, 10**6))
def test_anf_algebra_matches_pointwise(seed):
    rng = np.random.default_rng(seed)
    n = 5
    a = anf_from_truth_table(rng.integers(0, 2, 1 << n))
    b = anf_from_truth_table(rng.integers(0, 2, 1 << n))
    ta, tb = a.truth_table(n), b.truth_table(n)
    assert np.array_equal((a ^ b).truth_table(n), ta ^ tb)
    assert np.array_equal((a & b).truth_table(n), ta & tb)
    assert np.array_equal((a | b).truth_table(n), ta | tb)


# ------------------------------------------------------ decision trees


def test_tree_to_anf_examples():
    assert dt_to_anf(Leaf(1)) == Anf.const(1)
    parity = Query(0, Query(1, Leaf(0), Leaf(1)), Query(1, Leaf(1), Leaf(0)))
    assert sorted(dt_to_anf(parity).sets()) == [(0,), (1,)]


def test_tree_to_anf_on_random_trees():
    rng = np.random.default_rng(2)
    for _ in range(200):
        n = int(rng.integers(1, 11))
        t = random_tree(n, int(rng.integers(0, n + 1)), rng)
        table = truth_table(lambda x: evaluate_tree(t, x), n)
        assert dt_to_anf(t) == anf_from_truth_table(table)
        assert dt_to_anf(t, exact_or=True) == dt_to_anf(t)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 12))
def test_tree_anf_evaluates_like_tree(seed, n):
    rng = np.random.default_rng(seed)
    t = random_tree(n, min(n, 6), rng)
    assert np.array_equal(dt_to_anf(t).truth_table(n), truth_table(lambda x: evaluate_tree(t, x), n))


def worst_degree_two(q, n_vars):
    """Largest degree-2 count over complete depth-q trees on ``n_vars`` labelled variables and all leaf labels."""
    best = 0
    slots = (1 << q) - 1

    def trees(depth, used):
        if depth == 0:
            yield Leaf(0)
            yield Leaf(1)
            return
        for v in range(n_vars):
            if v in used:
                continue
            for left in trees(depth - 1, used | {v}):
                for right in trees(depth - 1, used | {v}):
                    yield Query(v, left, right)

    for t in trees(q, frozenset()):
        best = max(best, dt_to_anf(t).count_degree(2))
    return best


@pytest.mark.parametrize("q", [1, 2, 3])
def test_degree_two_cap_for_trees_reading_q_variables(q):
    assert worst_degree_two(q, q) <= degree_two_cap(q)


def test_degree_two_cap_complete_trees_small_depth():
    for q in (1, 2, 3):
        worst = max(dt_to_anf(complete_tree(q, labels)).count_degree(2) for labels in itertools.product((0, 1), repeat=1 << q))
        assert worst <= degree_two_cap(q)


@pytest.mark.xfail(strict=True, reason="a complete depth-4 tree on 15 variables reaches 12 > 10 degree-2 terms; see the decisions ledger")
def test_degree_two_cap_complete_depth_four():
    worst = max(dt_to_anf(complete_tree(4, labels)).count_degree(2) for labels in itertools.product((0, 1), repeat=16))
    assert worst <= degree_two_cap(4)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_restriction_never_deepens_tree(seed):
    rng = np.random.default_rng(seed)
    t = random_tree(8, 5, rng)
    rho = sample_restriction(8, 0.5, rng)
    r = restrict_tree(t, rho)
    assert tree_depth(r) <= tree_depth(t)
    for i in range(1 << 8):
        x = bits(i, 8)
        assert evaluate_tree(r, x) == evaluate_tree(t, rho.fill(x))


def test_tree_json_round_trip():
    rng = np.random.default_rng(4)
    t = random_tree(6, 4, rng)
    assert tree_from_json(json.dumps(tree_to_json(t))) == t
    assert tree_variables(t) <= set(range(6))


# ----------------------------------------------------- parity checks


@pytest.mark.parametrize("n", [2, 4, 6, 8, 9])
def test_pairwise_circuit_passes_parity_check(n):
    c = pairwise_halving_circuit(n)
    assert len(c.outputs) == math.comb(n, 2) + n
    assert valid_parity_check(c)


@pytest.mark.parametrize("n", [2, 5, 8])
def test_constant_circuits_fail_parity_check(n):
    assert not valid_parity_check(constant_circuit(n, 3, 0))
    assert not valid_parity_check(constant_circuit(n, 1, 1))


def test_target_is_complement_of_lsb_on_even_inputs():
    n = 8
    even = weight_table(n) % 2 == 0
    assert np.array_equal(halving_target_table(n)[even], 1 - lsb_truth_table(n)[even])


def _min_degree_two_over_affine_g(n):
    """Fewest degree-2 monomials among ``target xor parity * g`` with ``g`` affine."""
    W = weight_table(n)
    target = halving_target_table(n)
    par = (W % 2).astype(np.uint8)
    xs = (np.arange(1 << n)[:, None] >> np.arange(n)) & 1
    best = None
    for c0 in (0, 1):
        for mask in range(1 << n):
            g = ((c0 + xs @ ((mask >> np.arange(n)) & 1)) % 2).astype(np.uint8)
            count = anf_from_truth_table(target ^ (par & g)).count_degree(2)
            best = count if best is None else min(best, count)
    return best


@pytest.mark.parametrize("n", [4, 6, 8, 10, 12])
def test_even_input_solvers_need_many_degree_two_terms(n):
    # exact minimum over affine g: C(n/2, 2) * 2 = C(n,2)/2 * (1 - 1/(n-1))
    best = _min_degree_two_over_affine_g(n)
    assert best == 2 * math.comb(n // 2, 2)
    assert best >= math.comb(n, 2) / 2 * (1 - 1 / (n - 1)) - 1e-9


# --------------------------------------------------- canonical trees


def test_canonical_tree_fully_fixed_has_depth_zero():
    rng = np.random.default_rng(1)
    F = random_depth2_circuit(10, 5, 3, 1, rng)
    rho = Restriction(tuple(int(v) for v in rng.integers(0, 2, 10)))
    depth, witness = canonical_decision_tree(F, rho, lambda v: 0)
    assert depth == 0 and witness is None
    assert canonical_depth(F, rho) == 0


def test_single_clause_depth_at_most_width():
    clause = ((0, 1), (3, 0), (5, 1))
    F = Depth2Circuit(6, or_gate(1), (clause,))
    assert canonical_depth(F, Restriction.alive(6)) == 3
    for i in range(64):
        depth, _ = canonical_decision_tree(F, Restriction.alive(6), lambda v, i=i: (i >> v) & 1)
        assert depth <= 3


def test_run_value_matches_circuit_on_full_answers():
    rng = np.random.default_rng(8)
    for _ in range(200):
        F = random_depth2_circuit(8, 6, 2, int(rng.integers(0, 3)), rng)
        x = tuple(int(v) for v in rng.integers(0, 2, 8))
        run = canonical_run(F, Restriction.alive(8), lambda v: x[v])
        if not run.early_exit:
            # every alive variable on a live term was answered from x; others default to 0
            filled = [0] * 8
            for v in run.queried:
                filled[v] = x[v]
            assert run.value == F.evaluate(filled)
        else:
            assert run.value == F.gate.evaluate([1] * len(F.clauses))


def test_witnesses_are_valid_and_replay():
    rng = np.random.default_rng(12)
    checked = 0
    for _ in range(400):
        F = random_depth2_circuit(12, 6, 3, int(rng.integers(0, 2)), rng)
        rho = sample_restriction(12, 0.5, rng)
        answers = rng.integers(0, 2, 12)
        run = canonical_run(F, rho, lambda v: int(answers[v]))
        for t in range(1, run.depth + 1):
            w = extract_witness(run, t)
            assert w is not None
            assert witness_is_valid(w, F, t)
            assert replay_witness(w, F, rho)
            checked += 1
        assert extract_witness(run, run.depth + 1) is None
    assert checked > 100


def test_canonical_depth_dominates_single_runs():
    rng = np.random.default_rng(13)
    for _ in range(100):
        F = random_depth2_circuit(9, 5, 2, 1, rng)
        rho = sample_restriction(9, 0.6, rng)
        d = canonical_depth(F, rho)
        for i in range(16):
            run = canonical_run(F, rho, lambda v, i=i: (i >> (v % 4)) & 1)
            assert run.depth <= d


def test_downward_closed_examples():
    rng = np.random.default_rng(21)
    violations = 0
    for _ in range(300):
        F = random_depth2_circuit(10, 5, 2, int(rng.integers(0, 2)), rng)
        rho = sample_restriction(10, 0.6, rng)
        exts = [random_extension(rho, rng) for _ in range(3)]
        stars = rho.stars
        if stars:
            exts.append(rho.fix({stars[0]: 1}))
        violations += not check_downward_closed(F, rho, exts)
    assert violations == 0


def test_off_tree_fixing_keeps_witness():
    rng = np.random.default_rng(31)
    for _ in range(200):
        F = random_depth2_circuit(14, 4, 2, 0, rng)
        rho = sample_restriction(14, 0.7, rng)
        used = {v for c in F.clauses for v, _ in c}
        off = [v for v in rho.stars if v not in used]
        if not off:
            continue
        answers = rng.integers(0, 2, 14)
        run = canonical_run(F, rho, lambda v: int(answers[v]))
        ext = rho.fix({off[0]: 1})
        run2 = canonical_run(F, ext, lambda v: int(answers[v]))
        assert run.batches == run2.batches


# ----------------------------------------------------- switching


def test_switching_bound_examples():
    assert switching_bound(2, 0, 0.01, 3) == pytest.approx(0.064)
    assert switching_bound(2, 0, 0.01, 0) >= 1
    assert multi_switching_bound(4, 2, 0, 0.01, 3) == pytest.approx(4 * 1.6**3)


def test_empirical_switch_estimate_below_bound():
    rng = np.random.default_rng(40)
    F = random_depth2_circuit(30, 20, 2, 0, rng)
    est = empirical_switch_prob(F, 0.01, 3, 5000, rng)
    assert est.bound == pytest.approx(0.064)
    assert est.ok and not est.vacuous
    assert est.ci_low <= est.estimate <= est.ci_high


def test_zero_depth_target_is_vacuous():
    rng = np.random.default_rng(41)
    F = random_depth2_circuit(10, 4, 2, 0, rng)
    est = empirical_switch_prob(F, 0.1, 0, 100, rng)
    assert est.vacuous and est.ok
    assert est.failures == 100


def test_multi_switch_case():
    rng = np.random.default_rng(42)
    Fs = [random_depth2_circuit(24, 6, 2, 0, rng) for _ in range(4)]
    assert multi_switching_hypotheses(4, 2, 0, 0.01, 4)
    est = empirical_multi_switch_prob(Fs, 0.01, 2, 4, 2000, rng)
    assert est.bound == pytest.approx(4 * 1.6**2)
    assert est.vacuous
    est = empirical_multi_switch_prob(Fs, 0.002, 3, 4, 2000, rng)
    assert est.bound < 1 and est.ok


def test_forest_depth_zero_when_everything_fixed():
    rng = np.random.default_rng(43)
    Fs = [random_depth2_circuit(8, 3, 2, 0, rng) for _ in range(3)]
    rho = Restriction(tuple(int(v) for v in rng.integers(0, 2, 8)))
    assert forest_global_depth(Fs, rho, 0, 10) == 0


def test_wilson_interval_contains_estimate():
    lo, hi = wilson_interval(3, 1000, 0.95)
    assert lo < 0.003 < hi
    lo, hi = wilson_interval(0, 1000, 0.95)
    assert lo == 0 and 0 < hi < 0.01


# ----------------------------------------------- block independence


def test_disjoint_blocks_are_all_independent():
    cones = [{i} for i in range(16)]
    assert block_independent_set(cones, 1, 16) == set(range(16))
    assert block_independent_set(cones, 4, 16) == set(range(4))


def test_fully_shared_input_leaves_one_block():
    cones = [set(range(8)) for _ in range(8)]
    assert len(block_independent_set(cones, 1, 8)) == 1


def test_circuit_lightcones():
    c = pairwise_halving_circuit(4)
    cones = lightcones(c)
    assert cones[0] == frozenset({0, 1})
    assert len(block_independent_set(c, 1)) == 1


@pytest.mark.parametrize("seed", range(5))
def test_greedy_beats_turan_on_random_circuits(seed):
    rng = np.random.default_rng(seed)
    n, block = 64, 2
    cones = random_lightcones(n, n, 3, rng)
    adj = block_intersection_graph(cones, n, block)
    ind = block_independent_set(cones, block, n)
    assert len(ind) >= turan_bound(len(adj), edge_count(adj))
    for a in ind:
        assert not (adj[a] & ind)
    # every output block reads from at most one chosen input block
    for start in range(0, n, block):
        touched = {i // block for cone in cones[start : start + block] for i in cone}
        assert len(touched & ind) <= 1


def test_turan_bound_on_complete_graph():
    assert turan_bound(5, 10) == pytest.approx(1.0)
    assert turan_bound(5, 0) == pytest.approx(5.0)
