import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ismrlab.classical import weight_table
from ismrlab.core import IsmrError, TooLarge
from ismrlab.nndecomp import (
    ActivationSpec,
    StepGate,
    decompose_activation,
    discretized,
    eval_krelu,
    gates_to_json,
    relu_spec,
)


def relu_oracle(h, c, w):
    return w * math.floor(max(0.0, h - c) / w)


def test_zero_activation_needs_no_gates():
    spec = ActivationSpec.from_function(lambda h: 0.0, 6, 4, 0.5)
    l, gates = decompose_activation(spec)
    assert l == 0 and gates == []


def test_unit_relu_gates():
    spec = relu_spec(8, c=1, w=1, k=3)
    l, gates = decompose_activation(spec)
    assert l == 2
    assert [sorted(g.firing) for g in gates] == [[2, 3], [3]]
    for h in range(4):
        x = [1] * h + [0] * (8 - h)
        assert eval_krelu(gates, x, 1) == relu_oracle(h, 1, 1)


def test_krelu_regions():
    c, w, k, n = 2, 0.5, 6, 10
    l, gates = decompose_activation(relu_spec(n, c, w, k))
    for h in range(n + 1):
        x = [1] * h + [0] * (n - h)
        out = eval_krelu(gates, x, w)
        if h <= c:
            assert out == 0
        elif h <= k:
            assert out == pytest.approx(relu_oracle(h, c, w))
        else:
            assert all(g.evaluate(x) == 1 for g in gates)
    assert eval_krelu(gates, [1] * k + [0] * (n - k), w) == pytest.approx(w * math.floor((k - c) / w))


@settings(max_examples=60)
@given(
    n=st.integers(1, 16),
    data=st.data(),
    w=st.sampled_from([0.25, 0.5, 1.0, 1.5, 3.0]),
)
def test_decomposition_reproduces_discretized_activation(n, data, w):
    k = data.draw(st.integers(0, n))
    values = data.draw(st.lists(st.floats(0, 20, allow_nan=False), min_size=n + 1, max_size=n + 1))
    spec = ActivationSpec(n, k, w, tuple(values))
    l, gates = decompose_activation(spec)
    assert l == max(math.floor(v / w) for v in values[: k + 1])
    for h in range(k + 1):
        x = [1] * h + [0] * (n - h)
        assert eval_krelu(gates, x, w) == pytest.approx(discretized(spec, h))


@settings(max_examples=30)
@given(n=st.integers(2, 14), data=st.data())
def test_monotone_activation_gives_nested_firing_sets(n, data):
    k = data.draw(st.integers(1, n))
    incs = data.draw(st.lists(st.floats(0, 3, allow_nan=False), min_size=n + 1, max_size=n + 1))
    values = tuple(itertools.accumulate(incs))
    _, gates = decompose_activation(ActivationSpec(n, k, 1.0, values))
    for a, b in zip(gates, gates[1:]):
        assert b.firing <= a.firing


@pytest.mark.parametrize("n,k", [(4, 2), (6, 4), (8, 5), (8, 8)])
def test_symmetric_anf_matches_weight_branch(n, k):
    spec = relu_spec(n, 1, 0.5, k)
    _, gates = decompose_activation(spec)
    for g in gates:
        b = g.to_bptf()
        for i in range(1 << n):
            x = tuple((i >> j) & 1 for j in range(n))
            assert b.evaluate(x) == g.evaluate(x)


def test_sixteen_input_gate_via_truth_table():
    n, k = 16, 10
    _, gates = decompose_activation(relu_spec(n, 3, 2, k))
    weights = weight_table(n)
    for g in gates:
        table = g.to_bptf().poly.truth_table(n)
        via_anf = np.where(weights > k, 1, table)
        direct = np.array([1 if h > k else int(h in g.firing) for h in weights])
        assert np.array_equal(via_anf, direct)


def test_anf_expansion_limit():
    g = StepGate(17, 3, frozenset({1}))
    with pytest.raises(TooLarge):
        g.to_bptf()


def test_spec_validation():
    with pytest.raises(IsmrError):
        ActivationSpec(3, 2, 0.0, (0, 1, 2, 3))
    with pytest.raises(IsmrError):
        ActivationSpec(3, 4, 1.0, (0, 1, 2, 3))
    with pytest.raises(IsmrError):
        ActivationSpec(3, 2, 1.0, (0, -1, 2, 3))


def test_json_report():
    spec = relu_spec(6, 1, 1, 4)
    l, gates = decompose_activation(spec)
    obj = json.loads(gates_to_json(l, gates, spec))
    assert obj["gate_count"] == l == 3
    assert obj["gates"][0] == {"kind": "OrType", "k": 4, "fan_in": 6, "firing_weights": [2, 3, 4]}
