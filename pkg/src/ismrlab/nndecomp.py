"""One parallel layer of OR-type bPTF gates reproducing a discretized symmetric activation.

Inputs are bit strings read through their Hamming weight.  Gate ``i`` (for
``i = 1..l``) fires on the weights ``h <= k`` with ``floor(f(h)/w) >= i`` and on
every weight above ``k``.  Summing ``w`` per firing gate gives
``w * floor(f(h)/w)`` whenever ``h <= k``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Sequence

from .classical import Anf, BptfGate
from .core import IsmrError, TooLarge

ANF_EXPANSION_LIMIT = 16


@dataclass(frozen=True)
class ActivationSpec:
    n: int
    k: int
    w: float
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.w <= 0:
            raise IsmrError("step w must be positive")
        if not 0 <= self.k <= self.n:
            raise IsmrError("k must lie in [0, n]")
        if len(self.values) != self.n + 1:
            raise IsmrError("activation needs one value per weight 0..n")
        if any(v < 0 for v in self.values[: self.k + 1]):
            raise IsmrError("activation must be nonnegative on [0, k]")

    @classmethod
    def from_function(cls, f: Callable[[int], float], n: int, k: int, w: float) -> "ActivationSpec":
        return cls(n, k, w, tuple(float(f(h)) for h in range(n + 1)))

    def steps(self, h: int) -> int:
        return math.floor(self.values[h] / self.w)


def relu_spec(n: int, c: float, w: float, k: int) -> ActivationSpec:
    return ActivationSpec.from_function(lambda h: max(0.0, h - c), n, k, w)


@dataclass(frozen=True)
class StepGate:
    """OR-type threshold gate driven by the input weight."""

    n: int
    k: int
    firing: frozenset[int]

    def evaluate(self, x: Sequence[int]) -> int:
        if len(x) != self.n:
            raise IsmrError(f"gate expects {self.n} inputs")
        h = sum(1 for b in x if b)
        return 1 if h > self.k else int(h in self.firing)

    def elementary_coefficients(self) -> list[int]:
        """``a_d`` with ``P = sum_d a_d e_d(x)`` over F_2 matching the firing set on weights ``<= k``."""
        a: list[int] = []
        for h in range(self.k + 1):
            acc = sum(a[d] * math.comb(h, d) for d in range(h)) & 1
            a.append((int(h in self.firing) - acc) & 1)
        return a

    def to_bptf(self) -> BptfGate:
        if self.n > ANF_EXPANSION_LIMIT:
            raise TooLarge(f"ANF expansion limited to n <= {ANF_EXPANSION_LIMIT}")
        monos = [s for d, ad in enumerate(self.elementary_coefficients()) if ad for s in combinations(range(self.n), d)]
        return BptfGate("OrType", self.k, self.n, Anf.from_sets(monos))

    def to_json(self) -> dict:
        return {"kind": "OrType", "k": self.k, "fan_in": self.n, "firing_weights": sorted(self.firing)}


def decompose_activation(spec: ActivationSpec) -> tuple[int, list[StepGate]]:
    """Gate count ``l = floor(max_{h<=k} f(h) / w)`` and the gates for steps ``1..l``.

    The loop in the usual pseudocode starts its counter at 0; here step ``i``
    is the ``i``-th increment of ``w``, so the gate for ``i = 0`` (which would
    fire everywhere) is not emitted.
    """
    steps = [spec.steps(h) for h in range(spec.k + 1)]
    l = max(steps)
    gates = [StepGate(spec.n, spec.k, frozenset(h for h, s in enumerate(steps) if s >= i)) for i in range(1, l + 1)]
    return l, gates


def eval_krelu(gates: Sequence[StepGate], x: Sequence[int], w: float) -> float:
    return w * sum(g.evaluate(x) for g in gates)


def discretized(spec: ActivationSpec, h: int) -> float:
    return spec.w * spec.steps(h)


def gates_to_json(l: int, gates: Sequence[StepGate], spec: ActivationSpec) -> str:
    return json.dumps(
        {"n": spec.n, "k": spec.k, "w": spec.w, "gate_count": l, "gates": [g.to_json() for g in gates]},
        indent=2,
    )
