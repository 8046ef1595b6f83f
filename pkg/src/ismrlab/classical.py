"""Bounded polynomial threshold circuits, decision trees and restrictions.

Truth tables index inputs little-endian: bit ``i`` of the row index is ``x_i``.
Decision-tree JSON uses ``{"var", "left", "right"}`` where ``left`` is the
branch taken when the variable is 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Sequence, Union

import numpy as np
from scipy.stats import binomtest

from .core import IsmrError, TooLarge

STAR = None
MAX_TRUTH_TABLE_VARS = 20


class WidthMismatch(IsmrError):
    pass


class VacuousBound(IsmrError):
    pass


# ---------------------------------------------------------------------- ANF


@dataclass(frozen=True)
class Anf:
    """XOR of monomials; each monomial is a bitmask over variable indices."""

    monomials: frozenset[int] = frozenset()

    @classmethod
    def const(cls, bit: int) -> "Anf":
        return cls(frozenset({0}) if bit & 1 else frozenset())

    @classmethod
    def var(cls, i: int) -> "Anf":
        return cls(frozenset({1 << i}))

    @classmethod
    def from_sets(cls, sets: Iterable[Iterable[int]]) -> "Anf":
        acc: set[int] = set()
        for s in sets:
            acc ^= {sum(1 << i for i in set(s))}
        return cls(frozenset(acc))

    def __xor__(self, other: "Anf") -> "Anf":
        return Anf(self.monomials ^ other.monomials)

    def __and__(self, other: "Anf") -> "Anf":
        acc: set[int] = set()
        for a in self.monomials:
            for b in other.monomials:
                acc ^= {a | b}
        return Anf(frozenset(acc))

    def __or__(self, other: "Anf") -> "Anf":
        return self ^ other ^ (self & other)

    def evaluate(self, x: Sequence[int]) -> int:
        mask = sum(1 << i for i, b in enumerate(x) if b)
        return sum(1 for m in self.monomials if m & mask == m) & 1

    def degree(self) -> int:
        return max((m.bit_count() for m in self.monomials), default=-1)

    def count_degree(self, deg: int) -> int:
        return sum(1 for m in self.monomials if m.bit_count() == deg)

    def sets(self) -> list[tuple[int, ...]]:
        out = []
        for m in sorted(self.monomials, key=lambda v: (v.bit_count(), v)):
            out.append(tuple(i for i in range(m.bit_length()) if m >> i & 1))
        return out

    def truth_table(self, n: int) -> np.ndarray:
        _check_vars(n)
        coeffs = np.zeros(1 << n, dtype=np.uint8)
        for m in self.monomials:
            if m >> n:
                raise WidthMismatch("monomial uses a variable beyond n")
            coeffs[m] ^= 1
        return _subset_xor_transform(coeffs, n)

    def __str__(self) -> str:
        if not self.monomials:
            return "0"
        return " + ".join("1" if not s else "*".join(f"x{i}" for i in s) for s in self.sets())


def _check_vars(n: int) -> None:
    if n > MAX_TRUTH_TABLE_VARS:
        raise TooLarge(f"{n} variables exceed the truth-table limit {MAX_TRUTH_TABLE_VARS}")


def _subset_xor_transform(a: np.ndarray, n: int) -> np.ndarray:
    """In place ``a[S] <- XOR_{T subset S} a[T]``; it is its own inverse over F_2."""
    a = a.copy()
    for i in range(n):
        step = 1 << i
        view = a.reshape(-1, 2 * step)
        view[:, step:] ^= view[:, :step]
    return a


def anf_from_truth_table(table: Sequence[int]) -> Anf:
    """Moebius transform of a truth table of length ``2^n``."""
    t = np.asarray(table, dtype=np.uint8) & 1
    n = int(t.size).bit_length() - 1
    if t.size != 1 << n:
        raise WidthMismatch("truth table length must be a power of two")
    _check_vars(n)
    coeffs = _subset_xor_transform(t, n)
    return Anf(frozenset(int(i) for i in np.flatnonzero(coeffs)))


def truth_table(f: Callable[[tuple[int, ...]], int], n: int) -> np.ndarray:
    _check_vars(n)
    return np.array([f(tuple((i >> j) & 1 for j in range(n))) & 1 for i in range(1 << n)], dtype=np.uint8)


def count_degree_terms(anf: Anf, deg: int) -> int:
    return anf.count_degree(deg)


def weight_table(n: int) -> np.ndarray:
    return np.array([i.bit_count() for i in range(1 << n)])


def lsb_truth_table(n: int) -> np.ndarray:
    """1 iff ``|x| mod 4`` is 0 or 1."""
    return np.isin(weight_table(n) % 4, (0, 1)).astype(np.uint8)


def halving_target_table(n: int) -> np.ndarray:
    """``(|x|/2) mod 2`` on even inputs: the required output parity of the halving problem."""
    return ((weight_table(n) // 2) % 2).astype(np.uint8)


# -------------------------------------------------------------- bPTF gates


@dataclass(frozen=True)
class BptfGate:
    """OR-type: ``P(x)`` if ``|x| <= k`` else 1.  AND-type: ``P(x)`` if ``|x| >= w - k`` else 0."""

    kind: str
    k: int
    fan_in: int
    poly: Anf = Anf()

    def __post_init__(self) -> None:
        if self.kind not in ("OrType", "AndType"):
            raise IsmrError(f"unknown gate kind {self.kind!r}")
        if self.k < 0 or self.fan_in < 0:
            raise IsmrError("k and fan-in must be non-negative")

    def evaluate(self, bits: Sequence[int]) -> int:
        if len(bits) != self.fan_in:
            raise WidthMismatch(f"gate expects {self.fan_in} inputs, got {len(bits)}")
        w = sum(1 for b in bits if b)
        if self.kind == "OrType":
            return 1 if w > self.k else self.poly.evaluate(bits)
        return 0 if w < self.fan_in - self.k else self.poly.evaluate(bits)


def eval_bptf_gate(gate: BptfGate, bits: Sequence[int]) -> int:
    return gate.evaluate(bits)


def or_gate(fan_in: int) -> BptfGate:
    return BptfGate("OrType", 0, fan_in)


def and_gate(fan_in: int) -> BptfGate:
    return BptfGate("AndType", 0, fan_in, Anf.from_sets([range(fan_in)]))


# Wire references: ("x", i) input, ("g", layer, index) gate output, ("c", bit) constant.
WireRef = tuple


@dataclass(frozen=True)
class GateNode:
    gate: BptfGate
    inputs: tuple[WireRef, ...]


@dataclass(frozen=True)
class BptfCircuit:
    n: int
    layers: tuple[tuple[GateNode, ...], ...]
    outputs: tuple[WireRef, ...]

    def __post_init__(self) -> None:
        for li, layer in enumerate(self.layers):
            for node in layer:
                if len(node.inputs) != node.gate.fan_in:
                    raise WidthMismatch("gate fan-in does not match its wiring")
                for ref in node.inputs:
                    self._check_ref(ref, li)
        for ref in self.outputs:
            self._check_ref(ref, len(self.layers))

    def _check_ref(self, ref: WireRef, before: int) -> None:
        if ref[0] == "x" and not 0 <= ref[1] < self.n:
            raise WidthMismatch(f"input {ref[1]} out of range")
        if ref[0] == "g" and not (0 <= ref[1] < before and 0 <= ref[2] < len(self.layers[ref[1]])):
            raise IsmrError("gate input must come from an earlier layer")
        if ref[0] not in ("x", "g", "c"):
            raise IsmrError(f"bad wire {ref!r}")

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(layer) for layer in self.layers)

    def evaluate(self, x: Sequence[int]) -> tuple[int, ...]:
        if len(x) != self.n:
            raise WidthMismatch(f"circuit expects {self.n} inputs")
        values: list[list[int]] = []

        def get(ref):
            if ref[0] == "x":
                return int(x[ref[1]])
            if ref[0] == "c":
                return int(ref[1])
            return values[ref[1]][ref[2]]

        for layer in self.layers:
            values.append([node.gate.evaluate([get(r) for r in node.inputs]) for node in layer])
        return tuple(get(r) for r in self.outputs)

    def restrict(self, rho: "Restriction") -> "BptfCircuit":
        """Wire fixed inputs to constants and fold gates whose inputs are all constant."""
        if len(rho) != self.n:
            raise WidthMismatch("restriction width differs from circuit inputs")
        const_of: dict[tuple[int, int], int] = {}

        def sub(ref):
            if ref[0] == "x" and rho.values[ref[1]] is not STAR:
                return ("c", rho.values[ref[1]])
            if ref[0] == "g" and (ref[1], ref[2]) in const_of:
                return ("c", const_of[(ref[1], ref[2])])
            return ref

        layers = []
        for li, layer in enumerate(self.layers):
            nodes = []
            for gi, node in enumerate(layer):
                ins = tuple(sub(r) for r in node.inputs)
                if all(r[0] == "c" for r in ins):
                    const_of[(li, gi)] = node.gate.evaluate([r[1] for r in ins])
                nodes.append(GateNode(node.gate, ins))
            layers.append(tuple(nodes))
        return BptfCircuit(self.n, tuple(layers), tuple(sub(r) for r in self.outputs))

    def output_parity_table(self) -> np.ndarray:
        _check_vars(self.n)
        return truth_table(lambda x: sum(self.evaluate(x)) & 1, self.n)


def eval_circuit(circ: BptfCircuit, x: Sequence[int]) -> tuple[int, ...]:
    return circ.evaluate(x)


def valid_parity_check(circ: BptfCircuit, n: int | None = None) -> bool:
    """True iff the XOR of all outputs equals ``(|x|/2) mod 2`` on every even input.

    On even inputs this target is the complement of :func:`lsb_truth_table`.
    """
    n = circ.n if n is None else n
    if n != circ.n:
        raise WidthMismatch("n differs from circuit inputs")
    even = weight_table(n) % 2 == 0
    return bool(np.array_equal(circ.output_parity_table()[even], halving_target_table(n)[even]))


def pairwise_halving_circuit(n: int) -> BptfCircuit:
    """Exact halving solver with ``C(n,2) + n`` outputs: every ``x_i x_j`` then every ``x_i``.

    The pair products XOR to ``C(|x|,2) mod 2``; the singletons add ``|x| mod 2 = 0``.
    """
    pairs = tuple(
        GateNode(BptfGate("AndType", 0, 2, Anf.from_sets([(0, 1)])), (("x", i), ("x", j)))
        for i, j in combinations(range(n), 2)
    )
    outputs = tuple(("g", 0, g) for g in range(len(pairs))) + tuple(("x", i) for i in range(n))
    return BptfCircuit(n, (pairs,), outputs)


def constant_circuit(n: int, m: int = 1, bit: int = 0) -> BptfCircuit:
    return BptfCircuit(n, (), tuple(("c", bit) for _ in range(m)))


def lightcones(circ: BptfCircuit) -> list[frozenset[int]]:
    """Input indices each output depends on structurally."""
    cones: list[list[frozenset[int]]] = []

    def cone(ref) -> frozenset[int]:
        if ref[0] == "x":
            return frozenset({ref[1]})
        if ref[0] == "c":
            return frozenset()
        return cones[ref[1]][ref[2]]

    for layer in circ.layers:
        cones.append([frozenset().union(*[cone(r) for r in node.inputs]) for node in layer])
    return [cone(r) for r in circ.outputs]


# ------------------------------------------------------------- restrictions


@dataclass(frozen=True)
class Restriction:
    """Per-variable value in ``{0, 1, STAR}`` (``STAR`` is ``None``)."""

    values: tuple

    def __post_init__(self) -> None:
        if any(v not in (0, 1, STAR) for v in self.values):
            raise IsmrError("restriction values must be 0, 1 or None")

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def alive(cls, n: int) -> "Restriction":
        return cls((STAR,) * n)

    @classmethod
    def parse(cls, text: str) -> "Restriction":
        table = {"0": 0, "1": 1, "*": STAR}
        return cls(tuple(table[c] for c in text))

    def __str__(self) -> str:
        return "".join("*" if v is STAR else str(v) for v in self.values)

    @property
    def stars(self) -> tuple[int, ...]:
        return tuple(i for i, v in enumerate(self.values) if v is STAR)

    def compose(self, tau: "Restriction") -> "Restriction":
        """Apply ``tau`` to the positions this restriction leaves alive."""
        if len(tau) != len(self):
            raise WidthMismatch("restrictions differ in width")
        return Restriction(tuple(t if v is STAR else v for v, t in zip(self.values, tau.values)))

    def fill(self, x: Sequence[int]) -> tuple[int, ...]:
        return tuple(int(xi) if v is STAR else v for v, xi in zip(self.values, x))

    def fix(self, assignment: dict[int, int]) -> "Restriction":
        vals = list(self.values)
        for i, b in assignment.items():
            vals[i] = int(b)
        return Restriction(tuple(vals))


def sample_restriction(n: int, keep_prob: float, rng: np.random.Generator) -> Restriction:
    if not 0 < keep_prob < 1:
        raise IsmrError("keep probability must lie in (0, 1)")
    alive = rng.random(n) < keep_prob
    bits = rng.integers(0, 2, size=n)
    return Restriction(tuple(STAR if a else int(b) for a, b in zip(alive, bits)))


# ----------------------------------------------------------- decision trees


@dataclass(frozen=True)
class Leaf:
    bit: int


@dataclass(frozen=True)
class ForestLeaf:
    trees: tuple


@dataclass(frozen=True)
class Query:
    var: int
    left: "Node"
    right: "Node"


Node = Union[Leaf, ForestLeaf, Query]


def evaluate_tree(node: Node, x: Sequence[int]):
    while isinstance(node, Query):
        node = node.left if x[node.var] else node.right
    if isinstance(node, ForestLeaf):
        return tuple(evaluate_tree(t, x) for t in node.trees)
    return node.bit


def tree_depth(node: Node) -> int:
    if isinstance(node, Query):
        return 1 + max(tree_depth(node.left), tree_depth(node.right))
    return 0


def forest_local_depth(node: Node) -> int:
    if isinstance(node, Query):
        return max(forest_local_depth(node.left), forest_local_depth(node.right))
    if isinstance(node, ForestLeaf):
        return max((tree_depth(t) for t in node.trees), default=0)
    return 0


def tree_variables(node: Node) -> set[int]:
    if isinstance(node, Query):
        return {node.var} | tree_variables(node.left) | tree_variables(node.right)
    if isinstance(node, ForestLeaf):
        return set().union(*[tree_variables(t) for t in node.trees]) if node.trees else set()
    return set()


def restrict_tree(node: Node, rho: Restriction) -> Node:
    if isinstance(node, Query):
        v = rho.values[node.var]
        if v is STAR:
            left, right = restrict_tree(node.left, rho), restrict_tree(node.right, rho)
            if left == right:
                return left
            return Query(node.var, left, right)
        return restrict_tree(node.left if v else node.right, rho)
    if isinstance(node, ForestLeaf):
        return ForestLeaf(tuple(restrict_tree(t, rho) for t in node.trees))
    return node


def tree_to_json(node: Node) -> dict:
    if isinstance(node, Query):
        return {"var": node.var, "left": tree_to_json(node.left), "right": tree_to_json(node.right)}
    if isinstance(node, ForestLeaf):
        return {"forest": [tree_to_json(t) for t in node.trees]}
    return {"bit": node.bit}


def tree_from_json(obj) -> Node:
    if isinstance(obj, str):
        obj = json.loads(obj)
    if "var" in obj:
        return Query(int(obj["var"]), tree_from_json(obj["left"]), tree_from_json(obj["right"]))
    if "forest" in obj:
        return ForestLeaf(tuple(tree_from_json(t) for t in obj["forest"]))
    if "bit" in obj:
        return Leaf(int(obj["bit"]) & 1)
    raise IsmrError(f"unrecognised tree node {obj!r}")


def random_tree(n: int, depth: int, rng: np.random.Generator, leaf_prob: float = 0.2) -> Node:
    """Random tree with no variable repeated on a path; internal nodes stop early with ``leaf_prob``."""

    def grow(d: int, used: frozenset[int]) -> Node:
        free = [v for v in range(n) if v not in used]
        if d == 0 or not free or (d < depth and rng.random() < leaf_prob):
            return Leaf(int(rng.integers(0, 2)))
        v = int(rng.choice(free))
        return Query(v, grow(d - 1, used | {v}), grow(d - 1, used | {v}))

    return grow(depth, frozenset())


def complete_tree(depth: int, labels: Sequence[int]) -> Node:
    """Complete tree in heap order with a fresh variable per node; leaves take ``labels``."""
    it = iter(labels)

    def grow(idx: int, d: int) -> Node:
        if d == depth:
            return Leaf(int(next(it)))
        return Query(idx, grow(2 * idx + 1, d + 1), grow(2 * idx + 2, d + 1))

    return grow(0, 0)


def _rec_paths(node: Node, path: Anf, acc: list[Anf]) -> list[Anf]:
    if isinstance(node, Leaf):
        if node.bit:
            acc.append(path)
        return acc
    if not isinstance(node, Query):
        raise IsmrError("ANF conversion needs a single-output tree")
    x = Anf.var(node.var)
    _rec_paths(node.left, x & path, acc)
    _rec_paths(node.right, (Anf.const(1) ^ x) & path, acc)
    return acc


def dt_to_anf(tree: Node, exact_or: bool = False) -> Anf:
    """ANF of a tree as the disjunction of its accepting path terms.

    Accepting paths are mutually exclusive, so their pairwise products vanish
    and the disjunction reduces to XOR.  ``exact_or`` keeps the full
    ``a + b + ab`` expansion instead.
    """
    result = Anf.const(0)
    for term in _rec_paths(tree, Anf.const(1), []):
        result = (result | term) if exact_or else (result ^ term)
    return result


def degree_two_cap(q: int) -> int:
    return math.comb(q, 2) + q


# ----------------------------------------------- depth-2 circuits and CDT


Literal = tuple[int, int]  # (variable, required value)


@dataclass(frozen=True)
class Depth2Circuit:
    """A single bPTF[k] gate over AND terms of width at most ``w``."""

    n: int
    gate: BptfGate
    clauses: tuple[tuple[Literal, ...], ...]

    def __post_init__(self) -> None:
        if self.gate.fan_in != len(self.clauses):
            raise WidthMismatch("gate fan-in must equal the number of terms")
        if self.gate.kind != "OrType":
            raise IsmrError("the canonical tree procedure expects an OR-type top gate")

    @property
    def width(self) -> int:
        return max((len(c) for c in self.clauses), default=0)

    @property
    def k(self) -> int:
        return self.gate.k

    def clause_values(self, x: Sequence[int]) -> list[int]:
        return [int(all(x[v] == b for v, b in c)) for c in self.clauses]

    def evaluate(self, x: Sequence[int]) -> int:
        return self.gate.evaluate(self.clause_values(x))


def random_depth2_circuit(n: int, m: int, w: int, k: int, rng: np.random.Generator) -> Depth2Circuit:
    """``m`` terms of exactly ``w`` distinct literals; the gate polynomial is a random ANF of degree ``<= k``."""
    clauses = []
    for _ in range(m):
        vs = rng.choice(n, size=w, replace=False)
        clauses.append(tuple((int(v), int(rng.integers(0, 2))) for v in vs))
    monos = [s for d in range(1, k + 1) for s in combinations(range(m), d)]
    chosen = [s for s in monos if rng.random() < 0.5]
    return Depth2Circuit(n, BptfGate("OrType", k, m, Anf.from_sets(chosen)), tuple(clauses))


def _clause_state(clause, x) -> tuple[bool, list[int]]:
    """(falsified, alive positions within the clause)."""
    alive = []
    for pos, (v, b) in enumerate(clause):
        if x[v] is STAR:
            alive.append(pos)
        elif x[v] != b:
            return True, []
    return False, alive


@dataclass(frozen=True)
class TWitness:
    r: int
    indices: tuple[int, ...]
    sizes: tuple[int, ...]
    positions: tuple[tuple[int, ...], ...]
    answers: tuple[tuple[int, ...], ...]

    @property
    def size(self) -> int:
        return sum(self.sizes)


@dataclass
class CdtRun:
    """Trace of one canonical-tree run on a fixed answer string."""

    value: int
    depth: int
    queried: list[int] = field(default_factory=list)
    batches: list[tuple[int, tuple[int, ...], tuple[int, ...]]] = field(default_factory=list)
    early_exit: bool = False


def canonical_run(F: Depth2Circuit, rho: Restriction, oracle: Callable[[int], int]) -> CdtRun:
    """Run the batch-query procedure, answering queries with ``oracle(var)``.

    Terms are scanned in index order; each live term has all its alive
    variables queried at once.  A term that ends up satisfied advances a
    counter, and once ``k + 1`` terms are satisfied the top gate is forced to 1.
    """
    x = list(rho.values)
    m, k = len(F.clauses), F.k
    run = CdtRun(0, 0)
    ctr = 0
    j = 0
    while j < m:
        nxt = None
        for jj in range(j, m):
            falsified, alive = _clause_state(F.clauses[jj], x)
            if not falsified:
                nxt = (jj, alive)
                break
        if nxt is None:
            break
        jj, alive = nxt
        answers = []
        for pos in alive:
            v = F.clauses[jj][pos][0]
            x[v] = int(oracle(v)) & 1
            answers.append(x[v])
            run.queried.append(v)
        run.batches.append((jj, tuple(alive), tuple(answers)))
        if all(x[v] == b for v, b in F.clauses[jj]):
            ctr += 1
            if ctr == k + 1:
                run.value = F.gate.evaluate([1] * m)
                run.early_exit = True
                run.depth = len(run.queried)
                return run
        j = jj + 1
    run.value = F.evaluate([0 if v is STAR else v for v in x])
    run.depth = len(run.queried)
    return run


def extract_witness(run: CdtRun, t: int) -> TWitness | None:
    """Shortest prefix of the run whose batch sizes reach ``t``; ``None`` if the run is shallower."""
    total = 0
    batches = []
    for jj, pos, ans in run.batches:
        batches.append((jj, pos, ans))
        total += len(pos)
        if total >= t:
            return TWitness(
                len(batches),
                tuple(b[0] for b in batches),
                tuple(len(b[1]) for b in batches),
                tuple(b[1] for b in batches),
                tuple(b[2] for b in batches),
            )
    return None


def witness_is_valid(w: TWitness, F: Depth2Circuit, t: int) -> bool:
    """Structural conditions on a t-witness."""
    zeros = sum(1 for s in w.sizes if s == 0)
    return (
        1 <= w.r <= t + F.k
        and all(a < b for a, b in zip(w.indices, w.indices[1:]))
        and zeros <= F.k
        and t <= w.size <= t + F.width - 1
        and all(len(p) == s and len(a) == s for p, a, s in zip(w.positions, w.answers, w.sizes))
        and all(all(0 <= q < len(F.clauses[i]) for q in p) for i, p in zip(w.indices, w.positions))
    )


def replay_witness(w: TWitness, F: Depth2Circuit, rho: Restriction) -> bool:
    """Re-run the procedure answering from the witness and check the same batches come back."""
    answer: dict[int, int] = {}
    for idx, pos, ans in zip(w.indices, w.positions, w.answers):
        for q, a in zip(pos, ans):
            answer[F.clauses[idx][q][0]] = a
    run = canonical_run(F, rho, lambda v: answer.get(v, 0))
    prefix = run.batches[: w.r]
    return [(b[0], b[1], b[2]) for b in prefix] == list(zip(w.indices, w.positions, w.answers))


def canonical_depth(F: Depth2Circuit, rho: Restriction, cap: int | None = None) -> int:
    """Depth of the canonical tree: the longest run over all answer strings.

    Exploration stops early once a branch reaches ``cap`` queries.
    """
    m, k = len(F.clauses), F.k
    best = 0

    def explore(x: list, j: int, ctr: int, depth: int) -> None:
        nonlocal best
        if depth > best:
            best = depth
        if cap is not None and best >= cap:
            return
        while j < m:
            for jj in range(j, m):
                falsified, alive = _clause_state(F.clauses[jj], x)
                if not falsified:
                    break
            else:
                return
            vs = [F.clauses[jj][p][0] for p in alive]
            for bits in range(1 << len(vs)):
                y = list(x)
                for i, v in enumerate(vs):
                    y[v] = (bits >> i) & 1
                sat = all(y[v] == b for v, b in F.clauses[jj])
                c = ctr + sat
                if c == k + 1:
                    if depth + len(vs) > best:
                        best = depth + len(vs)
                    continue
                explore(y, jj + 1, c, depth + len(vs))
                if cap is not None and best >= cap:
                    return
            return

    explore(list(rho.values), 0, 0, 0)
    return best


def canonical_decision_tree(F: Depth2Circuit, rho: Restriction, oracle: Callable[[int], int], t: int = 1) -> tuple[int, TWitness | None]:
    """Queried depth on the oracle's answers and the depth-``t`` witness of that run."""
    run = canonical_run(F, rho, oracle)
    return run.depth, extract_witness(run, t)


def random_extension(rho: Restriction, rng: np.random.Generator, fix_prob: float = 0.5) -> Restriction:
    """Fix each alive variable independently with probability ``fix_prob``."""
    vals = list(rho.values)
    for i in rho.stars:
        if rng.random() < fix_prob:
            vals[i] = int(rng.integers(0, 2))
    return Restriction(tuple(vals))


def check_downward_closed(F: Depth2Circuit, rho: Restriction, extensions: Iterable[Restriction]) -> bool:
    """Every extension fixing more variables has canonical depth at most that of ``rho``."""
    base = canonical_depth(F, rho)
    for ext in extensions:
        if any(r is not STAR and e != r for r, e in zip(rho.values, ext.values)):
            raise IsmrError("extension must agree with rho on its fixed variables")
        if canonical_depth(F, ext, cap=base + 1) > base:
            return False
    return True


# ------------------------------------------------------ switching estimates


def switching_bound(w: int, k: int, keep_prob: float, t: int) -> float:
    return (20 * keep_prob * w) ** t * 2**k


def multi_switching_bound(m: int, w: int, k: int, keep_prob: float, t: int) -> float:
    return m * 2**k * (80 * w * keep_prob) ** t


def multi_switching_hypotheses(m: int, w: int, k: int, keep_prob: float, local_depth: int) -> bool:
    return local_depth >= math.log2(m) + k + 2 and keep_prob < 1 / (40 * w)


@dataclass(frozen=True)
class SwitchEstimate:
    failures: int
    trials: int
    estimate: float
    ci_low: float
    ci_high: float
    bound: float
    vacuous: bool
    ok: bool


def wilson_interval(failures: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(failures, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


THREE_SIGMA = 0.9973002039367398


def _summarise(failures: int, trials: int, bound: float) -> SwitchEstimate:
    low, high = wilson_interval(failures, trials, THREE_SIGMA)
    vacuous = bound >= 1
    return SwitchEstimate(failures, trials, failures / trials, low, high, bound, vacuous, vacuous or high <= bound)


def empirical_switch_prob(
    F: Depth2Circuit, keep_prob: float, t: int, trials: int, rng: np.random.Generator
) -> SwitchEstimate:
    """Frequency of canonical depth ``>= t`` under ``keep_prob``-random restrictions.

    ``ok`` compares the three-sigma Wilson upper limit with ``(20 p w)^t 2^k``.
    """
    bound = switching_bound(F.width, F.k, keep_prob, t)
    failures = 0
    for _ in range(trials):
        rho = sample_restriction(F.n, keep_prob, rng)
        if canonical_depth(F, rho, cap=t) >= t:
            failures += 1
    return _summarise(failures, trials, bound)


def forest_global_depth(Fs: Sequence[Depth2Circuit], rho: Restriction, local_depth: int, cap: int) -> int:
    """Global depth of the greedy forest: query every variable of the first deep circuit, recurse.

    Upper-bounds the optimal global depth; exploration stops at ``cap``.
    """
    for F in Fs:
        d = canonical_depth(F, rho, cap=local_depth + 1)
        if d > local_depth:
            vars_ = sorted({v for c in F.clauses for v, _ in c if rho.values[v] is STAR})
            if len(vars_) >= cap:
                return cap
            worst = 0
            for bits in range(1 << len(vars_)):
                sub = rho.fix({v: (bits >> i) & 1 for i, v in enumerate(vars_)})
                worst = max(worst, forest_global_depth(Fs, sub, local_depth, cap - len(vars_)))
                if len(vars_) + worst >= cap:
                    return cap
            return len(vars_) + worst
    return 0


def empirical_multi_switch_prob(
    Fs: Sequence[Depth2Circuit], keep_prob: float, t: int, local_depth: int, trials: int, rng: np.random.Generator
) -> SwitchEstimate:
    """Frequency of global depth ``>= t`` for the greedy forest, against ``m 2^k (80 w p)^t``."""
    w = max(F.width for F in Fs)
    k = max(F.k for F in Fs)
    bound = multi_switching_bound(len(Fs), w, k, keep_prob, t)
    n = Fs[0].n
    failures = 0
    for _ in range(trials):
        rho = sample_restriction(n, keep_prob, rng)
        if forest_global_depth(Fs, rho, local_depth, t) >= t:
            failures += 1
    return _summarise(failures, trials, bound)


# --------------------------------------------------- block independent sets


def block_intersection_graph(cones: Sequence[Iterable[int]], n_inputs: int, block_size: int) -> dict[int, set[int]]:
    """Input blocks joined when some output block reads from both."""
    n_blocks = -(-n_inputs // block_size)
    adj: dict[int, set[int]] = {b: set() for b in range(n_blocks)}
    out_blocks: list[set[int]] = []
    for start in range(0, len(cones), block_size):
        deps: set[int] = set()
        for cone in cones[start : start + block_size]:
            deps.update(i // block_size for i in cone)
        out_blocks.append(deps)
    for deps in out_blocks:
        for a in deps:
            adj[a].update(deps - {a})
    return adj


def greedy_independent_set(adj: dict[int, set[int]]) -> set[int]:
    """Repeatedly delete a maximum-degree vertex (lowest index on ties) until no edges remain."""
    adj = {v: set(nb) for v, nb in adj.items()}
    while True:
        v = max(adj, key=lambda u: (len(adj[u]), -u), default=None)
        if v is None or not adj[v]:
            return set(adj)
        for u in adj.pop(v):
            adj[u].discard(v)


def turan_bound(n_vertices: int, n_edges: int) -> float:
    """Independence number lower bound ``n^2 / (2E + n)``."""
    return n_vertices**2 / (2 * n_edges + n_vertices) if n_vertices else 0.0


def edge_count(adj: dict[int, set[int]]) -> int:
    return sum(len(nb) for nb in adj.values()) // 2


def block_independent_set(circ: BptfCircuit | Sequence[Iterable[int]], block_size: int, n_inputs: int | None = None) -> set[int]:
    """Input blocks such that every output block reads from at most one of them."""
    if isinstance(circ, BptfCircuit):
        cones = lightcones(circ)
        n_inputs = circ.n
    else:
        cones = [set(c) for c in circ]
        if n_inputs is None:
            raise IsmrError("n_inputs is required for raw lightcones")
    return greedy_independent_set(block_intersection_graph(cones, n_inputs, block_size))


def random_lightcones(n_inputs: int, n_outputs: int, locality: int, rng: np.random.Generator) -> list[set[int]]:
    return [set(int(v) for v in rng.choice(n_inputs, size=locality, replace=False)) for _ in range(n_outputs)]
