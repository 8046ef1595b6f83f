"""Dense statevector simulation of the constant-depth ISMR circuits.

Conventions: ``X|k> = |k+1>``, ``Z|k> = omega^k |k>`` (so ``ZX = omega XZ``),
``F|a> = p^{-1/2} sum_s omega^{a s} |s>``, ``SUM|c, t> = |c, t + c>`` and
``Rz(a)|j> = exp(2 pi i a j / p^2)|j>``.  Qupit 0 is the most significant
index of the flat amplitude vector.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .core import (
    DitString,
    IsmrError,
    ResidueViolation,
    TooLarge,
    check_prime,
)

MAX_AMPLITUDES = 2**24
GATE_KINDS = (
    "X",
    "Z",
    "F",
    "Fdag",
    "SUM",
    "INV",
    "CZ",
    "Rz",
    "GRz",
    "GRzSet",
)


class TargetOutOfRange(IsmrError):
    pass


class DisconnectedGraph(IsmrError):
    pass


class OddInput(ResidueViolation):
    pass


# ------------------------------------------------------------------ matrices


def omega(p: int) -> complex:
    return complex(np.exp(2j * np.pi / p))


def shift_matrix(p: int, a: int = 1) -> np.ndarray:
    return np.roll(np.eye(p, dtype=complex), a % p, axis=0)


def clock_matrix(p: int, a: int = 1) -> np.ndarray:
    return np.diag(np.exp(2j * np.pi * (a % p) * np.arange(p) / p))


def fourier_matrix(p: int) -> np.ndarray:
    j = np.arange(p)
    return np.exp(2j * np.pi * np.outer(j, j) / p) / math.sqrt(p)


def inv_matrix(p: int) -> np.ndarray:
    m = np.zeros((p, p), dtype=complex)
    m[(-np.arange(p)) % p, np.arange(p)] = 1
    return m


def rz_matrix(p: int, a: float = 1) -> np.ndarray:
    """``diag(exp(2 pi i a j / p^2))``; ``a`` may be any real multiple."""
    return np.diag(np.exp(2j * np.pi * a * np.arange(p) / p**2))


def phase_rotation(p: int, phi: float) -> np.ndarray:
    """``diag(exp(i j phi))``."""
    return np.diag(np.exp(1j * phi * np.arange(p)))


def grz_matrix(p: int, theta: float) -> np.ndarray:
    return np.exp(1j * theta) * np.eye(p, dtype=complex)


def grz_set_matrix(p: int, theta: float, subset: Iterable[int]) -> np.ndarray:
    d = np.ones(p, dtype=complex)
    for k in subset:
        d[k % p] = np.exp(1j * theta)
    return np.diag(d)


def sum_matrix(p: int, a: int = 1) -> np.ndarray:
    """Two-qupit ``|c, t> -> |c, t + a c>`` as a ``p^2 x p^2`` matrix."""
    m = np.zeros((p * p, p * p), dtype=complex)
    for c in range(p):
        for t in range(p):
            m[c * p + (t + a * c) % p, c * p + t] = 1
    return m


def cz_matrix(p: int, a: int = 1) -> np.ndarray:
    j = np.arange(p)
    return np.diag(np.exp(2j * np.pi * (a % p) * np.outer(j, j).ravel() / p))


# ------------------------------------------------------------------- states


@dataclass
class QupitState:
    """``n`` qupits of dimension ``p`` with a dense amplitude vector."""

    p: int
    n: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        check_prime(self.p)
        if self.p**self.n > MAX_AMPLITUDES:
            raise TooLarge(f"{self.p}^{self.n} amplitudes exceed {MAX_AMPLITUDES}")
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.p**self.n:
            raise IsmrError("amplitude vector has the wrong length")
        self.amplitudes = amps

    @classmethod
    def zero(cls, p: int, n: int) -> "QupitState":
        if p**n > MAX_AMPLITUDES:
            raise TooLarge(f"{p}^{n} amplitudes exceed {MAX_AMPLITUDES}")
        amps = np.zeros(p**n, dtype=complex)
        amps[0] = 1
        return cls(p, n, amps)

    @classmethod
    def basis(cls, p: int, digits: Sequence[int]) -> "QupitState":
        s = cls.zero(p, len(digits))
        s.amplitudes[0] = 0
        s.amplitudes[_flat_index(p, digits)] = 1
        return s

    @property
    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((self.p,) * self.n)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def copy(self) -> "QupitState":
        return QupitState(self.p, self.n, self.amplitudes.copy())


def _flat_index(p: int, digits: Sequence[int]) -> int:
    idx = 0
    for d in digits:
        idx = idx * p + int(d) % p
    return idx


def fidelity(a: QupitState, b: QupitState) -> float:
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def apply_single(state: QupitState, u: np.ndarray, q: int) -> QupitState:
    _check_targets(state, (q,))
    t = np.tensordot(u, state.tensor, axes=([1], [q]))
    return QupitState(state.p, state.n, np.moveaxis(t, 0, q))


def apply_two(state: QupitState, u: np.ndarray, q1: int, q2: int) -> QupitState:
    _check_targets(state, (q1, q2))
    if q1 == q2:
        raise TargetOutOfRange("two-qupit gate needs distinct targets")
    p = state.p
    t = np.tensordot(u.reshape(p, p, p, p), state.tensor, axes=([2, 3], [q1, q2]))
    return QupitState(p, state.n, np.moveaxis(t, [0, 1], [q1, q2]))


def apply_diagonal(state: QupitState, diag: np.ndarray, q: int) -> QupitState:
    _check_targets(state, (q,))
    shape = [1] * state.n
    shape[q] = state.p
    return QupitState(state.p, state.n, state.tensor * np.asarray(diag).reshape(shape))


def _check_targets(state: QupitState, qs: Sequence[int]) -> None:
    for q in qs:
        if not 0 <= q < state.n:
            raise TargetOutOfRange(f"qupit {q} outside [0, {state.n})")


@dataclass(frozen=True)
class GateSpec:
    """One gate.  ``param`` is the exponent (X, Z, SUM, CZ, Rz) or angle (GRz, GRzSet)."""

    kind: str
    targets: tuple[int, ...]
    param: float = 1
    subset: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in GATE_KINDS:
            raise IsmrError(f"unknown gate {self.kind!r}")
        two = self.kind in ("SUM", "CZ")
        if len(self.targets) != (2 if two else 1):
            raise TargetOutOfRange(f"{self.kind} takes {2 if two else 1} targets")
        if two and self.targets[0] == self.targets[1]:
            raise TargetOutOfRange("control and target must differ")


def apply_gate(state: QupitState, gate: GateSpec) -> QupitState:
    p = state.p
    k = gate.kind
    if k in ("SUM", "CZ"):
        a = int(gate.param) % p
        u = sum_matrix(p, a) if k == "SUM" else cz_matrix(p, a)
        return apply_two(state, u, *gate.targets)
    q = gate.targets[0]
    if k == "X":
        return apply_single(state, shift_matrix(p, int(gate.param)), q)
    if k == "Z":
        return apply_diagonal(state, np.diag(clock_matrix(p, int(gate.param))), q)
    if k == "F":
        return apply_single(state, fourier_matrix(p), q)
    if k == "Fdag":
        return apply_single(state, fourier_matrix(p).conj().T, q)
    if k == "INV":
        return apply_single(state, inv_matrix(p), q)
    if k == "Rz":
        return apply_diagonal(state, np.diag(rz_matrix(p, gate.param)), q)
    if k == "GRz":
        return apply_diagonal(state, np.diag(grz_matrix(p, gate.param)), q)
    return apply_diagonal(state, np.diag(grz_set_matrix(p, gate.param, gate.subset)), q)


# -------------------------------------------------------------- measurement


def marginal_law(state: QupitState, qupits: Sequence[int]) -> np.ndarray:
    """Joint Z-basis outcome probabilities of ``qupits`` (array of shape ``(p,)*k``)."""
    _check_targets(state, qupits)
    probs = np.abs(state.tensor) ** 2
    rest = tuple(q for q in range(state.n) if q not in qupits)
    marg = probs.sum(axis=rest) if rest else probs
    # sum keeps the remaining axes in increasing order; reorder to ``qupits``
    order = sorted(qupits)
    return np.transpose(marg, [order.index(q) for q in qupits])


def postselect(state: QupitState, qupits: Sequence[int], outcome: Sequence[int]) -> tuple[float, QupitState]:
    """Probability of ``outcome`` on ``qupits`` and the normalised state of the rest."""
    _check_targets(state, qupits)
    sl: list = [slice(None)] * state.n
    for q, v in zip(qupits, outcome):
        sl[q] = int(v) % state.p
    sub = state.tensor[tuple(sl)]
    prob = float(np.sum(np.abs(sub) ** 2))
    rest_n = state.n - len(qupits)
    if prob <= 0:
        return 0.0, QupitState(state.p, rest_n, np.zeros(state.p**rest_n, dtype=complex))
    return prob, QupitState(state.p, rest_n, sub.reshape(-1) / math.sqrt(prob))


def sample_measure(state: QupitState, qupits: Sequence[int], rng: np.random.Generator) -> tuple[tuple[int, ...], QupitState]:
    law = marginal_law(state, qupits).ravel()
    idx = int(np.searchsorted(np.cumsum(law), rng.random() * law.sum(), side="right"))
    idx = min(idx, law.size - 1)
    outcome = tuple(int(v) for v in np.unravel_index(idx, (state.p,) * len(qupits)))
    _, post = postselect(state, qupits, outcome)
    return outcome, post


# -------------------------------------------------------------------- graphs


@dataclass(frozen=True)
class GraphSpec:
    """Acyclic connectivity graph over input qupits; edges carry ancillas."""

    kind: str
    n: int
    edges: tuple[tuple[int, int], ...]
    root: int

    def __post_init__(self) -> None:
        if len(self.edges) != self.n - 1:
            raise DisconnectedGraph("a spanning tree on n vertices has n - 1 edges")
        if len(self.depths()) != self.n:
            raise DisconnectedGraph("graph is not connected")

    @classmethod
    def path(cls, n: int) -> "GraphSpec":
        edges = tuple((i, i + 1) for i in range(n - 1))
        return cls._centered("path", n, edges)

    @classmethod
    def binary_tree(cls, n: int) -> "GraphSpec":
        edges = tuple(((i - 1) // 2, i) for i in range(1, n))
        return cls("binary-tree", n, edges, 0)

    @classmethod
    def grid3d(cls, n: int) -> "GraphSpec":
        """First ``n`` points of a cubic grid joined by a comb-shaped spanning tree."""
        side = max(1, math.ceil(round(n ** (1 / 3), 9)))
        pts = list(itertools.product(range(side), repeat=3))[:n]
        pos = {pt: i for i, pt in enumerate(pts)}
        edges = []
        for (a, b, c), i in pos.items():
            if c > 0:
                edges.append((pos[(a, b, c - 1)], i))
            elif b > 0:
                edges.append((pos[(a, b - 1, 0)], i))
            elif a > 0:
                edges.append((pos[(a - 1, 0, 0)], i))
        return cls._centered("3D-grid-no-cycles", n, tuple(edges))

    @classmethod
    def _centered(cls, kind: str, n: int, edges) -> "GraphSpec":
        g = cls(kind, n, edges, 0)
        return cls(kind, n, edges, g.center())

    @classmethod
    def of_kind(cls, kind: str, n: int) -> "GraphSpec":
        makers = {"path": cls.path, "tree": cls.binary_tree, "binary-tree": cls.binary_tree, "grid3d": cls.grid3d}
        if kind not in makers:
            raise IsmrError(f"unknown graph kind {kind!r}")
        return makers[kind](n)

    def adjacency(self) -> list[list[tuple[int, int]]]:
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for k, (u, v) in enumerate(self.edges):
            adj[u].append((v, k))
            adj[v].append((u, k))
        return adj

    def depths(self, source: int | None = None) -> dict[int, int]:
        src = self.root if source is None else source
        adj = self.adjacency()
        dist = {src: 0}
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v, _ in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def center(self) -> int:
        return min(range(self.n), key=lambda v: (max(self.depths(v).values()), v))

    def eccentricity(self) -> int:
        return max(self.depths().values())

    def root_paths(self) -> list[list[tuple[int, int]]]:
        """For each vertex, its path to the root as ``(edge index, near endpoint depth)``.

        Entries are listed from the vertex towards the root.
        """
        adj = self.adjacency()
        parent: dict[int, tuple[int, int]] = {}
        seen = {self.root}
        queue = deque([self.root])
        while queue:
            u = queue.popleft()
            for v, k in adj[u]:
                if v not in seen:
                    seen.add(v)
                    parent[v] = (u, k)
                    queue.append(v)
        paths = []
        for u in range(self.n):
            path = []
            v, steps = u, 0
            while v != self.root:
                w, k = parent[v]
                path.append((k, steps))
                v, steps = w, steps + 1
            paths.append(path)
        return paths


def reference_matrix(graph: GraphSpec, p: int) -> np.ndarray:
    """Integer matrix ``M`` with ``z = M e + rootValue (mod p)``.

    Entry ``(u, k)`` is ``(-1)^{|Path(u, j)| + |Path(u, root)|}`` where ``j`` is
    the endpoint of edge ``k`` farther from ``u``.
    """
    m = np.zeros((graph.n, len(graph.edges)), dtype=np.int64)
    for u, path in enumerate(graph.root_paths()):
        total = len(path)
        for k, near in path:
            m[u, k] = (-1) ** ((near + 1) + total)
    return m % p


def gpm_reference_string(graph: GraphSpec, edge_outcomes: Sequence[int], root_value: int = 0, p: int = 2) -> DitString:
    """Reference string ``z`` of the cat state selected by the edge outcomes."""
    e = np.asarray(edge_outcomes, dtype=np.int64)
    if e.shape != (len(graph.edges),):
        raise IsmrError("need one outcome per edge")
    z = (reference_matrix(graph, p) @ e + root_value) % p
    return DitString(p, tuple(int(v) for v in z))


def edge_sums(graph: GraphSpec, z: Sequence[int], p: int) -> tuple[int, ...]:
    """Edge outcomes consistent with ``z``.

    Vertices at even depth carry ``-z`` before the final INV layer, so the
    measured sum on an edge is ``z_child - z_parent`` up to the sign of the
    parent's depth.
    """
    depth = graph.depths()
    pre = [(-z[u] if depth[u] % 2 == 0 else z[u]) % p for u in range(graph.n)]
    return tuple((pre[u] + pre[v]) % p for u, v in graph.edges)


def gpm_vertex_state(p: int, z: Sequence[int]) -> QupitState:
    """Ideal cat state ``p^{-1/2} sum_i |z + i>``."""
    n = len(z)
    s = QupitState.zero(p, n)
    s.amplitudes[0] = 0
    for i in range(p):
        s.amplitudes[_flat_index(p, [(v + i) % p for v in z])] += 1 / math.sqrt(p)
    return s


@dataclass
class GpmRecord:
    state: QupitState
    edge_outcomes: DitString
    reference: DitString
    probability: float = field(default=1.0)


def build_gpm_state(
    graph: GraphSpec,
    rng: np.random.Generator | None = None,
    p: int = 2,
    edge_outcomes: Sequence[int] | None = None,
    root_value: int = 0,
) -> GpmRecord:
    """Run the preparation circuit on vertices plus edge ancillas.

    Fourier on every vertex, SUM from both endpoints into each edge ancilla,
    measure the ancillas, then INV on vertices at even depth.  Pass
    ``edge_outcomes`` to postselect instead of sampling.
    """
    check_prime(p)
    n, m = graph.n, len(graph.edges)
    state = QupitState.zero(p, n + m)
    for v in range(n):
        state = apply_gate(state, GateSpec("F", (v,)))
    for k, (u, v) in enumerate(graph.edges):
        state = apply_gate(state, GateSpec("SUM", (u, n + k)))
        state = apply_gate(state, GateSpec("SUM", (v, n + k)))
    ancillas = list(range(n, n + m))
    if edge_outcomes is None:
        if rng is None:
            raise IsmrError("need rng or edge_outcomes")
        outcome, post = sample_measure(state, ancillas, rng)
        prob = float(marginal_law(state, ancillas)[outcome]) if m else 1.0
    else:
        outcome = tuple(int(e) % p for e in edge_outcomes)
        prob, post = postselect(state, ancillas, outcome)
    depth = graph.depths()
    for v in range(n):
        if depth[v] % 2 == 0 and p > 2:
            post = apply_gate(post, GateSpec("INV", (v,)))
    z = gpm_reference_string(graph, outcome, 0, p)
    if root_value:
        post = _shift_all(post, root_value)
        z = DitString(p, tuple((d + root_value) % p for d in z.digits))
    return GpmRecord(post, DitString(p, outcome), z, prob)


def _shift_all(state: QupitState, a: int) -> QupitState:
    for q in range(state.n):
        state = apply_gate(state, GateSpec("X", (q,), a))
    return state


# ------------------------------------------------------------- qubit PHP


def php_correction_bits(x: Sequence[int], graph: GraphSpec, edge_outcomes: Sequence[int]) -> tuple[int, ...]:
    """``AND(x_i, e_l)`` for every vertex ``i`` and every edge ``l`` on its root path."""
    bits = []
    for i, path in enumerate(graph.root_paths()):
        for k, _ in path:
            bits.append(int(x[i]) & int(edge_outcomes[k]))
    return tuple(bits)


def php_output_length(graph: GraphSpec) -> int:
    return graph.n + sum(len(path) for path in graph.root_paths())


def _check_php_input(x: Sequence[int], graph: GraphSpec) -> tuple[int, ...]:
    x = tuple(int(b) for b in x)
    if len(x) != graph.n:
        raise IsmrError(f"input has length {len(x)}, graph has {graph.n} vertices")
    if sum(x) % 2:
        raise OddInput("PHP needs an even-weight input")
    return x


def php_final_state(x: Sequence[int], graph: GraphSpec) -> QupitState:
    """Full pre-measurement state on vertices followed by edge ancillas."""
    x = _check_php_input(x, graph)
    n, m = graph.n, len(graph.edges)
    state = QupitState.zero(2, n + m)
    for v in range(n):
        state = apply_gate(state, GateSpec("F", (v,)))
    for k, (u, v) in enumerate(graph.edges):
        state = apply_gate(state, GateSpec("SUM", (u, n + k)))
        state = apply_gate(state, GateSpec("SUM", (v, n + k)))
    for v in range(n):
        if x[v]:
            state = apply_gate(state, GateSpec("Rz", (v,), 1))
        state = apply_gate(state, GateSpec("F", (v,)))
    return state


def php_output_law(x: Sequence[int], graph: GraphSpec) -> dict[tuple[int, ...], float]:
    """Exact distribution of the full output string ``y`` (vertex bits then corrections)."""
    x = _check_php_input(x, graph)
    n, m = graph.n, len(graph.edges)
    probs = php_final_state(x, graph).probabilities().reshape(1 << n, 1 << m)
    vertex_bits = list(itertools.product((0, 1), repeat=n))
    law: dict[tuple[int, ...], float] = {}
    for e_index, e in enumerate(itertools.product((0, 1), repeat=m)):
        column = probs[:, e_index]
        support = np.flatnonzero(column > 1e-15)
        if not support.size:
            continue
        corr = php_correction_bits(x, graph, e)
        for s_index in support:
            y = vertex_bits[s_index] + corr
            law[y] = law.get(y, 0.0) + float(column[s_index])
    return law


def run_qubit_php_circuit(x: Sequence[int], graph: GraphSpec, rng: np.random.Generator) -> tuple[int, ...]:
    """Sample one output of the parity halving circuit."""
    x = _check_php_input(x, graph)
    state = php_final_state(x, graph)
    outcome, _ = sample_measure(state, list(range(state.n)), rng)
    s, e = outcome[: graph.n], outcome[graph.n :]
    return s + php_correction_bits(x, graph, e)


# ------------------------------------------------------------ qupit ISMR


class FieldPoly:
    """Polynomial over F_p in dit-valued variables, with ``v^p = v`` reduction.

    Terms map a sorted tuple of ``(variable, exponent)`` pairs to a coefficient.
    """

    def __init__(self, p: int, terms: dict | None = None):
        self.p = p
        self.terms: dict[tuple[tuple[int, int], ...], int] = {}
        for mono, c in (terms or {}).items():
            if c % p:
                self.terms[mono] = c % p

    @classmethod
    def const(cls, p: int, c: int) -> "FieldPoly":
        return cls(p, {(): c})

    @classmethod
    def var(cls, p: int, v: int, coef: int = 1) -> "FieldPoly":
        return cls(p, {((v, 1),): coef})

    def __add__(self, other: "FieldPoly") -> "FieldPoly":
        out = dict(self.terms)
        for mono, c in other.terms.items():
            out[mono] = out.get(mono, 0) + c
        return FieldPoly(self.p, out)

    def __neg__(self) -> "FieldPoly":
        return FieldPoly(self.p, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "FieldPoly") -> "FieldPoly":
        return self + (-other)

    def __mul__(self, other: "FieldPoly") -> "FieldPoly":
        out: dict = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                mono = self._merge(m1, m2)
                out[mono] = out.get(mono, 0) + c1 * c2
        return FieldPoly(self.p, out)

    def _merge(self, m1, m2):
        exps = dict(m1)
        for v, e in m2:
            exps[v] = exps.get(v, 0) + e
        for v, e in exps.items():
            while e >= self.p:
                e -= self.p - 1
            exps[v] = e
        return tuple(sorted(exps.items()))

    def __pow__(self, k: int) -> "FieldPoly":
        out = FieldPoly.const(self.p, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def evaluate(self, values: Sequence[int]) -> int:
        return sum(self.monomial_values(values)) % self.p

    def monomial_values(self, values: Sequence[int]) -> list[int]:
        out = []
        for mono, c in self.terms.items():
            t = c
            for v, e in mono:
                t = t * pow(int(values[v]), e, self.p)
            out.append(t % self.p)
        return out


def _vertex_polys(graph: GraphSpec, p: int, root_value: int = 0) -> list[FieldPoly]:
    """``z_u`` as a linear polynomial in the edge outcomes."""
    mat = reference_matrix(graph, p)
    polys = []
    for u in range(graph.n):
        poly = FieldPoly.const(p, root_value)
        for k in np.flatnonzero(mat[u]):
            poly = poly + FieldPoly.var(p, int(k), int(mat[u, k]))
        polys.append(poly)
    return polys


def _delta_poly(u: FieldPoly, k: int) -> FieldPoly:
    """Indicator ``u == k`` as ``1 - (u - k)^{p-1}``."""
    p = u.p
    return FieldPoly.const(p, 1) - (u - FieldPoly.const(p, k)) ** (p - 1)


def correction_polynomials(graph: GraphSpec, p: int, root_value: int = 0) -> list[FieldPoly]:
    """Per-vertex ``(z_u + 1)^{p-1}`` expanded into edge monomials."""
    one = FieldPoly.const(p, 1)
    return [(z + one) ** (p - 1) for z in _vertex_polys(graph, p, root_value)]


def correction_length(graph: GraphSpec, p: int) -> int:
    return sum(len(poly.terms) for poly in correction_polynomials(graph, p))


def correction_dits(x: Sequence[int], graph: GraphSpec, p: int, edge_outcomes: Sequence[int]) -> tuple[int, ...]:
    """One dit per monomial, gated by the vertex's input bit; the dits sum to ``<x,(z^{+1})^{p-1}>``."""
    out: list[int] = []
    for xi, poly in zip(x, correction_polynomials(graph, p)):
        out.extend(int(xi) * v % p for v in poly.monomial_values(edge_outcomes))
    return tuple(out)


def _check_qupit_input(p: int, x: Sequence[int], graph: GraphSpec) -> tuple[int, ...]:
    check_prime(p)
    x = tuple(int(b) for b in x)
    if any(b not in (0, 1) for b in x):
        raise IsmrError("input must be a bit string")
    if len(x) != graph.n:
        raise IsmrError(f"input has length {len(x)}, graph has {graph.n} vertices")
    if sum(x) % p:
        raise ResidueViolation(f"|x| = {sum(x)} is not divisible by {p}")
    return x


def ismr_vertex_state(p: int, x: Sequence[int], z: Sequence[int]) -> QupitState:
    """Cat state on ``z`` after ``Rz(2 pi x_i / p^2)`` and Fourier on every vertex."""
    state = gpm_vertex_state(p, z)
    for v, xi in enumerate(x):
        if xi:
            state = apply_gate(state, GateSpec("Rz", (v,), xi))
        state = apply_gate(state, GateSpec("F", (v,)))
    return state


def raw_sum_law_statevector(p: int, x: Sequence[int], z: Sequence[int]) -> np.ndarray:
    """Law of ``sum(raw dits) mod p`` from the dense state."""
    probs = ismr_vertex_state(p, x, z).probabilities().reshape((p,) * len(z))
    total = np.indices(probs.shape).sum(axis=0) % p
    return np.array([probs[total == t].sum() for t in range(p)])


def ismr_inner_products(p: int, x: Sequence[int], z: Sequence[int]) -> np.ndarray:
    """Phase offsets ``a_i = -#{j : x_j = 1, z_j + i >= p} (mod p)`` for ``i = 1..p-1``."""
    x = np.asarray(x)
    z = np.asarray(z)
    zs = z[x == 1]
    return np.array([(-int(np.sum(zs + i >= p))) % p for i in range(1, p)], dtype=np.int64)


def analytic_shift_distribution(p: int, inner_products: Sequence[int]) -> np.ndarray:
    """Law of the deviation ``t`` of the raw sum from the target residue.

    With offsets ``a_0 = 0, a_1, ..., a_{p-1}`` the branch ``|z^{+i}>`` carries
    relative phase ``omega^{a_i}`` and ``Pr[t] = |sum_i omega^{a_i + i t}|^2 / p^2``.
    """
    a = np.concatenate(([0], np.asarray(inner_products, dtype=np.int64) % p))
    if a.size != p:
        raise IsmrError(f"need {p - 1} inner products")
    i = np.arange(p)
    amps = np.array([np.sum(np.exp(2j * np.pi * (a + i * t) / p)) for t in range(p)])
    law = np.abs(amps) ** 2 / p**2
    return law / law.sum()


def ismr_output_law_given_z(p: int, x: Sequence[int], z: Sequence[int]) -> np.ndarray:
    """Law of the deviation of ``|raw| + correction`` from the target, given ``z``.

    The correction ``<x,(z^{+1})^{p-1}>`` equals ``a_1``, so it rotates the raw
    deviation law by ``a_1``.
    """
    a = ismr_inner_products(p, x, z)
    law = analytic_shift_distribution(p, a)
    return np.roll(law, int(a[0]) if p > 1 else 0)


def _correlation_of_law(p: int, law: np.ndarray) -> float:
    return float(np.sum(law * np.cos(2 * np.pi * np.arange(p) / p)))


@lru_cache(maxsize=8)
def all_reference_strings(graph: GraphSpec, p: int) -> np.ndarray:
    """Every reference string, one row per edge-outcome vector (root fixed to 0)."""
    m = len(graph.edges)
    if p**m > MAX_AMPLITUDES:
        raise TooLarge("too many edge outcomes to enumerate")
    e = np.indices((p,) * m, dtype=np.int64).reshape(m, -1)
    return ((reference_matrix(graph, p) @ e) % p).T.astype(np.int8)


def deviation_law_from_histogram(p: int, hist: Sequence[int]) -> np.ndarray:
    """Corrected deviation law when ``hist[v]`` support vertices have ``z = v``."""
    hist = np.asarray(hist)
    a = np.array([(-int(hist[p - k :].sum())) % p for k in range(p)])
    law = analytic_shift_distribution(p, a[1:])
    return np.roll(law, int(a[1 % p]))


def ismr_deviation_law(p: int, x: Sequence[int], graph: GraphSpec) -> np.ndarray:
    """Deviation law of the direct circuit averaged over every edge outcome.

    The law only depends on how many support vertices carry each value of
    ``z``, so outcomes are bucketed by that histogram before evaluation.
    """
    x = _check_qupit_input(p, x, graph)
    zs = all_reference_strings(graph, p)
    support = [v for v in range(graph.n) if x[v]]
    base = len(support) + 1
    powers = base ** np.arange(p, dtype=np.int64)
    keys = np.zeros(zs.shape[0], dtype=np.int64)
    for v in support:
        keys += powers[zs[:, v]]
    counts = np.bincount(keys)
    law = np.zeros(p)
    for key in np.flatnonzero(counts):
        hist = [(int(key) // int(base**k)) % base for k in range(p)]
        law += counts[key] * deviation_law_from_histogram(p, hist)
    return law / zs.shape[0]


def qupit_correlation(p: int, x: Sequence[int], graph: GraphSpec) -> float:
    """Exact correlation of the direct circuit with the target, for one input."""
    return _correlation_of_law(p, ismr_deviation_law(p, x, graph))


def run_qupit_ismr_circuit(p: int, x: Sequence[int], graph: GraphSpec, rng: np.random.Generator) -> tuple[DitString, DitString]:
    """Sample ``(raw dits, correction dits)`` from the direct circuit.

    Edge outcomes are uniform, so they are drawn directly and the vertex
    register is simulated densely.
    """
    x = _check_qupit_input(p, x, graph)
    e = rng.integers(0, p, size=len(graph.edges))
    z = gpm_reference_string(graph, e, 0, p).digits
    state = ismr_vertex_state(p, x, z)
    raw, _ = sample_measure(state, list(range(graph.n)), rng)
    return DitString(p, raw), DitString(p, correction_dits(x, graph, p, e))


def ismr_statevector_correlation(p: int, x: Sequence[int], graph: GraphSpec) -> float:
    """Correlation from the dense circuit, enumerating every edge outcome."""
    x = _check_qupit_input(p, x, graph)
    polys = correction_polynomials(graph, p)
    target = (-(sum(x) // p)) % p
    total = 0.0
    count = 0
    for e in itertools.product(range(p), repeat=len(graph.edges)):
        z = gpm_reference_string(graph, e, 0, p).digits
        law = raw_sum_law_statevector(p, x, z)
        corr = sum(xi * poly.evaluate(e) for xi, poly in zip(x, polys)) % p
        dev = np.roll(law, corr - target)
        total += _correlation_of_law(p, dev)
        count += 1
    return total / count


def dits_to_bits(dits: DitString) -> DitString:
    """Unary expansion of each dit into ``p - 1`` bits, preserving the weight mod ``p``."""
    out: list[int] = []
    for d in dits.digits:
        out.extend([1] * d + [0] * (dits.p - 1 - d))
    return DitString(2, tuple(out))


# ------------------------------------------------------------ magic states


def t_magic_state(p: int) -> QupitState:
    """``Rz(2 pi / p^2) F |0>``."""
    s = apply_gate(QupitState.zero(p, 1), GateSpec("F", (0,)))
    return apply_gate(s, GateSpec("Rz", (0,), 1))


def teleport_residual_operator(p: int, c: int) -> np.ndarray:
    """``X^c GRz(c phi) GRzSet(-2 pi / p, S_c)`` with ``S_c = {p-c, ..., p-1}``.

    This equals ``Rz X^c Rz^dagger``: the correction left behind when the
    gadget's shift is not undone.
    """
    phi = 2 * np.pi / p**2
    c %= p
    s_c = range(p - c, p)
    return shift_matrix(p, c) @ grz_matrix(p, c * phi) @ grz_set_matrix(p, -2 * np.pi / p, s_c)


def nonadaptive_teleport_rz(state: QupitState, target: int, rng: np.random.Generator, forced_c: int | None = None) -> tuple[QupitState, int]:
    """Apply ``Rz(2 pi / p^2)`` to ``target`` by consuming a fresh magic state.

    The target goes through INV, a SUM from the advice qupit, and a Z
    measurement with outcome ``c``; the advice qupit then replaces it, holding
    ``Rz X^c |psi>``.  No correction is applied.
    """
    p, n = state.p, state.n
    joint = QupitState(p, n + 1, np.kron(state.amplitudes, t_magic_state(p).amplitudes))
    joint = apply_gate(joint, GateSpec("INV", (target,)))
    joint = apply_gate(joint, GateSpec("SUM", (n, target)))
    if forced_c is None:
        (c,), post = sample_measure(joint, [target], rng)
    else:
        c = forced_c % p
        prob, post = postselect(joint, [target], [c])
        if prob <= 0:
            raise IsmrError("forced outcome has zero probability")
    # the advice qupit is now last; move it back into the target's slot
    t = np.moveaxis(post.tensor, n - 1, target)
    return QupitState(p, n, t), int(c)


def delta_vector(a: DitString | Sequence[int], b: int, p: int | None = None) -> DitString:
    """Bit ``i`` is 1 iff ``a_i = b``, via ``((a_i - b)^{p-1} - 1)^{p-1} mod p``."""
    if isinstance(a, DitString):
        p, digits = a.p, a.digits
    else:
        if p is None:
            raise IsmrError("p is required for plain sequences")
        digits = tuple(int(v) for v in a)
    out = tuple(pow((pow((d - b) % p, p - 1, p) - 1) % p, p - 1, p) for d in digits)
    return DitString(2, out)


def set_shift_count(p: int, w: Sequence[int], c: Sequence[int], x: Sequence[int]) -> int:
    """``#{j : x_j = 1, w_j in S_{c_j}}`` computed through delta vectors."""
    total = 0
    for a in range(1, p):
        dc = delta_vector(c, a, p).digits
        for k in range(p - a, p):
            dw = delta_vector(w, k, p).digits
            total += sum(xi & u & v for xi, u, v in zip(x, dc, dw))
    return total


def teleport_correction_polynomials(graph: GraphSpec, p: int) -> list[list[FieldPoly]]:
    """``P[u][a]``: correction for vertex ``u`` when its gadget returned ``c_u = a``.

    ``(z_u + 1)^{p-1} - ([z_u + 1 in S_a] - [z_u in S_a])`` with the set
    indicators expanded through ``delta``.
    """
    one = FieldPoly.const(p, 1)
    table = []
    for z in _vertex_polys(graph, p):
        base = (z + one) ** (p - 1)
        row = []
        for a in range(p):
            diff = FieldPoly(p)
            for k in range(p - a, p):
                diff = diff + _delta_poly(z + one, k) - _delta_poly(z, k)
            row.append(base - diff)
        table.append(row)
    return table


def teleport_correction_dits(x: Sequence[int], graph: GraphSpec, p: int, edge_outcomes: Sequence[int], c: Sequence[int]) -> tuple[int, ...]:
    """Dits ``x_u * delta(c_u, a) * monomial`` over every vertex, case ``a`` and monomial."""
    out: list[int] = []
    for u, row in enumerate(teleport_correction_polynomials(graph, p)):
        for a, poly in enumerate(row):
            gate = int(x[u]) * (1 if int(c[u]) % p == a else 0)
            out.extend(gate * v % p for v in poly.monomial_values(edge_outcomes))
    return tuple(out)


def teleport_correction_length(graph: GraphSpec, p: int) -> int:
    return sum(len(poly.terms) for row in teleport_correction_polynomials(graph, p) for poly in row)


def clifford_t_final_state(p: int, x: Sequence[int], z: Sequence[int], c: Sequence[int]) -> QupitState:
    """Cat state on ``z`` with teleported rotations on ``supp(x)`` forced to outcomes ``c``, then Fourier."""
    state = gpm_vertex_state(p, z)
    rng = np.random.default_rng(0)
    for v, xi in enumerate(x):
        if xi:
            state, _ = nonadaptive_teleport_rz(state, v, rng, forced_c=c[v])
        state = apply_gate(state, GateSpec("F", (v,)))
    return state


def clifford_t_correlation(p: int, x: Sequence[int], graph: GraphSpec) -> float:
    """Exact correlation of the teleported circuit, averaging over edge outcomes and every ``c``.

    Each ``c`` on ``supp(x)`` is uniform, so every combination is weighted equally.
    """
    x = _check_qupit_input(p, x, graph)
    support = [v for v in range(graph.n) if x[v]]
    table = teleport_correction_polynomials(graph, p)
    target = (-(sum(x) // p)) % p
    total = 0.0
    count = 0
    for e in itertools.product(range(p), repeat=len(graph.edges)):
        z = gpm_reference_string(graph, e, 0, p).digits
        for cs in itertools.product(range(p), repeat=len(support)):
            c = [0] * graph.n
            for v, cv in zip(support, cs):
                c[v] = cv
            probs = clifford_t_final_state(p, x, z, c).probabilities().reshape((p,) * graph.n)
            sums = np.indices(probs.shape).sum(axis=0) % p
            law = np.array([probs[sums == t].sum() for t in range(p)])
            corr = sum(x[u] * table[u][c[u]].evaluate(e) for u in range(graph.n)) % p
            total += _correlation_of_law(p, np.roll(law, corr - target))
            count += 1
    return total / count


def run_clifford_plus_T_circuit(p: int, x: Sequence[int], graph: GraphSpec, rng: np.random.Generator) -> tuple[DitString, DitString]:
    """Sample ``(raw dits, correction dits)`` with every rotation teleported."""
    x = _check_qupit_input(p, x, graph)
    e = rng.integers(0, p, size=len(graph.edges))
    z = gpm_reference_string(graph, e, 0, p).digits
    state = gpm_vertex_state(p, z)
    c = [0] * graph.n
    for v, xi in enumerate(x):
        if xi:
            state, c[v] = nonadaptive_teleport_rz(state, v, rng)
        state = apply_gate(state, GateSpec("F", (v,)))
    raw, _ = sample_measure(state, list(range(graph.n)), rng)
    return DitString(p, raw), DitString(p, teleport_correction_dits(x, graph, p, e, c))
