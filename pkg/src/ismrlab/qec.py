"""Planar qupit surface code with a hard-decision renormalization group decoder.

Sites live on a ``(2L-1) x (2L-1)`` grid.  Data qupits sit where ``r + c`` is
even, vertex stabilizers ``A`` (X-type) at (even, odd) and plaquette
stabilizers ``B`` (Z-type) at (odd, even).  X errors leave ``B`` defects that
may escape through the top and bottom edges; Z errors leave ``A`` defects
that escape through the left and right edges.

Paulis are ``omega^k Z(z) X(x)`` with ``Z X = omega X Z``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .classical import wilson_interval
from .core import IsmrError, check_prime


class NonCliffordGate(IsmrError):
    pass


class NontrivialSyndrome(IsmrError):
    pass


class _Abort:
    """Decoder failure marker."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ABORT"

    def __bool__(self) -> bool:
        return False


ABORT = _Abort()


# ------------------------------------------------------------------ Paulis


@dataclass(eq=False)
class PauliOperator:
    p: int
    k: int
    x: np.ndarray
    z: np.ndarray

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=np.int64) % self.p
        self.z = np.asarray(self.z, dtype=np.int64) % self.p
        self.k %= self.p
        if self.x.shape != self.z.shape:
            raise IsmrError("x and z exponents differ in length")

    @classmethod
    def identity(cls, p: int, n: int) -> "PauliOperator":
        return cls(p, 0, np.zeros(n, dtype=np.int64), np.zeros(n, dtype=np.int64))

    @classmethod
    def x_type(cls, p: int, x: Sequence[int]) -> "PauliOperator":
        x = np.asarray(x)
        return cls(p, 0, x, np.zeros_like(x))

    @classmethod
    def z_type(cls, p: int, z: Sequence[int]) -> "PauliOperator":
        z = np.asarray(z)
        return cls(p, 0, np.zeros_like(z), z)

    @property
    def n(self) -> int:
        return int(self.x.size)

    @property
    def support(self) -> set[int]:
        return set(np.flatnonzero((self.x != 0) | (self.z != 0)).tolist())

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, PauliOperator)
            and self.p == other.p
            and self.k == other.k
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.z, other.z)
        )

    def __matmul__(self, other: "PauliOperator") -> "PauliOperator":
        """Operator product ``self * other``."""
        # X(a) Z(b) = omega^{-<a,b>} Z(b) X(a)
        k = self.k + other.k - int(self.x @ other.z)
        return PauliOperator(self.p, k, self.x + other.x, self.z + other.z)

    def inverse(self) -> "PauliOperator":
        # (w^k Z^z X^x)^-1 = w^-k X^-x Z^-z = w^{-k - <x,z>} Z^-z X^-x
        return PauliOperator(self.p, -self.k - int(self.x @ self.z), -self.x, -self.z)

    def pairing(self, other: "PauliOperator") -> int:
        """``s`` with ``self other = omega^s other self``."""
        return int(other.x @ self.z - self.x @ other.z) % self.p

    def to_matrix(self) -> np.ndarray:
        from .qsim import clock_matrix, omega, shift_matrix

        out = np.array([[omega(self.p) ** self.k]], dtype=complex)
        for a, b in zip(self.z, self.x):
            out = np.kron(out, clock_matrix(self.p, int(a)) @ shift_matrix(self.p, int(b)))
        return out


CLIFFORD_KINDS = ("X", "Z", "F", "SUM", "INV", "I")


def conjugate_pauli_through_clifford(gates: Iterable[tuple], pauli: PauliOperator) -> PauliOperator:
    """``U P U^dagger`` for ``U`` the gate sequence applied in order.

    Gates are ``(kind, target)`` or ``("SUM", control, target)``.
    """
    p = pauli.p
    k = pauli.k
    x = pauli.x.copy()
    z = pauli.z.copy()
    for g in gates:
        kind = g[0]
        if kind not in CLIFFORD_KINDS:
            raise NonCliffordGate(f"gate {kind!r} is not supported")
        if kind == "I":
            continue
        if kind == "SUM":
            c, t = g[1], g[2]
            x[t] = (x[t] + x[c]) % p
            z[c] = (z[c] - z[t]) % p
            continue
        q = g[1]
        if kind == "X":
            k -= z[q]
        elif kind == "Z":
            k += x[q]
        elif kind == "F":
            # F Z F^dag = X^-1, F X F^dag = Z, then reorder X^-a Z^b = w^{ab} Z^b X^-a
            a, b = z[q], x[q]
            k += a * b
            z[q], x[q] = b, (-a) % p
        elif kind == "INV":
            x[q], z[q] = (-x[q]) % p, (-z[q]) % p
    return PauliOperator(p, int(k), x, z)


# -------------------------------------------------------------- noise model


@dataclass(frozen=True)
class NoiseSpec:
    tau: float
    model: str = "IidPauli"

    def __post_init__(self) -> None:
        if not 0 <= self.tau < 1:
            raise IsmrError("tau must lie in [0, 1)")
        if self.model != "IidPauli":
            raise IsmrError(f"unknown noise model {self.model!r}")


def sample_local_stochastic(n_sites: int, spec: NoiseSpec, rng: np.random.Generator, p: int = 2) -> PauliOperator:
    """Each site independently carries a uniform nontrivial Pauli with probability ``tau``."""
    x, z = _sample_exponents(1, n_sites, spec.tau, p, rng)
    return PauliOperator(p, 0, x[0], z[0])


def _sample_exponents(batch: int, n_sites: int, tau: float, p: int, rng: np.random.Generator):
    hit = rng.random((batch, n_sites)) < tau
    idx = rng.integers(1, p * p, size=(batch, n_sites)) * hit
    return idx // p, idx % p


def composed_noise_bound(p: int, tau: float, rho: float, size: int) -> float:
    return (p * max(tau**0.5, rho**0.5)) ** size


def support_inclusion_frequency(
    p: int, n_sites: int, taus: Sequence[float], subset: Sequence[int], trials: int, rng: np.random.Generator
) -> tuple[int, int]:
    """Count trials where the composition of samplers at each ``tau`` covers ``subset``."""
    x = np.zeros((trials, n_sites), dtype=np.int64)
    z = np.zeros((trials, n_sites), dtype=np.int64)
    for tau in taus:
        dx, dz = _sample_exponents(trials, n_sites, tau, p, rng)
        x = (x + dx) % p
        z = (z + dz) % p
    supp = (x != 0) | (z != 0)
    hits = int(np.all(supp[:, list(subset)], axis=1).sum())
    return hits, trials


# ------------------------------------------------------------------ lattice


@dataclass(frozen=True)
class SurfaceLattice:
    p: int
    L: int

    def __post_init__(self) -> None:
        check_prime(self.p)
        if self.L < 2:
            raise IsmrError("code distance must be at least 2")

    @property
    def size(self) -> int:
        return 2 * self.L - 1

    @cached_property
    def sites(self) -> list[tuple[int, int]]:
        s = self.size
        return [(r, c) for r in range(s) for c in range(s) if (r + c) % 2 == 0]

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @cached_property
    def site_index(self) -> dict[tuple[int, int], int]:
        return {rc: i for i, rc in enumerate(self.sites)}

    @cached_property
    def vertex_positions(self) -> list[tuple[int, int]]:
        s = self.size
        return [(r, c) for r in range(0, s, 2) for c in range(1, s, 2)]

    @cached_property
    def plaquette_positions(self) -> list[tuple[int, int]]:
        s = self.size
        return [(r, c) for r in range(1, s, 2) for c in range(0, s, 2)]

    def _stabilizer_matrix(self, positions, signs) -> np.ndarray:
        h = np.zeros((len(positions), self.n_sites), dtype=np.int64)
        for i, (r, c) in enumerate(positions):
            for (dr, dc), sgn in signs.items():
                j = self.site_index.get((r + dr, c + dc))
                if j is not None:
                    h[i, j] = sgn
        return h

    @cached_property
    def vertex_matrix(self) -> np.ndarray:
        """X exponents of each ``A_v`` (left, up positive; right, down inverse)."""
        return self._stabilizer_matrix(self.vertex_positions, {(0, -1): 1, (-1, 0): 1, (0, 1): -1, (1, 0): -1})

    @cached_property
    def plaquette_matrix(self) -> np.ndarray:
        """Z exponents of each ``B_p`` (up, right positive; down, left inverse)."""
        return self._stabilizer_matrix(self.plaquette_positions, {(-1, 0): 1, (0, 1): 1, (1, 0): -1, (0, -1): -1})

    def stabilizers(self) -> list[PauliOperator]:
        out = [PauliOperator.x_type(self.p, row) for row in self.vertex_matrix]
        out += [PauliOperator.z_type(self.p, row) for row in self.plaquette_matrix]
        return out

    @cached_property
    def logical_z_row(self) -> np.ndarray:
        row = np.zeros(self.n_sites, dtype=np.int64)
        for c in range(0, self.size, 2):
            row[self.site_index[(0, c)]] = 1
        return row

    @cached_property
    def logical_x_column(self) -> np.ndarray:
        col = np.zeros(self.n_sites, dtype=np.int64)
        for r in range(0, self.size, 2):
            col[self.site_index[(r, 0)]] = 1
        return col

    def logical_x(self) -> PauliOperator:
        return PauliOperator.x_type(self.p, self.logical_x_column)

    def logical_z(self) -> PauliOperator:
        return PauliOperator.z_type(self.p, self.logical_z_row)


@dataclass(frozen=True)
class Syndrome:
    """Charges of the plaquette (X-error) and vertex (Z-error) stabilizers."""

    plaquette: np.ndarray
    vertex: np.ndarray

    @property
    def is_trivial(self) -> bool:
        return not (self.plaquette.any() or self.vertex.any())

    def defects(self, lattice: SurfaceLattice) -> dict[tuple[int, int], int]:
        out = {}
        for pos, q in zip(lattice.plaquette_positions, self.plaquette):
            if q:
                out[pos] = int(q)
        for pos, q in zip(lattice.vertex_positions, self.vertex):
            if q:
                out[pos] = int(q)
        return out


def syndrome(lattice: SurfaceLattice, error: PauliOperator) -> Syndrome:
    p = lattice.p
    return Syndrome(lattice.plaquette_matrix @ error.x % p, lattice.vertex_matrix @ error.z % p)


# ------------------------------------------------------------------- HDRG


@dataclass
class Cluster:
    members: list[int]
    charge: int
    level: int

    def neutral(self, p: int) -> bool:
        return self.charge % p == 0


def _chebyshev(a: tuple[int, int], b: tuple[int, int]) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1])) // 2


class _Sector:
    """One CSS half: defects on ``positions`` (stabilizer rows of ``matrix``)."""

    def __init__(self, lattice: SurfaceLattice, positions, matrix, vertical_boundary: bool):
        self.lattice = lattice
        self.positions = positions
        self.matrix = matrix
        self.vertical = vertical_boundary
        self.index = {pos: i for i, pos in enumerate(positions)}

    def boundary_point(self, pos: tuple[int, int]) -> tuple[tuple[int, int], int]:
        """Nearest virtual boundary position and its Chebyshev distance."""
        r, c = pos
        far = self.lattice.size
        if self.vertical:
            return ((-1, c), (r + 1) // 2) if r + 1 <= far - r else ((far, c), (far - r) // 2)
        return ((r, -1), (c + 1) // 2) if c + 1 <= far - c else ((r, far), (far - c) // 2)

    def _sign(self, pos, site) -> int:
        i = self.index.get(pos)
        return 0 if i is None else int(self.matrix[i, site])

    def _step(self, out: np.ndarray, a, b, k: int) -> None:
        """Exponents moving charge ``k`` from ``a`` to ``b``; either may be a boundary point."""
        site = self.lattice.site_index[((a[0] + b[0]) // 2, (a[1] + b[1]) // 2)]
        sa = self._sign(a, site)
        if sa:
            out[site] -= k * sa
        else:
            out[site] += k * self._sign(b, site)

    def chain(self, out: np.ndarray, a, b, k: int) -> None:
        """Create charge ``+k`` at ``b`` and ``-k`` at ``a`` along an L-shaped path, rows first."""
        cur = a
        while cur != b:
            if cur[0] != b[0]:
                nxt = (cur[0] + (2 if b[0] > cur[0] else -2), cur[1])
            else:
                nxt = (cur[0], cur[1] + (2 if b[1] > cur[1] else -2))
            self._step(out, cur, nxt, k)
            cur = nxt

    def decode(self, charges: np.ndarray) -> np.ndarray | None:
        p = self.lattice.p
        out = np.zeros(self.lattice.n_sites, dtype=np.int64)
        defects = [int(i) for i in np.flatnonzero(charges % p)]
        if not defects:
            return out
        clusters = [Cluster([d], int(charges[d]), 0) for d in defects]
        top = max(l for l in range(8 * self.lattice.L) if 2**l <= 2 * self.lattice.L)
        for level in range(top + 1):
            reach = 2**level
            clusters = self._merge(clusters, reach)
            remaining = []
            for cl in clusters:
                cl.level = level
                if cl.neutral(p):
                    self._correct(out, cl, None)
                elif 2 * min(self.boundary_point(self.positions[m])[1] for m in cl.members) <= reach:
                    self._correct(out, cl, True)
                else:
                    remaining.append(cl)
            clusters = remaining
            if not clusters:
                return out % p
        return None

    def _merge(self, clusters: list[Cluster], reach: int) -> list[Cluster]:
        parent = list(range(len(clusters)))

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                if find(i) == find(j):
                    continue
                if any(
                    _chebyshev(self.positions[a], self.positions[b]) <= reach
                    for a in clusters[i].members
                    for b in clusters[j].members
                ):
                    parent[find(j)] = find(i)
        groups: dict[int, Cluster] = {}
        for i, cl in enumerate(clusters):
            g = groups.setdefault(find(i), Cluster([], 0, cl.level))
            g.members.extend(cl.members)
            g.charge += cl.charge
        return list(groups.values())

    def _correct(self, out: np.ndarray, cl: Cluster, to_boundary: bool | None) -> None:
        # every charge is gathered at the lowest-index defect
        p = self.lattice.p
        members = sorted(cl.members)
        root = members[0]
        total = 0
        for m in members[1:]:
            self.chain(out, self.positions[root], self.positions[m], int(self._charge_of(m)))
            total += self._charge_of(m)
        if to_boundary:
            # root still needs its own charge plus what it lent to the others
            need = (self._charge_of(root) + total) % p
            nearest = min(members, key=lambda m: (self.boundary_point(self.positions[m])[1], m))
            bpoint, _ = self.boundary_point(self.positions[nearest])
            if nearest != root:
                self.chain(out, self.positions[nearest], self.positions[root], need)
                self.chain(out, bpoint, self.positions[nearest], need)
            else:
                self.chain(out, bpoint, self.positions[root], need)

    def _charge_of(self, m: int) -> int:
        return int(self._charges[m])

    def run(self, charges: np.ndarray) -> np.ndarray | None:
        self._charges = np.asarray(charges, dtype=np.int64) % self.lattice.p
        return self.decode(self._charges)


def _sectors(lattice: SurfaceLattice) -> tuple[_Sector, _Sector]:
    return (
        _Sector(lattice, lattice.plaquette_positions, lattice.plaquette_matrix, vertical_boundary=True),
        _Sector(lattice, lattice.vertex_positions, lattice.vertex_matrix, vertical_boundary=False),
    )


def hdrg_decode(lattice: SurfaceLattice, syn: Syndrome):
    """Correction Pauli reproducing ``syn``, or ``ABORT`` when charged clusters survive every level.

    At level ``l`` clusters within Chebyshev distance ``2^l`` merge.  A cluster
    is settled when its charge vanishes mod ``p`` or when one of its defects
    lies within ``2^(l-1)`` of a boundary that can absorb charge: two clusters
    close a gap of ``2^l`` from both ends, the boundary does not move.  The top level is
    the largest ``l`` with ``2^l <= 2L``.
    """
    xs, zs = _sectors(lattice)
    cx = xs.run(syn.plaquette)
    cz = zs.run(syn.vertex)
    if cx is None or cz is None:
        return ABORT
    return PauliOperator(lattice.p, 0, cx, cz)


def is_logical_failure(lattice: SurfaceLattice, residual: PauliOperator) -> bool:
    if not syndrome(lattice, residual).is_trivial:
        raise NontrivialSyndrome("residual does not commute with the stabilizers")
    p = lattice.p
    return bool(int(residual.x @ lattice.logical_z_row) % p or int(residual.z @ lattice.logical_x_column) % p)


def decode_and_check(lattice: SurfaceLattice, error: PauliOperator) -> bool:
    """True iff decoding ``error`` aborts or leaves a logical residual."""
    corr = hdrg_decode(lattice, syndrome(lattice, error))
    if corr is ABORT:
        return True
    residual = PauliOperator(lattice.p, 0, error.x - corr.x, error.z - corr.z)
    return is_logical_failure(lattice, residual)


def noiseless_z_outcomes(lattice: SurfaceLattice, value: int, rng: np.random.Generator) -> np.ndarray:
    """Z-basis outcomes of ``|value>`` encoded: the logical X column plus random vertex stabilizers."""
    coeffs = rng.integers(0, lattice.p, size=len(lattice.vertex_positions))
    return (value * lattice.logical_x_column + coeffs @ lattice.vertex_matrix) % lattice.p


def logical_Z_measure_decoded(lattice: SurfaceLattice, outcomes: Sequence[int], syn: np.ndarray | None = None):
    """Logical Z value from single-shot outcomes, or ``ABORT``.

    The plaquette charges of the outcomes locate the X deviations; the decoder's
    guess is removed before summing the logical row.
    """
    p = lattice.p
    o = np.asarray(outcomes, dtype=np.int64) % p
    charges = lattice.plaquette_matrix @ o % p if syn is None else np.asarray(syn)
    xs, _ = _sectors(lattice)
    guess = xs.run(charges)
    if guess is None:
        return ABORT
    return int((o - guess) @ lattice.logical_z_row % p)


# -------------------------------------------------------------- Monte Carlo


@dataclass(frozen=True)
class FailureEstimate:
    p: int
    L: int
    tau: float
    trials: int
    failures: int
    rate: float
    ci_low: float
    ci_high: float


def monte_carlo_failure(
    lattice: SurfaceLattice, tau: float, trials: int, rng: np.random.Generator, batch: int = 20000
) -> FailureEstimate:
    """Failure fraction (abort or logical residual) under i.i.d. noise, with a 95% Wilson interval."""
    if trials < 1:
        raise IsmrError("trials must be positive")
    NoiseSpec(tau)
    p, n = lattice.p, lattice.n_sites
    failures = 0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        xs, zs = _sample_exponents(b, n, tau, p, rng)
        for i in np.flatnonzero(xs.any(axis=1) | zs.any(axis=1)):
            if decode_and_check(lattice, PauliOperator(p, 0, xs[i], zs[i])):
                failures += 1
        done += b
    lo, hi = wilson_interval(failures, trials, 0.95)
    return FailureEstimate(p, lattice.L, tau, trials, failures, failures / trials, lo, hi)


QEC_COLUMNS = ("p", "L", "tau", "trials", "failures", "rate", "ci_low", "ci_high")


def failure_rows_csv(rows: Sequence[FailureEstimate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(QEC_COLUMNS)
    for r in rows:
        w.writerow([r.p, r.L, r.tau, r.trials, r.failures, repr(r.rate), repr(r.ci_low), repr(r.ci_high)])
    return buf.getvalue()
