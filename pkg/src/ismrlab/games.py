"""Modular XOR games: exact classical optima and closed-form bounds.

Each of ``n`` parties receives a symbol ``x_i`` in ``{0, ..., p-1}`` with
``sum x_i = 0 (mod p)`` and answers ``y_i``.  The team wins when
``sum y_i = -(sum x_i / p) (mod p)``.  We study the linear strategies
``y_i = b_i * x_i`` and score them by the correlation

    Corr(b) = E[ Re exp(2 pi i (sum b_i x_i + |x|/p) / p) ],

which is the correlation between the team answer and the target residue.
"""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import (
    DIST_KINDS,
    IsmrError,
    TooLarge,
    check_prime,
    encoding_bias,
)

BRUTE_FORCE_LIMIT = 10**6
ENUMERATION_LIMIT = 22


@dataclass(frozen=True)
class GameSpec:
    """A modular XOR game instance.

    ``r`` counts restricted symbols: bits for the Hamming-encoded kind, dits
    for the uniform-dit kind.  The first ``r`` of them are pinned to
    ``fixed`` (zeros when omitted).
    """

    p: int
    n: int
    kind: str = "UniformDitResidueZero"
    r: int = 0
    fixed: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        check_prime(self.p)
        if self.kind not in DIST_KINDS[1:]:
            raise IsmrError(f"games support {DIST_KINDS[1:]}, got {self.kind!r}")
        limit = self.n * (self.p - 1) if self.binary else self.n
        if not 0 <= self.r <= limit:
            raise IsmrError(f"r must lie in [0, {limit}]")
        fixed = tuple(self.fixed) if self.fixed else (0,) * self.r
        if len(fixed) != self.r:
            raise IsmrError("fixed must list one value per restricted symbol")
        top = 1 if self.binary else self.p - 1
        if any(not 0 <= v <= top for v in fixed):
            raise IsmrError("fixed values out of range")
        object.__setattr__(self, "fixed", fixed)

    @property
    def binary(self) -> bool:
        return self.kind == "HammingEncodedUniformBinary"

    @property
    def free_symbols(self) -> int:
        """Unrestricted bits (binary kind) or dits (dit kind)."""
        return (self.n * (self.p - 1) if self.binary else self.n) - self.r


def input_weights(game: GameSpec) -> np.ndarray:
    """Probability of every symbol string, as an array of shape ``(p,)*n``."""
    p, n = game.p, game.n
    if game.binary:
        bits = n * (p - 1)
        if bits > ENUMERATION_LIMIT:
            raise TooLarge(f"{bits} input bits exceed the enumeration limit")
        free = bits - game.r
        # Count bit strings by the digit vector they encode to.
        counts = np.zeros((p,) * n)
        for tail in itertools.product((0, 1), repeat=free):
            b = game.fixed + tail
            if sum(b) % p:
                continue
            idx = tuple(sum(b[i * (p - 1) : (i + 1) * (p - 1)]) for i in range(n))
            counts[idx] += 1
    else:
        if n * math.log2(p) > ENUMERATION_LIMIT:
            raise TooLarge("dit support too large to enumerate")
        grids = np.indices((p,) * n).sum(axis=0)
        counts = (grids % p == 0).astype(float)
        for i, v in enumerate(game.fixed):
            sl = [slice(None)] * n
            keep = np.zeros(p, dtype=bool)
            keep[v] = True
            sl[i] = ~keep
            counts[tuple(sl)] = 0.0
    total = counts.sum()
    if total == 0:
        raise IsmrError("restriction leaves no valid input")
    return counts / total


def _phase_weights(game: GameSpec) -> np.ndarray:
    """``w(x) * exp(2 pi i |x| / p^2)``, the target-side factor of Corr."""
    w = input_weights(game)
    digit_sum = np.indices(w.shape).sum(axis=0) if w.ndim else np.zeros(())
    return w * np.exp(2j * np.pi * digit_sum / game.p**2)


def strategy_correlation_exact(game: GameSpec, b) -> float:
    """Correlation of the linear strategy ``b`` by summing over all inputs."""
    b = np.asarray(b, dtype=np.int64) % game.p
    if b.shape != (game.n,):
        raise IsmrError(f"strategy needs {game.n} entries")
    W = _phase_weights(game)
    idx = np.indices(W.shape)
    dot = np.tensordot(b, idx, axes=1) if game.n else 0
    return float(np.real(np.sum(W * np.exp(2j * np.pi * (dot % game.p) / game.p))))


def all_strategy_correlations(game: GameSpec) -> np.ndarray:
    """Corr(b) for every ``b`` at once, via an n-dimensional inverse DFT."""
    if game.p**game.n > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"p^n = {game.p ** game.n} strategies exceed {BRUTE_FORCE_LIMIT}")
    W = _phase_weights(game)
    return np.real(np.fft.ifftn(W) * W.size)


def optimal_classical_correlation_bruteforce(game: GameSpec) -> tuple[tuple[int, ...], float]:
    """Best linear strategy; ties go to the lexicographically smallest ``b``."""
    corr = all_strategy_correlations(game)
    flat = corr.ravel()
    best = flat.max()
    # C-order ravel enumerates b lexicographically, so argmax of the first
    # value within rounding of the maximum is the smallest tie.
    i = int(np.flatnonzero(flat >= best - 1e-12)[0])
    b_star = tuple(int(v) for v in np.unravel_index(i, corr.shape))
    return b_star, float(flat[i])


def strategy_success_probability(game: GameSpec, b) -> float:
    """Exact probability that ``sum b_i x_i = -(|x|/p) (mod p)``."""
    b = np.asarray(b, dtype=np.int64) % game.p
    w = input_weights(game)
    idx = np.indices(w.shape)
    dev = (np.tensordot(b, idx, axes=1) + idx.sum(axis=0) // game.p) % game.p
    return float(w[dev == 0].sum())


def optimal_success_bruteforce(game: GameSpec) -> tuple[tuple[int, ...], float]:
    """Best success probability over linear strategies.

    Uses ``Pr[dev = 0] = (1/p) sum_k Re E[omega^{k dev}]`` so every ``b`` is
    scored from the same DFT used for the correlations.
    """
    if game.p**game.n > BRUTE_FORCE_LIMIT:
        raise TooLarge("too many strategies")
    w = input_weights(game)
    digit_sum = np.indices(w.shape).sum(axis=0)
    total = np.zeros(w.shape)
    for k in range(game.p):
        Wk = w * np.exp(2j * np.pi * k * digit_sum / game.p**2)
        # E[omega^{k dev}](b) = DFT of Wk evaluated at k*b
        vals = np.real(np.fft.ifftn(Wk) * Wk.size)
        idx = tuple((k * np.indices(w.shape)) % game.p)
        total += vals[idx]
    total /= game.p
    flat = total.ravel()
    i = int(np.flatnonzero(flat >= flat.max() - 1e-12)[0])
    return tuple(int(v) for v in np.unravel_index(i, total.shape)), float(flat[i])


# ----------------------------------------------------------------- closed forms


def symbol_distribution(p: int, kind: str) -> np.ndarray:
    """Marginal law ``Delta(v)`` of one symbol before conditioning on the sum."""
    if kind == "UniformDitResidueZero":
        return np.full(p, 1.0 / p)
    if kind == "HammingEncodedUniformBinary":
        return np.array([encoding_bias(p, v) for v in range(p)])
    raise IsmrError(f"unknown kind {kind!r}")


def per_symbol_factor(p: int, b: int, kind: str) -> complex:
    """``sum_x Delta(x) exp(2 pi i x ((p-1) + p b) / p^2)`` for one party."""
    delta = symbol_distribution(p, kind)
    step = (p - 1) + p * (b % p)
    return complex(sum(delta[x] * cmath.exp(2j * math.pi * x * step / p**2) for x in range(p)))


def product_form_correlation(game: GameSpec, b) -> float:
    """Correlation of ``b`` from per-symbol factors, exact for ``r = 0``.

    The sum constraint is imposed with a roots-of-unity filter:
    ``1[s = 0 mod p] = (1/p) sum_k omega^{k s}``, giving
    ``Corr = Re sum_k prod_i phi(b_i + k) / (p * Pr[sum = 0])`` where ``phi``
    is the unconstrained per-symbol factor of the target-side phase.
    """
    if game.r:
        raise IsmrError("product form assumes no restriction")
    p = game.p
    delta = symbol_distribution(p, game.kind)
    xs = np.arange(p)

    def phi(c: int) -> complex:
        return complex(np.sum(delta * np.exp(2j * np.pi * xs * (1 + p * c) / p**2)))

    unit = [complex(np.sum(delta * np.exp(2j * np.pi * xs * k / p))) for k in range(p)]
    zero_mass = sum(u**game.n for u in unit).real / p
    acc = 0j
    for k in range(p):
        acc += np.prod([phi(int(bi) + k) for bi in b])
    return float((acc / (p * zero_mass)).real)


@dataclass(frozen=True)
class BoundReport:
    """Three readings of the displayed correlation bound.

    ``real_part``: the displayed expression, real part taken after the power.
    ``magnitude``: the same with the modulus in place of the real part.
    ``simplified``: the closing ``c_p`` style simplification.
    """

    real_part: float
    magnitude: float
    simplified: float


@lru_cache(maxsize=None)
def binary_base(p: int) -> complex:
    """Base of the Hamming-binary bound, ``2^{1-p} e^{it} (e^{-it}(1+e^{it}))^p / (1+e^{it})``."""
    e = cmath.exp(2j * math.pi / p**2)
    return 2 ** (1 - p) * e * (e.conjugate() * (1 + e)) ** p / (1 + e)


@lru_cache(maxsize=None)
def dit_base(p: int) -> complex:
    """Normalised base of the uniform-dit bound, ``(1/p) sum_x e^{-2 pi i x / p^2}``."""
    e = cmath.exp(2j * math.pi / p**2)
    raw = -e * (-1 + cmath.exp(2j * math.pi * (p**2 - 1) / p)) / (-1 + e)
    return raw / p


def classical_correlation_upper_bound(p: int, n: int, r: int, kind: str) -> BoundReport:
    """Evaluate the closed-form correlation bounds for ``n`` parties.

    For the Hamming-binary kind ``r`` counts bits and the exponent is
    ``(n(p-1) - r)/(p-1)``; for the dit kind ``r`` counts dits and the
    exponent is ``n - r``.
    """
    check_prime(p)
    if kind == "HammingEncodedUniformBinary":
        e = (n * (p - 1) - r) / (p - 1)
        if e <= 0:
            raise IsmrError("need n(p-1) > r")
        z = binary_base(p) ** e
        return BoundReport(z.real / (p - 1), abs(z) / (p - 1), abs(binary_base(p)) ** e)
    if kind == "UniformDitResidueZero":
        e = n - r
        if e <= 0:
            raise IsmrError("need n > r")
        z = dit_base(p) ** e
        scale = p / (p - 1)
        return BoundReport(scale * z.real, scale * abs(z), scale * math.cos(2 * math.pi / p**2) ** e)
    raise IsmrError(f"unknown kind {kind!r}")


def displayed_p3_correlation_bound(n: int, r: int, kind: str) -> float:
    """The ``p = 3`` correlation caps ``(0.85)^{n-r}/2`` and ``(0.89)^{n-r}/2``."""
    if kind == "UniformDitResidueZero":
        return 0.85 ** (n - r) / 2
    return 0.89 ** ((2 * n - r) / 2) / 2


def winning_probability_bound_p3(n: int, r: int, kind: str) -> float:
    """``1/3 + (17/20)^{n-r}`` for dits, ``1/3 + (9/10)^{(2n-r)/2}`` for encoded bits.

    ``n`` counts parties in both cases, so the binary input has ``2n`` bits.
    """
    if kind == "UniformDitResidueZero":
        if n <= r:
            raise IsmrError("need n > r")
        return 1 / 3 + (17 / 20) ** (n - r)
    if kind == "HammingEncodedUniformBinary":
        if 2 * n <= r:
            raise IsmrError("need 2n > r")
        return 1 / 3 + (9 / 10) ** ((2 * n - r) / 2)
    raise IsmrError(f"unknown kind {kind!r}")
