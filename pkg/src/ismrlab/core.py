"""Prime-field strings, the ISMR relation family, Hamming encoding and correlation.

An ISMR instance with prime ``p`` accepts bit strings ``x`` whose Hamming
weight is divisible by ``p`` and asks for an output string ``y`` with
``|y| = -(|x|/p) (mod p)``.  For ``p = 2`` this is the parity halving problem.
"""

from __future__ import annotations

import cmath
import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

MAX_PRIME = 13
ENUMERATION_LIMIT_BITS = 24


class IsmrError(ValueError):
    """Base class for domain errors raised by this package."""


class ResidueViolation(IsmrError):
    """Input weight is not divisible by the instance prime."""


class LengthMismatch(IsmrError):
    """A string has the wrong length for the requested operation."""


class DigitOutOfRange(IsmrError):
    """A digit lies outside the allowed range."""


class EmptyDistribution(IsmrError):
    """A distribution has no support or zero total weight."""


class TooLarge(IsmrError):
    """The requested enumeration exceeds the supported size."""


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % d for d in range(2, math.isqrt(p) + 1))


def check_prime(p: int) -> int:
    """Validate ``p`` as a supported prime and return it."""
    if not isinstance(p, (int, np.integer)) or not is_prime(int(p)) or p > MAX_PRIME:
        raise IsmrError(f"p must be a prime in [2, {MAX_PRIME}], got {p!r}")
    return int(p)


@dataclass(frozen=True)
class DitString:
    """Immutable vector over F_p.  Bits are the ``p = 2`` case."""

    p: int
    digits: tuple[int, ...]

    def __post_init__(self) -> None:
        check_prime(self.p)
        digits = tuple(int(d) for d in self.digits)
        if any(d < 0 or d >= self.p for d in digits):
            raise DigitOutOfRange(f"digits must lie in [0, {self.p}): {digits}")
        object.__setattr__(self, "digits", digits)

    @classmethod
    def from_str(cls, text: str, p: int = 2) -> "DitString":
        return cls(p, tuple(int(c) for c in text.strip()))

    @classmethod
    def bits(cls, values: Iterable[int]) -> "DitString":
        return cls(2, tuple(values))

    def __len__(self) -> int:
        return len(self.digits)

    def __str__(self) -> str:
        return "".join(str(d) for d in self.digits)

    @property
    def weight(self) -> int:
        """Number of nonzero digits."""
        return sum(1 for d in self.digits if d)

    @property
    def digit_sum(self) -> int:
        """Integer sum of the digits (equals ``weight`` for bits)."""
        return sum(self.digits)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.digits, dtype=np.int64)


@dataclass(frozen=True)
class IsmrInstance:
    p: int
    n: int
    m: int

    def __post_init__(self) -> None:
        check_prime(self.p)
        if self.n < 1 or self.m < 1:
            raise IsmrError("n and m must be positive")


DIST_KINDS = ("UniformBinaryResidueZero", "UniformDitResidueZero", "HammingEncodedUniformBinary")


@dataclass(frozen=True)
class InputDistribution:
    """Input law on strings with digit sum divisible by ``p``.

    ``UniformBinaryResidueZero``: uniform over ``x`` in F_2^n with ``|x| = 0 mod p``.
    ``UniformDitResidueZero``: uniform over ``x`` in F_p^n with ``sum x = 0 mod p``.
    ``HammingEncodedUniformBinary``: uniform bits of length ``n(p-1)`` with
    weight ``0 mod p``, viewed through the Hamming encoding as ``n`` dits.
    """

    kind: str
    n: int
    p: int

    def __post_init__(self) -> None:
        if self.kind not in DIST_KINDS:
            raise IsmrError(f"unknown distribution kind {self.kind!r}")
        check_prime(self.p)
        if self.n < 1:
            raise IsmrError("n must be positive")

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "n": self.n, "p": self.p})

    @classmethod
    def from_json(cls, text: str) -> "InputDistribution":
        obj = json.loads(text)
        return cls(obj["kind"], int(obj["n"]), int(obj["p"]))

    @property
    def bit_length(self) -> int:
        """Length of the underlying bit string (for binary kinds)."""
        if self.kind == "HammingEncodedUniformBinary":
            return self.n * (self.p - 1)
        return self.n

    def enumerate(self) -> list[tuple[DitString, float]]:
        """Explicit ``(string, weight)`` support.

        Binary kinds return bit strings; the dit kind returns strings over F_p.
        """
        if self.kind == "UniformDitResidueZero":
            if self.n * math.log2(self.p) > ENUMERATION_LIMIT_BITS:
                raise TooLarge("dit support too large to enumerate")
            support = [d for d in itertools.product(range(self.p), repeat=self.n) if sum(d) % self.p == 0]
            q = self.p
        else:
            if self.bit_length > ENUMERATION_LIMIT_BITS:
                raise TooLarge("bit support too large to enumerate")
            support = [b for b in itertools.product((0, 1), repeat=self.bit_length) if sum(b) % self.p == 0]
            q = 2
        if not support:
            raise EmptyDistribution("empty support")
        w = 1.0 / len(support)
        return [(DitString(q, s), w) for s in support]


def _bits_of(x: DitString | Sequence[int] | str) -> DitString:
    if isinstance(x, DitString):
        if x.p != 2:
            raise IsmrError("expected a bit string")
        return x
    if isinstance(x, str):
        return DitString.from_str(x, 2)
    return DitString.bits(x)


def ismr_residue(inst: IsmrInstance, x: DitString | Sequence[int] | str) -> int:
    """Target output residue ``-(|x|/p) mod p``."""
    bits = _bits_of(x)
    if len(bits) != inst.n:
        raise LengthMismatch(f"input has length {len(bits)}, expected {inst.n}")
    w = bits.weight
    if w % inst.p:
        raise ResidueViolation(f"|x| = {w} is not divisible by {inst.p}")
    return (-(w // inst.p)) % inst.p


def ismr_verify(inst: IsmrInstance, x, y) -> bool:
    """True iff ``y`` is a valid answer to ``x``."""
    target = ismr_residue(inst, x)
    out = _bits_of(y)
    if len(out) != inst.m:
        raise LengthMismatch(f"output has length {len(out)}, expected {inst.m}")
    return out.weight % inst.p == target


def lsb(x) -> int:
    """Second least significant bit indicator: 1 iff ``|x| mod 4`` is 0 or 1."""
    return 1 if _bits_of(x).weight % 4 in (0, 1) else 0


def hamming_encode(bits, p: int) -> DitString:
    """Sum consecutive blocks of ``p-1`` bits into one digit each."""
    check_prime(p)
    b = _bits_of(bits).digits
    if len(b) % (p - 1):
        raise LengthMismatch(f"length {len(b)} is not a multiple of {p - 1}")
    return DitString(p, tuple(sum(b[i : i + p - 1]) for i in range(0, len(b), p - 1)))


def hamming_decode_canonical(dits: DitString | Sequence[int], p: int) -> DitString:
    """Inverse of :func:`hamming_encode` writing each digit as ones then zeros."""
    check_prime(p)
    values = dits.digits if isinstance(dits, DitString) else tuple(int(d) for d in dits)
    out: list[int] = []
    for d in values:
        if not 0 <= d <= p - 1:
            raise DigitOutOfRange(f"digit {d} outside [0, {p - 1}]")
        out.extend([1] * d + [0] * (p - 1 - d))
    return DitString(2, tuple(out))


def encoding_bias(p: int, v: int) -> float:
    """Probability that a uniform block of ``p-1`` bits encodes to ``v``."""
    check_prime(p)
    if not 0 <= v < p:
        raise DigitOutOfRange(f"value {v} outside [0, {p})")
    return math.comb(p - 1, v) / 2 ** (p - 1)


def root_of_unity(p: int, k: int) -> complex:
    """``exp(2 pi i k / p)`` with ``k`` reduced first, so large ``k`` stay exact."""
    return cmath.exp(2j * math.pi * (k % p) / p)


def correlation(p: int, samples: Iterable[tuple[int, int, float]]) -> float:
    """``E[Re exp(2 pi i (f - g) / p)]`` over weighted ``(f, g, weight)`` triples."""
    total = 0.0
    mass = 0.0
    for f, g, w in samples:
        total += w * math.cos(2 * math.pi * ((f - g) % p) / p)
        mass += w
    if mass <= 0:
        raise EmptyDistribution("no weight")
    if abs(mass - 1.0) > 1e-9:
        raise IsmrError(f"weights sum to {mass}, expected 1")
    return total


def correlation_from_shift_law(p: int, law: Sequence[float]) -> float:
    """Correlation of a deviation distribution ``law[s] = Pr[f - g = s]``."""
    return correlation(p, ((s, 0, q) for s, q in enumerate(law)))


def success_from_correlation_p3(c: float) -> float:
    """For ``p = 3`` with symmetric errors, success probability ``(1 + 2c)/3``."""
    if not -0.5 - 1e-12 <= c <= 1 + 1e-12:
        raise IsmrError(f"correlation {c} outside [-1/2, 1]")
    return (1 + 2 * c) / 3


def sample_valid_input(dist: InputDistribution, rng: np.random.Generator) -> DitString:
    """Draw one string by rejection sampling on the residue-zero slice."""
    if dist.kind == "UniformDitResidueZero":
        while True:
            d = rng.integers(0, dist.p, size=dist.n)
            if int(d.sum()) % dist.p == 0:
                return DitString(dist.p, tuple(d))
    length = dist.bit_length
    while True:
        b = rng.integers(0, 2, size=length)
        if int(b.sum()) % dist.p == 0:
            return DitString(2, tuple(b))


def iter_residue_zero_bits(n: int, p: int) -> Iterator[tuple[int, ...]]:
    """All bit strings of length ``n`` with weight divisible by ``p``."""
    for b in itertools.product((0, 1), repeat=n):
        if sum(b) % p == 0:
            yield b
