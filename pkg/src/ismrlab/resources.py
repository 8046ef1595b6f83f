"""Input size at which unsimplified classical size lower bounds overtake a linear quantum circuit.

Every formula is evaluated in log space.  Inside the formulas ``log`` is the
natural logarithm; the classical size itself enters through ``log2 s``.  The
derivation and calibration are written up in ``docs/resource_crossover.md``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .core import IsmrError

ROWS = ("exact-ac0", "exact-bptf", "average-bptf")
SCAN_RANGE = (1.0, 400.0)


class NoCrossover(IsmrError):
    pass


@dataclass(frozen=True)
class CrossoverModel:
    """``c_classical`` scales the hidden constant of the classical bound; ``c_q`` the quantum size ``c_q n``."""

    row: str = "exact-ac0"
    d: int = 3
    c_q: float = 1.0
    c_classical: float = 1.0

    def __post_init__(self) -> None:
        if self.row not in ROWS:
            raise IsmrError(f"row must be one of {ROWS}")
        if self.d < 3:
            raise IsmrError("depth must be at least 3")
        if self.c_q <= 0 or self.c_classical <= 0:
            raise IsmrError("constants must be positive")


def _ln_log2_size_exact(ln_n: float, d: int, row: str, c: float) -> float:
    """``ln(log2 s)`` for the exact-hardness rows."""
    ln_ln_n = math.log(ln_n)
    ln_nlogn = ln_n + ln_ln_n
    if row == "exact-ac0":
        # n / (sqrt(n log n) log(n log n))
        inner = ln_n - 0.5 * ln_nlogn - math.log(ln_nlogn)
    else:
        # n^(3/10) / (sqrt(log n) log(n log n))
        inner = 0.3 * ln_n - 0.5 * ln_ln_n - math.log(ln_nlogn)
    return math.log(c) + 1.0 / (1 - d) + inner / (d - 1)


def _ln_average_exponent(ln_n: float, d: int, c_q: float, c: float) -> float:
    """``ln`` of the exponent in the average-case success bound with ``s = c_q n``."""
    ln_ln_n = math.log(ln_n)
    r = math.sqrt(ln_n + ln_ln_n)
    ln_nlogn = ln_n + ln_ln_n
    log_s = ln_n + math.log(c_q)
    return (
        math.log(c)
        + 1.6 * ln_n
        - (1 + 2 / r) * ln_nlogn
        - 2 * r * math.log(2)
        - (2 * d - 2) * math.log(log_s)
    )


def advantage_margin(model: CrossoverModel, log10_n: float) -> float:
    """Positive once the classical bound exceeds the quantum resources at ``n = 10^log10_n``."""
    ln_n = log10_n * math.log(10)
    if model.row == "average-bptf":
        # the success bound 1/2 + 2^-E stops being vacuous at E = 1
        return _ln_average_exponent(ln_n, model.d, model.c_q, model.c_classical)
    log2_quantum = (ln_n + math.log(model.c_q)) / math.log(2)
    return _ln_log2_size_exact(ln_n, model.d, model.row, model.c_classical) - math.log(log2_quantum)


def resource_crossover(model: CrossoverModel, tol: float = 1e-9) -> float:
    """Smallest ``log10 n`` in ``[1, 400]`` where the margin turns nonnegative."""
    lo, hi = SCAN_RANGE
    grid = [lo + 0.25 * i for i in range(int((hi - lo) / 0.25) + 1)]
    prev = grid[0]
    if advantage_margin(model, prev) >= 0:
        return prev
    for x in grid[1:]:
        if advantage_margin(model, x) >= 0:
            return brentq(lambda t: advantage_margin(model, t), prev, x, xtol=tol)
        prev = x
    raise NoCrossover(f"no crossover for {model} below 10^{hi:g}")


PUBLISHED_ORDERS = {"exact-ac0": 11, "exact-bptf": 22, "average-bptf": 40}
