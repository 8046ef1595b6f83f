"""Slow, independent reference computations used to cross-check the package.

Nothing here imports the code under test except plain data containers.
"""

from __future__ import annotations

import cmath
import itertools
import math
from functools import lru_cache, reduce

import numpy as np


def w(p):
    return cmath.exp(2j * math.pi / p)


def X(p):
    m = np.zeros((p, p), dtype=complex)
    for j in range(p):
        m[(j + 1) % p, j] = 1
    return m


def Z(p):
    return np.diag([w(p) ** j for j in range(p)])


def F(p):
    return np.array([[w(p) ** (a * s) for a in range(p)] for s in range(p)]) / math.sqrt(p)


def RZ(p):
    return np.diag([cmath.exp(2j * math.pi * j / p**2) for j in range(p)])


def INV(p):
    m = np.zeros((p, p), dtype=complex)
    for j in range(p):
        m[(-j) % p, j] = 1
    return m


def embed(p, n, ops):
    """Tensor product with ``ops[q]`` on qupit ``q`` (identity elsewhere); qupit 0 is most significant."""
    eye = np.eye(p)
    return reduce(np.kron, [ops.get(q, eye) for q in range(n)])


def sum_gate(p, n, c, t):
    dim = p**n
    m = np.zeros((dim, dim), dtype=complex)
    for idx in itertools.product(range(p), repeat=n):
        out = list(idx)
        out[t] = (out[t] + out[c]) % p
        m[np.ravel_multi_index(out, (p,) * n), np.ravel_multi_index(idx, (p,) * n)] = 1
    return m


def tree_depths(n, edges, root):
    adj = {v: [] for v in range(n)}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    depth = {root: 0}
    todo = [root]
    while todo:
        u = todo.pop()
        for v in adj[u]:
            if v not in depth:
                depth[v] = depth[u] + 1
                todo.append(v)
    return depth


@lru_cache(maxsize=16)
def _premeasure(p, n, edges):
    N = n + len(edges)
    psi = np.zeros(p**N, dtype=complex)
    psi[0] = 1
    psi = embed(p, N, {v: F(p) for v in range(n)}) @ psi
    for k, (u, v) in enumerate(edges):
        psi = sum_gate(p, N, u, n + k) @ psi
        psi = sum_gate(p, N, v, n + k) @ psi
    return psi.reshape((p,) * N)


def gpm_by_matrices(p, n, edges, root, e):
    """Cat state on the vertices after postselecting edge ancillas on ``e`` (dense matrices)."""
    t = _premeasure(p, n, tuple(edges))[(Ellipsis,) + tuple(e)].reshape(-1)
    t = t / np.linalg.norm(t)
    if p > 2:
        depth = tree_depths(n, edges, root)
        t = embed(p, n, {v: INV(p) for v in range(n) if depth[v] % 2 == 0}) @ t
    return t


def cat_reference(p, n, state):
    """The basis string ``z`` in the support of a cat state whose first entry is 0."""
    for idx in np.flatnonzero(np.abs(state) > 1e-9):
        digits = np.unravel_index(idx, (p,) * n)
        if digits[0] == 0:
            return tuple(int(d) for d in digits)
    raise AssertionError("no support string with leading zero")


def qupit_correlation_dense(p, x, edges, root):
    """Direct circuit: GPM, Rz on supp(x), Fourier, measure; corrected sum vs target."""
    n = len(x)
    target = (-(sum(x) // p)) % p
    total = 0.0
    outcomes = list(itertools.product(range(p), repeat=len(edges)))
    for e in outcomes:
        cat = gpm_by_matrices(p, n, edges, root, e)
        # reference relative to vertex 0; shift so the true cat's string is recovered
        z0 = cat_reference(p, n, cat)
        shift = 0
        for i in range(p):
            z = tuple((d + i) % p for d in z0)
            if z[root] == 0:
                shift = i
        z = tuple((d + shift) % p for d in z0)
        psi = embed(p, n, {v: F(p) @ (RZ(p) if x[v] else np.eye(p)) for v in range(n)}) @ cat
        probs = np.abs(psi.reshape((p,) * n)) ** 2
        corr = sum(x[u] * pow((z[u] + 1) % p, p - 1, p) for u in range(n)) % p
        for idx in itertools.product(range(p), repeat=n):
            dev = (sum(idx) + corr - target) % p
            total += probs[idx] * math.cos(2 * math.pi * dev / p)
    return total / len(outcomes)


def anf_naive(table, n):
    """Coefficient of monomial S is the XOR of f over all subsets of S (3^n work)."""
    out = set()
    for s in range(1 << n):
        acc = 0
        t = s
        while True:
            acc ^= int(table[t])
            if t == 0:
                break
            t = (t - 1) & s
        if acc:
            out.add(s)
    return out


def game_correlation_direct(p, n, b, kind):
    """Weighted sum over explicit inputs of ``Re exp(2 pi i (sum b_i x_i + |x|/p) / p)``."""
    if kind == "UniformDitResidueZero":
        inputs = [(d, 1.0) for d in itertools.product(range(p), repeat=n) if sum(d) % p == 0]
    else:
        inputs = []
        for bits in itertools.product((0, 1), repeat=n * (p - 1)):
            if sum(bits) % p == 0:
                d = tuple(sum(bits[i * (p - 1) : (i + 1) * (p - 1)]) for i in range(n))
                inputs.append((d, 1.0))
    tot = sum(wt for _, wt in inputs)
    acc = 0.0
    for d, wt in inputs:
        f = sum(bi * di for bi, di in zip(b, d)) % p
        g = (-(sum(d) // p)) % p
        acc += wt * math.cos(2 * math.pi * ((f - g) % p) / p)
    return acc / tot


def pauli_dense(p, k, x, z):
    """``omega^k prod_q Z^{z_q} X^{x_q}``."""
    return w(p) ** k * reduce(
        np.kron, [np.linalg.matrix_power(Z(p), int(b)) @ np.linalg.matrix_power(X(p), int(a)) for a, b in zip(x, z)]
    )
