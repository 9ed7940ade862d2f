"""Brute-force oracles shared by the test modules.

Everything here is written the slow, obvious way so it can check the fast
code paths without sharing any of their shortcuts.
"""

import itertools
from math import comb
from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"

ACCEPTANCE = {}


def record(criterion, ok, detail):
    """Keep a one-line verdict for the terminal summary and print it."""
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def loop_distance(x, beta=1.0):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    N = len(x)
    out = np.zeros((N, N))
    for j in range(N):
        for k in range(N):
            out[j, k] = np.sqrt(((x[j] - x[k]) ** 2).sum()) ** beta
    return out


def centring_matrix(N):
    return np.eye(N) - np.ones((N, N)) / N


def naive_centre(B):
    C = centring_matrix(len(B))
    return -C @ B @ C


def family_subsets(n, family, m=None):
    if family == "multivariance":
        return [tuple(range(n))]
    sizes = range(2, n + 1) if family == "total" else [m]
    return [s for r in sizes for s in itertools.combinations(range(n), r)]


def naive_statistic(blocks, family="multivariance", m=None, normalized=False, betas=None):
    """Sum over subsets of N * mean of the entrywise product of centred matrices."""
    n = len(blocks)
    betas = betas or [1.0] * n
    N = len(np.asarray(blocks[0]))
    cents = []
    for x, beta in zip(blocks, betas):
        B = loop_distance(x, beta)
        if normalized:
            B = B / B.mean() if B.mean() > 0 else np.zeros_like(B)
        cents.append(naive_centre(B))
    subsets = family_subsets(n, family, m)
    total = 0.0
    for s in subsets:
        prod = np.ones((N, N))
        for i in s:
            prod = prod * cents[i]
        total += N * prod.mean()
    if normalized:
        total /= len(subsets)
    return total


def einsum_stats(B):
    """The MatrixStats functionals as explicit index sums."""
    return {
        "total": np.einsum("jk->", B),
        "hadamard2": np.einsum("jk,jk->", B, B),
        "hadamard3": np.einsum("jk,jk,jk->", B, B, B),
        "power2": np.einsum("jk,kl->", B, B),
        "power3": np.einsum("jk,kl,lm->", B, B, B),
        "power4": np.einsum("jk,kl,lm,mo->", B, B, B, B),
        "cycle3": np.einsum("jk,kl,lj->", B, B, B),
        "cycle4": np.einsum("jk,kl,lm,mj->", B, B, B, B),
        "hadamard2_path": np.einsum("jk,jk,kl->", B, B, B),
        "colsum3": np.einsum("ak,bk,ck->", B, B, B),
    }


# products of psi values over index tuples, as functions of the tuple
U_PATTERNS = {
    "mu1": (2, lambda B, t: B[t[0], t[1]]),
    "b": (2, lambda B, t: B[t[0], t[1]] ** 2),
    "c": (3, lambda B, t: B[t[0], t[1]] * B[t[0], t[2]]),
    "d": (4, lambda B, t: B[t[0], t[1]] * B[t[2], t[3]]),
    "e": (3, lambda B, t: B[t[0], t[1]] * B[t[1], t[2]] * B[t[2], t[0]]),
    "f": (4, lambda B, t: B[t[0], t[1]] * B[t[1], t[2]] * B[t[2], t[3]]),
    "y": (5, lambda B, t: B[t[0], t[1]] * B[t[0], t[2]] * B[t[3], t[4]]),
    "u": (6, lambda B, t: B[t[0], t[1]] * B[t[2], t[3]] * B[t[4], t[5]]),
    "g": (2, lambda B, t: B[t[0], t[1]] ** 3),
    "h": (3, lambda B, t: B[t[0], t[1]] ** 2 * B[t[1], t[2]]),
    "v": (4, lambda B, t: B[t[0], t[1]] * B[t[0], t[2]] * B[t[0], t[3]]),
    "w": (4, lambda B, t: B[t[0], t[1]] ** 2 * B[t[2], t[3]]),
}


def distinct_tuple_average(B, name):
    """Average of a pattern over all tuples of pairwise distinct indices."""
    k, fn = U_PATTERNS[name]
    vals = [fn(B, t) for t in itertools.permutations(range(len(B)), k)]
    return float(np.mean(vals))


def population_parameter(values, probs, name, beta=1.0):
    """Exact expectation of a pattern for i.i.d. draws from a finite law."""
    k, fn = U_PATTERNS[name]
    D = np.abs(np.subtract.outer(values, values)) ** beta
    total = 0.0
    for t in itertools.product(range(len(values)), repeat=k):
        total += np.prod(np.asarray(probs)[list(t)]) * fn(D, t)
    return float(total)


def enumerate_bernoulli(n, N, fn):
    """Exact expectations of fn(blocks) and fn(blocks)**2 over all 0/1 samples."""
    m1 = m2 = 0.0
    weight = 0.5 ** (n * N)
    for bits in itertools.product((0.0, 1.0), repeat=n * N):
        arr = np.array(bits).reshape(n, N)
        v = fn([arr[i] for i in range(n)])
        m1 += weight * v
        m2 += weight * v * v
    return m1, m2


def family_count(n, family, m=None):
    if family == "multivariance":
        return 1
    if family == "total":
        return 2**n - n - 1
    return comb(n, m)
