"""Characteristic functions, covariance kernels and their spectra.

The covariance kernel of a variable with characteristic function ``f`` is
``K(s, t) = f(s - t) - f(s) f(-t)``. Its integral operator with respect to
the Levy measure of ``psi`` has eigenvalues whose power sums are the
marginal moments ``mu1, mu2, ...``.
"""

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .psi_kernels import as_block
from ._backend import kernels


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return self.nodes.size


def levy_constant(beta):
    """Density constant of the measure generating ``|x|^beta`` on the line."""
    if not (0.0 < beta < 2.0):
        raise ValueError("a Levy measure exists only for 0 < beta < 2")
    return beta * 2 ** (beta - 1) * math.gamma((1 + beta) / 2) / (math.sqrt(math.pi) * math.gamma(1 - beta / 2))


def levy_rule(n=100, beta=1.0, scale=5.0):
    """Rule for ``c |t|^(-1-beta) dt`` on the whole line.

    Gauss-Legendre in ``theta`` with ``t = scale * tan(theta)``: no truncation
    and no node at the origin, where the measure is singular.
    """
    g, w = np.polynomial.legendre.leggauss(n)
    theta = 0.5 * math.pi * g
    t = scale * np.tan(theta)
    jac = 0.5 * math.pi * scale / np.cos(theta) ** 2
    dens = levy_constant(beta) * np.abs(t) ** (-1.0 - beta)
    return QuadratureRule(t, w * jac * dens)


# ---------------------------------------------------------------------------
# distributions with known characteristic functions

# (mu1, mu2, mu3) for psi = |.| and the standard members of each family.
# The normal third moment has no short closed form; six digits are kept.
REFERENCE_MOMENTS = {
    "bernoulli": (0.5, 0.25, 0.125),
    "uniform": (1 / 3, 2 / 45, 8 / 945),
    "exponential": (1.0, 1 / 3, 1 / 6),
    "normal": (
        2 / math.sqrt(math.pi),
        (4 * math.pi + 12 * (1 - math.sqrt(3))) / (3 * math.pi),
        0.217387,
    ),
}


@dataclass(frozen=True)
class KnownDistribution:
    """A few one-dimensional laws with closed-form characteristic functions."""

    name: str
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.name not in ("bernoulli", "uniform", "normal", "exponential"):
            raise ValueError(f"unknown distribution {self.name!r}")

    @classmethod
    def bernoulli(cls, p=0.5):
        return cls("bernoulli", a=p)

    @classmethod
    def uniform(cls, low=0.0, high=1.0):
        return cls("uniform", low, high)

    @classmethod
    def normal(cls, mean=0.0, sd=1.0):
        return cls("normal", mean, sd)

    @classmethod
    def exponential(cls, rate=1.0):
        return cls("exponential", a=rate)

    def cf(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.name == "bernoulli":
            return 1 - self.a + self.a * np.exp(1j * t)
        if self.name == "uniform":
            width = self.b - self.a
            z = t * width
            small = np.abs(z) < 1e-8
            safe = np.where(small, 1.0, z)
            core = np.where(small, 1.0 + 0.5j * z, (np.exp(1j * safe) - 1) / (1j * safe))
            return np.exp(1j * t * self.a) * core
        if self.name == "normal":
            return np.exp(1j * t * self.a - 0.5 * (self.b * t) ** 2)
        return 1.0 / (1.0 - 1j * t / self.a)

    def quantile(self, v):
        v = np.asarray(v, dtype=np.float64)
        if self.name == "uniform":
            return self.a + (self.b - self.a) * v
        if self.name == "normal":
            return self.a + self.b * special.ndtri(v)
        if self.name == "exponential":
            return -np.log1p(-v) / self.a
        raise ValueError("discrete law has no smooth quantile rule")

    def expectation_rule(self, n=400):
        """Points and probabilities for integrating against the law.

        Discrete laws use their atoms. Continuous ones push Gauss-Legendre
        nodes on (0, 1) through the quantile function.
        """
        if self.name == "bernoulli":
            return np.array([0.0, 1.0]), np.array([1 - self.a, self.a])
        g, w = np.polynomial.legendre.leggauss(n)
        return self.quantile(0.5 * (g + 1)), 0.5 * w

    def sample(self, rng, size):
        if self.name == "bernoulli":
            return (rng.random(size) < self.a).astype(np.float64)
        if self.name == "uniform":
            return rng.uniform(self.a, self.b, size)
        if self.name == "normal":
            return rng.normal(self.a, self.b, size)
        return rng.exponential(1.0 / self.a, size)


def empirical_cf(block, t):
    """``(1/N) sum_l exp(i x_l . t)`` for each row of ``t``."""
    x = as_block(block)
    t = np.asarray(t, dtype=np.float64)
    t2 = t[:, None] if t.ndim == 1 else t
    if t2.shape[1] != x.shape[1]:
        raise ValueError("argument dimension does not match the data")
    return np.exp(1j * x @ t2.T).mean(axis=0)


def covariance_kernel(cf, s, t):
    """Matrix ``K(s_j, t_k) = f(s_j - t_k) - f(s_j) f(-t_k)`` for 1-d arguments."""
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    return cf(s[:, None] - t[None, :]) - cf(s)[:, None] * cf(-t)[None, :]


def _nystrom_matrix(cf, rule):
    k = covariance_kernel(cf, rule.nodes, rule.nodes)
    sw = np.sqrt(rule.weights)
    return sw[:, None] * k * sw[None, :]


def nystrom_eigenvalues(cf, rule=None, count=None):
    """Eigenvalues of the discretised covariance operator, largest first.

    Round-off negatives are clipped to 0.
    """
    rule = levy_rule() if rule is None else rule
    ev = np.linalg.eigvalsh(_nystrom_matrix(cf, rule))[::-1]
    ev = np.clip(ev, 0.0, None)
    return ev if count is None else ev[:count]


def empirical_eigenvalues(dist, normalized=False, weights=None):
    """Exact spectrum of the covariance operator of the empirical law.

    It coincides with the eigenvalues of the doubly centred matrix over
    ``N``, so no quadrature is involved. With ``weights`` (a probability
    vector over distinct rows) the matrix is ``P^(1/2) A P^(1/2)``.
    """
    dist = np.asarray(dist, dtype=np.float64)
    N = dist.shape[0]
    p = np.full(N, 1.0 / N) if weights is None else np.asarray(weights, dtype=np.float64)
    a = kernels.double_center(dist, p)
    if normalized:
        scale = float(p @ dist @ p)
        a = a / scale if scale > 0 else np.zeros_like(a)
    sp = np.sqrt(p)
    ev = np.linalg.eigvalsh(sp[:, None] * a * sp[None, :])[::-1]
    return np.clip(ev, 0.0, None)


def kernel_moments(cf, orders=(1, 2, 3, 4), rule=None):
    """Power sums of eigenvalues as iterated kernel integrals on ``rule``.

    ``mu^(k) = int K(t1,t2) K(t2,t3) ... K(tk,t1)``, i.e. the trace of the
    k-th power of the discretised operator.
    """
    rule = levy_rule() if rule is None else rule
    m = _nystrom_matrix(cf, rule)
    out, power = {}, np.eye(m.shape[0])
    for k in range(1, max(orders) + 1):
        power = power @ m
        if k in orders:
            out[k] = float(np.real(np.trace(power)))
    return out


def expectation_moments(dist, n=400, beta=1.0):
    """``mu1..mu4`` from expectations of products of ``psi`` values.

    The law is replaced by a weighted point set; triangles, paths and
    cycles then become matrix expressions in ``D = psi(x_j - x_k)`` and the
    probability vector ``p``.
    """
    x, p = dist.expectation_rule(n)
    d = np.abs(x[:, None] - x[None, :]) ** beta
    dp = d * p[None, :]
    dpv = d @ p
    m = float(p @ dpv)
    b = float(p @ (d * d) @ p)
    c = float(p @ (dpv * dpv))
    f = float(p @ (dp @ dp @ dpv))
    dp2 = dp @ dp
    cycle3 = float(np.trace(dp2 @ dp))
    cycle4 = float(np.trace(dp2 @ dp2))
    path4 = float(p @ (dp @ dp @ dp @ dpv))
    return {
        1: m,
        2: b - 2 * c + m * m,
        3: -cycle3 + 3 * f - 3 * c * m + m**3,
        4: cycle4 - 4 * path4 + 4 * f * m + 2 * c * c - 4 * c * m * m + m**4,
    }


def kernel_moment_quadrature(source, orders=(1, 2, 3, 4), mode="expectation", **options):
    """Marginal moments of a known law, by either integration route."""
    if mode == "expectation":
        vals = expectation_moments(source, **options)
        return {k: vals[k] for k in orders}
    if mode == "kernel":
        return kernel_moments(source.cf, orders, **options)
    raise ValueError(f"unknown mode {mode!r}")


def product_eigenvalues(spectra, cap=None):
    """Products ``lambda_{1,k1} * ... * lambda_{n,kn}``, largest first.

    With ``cap`` only the ``cap`` largest products are returned, found by a
    best-first walk over index tuples. The second return value is the mass
    of everything left out (``prod of sums - sum of kept``).
    """
    spectra = [np.sort(np.clip(np.asarray(s, dtype=np.float64), 0, None))[::-1] for s in spectra]
    spectra = [s[s > 0] for s in spectra]
    if any(s.size == 0 for s in spectra):
        return np.zeros(0), 0.0
    full = math.prod(s.size for s in spectra)
    total = math.prod(float(s.sum()) for s in spectra)
    if cap is None or full <= cap:
        out = spectra[0]
        for s in spectra[1:]:
            out = np.multiply.outer(out, s).ravel()
        return np.sort(out)[::-1], 0.0
    start = (0,) * len(spectra)
    heap = [(-math.prod(s[0] for s in spectra), start)]
    seen = {start}
    kept = []
    while heap and len(kept) < cap:
        neg, idx = heapq.heappop(heap)
        kept.append(-neg)
        for i in range(len(idx)):
            if idx[i] + 1 < spectra[i].size:
                nxt = idx[:i] + (idx[i] + 1,) + idx[i + 1:]
                if nxt not in seen:
                    seen.add(nxt)
                    heapq.heappush(heap, (-math.prod(s[j] for s, j in zip(spectra, nxt)), nxt))
    kept = np.array(kept)
    return kept, max(0.0, total - float(kept.sum()))
