"""Marginal moment estimators and joint moments of the test statistics.

Per-variable quantities (all for an independent copy ``X, X', X'', ...``):

* ``mu1 = E psi(X - X')``
* ``b = E psi(X - X')**2``, ``c = E psi(X - X') psi(X' - X'')``,
  ``d = mu1**2``
* ``e``: triangle ``E psi(X-X') psi(X'-X'') psi(X''-X)``
* ``f``: path ``E psi(X-X') psi(X'-X'') psi(X''-X''')``
* ``y = c * mu1`` and ``u = mu1**3``
* ``mu2 = b - 2c + d``, ``mu3 = -e + 3f - 3y + u`` (sums of powers of the
  covariance operator eigenvalues)

Joint moments of a family of index subsets are assembled from per-variable
values through the symmetric functions ``subset_sum`` (one argument) and
``pair_sum`` (three arguments).
"""

from dataclasses import dataclass, field
from math import factorial, prod, sqrt

import numpy as np

from .psi_kernels import MatrixStats
from .statistics import StatisticKind


class PreconditionError(ValueError):
    """Too few observations for the requested unbiased estimators."""

    def __init__(self, fields, N):
        self.fields = tuple(fields)
        self.N = N
        need = ", ".join(f"{f} (N >= {MIN_N[f]})" for f in self.fields)
        super().__init__(f"N={N} is too small for unbiased estimation of {need}")


MIN_N = {"mu1": 2, "b": 2, "c": 3, "d": 4, "mu2": 4, "e": 3, "f": 4, "y": 5, "u": 6, "mu3": 6}
UNBIASED_FIELDS = tuple(MIN_N)


@dataclass(frozen=True)
class MarginalMoments:
    """Moment parameters of one variable. Unavailable fields are None."""

    mu1: float
    mu2: float | None = None
    mu3: float | None = None
    mu4: float | None = None
    b: float | None = None
    c: float | None = None
    d: float | None = None
    e: float | None = None
    f: float | None = None
    y: float | None = None
    u: float | None = None
    bias: str = "biased"
    notes: tuple = field(default=())

    @property
    def is_constant(self):
        return self.mu1 == 0.0

    def as_dict(self):
        keys = ("mu1", "mu2", "mu3", "mu4", "b", "c", "d", "e", "f", "y", "u")
        out = {k: getattr(self, k) for k in keys if getattr(self, k) is not None}
        out["bias"] = self.bias
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def biased_moments(s: MatrixStats):
    """V-statistic (all index tuples) estimators of the limit moments."""
    N = s.N
    m = s.total / N**2
    c = s.power2 / N**3
    f = s.power3 / N**4
    mu2 = s.hadamard2 / N**2 - 2 * c + m**2
    mu3 = -s.cycle3 / N**3 + 3 * f - 3 * c * m + m**3
    mu4 = s.cycle4 / N**4 - 4 * s.power4 / N**5 + 4 * f * m + 2 * c**2 - 4 * c * m**2 + m**4
    return MarginalMoments(
        mu1=m, mu2=mu2, mu3=mu3, mu4=mu4,
        b=s.hadamard2 / N**2, c=c, d=m**2, e=s.cycle3 / N**3, f=f,
        y=c * m, u=m**3, bias="biased",
    )


def _falling(N, k):
    return prod(N - i for i in range(k))


def unbiased_moments(s: MatrixStats, fields=UNBIASED_FIELDS):
    """U-statistic (distinct index tuples) estimators.

    Raises :class:`PreconditionError` listing every requested field that
    needs more observations than available. The fourth moment has no
    unbiased form here; the biased value is reported with a note.
    """
    N = s.N
    missing = [f for f in fields if N < MIN_N[f]]
    if missing:
        raise PreconditionError(missing, N)
    want = set(fields)
    if "mu2" in want:
        want |= {"b", "c", "d"}
    if "mu3" in want:
        want |= {"e", "f", "y", "u"}
    B, BB, BBB = s.total, s.hadamard2, s.hadamard3
    val = {"mu1": B / _falling(N, 2)}
    if "b" in want:
        val["b"] = BB / _falling(N, 2)
    if "c" in want:
        val["c"] = (s.power2 - BB) / _falling(N, 3)
    if "d" in want:
        val["d"] = (B**2 + 2 * BB - 4 * s.power2) / _falling(N, 4)
    if "e" in want:
        val["e"] = s.cycle3 / _falling(N, 3)
    if "f" in want:
        val["f"] = (s.power3 - s.cycle3 - 2 * s.hadamard2_path + BBB) / _falling(N, 4)
    if "y" in want:
        val["y"] = (
            s.power2 * B - BB * B - 2 * s.colsum3 - 4 * BBB - 4 * s.power3
            + 2 * s.cycle3 + 10 * s.hadamard2_path
        ) / _falling(N, 5)
    if "u" in want:
        val["u"] = (
            B**3 + 16 * BBB - 48 * s.hadamard2_path - 8 * s.cycle3 + 6 * B * BB
            + 24 * s.power3 + 16 * s.colsum3 - 12 * s.power2 * B
        ) / _falling(N, 6)
    if "mu2" in want:
        val["mu2"] = val["b"] - 2 * val["c"] + val["d"]
    if "mu3" in want:
        val["mu3"] = -val["e"] + 3 * val["f"] - 3 * val["y"] + val["u"]
    val["mu4"] = biased_moments(s).mu4
    return MarginalMoments(**val, bias="unbiased", notes=("mu4 uses the biased estimator",))


def auxiliary_unbiased(s: MatrixStats):
    """Unbiased estimators of four further parameters.

    ``g = E psi^3``, ``h = E psi(X-X')^2 psi(X'-X'')``,
    ``v = E psi(X-X') psi(X-X'') psi(X-X''')`` (star) and
    ``w = E psi(X-X')^2 psi(X''-X''')``.
    """
    N = s.N
    if N < 4:
        raise PreconditionError(["f"], N)
    BBB, BBp = s.hadamard3, s.hadamard2_path
    return {
        "g": BBB / _falling(N, 2),
        "h": (BBp - BBB) / _falling(N, 3),
        "v": (s.colsum3 + 2 * BBB - 3 * BBp) / _falling(N, 4),
        "w": (s.hadamard2 * s.total - 4 * BBp + 2 * BBB) / _falling(N, 4),
    }


# ---------------------------------------------------------------------------
# symmetric functions over subset families


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def distinct_sum(vectors):
    """``sum over pairwise distinct k_1..k_r of prod_j vectors[j][k_j]``.

    Evaluated by Moebius inversion over set partitions of the slots, so the
    cost is linear in the vector length.
    """
    vectors = [np.asarray(v, dtype=np.float64) for v in vectors]
    total = 0.0
    for part in _set_partitions(list(range(len(vectors)))):
        coef = prod((-1) ** (len(b) - 1) * factorial(len(b) - 1) for b in part)
        total += coef * prod(float(np.prod([vectors[j] for j in b], axis=0).sum()) for b in part)
    return total


def _elementary(x, m):
    esp = np.zeros(m + 1)
    esp[0] = 1.0
    for a in x:
        esp[1:] = esp[1:] + a * esp[:-1]
    return esp[m]


def subset_sum(x, kind: StatisticKind):
    """``sum over S in the family of prod_{i in S} x_i``."""
    x = np.asarray(x, dtype=np.float64)
    if kind.family == "multivariance":
        return float(np.prod(x))
    if kind.family == "total":
        return float(np.prod(1.0 + x) - x.sum() - 1.0)
    p1, p2, p3 = x.sum(), (x**2).sum(), (x**3).sum()
    if kind.m == 2:
        return float(0.5 * (p1**2 - p2))
    if kind.m == 3:
        return float((p1**3 - 3 * p1 * p2 + 2 * p3) / 6.0)
    return float(_elementary(x, kind.m))


def _prod_except(x):
    """Products of all entries but one, without dividing."""
    left = np.concatenate([[1.0], np.cumprod(x[:-1])])
    right = np.concatenate([np.cumprod(x[::-1][:-1])[::-1], [1.0]])
    return left * right


def pair_sum(u, v, w, kind: StatisticKind):
    """``sum over S, S' in the family of prod_{S\\S'} u prod_{S'\\S} v prod_{S&S'} w``."""
    u, v, w = (np.asarray(a, dtype=np.float64) for a in (u, v, w))
    if kind.family == "multivariance":
        return float(np.prod(w))
    if kind.family == "total":
        cross = u.sum() * v.sum() - (u * v).sum()
        first = (u + v + w).sum() + np.prod(u + v + w + 1.0)
        # prod(1+v) (1 + sum (u+w)/(1+v)) written without the division
        drop_u = np.prod(1.0 + v) + ((u + w) * _prod_except(1.0 + v)).sum()
        drop_v = np.prod(1.0 + u) + ((v + w) * _prod_except(1.0 + u)).sum()
        return float(cross + first - drop_u - drop_v + 1.0)
    if kind.m == 2:
        return (
            0.5 * distinct_sum([w, w])
            + distinct_sum([u, v, w])
            + 0.25 * distinct_sum([u, u, v, v])
        )
    if kind.m == 3:
        return (
            distinct_sum([w, w, w]) / 6.0
            + 0.5 * distinct_sum([u, v, w, w])
            + 0.25 * distinct_sum([u, u, v, v, w])
            + distinct_sum([u, u, u, v, v, v]) / 36.0
        )
    return pair_sum_polynomial(u, v, w, kind.m)


def pair_sum_polynomial(u, v, w, m):
    """Coefficient of ``x^m y^m`` in ``prod_i (1 + u_i x + v_i y + w_i x y)``."""
    poly = np.zeros((m + 1, m + 1))
    poly[0, 0] = 1.0
    for a, b, c in zip(u, v, w):
        nxt = poly.copy()
        nxt[1:, :] += a * poly[:-1, :]
        nxt[:, 1:] += b * poly[:, :-1]
        nxt[1:, 1:] += c * poly[:-1, :-1]
        poly = nxt
    return float(poly[m, m])


# ---------------------------------------------------------------------------
# finite sample coefficient table


def coefficient_table(N):
    """Rows ``(count, a, b, c, d)`` for the seven index patterns of ``j,k,l,m``.

    ``count`` is the number of index quadruples in the pattern and
    ``a..d`` the weights of ``E psi(X-X')``-type terms in the expectation of
    a product of two centred entries, all before division by ``N**4``.
    """
    N = float(N)
    return (
        (N * (N - 1) * (N - 2) * (N - 3), -N**2, 6 * N + 2 * N**2, -24 * N - 4 * N**2, 18 * N + 3 * N**2),
        (2 * N * (N - 1), -N**2, 6 * N - 2 * N**2 - 2 * N**3 + N**4,
         -24 * N + 12 * N**2 + 4 * N**3 - 2 * N**4, 18 * N - 9 * N**2 - 2 * N**3 + N**4),
        (4 * N * (N - 1) * (N - 2), -N**2, 6 * N - N**3, -24 * N + 4 * N**2 + 2 * N**3, 18 * N - 3 * N**2 - N**3),
        (N * (N - 1), -N**2 + 2 * N**3 - N**4, 6 * N - 2 * N**2, -24 * N + 12 * N**2,
         18 * N - 9 * N**2 - 2 * N**3 + N**4),
        (4 * N * (N - 1), -N**2 + N**3, 6 * N - 4 * N**2, -24 * N + 20 * N**2 - 4 * N**3,
         18 * N - 15 * N**2 + 3 * N**3),
        (2 * N * (N - 1) * (N - 2), -N**2 + N**3, 6 * N, -24 * N + 4 * N**2, 18 * N - 3 * N**2 - N**3),
        (N, -N**2 + 2 * N**3 - N**4, 6 * N - 10 * N**2 + 4 * N**3,
         -24 * N + 44 * N**2 - 24 * N**3 + 4 * N**4, 18 * N - 33 * N**2 + 18 * N**3 - 3 * N**4),
    )


def centring_factors(N, normalized=False):
    """Expected centred entries on the diagonal (first) and off it (second).

    For pattern k the pair ``(left, right)`` picks which of the two applies to
    the index pairs ``(j,k)`` and ``(l,m)``.
    """
    if normalized:
        on, off = -1.0 / (N - 1), 1.0
    else:
        on, off = -1.0 / N, 1.0 - 1.0 / N
    left = (on, on, on, off, off, off, off)
    right = (on, on, on, off, on, on, off)
    return left, right


# ---------------------------------------------------------------------------
# joint moments


@dataclass(frozen=True)
class JointMoments:
    mean: float
    variance: float
    skewness: float | None = None
    central3: float | None = None
    central4: float | None = None
    excess_kurtosis: float | None = None
    second_moment: float | None = None


def _vec(marginals, name):
    vals = [getattr(m, name) for m in marginals]
    if any(v is None for v in vals):
        raise ValueError(f"marginal moments lack {name!r}")
    return np.array(vals, dtype=np.float64)


def _normalized_marginals(marginals):
    out = []
    for m in marginals:
        if m.mu1 <= 0:
            out.append(MarginalMoments(mu1=0.0, mu2=0.0, mu3=0.0, mu4=0.0, bias=m.bias))
            continue
        scaled = {k: (getattr(m, k) / m.mu1**p if getattr(m, k) is not None else None)
                  for k, p in (("mu2", 2), ("mu3", 3), ("mu4", 4))}
        out.append(MarginalMoments(mu1=1.0, **scaled, bias=m.bias))
    return out


def limit_moments(marginals, kind: StatisticKind):
    """Moments of the limit distribution (a Gaussian quadratic form).

    The fourth central moment is ``48 sum alpha^4 + 3 Var^2`` over the full
    product spectrum, so the variance enters squared as a whole.
    """
    if kind.normalized:
        marginals = _normalized_marginals(marginals)
    mu1 = _vec(marginals, "mu1")
    mean = subset_sum(mu1, kind)
    var = 2.0 * subset_sum(_vec(marginals, "mu2"), kind)
    c3 = c4 = skew = kurt = None
    if all(m.mu3 is not None for m in marginals):
        c3 = 8.0 * subset_sum(_vec(marginals, "mu3"), kind)
        skew = c3 / var**1.5 if var > 0 else None
    if all(m.mu4 is not None for m in marginals):
        c4 = 48.0 * subset_sum(_vec(marginals, "mu4"), kind) + 3.0 * var**2
        kurt = c4 / var**2 - 3.0 if var > 0 else None
    if kind.normalized:
        size = kind.family_size(len(marginals))
        mean, var = mean / size, var / size**2
        c3 = None if c3 is None else c3 / size**3
        c4 = None if c4 is None else c4 / size**4
    return JointMoments(mean, var, skew, c3, c4, kurt)


def finite_sample_moments(marginals, N, kind: StatisticKind):
    """Exact mean and variance of the statistic at sample size ``N``.

    Needs ``mu1, b, c, d`` per variable. Exact for independent variables
    when the parameters are exact; with unbiased plug-ins the mean and the
    second moment are unbiased. Normalized statistics use quotients of
    expectations, an approximation.
    """
    if kind.normalized:
        return _finite_normalized(marginals, N, kind)
    mu1 = _vec(marginals, "mu1")
    b, c, d = (_vec(marginals, k) for k in "bcd")
    left, right = centring_factors(N)
    mean = subset_sum((1 - 1 / N) * mu1, kind) + (N - 1) * subset_sum(-mu1 / N, kind)
    second = mean_sq = 0.0
    for (cnt, _, kb, kc, kd), e1, e2 in zip(coefficient_table(N), left, right):
        second += cnt * pair_sum(e1 * mu1, e2 * mu1, (kb * b + kc * c + kd * d) / N**4, kind)
        mean_sq += cnt * pair_sum(e1 * mu1, e2 * mu1, e1 * e2 * d, kind)
    second /= N**2
    mean_sq /= N**2
    return JointMoments(mean=mean, variance=second - mean_sq, second_moment=second)


def _finite_normalized(marginals, N, kind):
    table = coefficient_table(N)
    ones = np.array([0.0 if m.is_constant else 1.0 for m in marginals])
    scaled = []
    for m, one in zip(marginals, ones):
        if not one:
            scaled.append((0.0, 0.0, 0.0))
            continue
        expected_h2 = (table[1][0] * m.b + table[2][0] * m.c + table[0][0] * m.d) / N**4
        scaled.append((m.b / expected_h2, m.c / expected_h2, m.d / expected_h2))
    bN, cN, dN = (np.array(v) for v in zip(*scaled))
    left, right = centring_factors(N, normalized=True)
    mean = subset_sum(ones, kind) + (N - 1) * subset_sum(-ones / (N - 1), kind)
    second = 0.0
    for (cnt, _, kb, kc, kd), f1, f2 in zip(table, left, right):
        second += cnt * pair_sum(f1 * ones, f2 * ones, (kb * bN + kc * cN + kd * dN) / N**4, kind)
    second /= N**2
    size = kind.family_size(len(marginals))
    mean, second = mean / size, second / size**2
    return JointMoments(mean=mean, variance=second - mean**2, second_moment=second)


def standardize(statistic, mean, variance):
    """Centre and scale; ``(T - E T) / sqrt(Var T)``."""
    if variance <= 0:
        raise ValueError("variance must be positive to standardize")
    return (statistic - mean) / sqrt(variance)
