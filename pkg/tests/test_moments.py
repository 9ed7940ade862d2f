import itertools

import numpy as np
import pytest
from scipy import stats

from multidep.engine import EstimatorConfig, estimate_marginals, null_moments
from multidep.moments import (
    MarginalMoments,
    PreconditionError,
    auxiliary_unbiased,
    biased_moments,
    coefficient_table,
    distinct_sum,
    finite_sample_moments,
    limit_moments,
    pair_sum,
    pair_sum_polynomial,
    standardize,
    subset_sum,
    unbiased_moments,
)
from multidep.psi_kernels import distance_matrix, matrix_stats
from multidep.statistics import Dataset, StatisticKind, compute_statistic

from conftest import (
    distinct_tuple_average,
    enumerate_bernoulli,
    family_subsets,
    naive_centre,
    naive_statistic,
    population_parameter,
)

RAW = StatisticKind(normalized=False)
BERNOULLI = MarginalMoments(mu1=0.5, mu2=0.25, mu3=0.125, b=0.5, c=0.25, d=0.25)


def _random_distance(rng, N):
    return distance_matrix(rng.normal(size=(N, 2)))


# ---------------------------------------------------------------------------
# per-variable estimators


def test_biased_two_point():
    m = biased_moments(matrix_stats(np.array([[0.0, 1], [1, 0]])))
    assert m.mu1 == pytest.approx(0.5)
    assert m.mu2 == pytest.approx(0.25)


def test_zero_matrix_gives_zero_moments():
    for m in (biased_moments(matrix_stats(np.zeros((6, 6)))), unbiased_moments(matrix_stats(np.zeros((6, 6))))):
        assert m.is_constant
        assert all(v == 0 for k, v in m.as_dict().items() if k not in ("bias", "notes"))


def test_biased_equals_trace_powers(rng):
    B = _random_distance(rng, 5)
    A = naive_centre(B) / 5
    m = biased_moments(matrix_stats(B))
    powers = [np.trace(np.linalg.matrix_power(A, k)) for k in range(1, 5)]
    assert [m.mu1, m.mu2, m.mu3, m.mu4] == pytest.approx(powers, rel=1e-10)


def test_biased_parameters_are_index_means(rng):
    B = _random_distance(rng, 5)
    m = biased_moments(matrix_stats(B))
    assert m.b == pytest.approx(np.einsum("jk,jk->", B, B) / 25)
    assert m.c == pytest.approx(np.einsum("jk,jl->", B, B) / 125)
    assert m.e == pytest.approx(np.einsum("jk,kl,lj->", B, B, B) / 125)
    assert m.f == pytest.approx(np.einsum("jk,kl,lm->", B, B, B) / 625)


def test_unbiased_precondition_names_field():
    with pytest.raises(PreconditionError, match=r"\bd\b"):
        unbiased_moments(matrix_stats(np.array([[0.0, 1], [1, 0]])))
    with pytest.raises(PreconditionError, match="u"):
        unbiased_moments(matrix_stats(np.zeros((5, 5))), ("u",))


@pytest.mark.parametrize("N", [6, 7])
def test_unbiased_equals_distinct_tuple_average(rng, N):
    B = _random_distance(rng, N)
    s = matrix_stats(B)
    m = unbiased_moments(s)
    for name in ("mu1", "b", "c", "d", "e", "f", "y", "u"):
        assert getattr(m, name) == pytest.approx(distinct_tuple_average(B, name), rel=1e-10), name
    aux = auxiliary_unbiased(s)
    for name in "ghvw":
        assert aux[name] == pytest.approx(distinct_tuple_average(B, name), rel=1e-10), name


def _expected_estimators(values, probs, N):
    """Exact expectation of every unbiased estimator over all samples of size N."""
    acc = {}
    for combo in itertools.product(range(len(values)), repeat=N):
        w = np.prod(np.asarray(probs)[list(combo)])
        s = matrix_stats(distance_matrix(np.asarray(values)[list(combo)]))
        est = unbiased_moments(s).as_dict() | auxiliary_unbiased(s)
        for k, v in est.items():
            if isinstance(v, float):
                acc[k] = acc.get(k, 0.0) + w * v
    return acc


@pytest.mark.parametrize(
    "values, probs",
    [((0.0, 1.0), (0.5, 0.5)), ((0.0, 1.0, 3.0), (0.5, 0.3, 0.2))],
    ids=["bernoulli", "three-point"],
)
def test_unbiased_by_exhaustive_enumeration(values, probs):
    got = _expected_estimators(values, probs, 6)
    for name in ("mu1", "b", "c", "d", "e", "f", "y", "u", "g", "h", "v", "w"):
        assert got[name] == pytest.approx(population_parameter(values, probs, name), abs=1e-12), name
    pop = {k: population_parameter(values, probs, k) for k in ("b", "c", "d", "e", "f", "y", "u")}
    assert got["mu2"] == pytest.approx(pop["b"] - 2 * pop["c"] + pop["d"], abs=1e-12)
    assert got["mu3"] == pytest.approx(-pop["e"] + 3 * pop["f"] - 3 * pop["y"] + pop["u"], abs=1e-12)


# ---------------------------------------------------------------------------
# subset families


def _brute_subset_sum(x, kind):
    return sum(np.prod([x[i] for i in s]) for s in family_subsets(len(x), kind.family, kind.m))


def _brute_pair_sum(u, v, w, kind):
    total = 0.0
    subsets = [set(s) for s in family_subsets(len(u), kind.family, kind.m)]
    for s in subsets:
        for t in subsets:
            total += (
                np.prod([u[i] for i in s - t]) * np.prod([v[i] for i in t - s]) * np.prod([w[i] for i in s & t])
            )
    return total


KINDS = [StatisticKind("total"), StatisticKind("m", 2), StatisticKind("m", 3), StatisticKind("m", 4), RAW]


def test_subset_sum_examples():
    assert subset_sum([1, 1, 1], StatisticKind("total")) == 4
    assert subset_sum([1, 1, 1], StatisticKind("m", 2)) == 3
    assert subset_sum([1, 1, 1], StatisticKind("m", 3)) == 1
    assert subset_sum([1, 2, 3], StatisticKind("total")) == pytest.approx(17)


@pytest.mark.parametrize("kind", KINDS, ids=lambda k: k.label)
def test_subset_sum_against_enumeration(rng, kind):
    x = rng.normal(size=6)
    assert subset_sum(x, kind) == pytest.approx(_brute_subset_sum(x, kind), rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("kind", KINDS, ids=lambda k: k.label)
def test_pair_sum_against_enumeration(rng, kind):
    u, v, w = rng.normal(size=(3, 5))
    assert pair_sum(u, v, w, kind) == pytest.approx(_brute_pair_sum(u, v, w, kind), rel=1e-10, abs=1e-12)


@pytest.mark.parametrize("kind", KINDS[:4], ids=lambda k: k.label)
def test_pair_sum_reductions(rng, kind):
    u, v, w = rng.normal(size=(3, 5))
    zero = np.zeros(5)
    assert pair_sum(zero, zero, w, kind) == pytest.approx(subset_sum(w, kind), rel=1e-10, abs=1e-12)
    assert pair_sum(u, v, u * v, kind) == pytest.approx(subset_sum(u, kind) * subset_sum(v, kind), rel=1e-10)


def test_polynomial_route_matches_closed_forms(rng):
    u, v, w = rng.normal(size=(3, 6))
    for m in (2, 3):
        assert pair_sum_polynomial(u, v, w, m) == pytest.approx(pair_sum(u, v, w, StatisticKind("m", m)), rel=1e-10)


def test_distinct_sum_against_loops(rng):
    a, b, c = rng.normal(size=(3, 5))
    want = sum(a[i] * b[j] * c[k] for i, j, k in itertools.permutations(range(5), 3))
    assert distinct_sum([a, b, c]) == pytest.approx(want, rel=1e-10)


# ---------------------------------------------------------------------------
# joint moments


def test_limit_moments_unit_marginals():
    one = MarginalMoments(1.0, 1.0, 1.0, 1.0)
    lim = limit_moments([one, one], RAW)
    assert (lim.mean, lim.variance, lim.central3, lim.central4) == pytest.approx((1, 2, 8, 60))


def test_limit_moments_bernoulli_pair():
    lim = limit_moments([BERNOULLI, BERNOULLI], RAW)
    assert lim.mean == pytest.approx(0.25)
    assert lim.variance == pytest.approx(0.125)
    assert lim.central3 == pytest.approx(0.125)


def test_limit_total_mean_counts_subsets():
    one = MarginalMoments(1.0, 1.0)
    assert limit_moments([one] * 3, StatisticKind("total", normalized=False)).mean == pytest.approx(4)


def test_limit_central4_against_spectrum():
    # two variables with spectra (0.6, 0.2) and (0.5,): the product spectrum is (0.3, 0.1)
    spec1, spec2 = np.array([0.6, 0.2]), np.array([0.5])
    margs = [MarginalMoments(*(float((s**k).sum()) for k in range(1, 5))) for s in (spec1, spec2)]
    lim = limit_moments(margs, RAW)
    alphas = np.array([0.3, 0.1])
    var = 2 * (alphas**2).sum()
    assert lim.central4 == pytest.approx(48 * (alphas**4).sum() + 3 * var**2)


def test_finite_mean_two_points():
    P = 0.3 * 0.7
    margs = [MarginalMoments(0.3, b=0.1, c=0.1, d=0.09), MarginalMoments(0.7, b=0.5, c=0.5, d=0.49)]
    assert finite_sample_moments(margs, 2, RAW).mean == pytest.approx(P / 2)


@pytest.mark.parametrize("n, N", [(2, 3), (2, 4), (3, 3)])
@pytest.mark.parametrize("family, m", [("multivariance", None), ("total", None), ("m", 2)])
def test_finite_moments_match_enumeration(n, N, family, m):
    if family != "multivariance" and n < 3:
        pytest.skip("family equals the plain statistic for two variables")
    kind = StatisticKind(family, m, normalized=False)
    e1, e2 = enumerate_bernoulli(n, N, lambda b: naive_statistic(b, family, m))
    fin = finite_sample_moments([BERNOULLI] * n, N, kind)
    assert fin.mean == pytest.approx(e1, abs=1e-12)
    assert fin.second_moment == pytest.approx(e2, abs=1e-12)
    assert fin.variance == pytest.approx(e2 - e1**2, abs=1e-12)


def test_finite_second_moment_limit():
    margs = [MarginalMoments(0.5, b=0.5, c=0.3, d=0.25), MarginalMoments(1.0, b=1.5, c=1.2, d=1.0)]
    fin = finite_sample_moments(margs, 10**6, RAW)
    b, c, d = np.array([[0.5, 0.3, 0.25], [1.5, 1.2, 1.0]]).T
    want = 2 * np.prod(b - 2 * c + d) + np.prod(d)
    assert fin.second_moment == pytest.approx(want, rel=1e-4)


def test_table_counts_cover_all_quadruples():
    for N in (3, 7, 20):
        assert sum(row[0] for row in coefficient_table(N)) == pytest.approx(N**4)


@pytest.mark.parametrize("N", [2, 5, 30])
def test_normalized_finite_means(N):
    two = finite_sample_moments([BERNOULLI] * 2, N, StatisticKind())
    three = finite_sample_moments([BERNOULLI] * 3, N, StatisticKind())
    assert two.mean == pytest.approx(N / (N - 1))
    assert three.mean == pytest.approx(1 - 1 / (N - 1) ** 2)
    assert three.mean < two.mean


@pytest.mark.parametrize("N", [3, 4])
def test_normalized_three_variable_mean_by_enumeration(N):
    # for 0/1 data the normalized statistic only depends on the centring,
    # so averaging over non-constant outcomes gives the exact mean
    vals = []
    for bits in itertools.product((0.0, 1.0), repeat=3 * N):
        a = np.array(bits).reshape(3, N)
        if all(r.min() < r.max() for r in a):
            vals.append(naive_statistic(list(a), normalized=True))
    fin = finite_sample_moments([BERNOULLI] * 3, N, StatisticKind())
    assert fin.mean == pytest.approx(np.mean(vals), abs=1e-12)


def test_normalized_mean_monte_carlo():
    N, reps = 10, 10_000
    gen = np.random.default_rng(99)
    vals = np.array([
        compute_statistic(Dataset(tuple((gen.random(N) < 0.5).astype(float) for _ in range(2))))
        for _ in range(reps)
    ])
    want = finite_sample_moments([BERNOULLI] * 2, N, StatisticKind()).mean
    assert abs(vals.mean() - want) < 3 * vals.std(ddof=1) / np.sqrt(reps)


def test_standardize():
    assert standardize(2.0, 2.0, 4.0) == 0.0
    assert standardize(4.0, 2.0, 4.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        standardize(1.0, 0.0, 0.0)


def test_standardized_m2_is_near_normal():
    kind = StatisticKind("m", 2)
    est = EstimatorConfig()
    gen = np.random.default_rng(5)
    z = []
    for _ in range(1000):
        data = Dataset(tuple(gen.normal(size=100) for _ in range(20)))
        mom = null_moments(estimate_marginals(data, est, False), data.N, kind, est, False)
        z.append(standardize(compute_statistic(data, kind), mom.mean, mom.variance))
    assert stats.kstest(z, "norm").statistic < 0.1
