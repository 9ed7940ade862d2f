import numpy as np
import pytest

from multidep.moments import biased_moments
from multidep.psi_kernels import distance_matrix, double_center, matrix_stats
from multidep.spectral import (
    REFERENCE_MOMENTS,
    KnownDistribution,
    _nystrom_matrix,
    covariance_kernel,
    empirical_cf,
    empirical_eigenvalues,
    kernel_moment_quadrature,
    kernel_moments,
    levy_constant,
    levy_rule,
    nystrom_eigenvalues,
    product_eigenvalues,
)

LAWS = {
    "bernoulli": KnownDistribution.bernoulli(),
    "uniform": KnownDistribution.uniform(),
    "exponential": KnownDistribution.exponential(),
    "normal": KnownDistribution.normal(),
}


def test_empirical_cf_basics(rng):
    x = rng.normal(size=10)
    assert empirical_cf(x, np.array([0.0]))[0] == pytest.approx(1.0)
    np.testing.assert_allclose(empirical_cf(np.zeros(7), np.linspace(-3, 3, 5)), 1.0)
    assert abs(empirical_cf(np.array([0.0, np.pi]), np.array([1.0]))[0]) < 1e-15


def test_kernel_basics(rng):
    cf = LAWS["normal"].cf
    assert covariance_kernel(cf, [0.0], [0.0])[0, 0] == pytest.approx(0.0)
    point = KnownDistribution.normal(2.0, 0.0).cf
    s, t = rng.normal(size=6), rng.normal(size=6)
    np.testing.assert_allclose(covariance_kernel(point, s, t), 0.0, atol=1e-15)


def test_bernoulli_kernel_factorizes():
    cf = LAWS["bernoulli"].cf
    assert covariance_kernel(cf, [np.pi], [np.pi])[0, 0] == pytest.approx(1.0)
    s, t = np.array([0.3, 2.0]), np.array([-1.1, 0.7])
    want = 0.25 * np.outer(np.exp(1j * s) - 1, np.exp(-1j * t) - 1)
    np.testing.assert_allclose(covariance_kernel(cf, s, t), want, atol=1e-15)


@pytest.mark.parametrize("name", list(LAWS))
def test_kernel_is_hermitian(rng, name):
    s, t = rng.normal(size=(2, 20)) * 3
    k = covariance_kernel(LAWS[name].cf, s, t)
    np.testing.assert_allclose(k, np.conj(covariance_kernel(LAWS[name].cf, t, s)).T, atol=1e-12)


def test_levy_rule_reproduces_distance():
    rule = levy_rule(200, beta=1.0)
    for x in (0.3, 1.0, 2.5):
        assert (rule.weights * (1 - np.cos(rule.nodes * x))).sum() == pytest.approx(x, rel=2e-2)
    with pytest.raises(ValueError):
        levy_constant(2.0)


def test_bernoulli_spectrum_has_rank_one():
    ev = nystrom_eigenvalues(LAWS["bernoulli"].cf)
    assert np.count_nonzero(ev > 1e-8 * ev[0]) == 1


@pytest.mark.parametrize("name", list(LAWS))
def test_nystrom_eigenvalues_not_negative(name):
    raw = np.linalg.eigvalsh(_nystrom_matrix(LAWS[name].cf, levy_rule()))
    assert raw.min() >= -1e-10 * raw.max()


def test_trace_identity():
    rule = levy_rule()
    cf = LAWS["uniform"].cf
    diag = np.real(np.array([covariance_kernel(cf, [t], [t])[0, 0] for t in rule.nodes]))
    assert nystrom_eigenvalues(cf, rule).sum() == pytest.approx((rule.weights * diag).sum(), rel=1e-10)


def test_uniform_second_power_sum():
    ev = nystrom_eigenvalues(LAWS["uniform"].cf, levy_rule(100))
    assert (ev**2).sum() == pytest.approx(2 / 45, rel=0.03)


def test_expectation_mode_bernoulli_exact():
    got = kernel_moment_quadrature(LAWS["bernoulli"], (1, 2, 3))
    assert [got[k] for k in (1, 2, 3)] == pytest.approx([0.5, 0.25, 0.125], abs=1e-12)


@pytest.mark.parametrize("name", ["uniform", "exponential", "normal"])
def test_expectation_mode_continuous(name):
    got = kernel_moment_quadrature(LAWS[name], (1, 2, 3))
    for k in (1, 2, 3):
        assert got[k] == pytest.approx(REFERENCE_MOMENTS[name][k - 1], abs=1e-4), k


@pytest.mark.parametrize("name", ["uniform", "exponential", "normal"])
def test_kernel_mode_continuous(name):
    got = kernel_moment_quadrature(LAWS[name], (1, 2, 3), mode="kernel")
    for k in (1, 2, 3):
        assert got[k] == pytest.approx(REFERENCE_MOMENTS[name][k - 1], rel=0.02), k


@pytest.mark.parametrize("name", list(LAWS))
def test_kernel_mode_equals_nystrom_power_sums(name):
    rule = levy_rule(80)
    ev = nystrom_eigenvalues(LAWS[name].cf, rule)
    got = kernel_moments(LAWS[name].cf, (1, 2, 3), rule)
    for k in (1, 2, 3):
        assert got[k] == pytest.approx((ev**k).sum(), rel=1e-8, abs=1e-14)


def test_unknown_mode():
    with pytest.raises(ValueError):
        kernel_moment_quadrature(LAWS["uniform"], mode="other")


def test_product_eigenvalues_small():
    vals, rest = product_eigenvalues([[2.0], [3.0]])
    assert list(vals) == [6.0] and rest == 0.0


def test_product_eigenvalues_sum_and_cap(rng):
    spectra = [rng.random(5), rng.random(4), rng.random(3)]
    full, rest = product_eigenvalues(spectra)
    assert rest == 0.0 and full.size == 60
    assert full.sum() == pytest.approx(np.prod([s.sum() for s in spectra]))
    top, rest = product_eigenvalues(spectra, cap=10)
    np.testing.assert_allclose(top, full[:10])
    assert rest == pytest.approx(full[10:].sum())


def test_product_spectrum_matches_tensor_nystrom():
    rule = levy_rule(30)
    m1 = _nystrom_matrix(LAWS["uniform"].cf, rule)
    m2 = _nystrom_matrix(LAWS["exponential"].cf, rule)
    direct = np.sort(np.linalg.eigvalsh(np.kron(m1, m2)))[::-1][:10]
    ev1 = nystrom_eigenvalues(LAWS["uniform"].cf, rule)
    ev2 = nystrom_eigenvalues(LAWS["exponential"].cf, rule)
    prods, _ = product_eigenvalues([ev1, ev2], cap=10)
    np.testing.assert_allclose(prods, direct, rtol=1e-8)


def test_empirical_eigenvalues_are_centred_spectrum(rng):
    x = rng.normal(size=25)
    B = distance_matrix(x)
    ev = empirical_eigenvalues(B)
    want = np.sort(np.linalg.eigvalsh(double_center(B) / 25))[::-1]
    np.testing.assert_allclose(ev, np.clip(want, 0, None), atol=1e-12)
    m = biased_moments(matrix_stats(B))
    assert ev.sum() == pytest.approx(m.mu1, rel=1e-10)
    assert (ev**2).sum() == pytest.approx(m.mu2, rel=1e-10)


def test_empirical_eigenvalues_with_weights(rng):
    uniq = rng.normal(size=4)
    counts = np.array([2, 5, 1, 3])
    full = empirical_eigenvalues(distance_matrix(np.repeat(uniq, counts)), normalized=True)
    packed = empirical_eigenvalues(distance_matrix(uniq), normalized=True, weights=counts / counts.sum())
    np.testing.assert_allclose(packed, full[: packed.size], atol=1e-12)
    assert full[packed.size:].max() < 1e-12


def test_empirical_spectrum_matches_nystrom_on_empirical_cf(rng):
    x = rng.normal(size=30)
    exact = empirical_eigenvalues(distance_matrix(x))[:3]
    approx = nystrom_eigenvalues(lambda t: empirical_cf(x, np.ravel(t)).reshape(np.shape(t)), levy_rule(300), 3)
    np.testing.assert_allclose(approx, exact, rtol=0.03)


def test_samples_follow_law(rng):
    for name, law in LAWS.items():
        draws = law.sample(rng, 10_000)
        x, p = law.expectation_rule(200)
        mean = float(p @ x)
        assert abs(draws.mean() - mean) < 3 * draws.std() / 100, name
