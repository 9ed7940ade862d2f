"""Run an independence test end to end: statistic, null moments, p-value."""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import qform
from ._backend import kernels
from .moments import (
    JointMoments,
    biased_moments,
    finite_sample_moments,
    limit_moments,
    unbiased_moments,
)
from .psi_kernels import DataError, matrix_stats
from .spectral import empirical_eigenvalues, product_eigenvalues
from .statistics import Dataset, StatisticKind, centred_stack, compute_statistic, kernel_code

MOMENT_METHODS = ("classical", "variance", "pearson", "clt")
RESAMPLING_METHODS = ("permutation", "bootstrap", "montecarlo")
METHODS = MOMENT_METHODS + ("eigenvalue",) + RESAMPLING_METHODS

_SHORT = {
    "c1": "classical", "cv": "variance", "pe": "pearson", "clt": "clt",
    "eig": "eigenvalue", "perm": "permutation", "boot": "bootstrap", "mc": "montecarlo",
}

# relative slack when counting resampled statistics at least as large as observed
TIE_RTOL = 1e-9


class ConfigError(ValueError):
    """Inconsistent or unsupported test configuration."""


@dataclass(frozen=True)
class EstimatorConfig:
    """How the null moments are estimated.

    ``horizon`` is ``"finite"`` (exact moments at the given ``N``) or
    ``"limit"`` (moments of the limit distribution); ``bias`` picks
    V-statistic (``"biased"``) or U-statistic (``"unbiased"``) estimators.
    """

    bias: str = "unbiased"
    horizon: str = "finite"

    def __post_init__(self):
        if self.bias not in ("biased", "unbiased"):
            raise ConfigError(f"bias must be 'biased' or 'unbiased', got {self.bias!r}")
        if self.horizon not in ("finite", "limit"):
            raise ConfigError(f"horizon must be 'finite' or 'limit', got {self.horizon!r}")

    @property
    def code(self):
        return ("N" if self.horizon == "finite" else "l") + ("u" if self.bias == "unbiased" else "b")


def _default_threads():
    raw = os.environ.get("MULTIDEP_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"MULTIDEP_THREADS must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class TestSpec:
    """Everything that determines a test besides the data."""

    __test__ = False  # not a pytest class

    kind: StatisticKind = StatisticKind()
    method: str = "pearson"
    estimator: EstimatorConfig = EstimatorConfig()
    resamples: int = 999
    seed: int | None = 0
    eigen_cap: int = 10_000
    threads: int | None = None
    generator: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.method in RESAMPLING_METHODS and self.resamples < 1:
            raise ConfigError("resamples must be positive")
        if self.eigen_cap < 1:
            raise ConfigError("eigen_cap must be positive")

    @classmethod
    def from_id(cls, ident, **kwargs):
        """Parse ``<method>[.<N|l><u|b>][.raw]``, e.g. ``pe.Nu`` or ``c1.lb.raw``.

        Statistics are normalized unless ``.raw`` is given. ``kwargs`` may
        carry ``family`` and ``m`` for the statistic and any other field.
        """
        parts = ident.split(".")
        method = _SHORT.get(parts[0], parts[0])
        est = EstimatorConfig()
        normalized = True
        for p in parts[1:]:
            if p == "raw":
                normalized = False
            elif p == "no":
                normalized = True
            elif len(p) == 2 and p[0] in "Nl" and p[1] in "ub":
                est = EstimatorConfig("unbiased" if p[1] == "u" else "biased",
                                      "finite" if p[0] == "N" else "limit")
            else:
                raise ConfigError(f"cannot parse method id {ident!r}")
        family = kwargs.pop("family", "multivariance")
        m = kwargs.pop("m", None)
        kind = StatisticKind(family, m, normalized)
        return cls(kind=kind, method=method, estimator=est, **kwargs)

    @property
    def ident(self):
        short = {v: k for k, v in _SHORT.items()}[self.method]
        if self.method in MOMENT_METHODS:
            short += "." + self.estimator.code
        return short + ("" if self.kind.normalized else ".raw")


@dataclass(frozen=True)
class TestResult:
    __test__ = False
    statistic: float
    p_value: float
    valid: bool
    method: str
    kind: StatisticKind
    n: int
    N: int
    moments: JointMoments | None = None
    warnings: tuple = ()
    parameters: dict = field(default_factory=dict)

    def to_dict(self):
        kind = {"family": self.kind.family, "normalized": self.kind.normalized}
        if self.kind.family == "m":
            kind["m"] = self.kind.m
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "valid": self.valid,
            "method": self.method,
            "parameters": self.parameters,
            "warnings": list(self.warnings),
            "n": self.n,
            "N": self.N,
            "kind": kind,
        }


# ---------------------------------------------------------------------------
# per-variable moment estimation


def _stats_per_variable(data):
    out = []
    for psi, block in zip(data.psis, data.blocks):
        uniq, counts = np.unique(block, axis=0, return_counts=True)
        if uniq.shape[0] <= data.N // 2:
            out.append(matrix_stats(psi.pairwise(uniq), counts))
        else:
            out.append(matrix_stats(psi.pairwise(block)))
    return out


def estimate_marginals(data, estimator, need_skew):
    """Per-variable moment parameters for the chosen estimator."""
    stats = _stats_per_variable(data)
    if estimator.bias == "biased":
        return [biased_moments(s) for s in stats]
    fields = ["mu1"]
    fields += ["b", "c", "d"] if estimator.horizon == "finite" else ["mu2"]
    if need_skew or estimator.horizon == "limit":
        fields += ["mu2"] + (["mu3"] if need_skew else [])
    return [unbiased_moments(s, tuple(dict.fromkeys(fields))) for s in stats]


def null_moments(marginals, N, kind, estimator, need_skew):
    """Mean and variance per the estimator, skewness always from the limit."""
    if estimator.horizon == "finite":
        fin = finite_sample_moments(marginals, N, kind)
        skew = limit_moments(marginals, kind).skewness if need_skew else None
        return JointMoments(fin.mean, fin.variance, skew, second_moment=fin.second_moment)
    lim = limit_moments(marginals, kind)
    return JointMoments(lim.mean, lim.variance, lim.skewness if need_skew else None, lim.central3)


# ---------------------------------------------------------------------------
# resampling


def _replicate_seeds(seed, count):
    return np.random.SeedSequence(seed).spawn(count)


def _run_batched(fn, seeds, threads):
    if threads <= 1 or len(seeds) < 2:
        return np.array([fn(s) for s in seeds])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.array(list(pool.map(fn, seeds)))


def resampled_statistics(data, spec):
    """Statistic values under resampling; order fixed by the seed alone."""
    kind = spec.kind
    code, m = kernel_code(kind)
    N, n = data.N, data.n
    size = kind.family_size(n) if kind.normalized else 1
    seeds = _replicate_seeds(spec.seed, spec.resamples)
    threads = spec.threads or _default_threads()

    if spec.method == "permutation":
        stack, _ = centred_stack(data.distance_matrices(), kind.normalized)

        def one(ss):
            rng = np.random.default_rng(ss)
            perms = np.stack([rng.permutation(N) for _ in range(n)])
            return N * kernels.permuted_product_sum(stack, perms, code, m) / size

    elif spec.method == "bootstrap":
        dists = np.stack(data.distance_matrices())

        def one(ss):
            rng = np.random.default_rng(ss)
            idx = rng.integers(0, N, size=(n, N))
            return N * kernels.resampled_product_sum(dists, idx, kind.normalized, code, m) / size

    else:
        generator = spec.generator or marginal_resampler(data)

        def one(ss):
            return compute_statistic(generator(np.random.default_rng(ss)), kind)

    return _run_batched(one, seeds, threads)


def marginal_resampler(data):
    """Null sample source drawing each variable from its own empirical law."""

    def draw(rng):
        return data.select([rng.integers(0, data.N, size=data.N) for _ in range(data.n)])

    return draw


def resampling_pvalue(observed, replicates):
    """``(1 + #{T_r >= T}) / (1 + R)`` with a tiny relative slack for round-off."""
    cut = observed - TIE_RTOL * abs(observed)
    return (1.0 + np.count_nonzero(replicates >= cut)) / (1.0 + len(replicates))


@dataclass(frozen=True)
class MonteCarloBenchmark:
    """Sorted null statistics; ``pvalue`` uses the resampling convention."""

    values: np.ndarray

    def pvalue(self, statistic):
        t = np.asarray(statistic, dtype=np.float64)
        cut = t - TIE_RTOL * np.abs(t)
        above = self.values.size - np.searchsorted(self.values, cut, side="left")
        out = (1.0 + above) / (1.0 + self.values.size)
        return float(out) if out.ndim == 0 else out


def montecarlo_benchmark(generator, kind, size, seed=0, threads=None):
    """Null distribution of the statistic from ``size`` fresh null samples."""
    if size < 1:
        raise ConfigError("benchmark size must be positive")
    seeds = _replicate_seeds(seed, size)

    def one(ss):
        return compute_statistic(generator(np.random.default_rng(ss)), kind)

    vals = _run_batched(one, seeds, threads or _default_threads())
    return MonteCarloBenchmark(np.sort(vals))


# ---------------------------------------------------------------------------
# main entry


def _eigen_alphas(data, kind, cap):
    spectra = []
    for psi, block in zip(data.psis, data.blocks):
        uniq, counts = np.unique(block, axis=0, return_counts=True)
        if uniq.shape[0] <= data.N // 2:
            spectra.append(empirical_eigenvalues(psi.pairwise(uniq), kind.normalized, counts / data.N))
        else:
            spectra.append(empirical_eigenvalues(psi.pairwise(block), kind.normalized))
    subsets = kind.subsets(data.n)
    per_subset = max(1, cap // len(subsets))
    alphas, residual = [], 0.0
    for s in subsets:
        kept, rest = product_eigenvalues([spectra[i] for i in s], per_subset)
        alphas.append(kept)
        residual += rest
    alphas = np.concatenate(alphas)
    if residual > 0:
        # left-over mass goes to one surrogate coefficient
        alphas = np.append(alphas, residual)
    if kind.normalized:
        alphas = alphas / kind.family_size(data.n)
    return alphas, residual


def _moment_pvalue(method, stat, moments):
    if method == "classical":
        return qform.pvalue_classical(stat, moments.mean)
    if method == "variance":
        return qform.pvalue_variance(stat, moments.mean, moments.variance)
    if method == "pearson":
        return qform.pvalue_pearson(stat, moments.mean, moments.variance, moments.skewness)
    return qform.pvalue_clt(stat, moments.mean, moments.variance)


def run_test(data: Dataset, spec: TestSpec = TestSpec()) -> TestResult:
    """Compute the statistic and its p-value as configured by ``spec``."""
    kind = spec.kind
    try:
        kind.check(data.n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    notes = []
    params = {"method_id": spec.ident}
    stat = compute_statistic(data, kind)
    constant = [i + 1 for i, b in enumerate(data.blocks) if np.all(b == b[0])]
    if constant:
        notes.append(f"constant variable(s) {constant}: they carry no dependence")

    moments = None
    if spec.method in MOMENT_METHODS:
        need_skew = spec.method == "pearson"
        params.update(bias=spec.estimator.bias, horizon=spec.estimator.horizon)
        try:
            marg = estimate_marginals(data, spec.estimator, need_skew)
        except ValueError as exc:
            raise DataError(str(exc)) from None
        moments = null_moments(marg, data.N, kind, spec.estimator, need_skew)
        params.update(mean=moments.mean, variance=moments.variance)
        if need_skew:
            params["skewness"] = moments.skewness
        if spec.method == "clt" and kind.family != "m":
            notes.append("normal approximation is only justified for m-multivariance")
        try:
            res = _moment_pvalue(spec.method, stat, moments)
        except qform.DegenerateError:
            # estimated variance not positive: fall back to the mean-only bound
            notes.append("estimated variance is not positive, classical bound used")
            res = qform.pvalue_classical(stat, moments.mean)
        if res.note:
            notes.append(res.note)
        if not res.valid:
            notes.append("statistic below the validity threshold of the tail bound")
        p, valid = res.p, res.valid
    elif spec.method == "eigenvalue":
        alphas, residual = _eigen_alphas(data, kind, spec.eigen_cap)
        params.update(eigenvalues=int(alphas.size), residual_mass=residual)
        if residual > 0:
            notes.append("spectrum truncated; residual mass lumped into one coefficient")
        p, valid = qform.tail_exact(alphas, stat), True
    else:
        reps = resampled_statistics(data, spec)
        params.update(resamples=spec.resamples, seed=spec.seed)
        if spec.method == "montecarlo" and spec.generator is None:
            notes.append("null samples drawn from the product of empirical marginals")
        p, valid = resampling_pvalue(stat, reps), True

    if constant and kind.family == "multivariance":
        p = 1.0
    return TestResult(
        statistic=stat, p_value=float(p), valid=bool(valid), method=spec.method, kind=kind,
        n=data.n, N=data.N, moments=moments, warnings=tuple(notes), parameters=params,
    )


def with_method(spec, ident):
    """Copy of ``spec`` with the method, estimator and normalization of ``ident``."""
    other = TestSpec.from_id(ident, family=spec.kind.family, m=spec.kind.m)
    return replace(spec, kind=other.kind, method=other.method, estimator=other.estimator)
