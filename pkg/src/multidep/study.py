"""Simulation study: size, power and p-value accuracy of the test methods.

Each scenario generates dependent (or independent) samples. A Monte Carlo
benchmark of the null distribution, built from independently drawn
variables with the same marginals, serves as ground truth.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .engine import ConfigError, TestSpec, montecarlo_benchmark, run_test
from .statistics import Dataset, StatisticKind

ALPHA = 0.05
SKIP_ABOVE = 0.21  # both p-values above this: outside the tail of interest
ZERO_BELOW = 0.001  # both p-values below this: error counted as zero
LIBERAL_SHARE = 0.30

_TETRA = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]], dtype=np.float64)


def _bernoulli(rng, n, N):
    return [(rng.random(N) < 0.5).astype(np.float64) for _ in range(n)]


def _uniform(rng, n, N):
    return [rng.random(N) for _ in range(n)]


def _normal(rng, n, N):
    return [rng.normal(size=N) for _ in range(n)]


def _exponential(rng, n, N):
    return [rng.exponential(size=N) for _ in range(n)]


def _student_t(rng, n, N, df=1.0):
    return [rng.standard_t(df, size=N) for _ in range(n)]


def _mixed(rng, n, N):
    makers = (
        lambda: rng.exponential(size=N),
        lambda: rng.normal(size=N),
        lambda: (rng.random(N) < 0.5).astype(np.float64),
        lambda: rng.random(N),
        lambda: rng.poisson(1.0, size=N).astype(np.float64),
        lambda: rng.binomial(10, 0.5, size=N).astype(np.float64),
    )
    return [makers[i % len(makers)]() for i in range(n)]


def _tetrahedron(rng, n, N, r=0.5):
    pts = _TETRA[rng.integers(0, 4, size=N)] + r * rng.normal(size=(N, 3))
    return [pts[:, i] for i in range(3)]


def _coins(rng, n, N):
    """Fair coins in groups of three, the third being the XOR of the other two."""
    out = []
    while len(out) < n:
        a = rng.random(N) < 0.5
        b = rng.random(N) < 0.5
        out.extend([a, b, a ^ b])
    return [c.astype(np.float64) for c in out[:n]]


def _mv_block(rng, n, N, corr=0.1, dim=5, df=None):
    """Two ``dim``-dimensional blocks, every cross covariance equal to ``corr``.

    With ``df`` the pair is multivariate t with that scale matrix.
    """
    cov = np.eye(2 * dim)
    cov[:dim, dim:] = corr
    cov[dim:, :dim] = corr
    z = rng.multivariate_normal(np.zeros(2 * dim), cov, size=N, method="cholesky")
    if df is not None:
        z = z / np.sqrt(rng.chisquare(df, size=N) / df)[:, None]
    return [z[:, :dim], z[:, dim:]]


def _product_pair(rng, n, N, dim=5):
    y = rng.normal(size=(N, dim))
    return [y, y * rng.normal(size=(N, dim))]


def _log_square_pair(rng, n, N, dim=5):
    y = rng.normal(size=(N, dim))
    return [y, np.log(y**2)]


# name -> (generator, fixed n or None, independent by design, assumption violating)
REGISTRY = {
    "bernoulli": (_bernoulli, None, True, False),
    "uniform": (_uniform, None, True, False),
    "normal": (_normal, None, True, False),
    "exponential": (_exponential, None, True, False),
    "student_t": (_student_t, None, True, True),
    "mixed": (_mixed, None, True, False),
    "tetrahedron": (_tetrahedron, 3, False, False),
    "coins": (_coins, None, False, False),
    "mv_block": (_mv_block, 2, False, False),
    "srb1a": (_mv_block, 2, False, False),
    "srb2": (_product_pair, 2, False, False),
    "srb3": (_log_square_pair, 2, False, False),
}


@dataclass(frozen=True)
class Scenario:
    """A data generating process with fixed sample size and variable count."""

    name: str
    n: int = 2
    N: int = 100
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in REGISTRY:
            raise ConfigError(f"unknown scenario {self.name!r}; known: {', '.join(sorted(REGISTRY))}")
        fixed = REGISTRY[self.name][1]
        if fixed is not None and self.n != fixed:
            object.__setattr__(self, "n", fixed)
        if self.n < 2 or self.N < 2:
            raise ValueError("scenarios need n >= 2 and N >= 2")

    @property
    def independent(self):
        return REGISTRY[self.name][2]

    @property
    def assumption_violating(self):
        if self.name in ("mv_block", "srb1a"):
            df = self.params.get("df")
            return df is not None and df <= 2
        if self.name == "student_t":
            return self.params.get("df", 1.0) <= 2
        return REGISTRY[self.name][3]

    @property
    def label(self):
        extra = "".join(f",{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name}(n={self.n},N={self.N}{extra})"

    def _blocks(self, rng):
        return REGISTRY[self.name][0](rng, self.n, self.N, **self.params)

    def sample(self, rng):
        return Dataset(tuple(self._blocks(rng)))

    def null_sample(self, rng):
        """Same marginals, but every variable taken from its own fresh draw."""
        return Dataset(tuple(self._blocks(rng)[i] for i in range(self.n)))


def parse_scenario(text, N=100):
    """``name`` or ``name:key=value,key=value`` (``n`` and ``N`` allowed as keys)."""
    name, _, rest = text.partition(":")
    args = {"n": 2, "N": N}
    params = {}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        num = float(val)
        if key in ("n", "N"):
            args[key] = int(num)
        else:
            params[key] = int(num) if num.is_integer() and key in ("dim",) else num
    return Scenario(name.strip(), args["n"], args["N"], params)


@dataclass
class MethodSummary:
    method: str
    rejection_rate: float
    rel_mse: float
    liberal_rate: float
    liberal: bool
    invalid_rate: float
    used: int


def summarize(method, pvalues, benchmark, valid=None):
    """Accuracy of ``pvalues`` relative to ``benchmark`` p-values.

    Pairs with both values above 0.21 are skipped, pairs with both below
    0.001 count as exact. The relative squared error is averaged and capped
    at 1. A p-value below ``benchmark - min(0.05, benchmark/2)`` is a liberal
    miss; more than 30% of misses flags the method.
    """
    p = np.asarray(pvalues, dtype=np.float64)
    b = np.asarray(benchmark, dtype=np.float64)
    keep = ~((p > SKIP_ABOVE) & (b > SKIP_ABOVE))
    pk, bk = p[keep], b[keep]
    if pk.size:
        err = np.where((pk < ZERO_BELOW) & (bk < ZERO_BELOW), 0.0, ((pk - bk) / bk) ** 2)
        rel_mse = float(min(1.0, err.mean()))
        margin = np.minimum(0.05, 0.5 * bk)
        liberal_rate = float(np.mean(pk < bk - margin))
    else:
        rel_mse, liberal_rate = 0.0, 0.0
    invalid = 0.0 if valid is None else float(1.0 - np.mean(valid))
    return MethodSummary(
        method, float(np.mean(p < ALPHA)), rel_mse, liberal_rate,
        liberal_rate > LIBERAL_SHARE, invalid, int(pk.size),
    )


def run_study(scenarios, methods=("pe.Nu", "cv.Nu", "c1.Nu"), replicates=100, seed=0,
              benchmark_size=2000, family="multivariance", m=None):
    """Evaluate each method on each scenario; returns long-format rows.

    Rows are ``(scenario, method, metric, value)``. The ``benchmark`` pseudo
    method reports the rejection rate of the Monte Carlo reference.
    """
    if not methods:
        raise ConfigError("no methods given")
    rows = []
    for sc_i, sc in enumerate(scenarios):
        specs = [TestSpec.from_id(mid, family=family, m=m) for mid in methods]
        norms = sorted({s.kind.normalized for s in specs})
        bench_seed, rep_seed = np.random.SeedSequence([seed, sc_i]).spawn(2)
        benches = {
            nz: montecarlo_benchmark(sc.null_sample, StatisticKind(family, m, nz), benchmark_size,
                                     seed=bench_seed.generate_state(1)[0] + int(nz))
            for nz in norms
        }
        pv = {mid: [] for mid in methods}
        valid = {mid: [] for mid in methods}
        bp = {nz: [] for nz in norms}
        for ss in rep_seed.spawn(replicates):
            data = sc.sample(np.random.default_rng(ss))
            stat_for = {}
            for mid, spec in zip(methods, specs):
                res = run_test(data, spec)
                pv[mid].append(res.p_value)
                valid[mid].append(res.valid)
                stat_for[spec.kind.normalized] = res.statistic
            for nz in norms:
                bp[nz].append(benches[nz].pvalue(stat_for[nz]))
        label = sc.label
        for nz in norms:
            rows.append((label, "benchmark" + ("" if nz else ".raw"), "rejection_rate",
                         float(np.mean(np.array(bp[nz]) < ALPHA))))
        for mid, spec in zip(methods, specs):
            s = summarize(mid, pv[mid], bp[spec.kind.normalized], valid[mid])
            for metric in ("rejection_rate", "rel_mse", "liberal_rate", "liberal", "invalid_rate", "used"):
                val = getattr(s, metric)
                rows.append((label, mid, metric, float(val) if not isinstance(val, bool) else int(val)))
        if sc.assumption_violating:
            rows.append((label, "-", "assumption_violating", 1))
    return rows


def rows_to_csv(rows, handle=None):
    out = handle or io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["scenario", "method", "metric", "value"])
    for r in rows:
        writer.writerow([r[0], r[1], r[2], repr(r[3]) if isinstance(r[3], float) else r[3]])
    return out.getvalue() if handle is None else None
