"""Sample distance multivariance and its families.

The fast route works on doubly centred distance matrices. A second,
independent route through empirical characteristic functions and a finite
discrete measure is provided by :func:`cf_oracle_statistic` for checking.
"""

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np

from ._backend import KIND_PRODUCT, KIND_SYMMETRIC, KIND_TOTAL, kernels
from .psi_kernels import DataError, PsiFunction, as_block

FAMILIES = ("multivariance", "total", "m")


@dataclass(frozen=True)
class StatisticKind:
    """Which statistic to compute.

    ``family`` is ``"multivariance"`` (the full index set), ``"total"``
    (all subsets of size >= 2) or ``"m"`` (all subsets of size ``m``).
    """

    family: str = "multivariance"
    m: int | None = None
    normalized: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown statistic family {self.family!r}")
        if self.family == "m" and (self.m is None or self.m < 2):
            raise ValueError("m-multivariance needs an integer m >= 2")

    def check(self, n):
        if n < 2:
            raise ValueError(f"need at least 2 variables, got {n}")
        if self.family == "m" and self.m > n:
            raise ValueError(f"m={self.m} exceeds the number of variables n={n}")

    def family_size(self, n):
        """Number of index subsets summed over."""
        if self.family == "multivariance":
            return 1
        if self.family == "total":
            return 2**n - n - 1
        return comb(n, self.m)

    def subsets(self, n):
        if self.family == "multivariance":
            return [tuple(range(n))]
        sizes = range(2, n + 1) if self.family == "total" else [self.m]
        return [s for r in sizes for s in itertools.combinations(range(n), r)]

    @property
    def label(self):
        base = f"{self.m}-multivariance" if self.family == "m" else self.family
        return ("normalized " if self.normalized else "") + base


@dataclass(frozen=True)
class Dataset:
    """``n`` variables observed jointly ``N`` times.

    Each block is an ``(N, d_i)`` array. ``psis`` holds one distance per
    variable; anything with a ``pairwise(block)`` method works.
    """

    blocks: tuple
    psis: tuple = field(default=())

    def __post_init__(self):
        blocks = tuple(as_block(b, f"variable {i + 1}") for i, b in enumerate(self.blocks))
        if not blocks:
            raise DataError("no variables given")
        sizes = {b.shape[0] for b in blocks}
        if len(sizes) != 1:
            raise DataError(f"variables have different sample sizes {sorted(sizes)}")
        if blocks[0].shape[0] < 2:
            raise DataError("need at least 2 observations")
        psis = tuple(self.psis) if self.psis else tuple(PsiFunction() for _ in blocks)
        if len(psis) != len(blocks):
            raise ValueError(f"{len(psis)} distance functions for {len(blocks)} variables")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "psis", psis)

    @classmethod
    def from_columns(cls, x, dims=None, psis=()):
        """Split a 2-d array column-wise; ``dims`` gives the width of each variable."""
        x = as_block(x, "data")
        dims = [1] * x.shape[1] if dims is None else list(dims)
        if sum(dims) != x.shape[1]:
            raise DataError(f"dims {dims} do not add up to {x.shape[1]} columns")
        cuts = np.cumsum([0] + dims)
        return cls(tuple(x[:, a:b] for a, b in zip(cuts[:-1], cuts[1:])), psis)

    @property
    def n(self):
        return len(self.blocks)

    @property
    def N(self):
        return self.blocks[0].shape[0]

    @property
    def dims(self):
        return tuple(b.shape[1] for b in self.blocks)

    def distance_matrices(self):
        return [psi.pairwise(b) for psi, b in zip(self.psis, self.blocks)]

    def select(self, rows):
        """Dataset built from the given row indices, one index array per variable."""
        return Dataset(tuple(b[r] for b, r in zip(self.blocks, rows)), self.psis)


def _compressed(data, max_ratio=0.5):
    """Distinct joint rows with frequencies, or None if ties are rare."""
    joint = np.hstack(data.blocks)
    uniq, counts = np.unique(joint, axis=0, return_counts=True)
    if uniq.shape[0] > max_ratio * data.N:
        return None
    cuts = np.cumsum((0,) + data.dims)
    blocks = [uniq[:, a:b] for a, b in zip(cuts[:-1], cuts[1:])]
    return blocks, counts / data.N


def centred_stack(dists, normalized, weights=None):
    """Stack the doubly centred matrices, optionally divided by their scale.

    The scale is the (weighted) mean entry of the distance matrix; a
    constant variable has scale 0 and contributes a zero matrix.
    """
    out, scales = [], []
    for b in dists:
        scale = float(b.mean()) if weights is None else float(weights @ b @ weights)
        a = kernels.double_center(b, weights)
        if normalized:
            a = a / scale if scale > 0 else np.zeros_like(a)
        out.append(a)
        scales.append(scale)
    return np.stack(out), np.array(scales)


def kernel_code(kind):
    if kind.family == "multivariance":
        return KIND_PRODUCT, 0
    if kind.family == "total":
        return KIND_TOTAL, 0
    return KIND_SYMMETRIC, kind.m


def compute_statistic(data, kind=StatisticKind()):
    """``N`` times the sample (family) multivariance.

    Normalized families are also divided by the number of subsets. Ties are
    collapsed into weighted distinct rows, which gives the same value.
    """
    kind.check(data.n)
    code, m = kernel_code(kind)
    packed = _compressed(data)
    if packed is None:
        stack, _ = centred_stack(data.distance_matrices(), kind.normalized)
        weights = np.full(data.N, 1.0 / data.N)
    else:
        blocks, weights = packed
        dists = [psi.pairwise(b) for psi, b in zip(data.psis, blocks)]
        stack, _ = centred_stack(dists, kind.normalized, weights)
    value = data.N * kernels.product_sum(stack, weights, code, m)
    if kind.normalized:
        value /= kind.family_size(data.n)
    return float(value)


def sample_multivariance(data, normalized=True):
    return compute_statistic(data, StatisticKind("multivariance", normalized=normalized))


def sample_total_multivariance(data, normalized=True):
    return compute_statistic(data, StatisticKind("total", normalized=normalized))


def sample_m_multivariance(data, m, normalized=True):
    return compute_statistic(data, StatisticKind("m", m=m, normalized=normalized))


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite symmetric measure on R^d: ``psi(x) = sum_t w_t (1 - cos(x.t))``.

    With ``symmetric=False`` each atom stands for the pair ``{t, -t}``,
    both carrying the given weight.
    """

    atoms: np.ndarray
    weights: np.ndarray
    symmetric: bool = True

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=np.float64)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.shape != (atoms.shape[0],) or np.any(weights < 0):
            raise ValueError("weights must be non-negative, one per atom")
        if not self.symmetric:
            atoms = np.vstack([atoms, -atoms])
            weights = np.concatenate([weights, weights])
        else:
            for t, w in zip(atoms, weights):
                hit = np.all(np.isclose(atoms, -t), axis=1)
                if not np.any(hit) or not np.isclose(weights[hit].sum(), w * hit.sum()):
                    raise ValueError("symmetric measure must be closed under t -> -t")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    def __call__(self, diff):
        d = np.atleast_2d(np.asarray(diff, dtype=np.float64))
        return (self.weights * (1.0 - np.cos(d @ self.atoms.T))).sum(axis=-1)

    def pairwise(self, block):
        return _pairwise_measure(self, as_block(block))


def _pairwise_measure(measure, x):
    phase = x @ measure.atoms.T
    c, s = np.cos(phase), np.sin(phase)
    # 1 - cos(a - b) = 1 - cos a cos b - sin a sin b
    return measure.weights.sum() - (c * measure.weights) @ c.T - (s * measure.weights) @ s.T


def _cf_subset_norm(centred, weights):
    """N * sum over atom tuples of prod(w) |mean_l prod_i centred_i[l, t_i]|^2."""
    N = centred[0].shape[0]
    tensor = centred[0]
    wt = weights[0]
    for e, w in zip(centred[1:], weights[1:]):
        tensor = tensor[..., None] * e.reshape((N,) + (1,) * (tensor.ndim - 1) + (-1,))
        wt = wt[..., None] * w
    z = tensor.mean(axis=0)
    return float(N * (wt * np.abs(z) ** 2).sum())


def cf_oracle_statistic(data, measures, kind=StatisticKind()):
    """Statistic computed from empirical characteristic functions.

    Every variable's distance is induced by the matching ``DiscreteMeasure``
    so the result must agree with :func:`compute_statistic` on a dataset
    using those measures as distances.
    """
    kind.check(data.n)
    if len(measures) != data.n:
        raise ValueError("one measure per variable required")
    centred, weights = [], []
    for block, mu in zip(data.blocks, measures):
        e = np.exp(1j * block @ mu.atoms.T)
        centred.append(e - e.mean(axis=0))
        w = mu.weights
        if kind.normalized:
            scale = float(_pairwise_measure(mu, block).mean())
            w = w / scale if scale > 0 else np.zeros_like(w)
        weights.append(w)
    total = sum(
        _cf_subset_norm([centred[i] for i in s], [weights[i] for i in s])
        for s in kind.subsets(data.n)
    )
    if kind.normalized:
        total /= kind.family_size(data.n)
    return total
