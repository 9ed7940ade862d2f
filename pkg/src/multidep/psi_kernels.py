"""Distance functions, distance matrices and their summary functionals."""

from dataclasses import dataclass

import numpy as np

from ._backend import kernels


class DataError(ValueError):
    """Input data is unusable (non-finite, wrong shape, too few rows)."""


@dataclass(frozen=True)
class PsiFunction:
    """Euclidean power distance ``|x|**beta`` with ``0 < beta <= 2``."""

    beta: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.beta <= 2.0):
            raise ValueError(f"beta must lie in (0, 2], got {self.beta}")

    def __call__(self, diff):
        """Evaluate on differences.

        Scalars and 1-d arrays are treated elementwise; for higher rank the
        Euclidean norm is taken over the last axis.
        """
        d = np.asarray(diff, dtype=np.float64)
        norm = np.abs(d) if d.ndim <= 1 else np.sqrt((d * d).sum(axis=-1))
        return norm**self.beta

    def pairwise(self, block):
        return kernels.pairwise_power(block, float(self.beta))


def as_block(x, name="variable"):
    """Coerce to a finite (N, d) float array."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DataError(f"{name}: expected 1-d or 2-d samples, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DataError(f"{name}: contains NaN or infinite values")
    return np.ascontiguousarray(a)


def distance_matrix(block, psi=None):
    """Matrix of psi applied to all pairwise differences of the sample rows."""
    psi = PsiFunction() if psi is None else psi
    return psi.pairwise(as_block(block))


def double_center(dist, weights=None):
    """Return ``-C B C`` with ``C = I - 1 w^T`` (``w = 1/N`` by default)."""
    return kernels.double_center(np.asarray(dist, dtype=np.float64), weights)


def normalize_distance_matrix(dist):
    """Divide by the mean entry. A zero matrix stays zero with scale 0."""
    dist = np.asarray(dist, dtype=np.float64)
    scale = float(dist.mean())
    if scale <= 0.0:
        return np.zeros_like(dist), 0.0
    return dist / scale, scale


@dataclass(frozen=True)
class MatrixStats:
    """Sums of entries of products built from a symmetric distance matrix.

    ``|M|`` below denotes the sum of all entries, ``*`` the entrywise
    product and ``@`` the matrix product.
    """

    N: int
    total: float  # |B|
    hadamard2: float  # |B*B|
    hadamard3: float  # |B*B*B|
    power2: float  # |B@B|
    power3: float  # |B@B@B|
    power4: float  # |B@B@B@B|
    cycle3: float  # |(B@B)*B|
    cycle4: float  # |(B@B@B)*B|
    hadamard2_path: float  # |(B*B)@B|
    colsum3: float  # sum of cubed column sums

    @property
    def is_constant(self):
        return self.total == 0.0


def matrix_stats(dist, counts=None):
    """All functionals from a single matrix product.

    Symmetry gives ``|B^2| = c.c``, ``|B^3| = c.Bc``, ``|B^4| = |Bc|^2``,
    ``|B^2*B| = tr B^3`` and ``|B^3*B| = |B^2*B^2|`` with ``c`` the column sums.

    ``counts`` describes a sample with repeated rows: ``dist`` is then the
    matrix between distinct rows and ``counts[a]`` the multiplicity of row
    ``a``. The result equals that of the fully expanded matrix.
    """
    b = np.asarray(dist, dtype=np.float64)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise DataError(f"expected a square matrix, got shape {b.shape}")
    w = np.ones(b.shape[0]) if counts is None else np.asarray(counts, dtype=np.float64)
    col = b @ w
    bc = b @ (w * col)
    sq = b * b
    b2 = (b * w[None, :]) @ b
    ww = np.outer(w, w)
    return MatrixStats(
        N=int(round(w.sum())),
        total=float(w @ col),
        hadamard2=float(w @ sq @ w),
        hadamard3=float(w @ (sq * b) @ w),
        power2=float(w @ col**2),
        power3=float((w * col) @ bc),
        power4=float(w @ bc**2),
        cycle3=float((ww * b2 * b).sum()),
        cycle4=float((ww * b2 * b2).sum()),
        hadamard2_path=float((w * (sq @ w)) @ col),
        colsum3=float(w @ col**3),
    )
