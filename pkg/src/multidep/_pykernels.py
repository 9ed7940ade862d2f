"""Pure numpy implementations of the hot loops.

Every function here has a twin with the same signature in ``_ckernels``.
The two are kept interchangeable so the backend can be picked at import.

``kind`` selects the per-entry reduction applied across the stacked
centred matrices:

* 0: product of all entries
* 1: prod(1 + a) - 1 - sum(a)
* 2: elementary symmetric polynomial of degree ``m``
"""

import numpy as np

KIND_PRODUCT = 0
KIND_TOTAL = 1
KIND_SYMMETRIC = 2


def pairwise_power(x, beta):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] == 1:
        dist = np.abs(x[:, 0][:, None] - x[:, 0][None, :])
    else:
        diff = x[:, None, :] - x[None, :, :]
        dist = np.sqrt(np.einsum("jkd,jkd->jk", diff, diff))
    if beta == 1.0:
        return dist
    return dist**beta


def double_center(dist, weights=None):
    if weights is None:
        row = dist.mean(axis=1)
        grand = row.mean()
    else:
        row = dist @ weights
        grand = weights @ row
    return -dist + row[:, None] + row[None, :] - grand


def _reduce_entries(stack, kind, m):
    if kind == KIND_PRODUCT:
        return np.prod(stack, axis=0)
    if kind == KIND_TOTAL:
        return np.prod(1.0 + stack, axis=0) - 1.0 - stack.sum(axis=0)
    # e_0..e_m built one variable at a time
    esp = [np.ones(stack.shape[1:])] + [np.zeros(stack.shape[1:]) for _ in range(m)]
    for a in stack:
        for r in range(m, 0, -1):
            esp[r] = esp[r] + a * esp[r - 1]
    return esp[m]


def product_sum(stack, weights, kind, m):
    """Weighted double sum of the per-entry reduction.

    ``weights`` is a probability vector over rows; the plain sample mean
    uses ``1/N`` everywhere.
    """
    stack = np.asarray(stack, dtype=np.float64)
    red = _reduce_entries(stack, kind, m)
    return float(weights @ red @ weights)


def permuted_product_sum(stack, perms, kind, m):
    stack = np.asarray(stack, dtype=np.float64)
    moved = np.stack([a[np.ix_(p, p)] for a, p in zip(stack, perms)])
    red = _reduce_entries(moved, kind, m)
    return float(red.mean())


def resampled_product_sum(dists, idx, normalize, kind, m):
    """Mean of the per-entry reduction after resampling rows of each variable.

    The distance matrices are re-centred (and optionally rescaled by their
    own mean) after indexing, matching a fresh computation on the resample.
    """
    dists = np.asarray(dists, dtype=np.float64)
    centred = []
    for b, ix in zip(dists, idx):
        sub = b[np.ix_(ix, ix)]
        a = double_center(sub)
        if normalize:
            scale = sub.mean()
            a = a / scale if scale > 0 else np.zeros_like(a)
        centred.append(a)
    red = _reduce_entries(np.stack(centred), kind, m)
    return float(red.mean())
