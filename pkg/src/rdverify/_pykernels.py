"""Numpy fallback for the compiled kernels; same signatures and results."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _grid(q: int):
    u, v = np.meshgrid(np.arange(1, q, dtype=np.int64), np.arange(1, q, dtype=np.int64), indexing="ij")
    u = u.ravel()
    v = v.ravel()
    return u, v, u * u % q, u * v % q, v * v % q


def _weights(kind: int, u, v, q):
    if kind == 0:
        return np.ones_like(u)
    if kind == 1:
        return v
    if kind == 2:
        return u * v
    return 2 * v - q


def _bucket(k: np.ndarray, w: np.ndarray, N: int) -> np.ndarray:
    mask = k >= 0
    # float bincount is exact while partial sums stay below 2**53
    assert np.abs(w).sum() < 2**53
    return np.rint(np.bincount(k[mask], weights=w[mask], minlength=N)).astype(np.int64)


def form_histogram(exps, q, N, A, B, C, weight=2):
    exps = np.asarray(exps, dtype=np.int64)
    u, v, uu, uv, vv = _grid(q)
    vals = (A % q * uu + B % q * uv + C % q * vv) % q
    return _bucket(exps[vals], _weights(weight, u, v, q), N)


def f1_histograms(exps, q, N, a_keys, n_keys):
    out = np.zeros((len(a_keys), N), dtype=np.int64)
    for i, (a, n) in enumerate(zip(a_keys, n_keys)):
        out[i] = form_histogram(exps, q, N, int(a), int(a) * int(n), -1, 2)
    return out
