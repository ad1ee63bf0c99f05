"""Dense float64 kernels: normalization, cosine matrices, stable softmax."""

from __future__ import annotations

import numpy as np

from .errors import DimMismatch, NonFiniteInput, NonPositiveTemperature, ZeroVector

ZERO_NORM = 1e-300


def as_vec(v) -> np.ndarray:
    x = np.asarray(v, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise DimMismatch(f"expected a non-empty 1-d vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("vector contains non-finite entries")
    return x


def as_mat(m) -> np.ndarray:
    x = np.asarray(m, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise DimMismatch(f"expected a non-empty 2-d matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("matrix contains non-finite entries")
    return x


def l2_normalize(v) -> np.ndarray:
    """Scale ``v`` to unit Euclidean norm.

    Raises:
        ZeroVector: if the norm is below 1e-300.
    """
    x = as_vec(v)
    # scale by the max first so the norm itself cannot overflow/underflow
    peak = np.max(np.abs(x))
    if peak < ZERO_NORM:
        raise ZeroVector("cannot normalize a zero vector")
    y = x / peak
    n = np.sqrt(np.dot(y, y))
    if n * peak < ZERO_NORM:
        raise ZeroVector("cannot normalize a zero vector")
    return y / n


def l2_normalize_rows(m) -> np.ndarray:
    x = as_mat(m)
    peak = np.max(np.abs(x), axis=1, keepdims=True)
    if np.any(peak < ZERO_NORM):
        raise ZeroVector("cannot normalize a zero row")
    y = x / peak
    return y / np.sqrt(np.sum(y * y, axis=1, keepdims=True))


def similarity_matrix(a, b, normalize: bool = True) -> np.ndarray:
    """Pairwise row similarities of ``a`` (m x d) and ``b`` (n x d).

    Cosine when ``normalize`` is set, raw dot products otherwise.
    """
    a = as_mat(a)
    b = as_mat(b)
    if a.shape[1] != b.shape[1]:
        raise DimMismatch(f"column counts differ: {a.shape[1]} vs {b.shape[1]}")
    if normalize:
        a = l2_normalize_rows(a)
        b = l2_normalize_rows(b)
        return np.clip(a @ b.T, -1.0, 1.0)
    return a @ b.T


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not tau > 0 or not np.isfinite(tau):
        raise NonPositiveTemperature(f"temperature must be positive, got {tau}")
    return tau


def logsumexp(x, axis=None):
    """Shift-stabilized ``log(sum(exp(x)))``."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise DimMismatch("logsumexp of an empty array")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("logsumexp input contains non-finite entries")
    m = np.max(x, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True))
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


def stable_softmax(x, tau: float = 1.0, axis: int = -1) -> np.ndarray:
    """Softmax of ``x / tau`` along ``axis`` with max subtraction."""
    tau = _check_tau(tau)
    z = np.asarray(x, dtype=np.float64)
    if z.size == 0:
        raise DimMismatch("softmax of an empty array")
    if not np.all(np.isfinite(z)):
        raise NonFiniteInput("softmax input contains non-finite entries")
    z = z / tau
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def top_k_order(scores, k: int) -> np.ndarray:
    """Indices of the ``k`` largest scores, descending, ties by ascending index."""
    s = as_vec(scores)
    if not 1 <= k <= s.shape[0]:
        raise ValueError(f"k must be in [1, {s.shape[0]}], got {k}")
    return _top_k(s, k)[0]


def _top_k(s: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Unchecked ``top_k_order`` that also returns the selected scores."""
    n = s.shape[0]
    # partition first so only candidates at or above the k-th score get sorted
    cand = np.flatnonzero(s >= np.partition(s, n - k)[n - k]) if k < n else np.arange(n)
    vals = s[cand]
    pick = np.argsort(vals)[::-1]
    order, v = cand[pick], vals[pick]
    step = v[1:] != v[:-1]
    if not step.all():
        # reorder within runs of equal scores: key = run id * n + index, nearly sorted already
        order[1:] += np.cumsum(step) * n
        order.sort(kind="stable")  # timsort: linear on nearly sorted keys
        order %= n
    return order[:k], v[:k]
