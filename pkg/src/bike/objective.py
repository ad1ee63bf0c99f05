"""Symmetric multi-positive InfoNCE over video/attribute/category embeddings.

For a logit matrix ``Z[i, j] = x_i . y_j / tau`` the directional loss is

    l = -(1/B) sum_i (1/|K(i)|) sum_{k in K(i)} log softmax(Z[i, :])[k]

where ``K(i)`` holds every batch index sharing row ``i``'s label. Its
gradient w.r.t. ``Z`` is ``(softmax(Z) - targets) / B`` with ``targets``
the row-normalized positive mask, which chains to ``dX = G Y / tau`` and
``dY = G^T X / tau``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, LengthMismatch
from .numerics import _check_tau, as_mat, logsumexp, stable_softmax

DEFAULT_TAU = 0.01


@dataclass
class Batch:
    video_embs: np.ndarray
    cat_embs: np.ndarray
    labels: np.ndarray
    tau: float = DEFAULT_TAU
    attr_embs: np.ndarray | None = None

    def __post_init__(self):
        self.video_embs = as_mat(self.video_embs)
        self.cat_embs = as_mat(self.cat_embs)
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.attr_embs is not None:
            self.attr_embs = as_mat(self.attr_embs)
        self.tau = _check_tau(self.tau)
        B = self.labels.shape[0]
        mats = [self.video_embs, self.cat_embs] + (
            [self.attr_embs] if self.attr_embs is not None else []
        )
        if B == 0 or any(m.shape[0] != B for m in mats):
            raise LengthMismatch(f"batch rows {[m.shape[0] for m in mats]} vs {B} labels")
        if len({m.shape[1] for m in mats}) != 1:
            raise DimMismatch("embedding dims differ inside the batch")
        if np.any(self.labels < 0):
            raise ValueError("labels must be nonnegative")

    @property
    def size(self) -> int:
        return self.labels.shape[0]

    def permuted(self, perm) -> "Batch":
        perm = np.asarray(perm)
        return Batch(
            self.video_embs[perm],
            self.cat_embs[perm],
            self.labels[perm],
            self.tau,
            None if self.attr_embs is None else self.attr_embs[perm],
        )


@dataclass
class LossBreakdown:
    l_v2c: float
    l_c2v: float
    l_v: float
    l_a2c: float
    l_c2a: float
    l_a: float
    total: float
    grad_video: np.ndarray = field(repr=False)
    grad_cat: np.ndarray = field(repr=False)
    grad_attr: np.ndarray | None = field(default=None, repr=False)


def positive_sets(labels) -> list[frozenset[int]]:
    y = np.asarray(labels).ravel()
    groups: dict = {}
    for i, lab in enumerate(y.tolist()):
        groups.setdefault(lab, []).append(i)
    return [frozenset(groups[lab]) for lab in y.tolist()]


def positive_mask(row_labels, col_labels=None) -> np.ndarray:
    """Boolean (R, C) mask of equal labels."""
    r = np.asarray(row_labels).ravel()
    c = r if col_labels is None else np.asarray(col_labels).ravel()
    return r[:, None] == c[None, :]


def contrastive_logits(X, Y, tau: float = DEFAULT_TAU) -> np.ndarray:
    tau = _check_tau(tau)
    X = as_mat(X)
    Y = as_mat(Y)
    if X.shape[1] != Y.shape[1]:
        raise DimMismatch(f"dims differ: {X.shape[1]} vs {Y.shape[1]}")
    return (X @ Y.T) / tau


def row_losses(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Per-row multi-positive cross-entropy: lse(z_i) - mean_{k in K(i)} z_ik."""
    lse = logsumexp(logits, axis=1)
    counts = mask.sum(axis=1)
    pos = np.where(mask, logits, 0.0).sum(axis=1) / counts
    return lse - pos


def row_losses_grad(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Gradient of ``sum(row_losses)`` with respect to the logits."""
    targets = mask / mask.sum(axis=1, keepdims=True)
    return stable_softmax(logits, 1.0, axis=1) - targets


def _directional(X, Y, mask, tau):
    Z = contrastive_logits(X, Y, tau)
    rows = row_losses(Z, mask)
    return float(np.sum(rows) / rows.shape[0]), Z


def symmetric_infonce(X, Y, labels, tau: float = DEFAULT_TAU, multi_positive: bool = True):
    """Return ``(l_x2y, l_y2x, l_sym)``.

    ``l_x2y`` softmaxes row ``i`` of ``X`` against all rows of ``Y``;
    ``l_y2x`` does the reverse. With ``multi_positive=False`` only the
    diagonal counts as positive (plain InfoNCE).
    """
    labels = np.asarray(labels).ravel()
    X = as_mat(X)
    Y = as_mat(Y)
    if not X.shape[0] == Y.shape[0] == labels.shape[0]:
        raise LengthMismatch(f"rows {X.shape[0]}, {Y.shape[0]} vs {labels.shape[0]} labels")
    mask = positive_mask(labels) if multi_positive else np.eye(labels.shape[0], dtype=bool)
    l_xy, _ = _directional(X, Y, mask, tau)
    l_yx, _ = _directional(Y, X, mask, tau)
    return l_xy, l_yx, (l_xy + l_yx) / 2


def _pair_with_grad(C, V, mask, tau):
    """Losses and row-gradients for one (category, other) pair.

    ``x2c`` is softmax over the other modality for a fixed category row,
    ``c2x`` over categories for a fixed other row.
    """
    B = C.shape[0]
    Zcv = contrastive_logits(C, V, tau)
    Zvc = contrastive_logits(V, C, tau)
    l_x2c = float(np.sum(row_losses(Zcv, mask)) / B)
    l_c2x = float(np.sum(row_losses(Zvc, mask)) / B)
    # the symmetric loss carries a factor 1/2 on each direction
    G1 = row_losses_grad(Zcv, mask) / (2 * B)
    G2 = row_losses_grad(Zvc, mask) / (2 * B)
    dC = (G1 @ V + G2.T @ V) / tau
    dV = (G1.T @ C + G2 @ C) / tau
    return l_x2c, l_c2x, dC, dV


def total_loss(batch: Batch, multi_positive: bool = True) -> LossBreakdown:
    """Video-branch plus attribute-branch symmetric loss with row gradients."""
    B = batch.size
    mask = positive_mask(batch.labels) if multi_positive else np.eye(B, dtype=bool)
    C, V, tau = batch.cat_embs, batch.video_embs, batch.tau
    l_v2c, l_c2v, dC, dV = _pair_with_grad(C, V, mask, tau)
    l_v = (l_v2c + l_c2v) / 2
    l_a2c = l_c2a = l_a = 0.0
    dA = None
    if batch.attr_embs is not None:
        l_a2c, l_c2a, dC_a, dA = _pair_with_grad(C, batch.attr_embs, mask, tau)
        l_a = (l_a2c + l_c2a) / 2
        dC = dC + dC_a
    return LossBreakdown(
        l_v2c, l_c2v, l_v, l_a2c, l_c2a, l_a, l_v + l_a,
        grad_video=dV, grad_cat=dC, grad_attr=dA,
    )


def _extended_total(V, C, A, mask, tau) -> np.longdouble:
    """Forward total loss in extended precision, independent of the float64 path."""
    def lse_rows(Z):
        m = Z.max(axis=1, keepdims=True)
        return (m + np.log(np.exp(Z - m).sum(axis=1, keepdims=True)))[:, 0]

    def direction(X, Y):
        Z = (X @ Y.T) / tau
        pos = np.where(mask, Z, 0).sum(axis=1) / mask.sum(axis=1)
        return (lse_rows(Z) - pos).sum() / Z.shape[0]

    total = (direction(C, V) + direction(V, C)) / 2
    if A is not None:
        total = total + (direction(C, A) + direction(A, C)) / 2
    return total


def finite_diff_check(batch: Batch, epsilon: float = 1e-5, multi_positive: bool = True) -> float:
    """Max relative error between analytic and central-difference gradients.

    Every coordinate of every embedding matrix is perturbed by ``+-epsilon``;
    the relative error uses ``max(|analytic|, 1e-8)`` as denominator. The
    difference quotient is evaluated in ``np.longdouble`` because at small
    temperatures float64 cancellation alone (``ulp(loss) / epsilon``) exceeds
    the tolerance on near-zero gradient coordinates.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon must lie in [1e-7, 1e-3], got {epsilon}")
    analytic = total_loss(batch, multi_positive)
    B = batch.size
    mask = positive_mask(batch.labels) if multi_positive else np.eye(B, dtype=bool)
    ext = np.longdouble
    mats = {
        "video": batch.video_embs.astype(ext),
        "cat": batch.cat_embs.astype(ext),
        "attr": None if batch.attr_embs is None else batch.attr_embs.astype(ext),
    }
    tau = ext(batch.tau)
    eps = ext(epsilon)
    grads = {"video": analytic.grad_video, "cat": analytic.grad_cat, "attr": analytic.grad_attr}

    worst = 0.0
    for name, grad in grads.items():
        base = mats[name]
        if base is None:
            continue
        for idx in np.ndindex(*base.shape):
            saved = base[idx]
            base[idx] = saved + eps
            up = _extended_total(mats["video"], mats["cat"], mats["attr"], mask, tau)
            base[idx] = saved - eps
            down = _extended_total(mats["video"], mats["cat"], mats["attr"], mask, tau)
            base[idx] = saved
            numeric = float((up - down) / (2 * eps))
            err = abs(numeric - grad[idx]) / max(abs(grad[idx]), 1e-8)
            worst = max(worst, err)
    return worst


def random_batch(rng: np.random.Generator, B: int, d: int, tau: float,
                 num_labels: int | None = None, with_attrs: bool = True) -> Batch:
    """Random unit-norm batch; ``num_labels < B`` forces duplicate labels."""
    def unit(n):
        m = rng.standard_normal((n, d))
        return m / np.linalg.norm(m, axis=1, keepdims=True)

    num_labels = B if num_labels is None else num_labels
    labels = rng.integers(0, num_labels, size=B) if num_labels < B else rng.permutation(B)
    classes = unit(int(labels.max()) + 1)
    return Batch(
        video_embs=unit(B),
        cat_embs=classes[labels],
        labels=labels,
        tau=tau,
        attr_embs=unit(B) if with_attrs else None,
    )
