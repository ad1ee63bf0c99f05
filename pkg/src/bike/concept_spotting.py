"""Category-conditioned temporal saliency and saliency-weighted frame pooling."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, LengthMismatch
from .numerics import _check_tau, as_mat, l2_normalize_rows, stable_softmax
from .store import FrameEmbeddings

DEFAULT_TAU_VCS = 0.01


class Aggregation(str, enum.Enum):
    MEAN_POOL = "mean"
    CONCEPT_SPOTTING = "vcs"


@dataclass(frozen=True)
class SaliencyVector:
    weights: np.ndarray
    tau_vcs: float


@dataclass(frozen=True)
class VideoRepresentation:
    e_v: np.ndarray
    method: Aggregation


def _frames(frames) -> np.ndarray:
    if isinstance(frames, FrameEmbeddings):
        return frames.frames
    return l2_normalize_rows(frames)


def saliency_from_scores(scores, tau_vcs: float = DEFAULT_TAU_VCS) -> np.ndarray:
    """Per-frame saliency from a (T, N) frame-by-word score matrix.

    Each word column is softmaxed over frames, then the N distributions are
    averaged. Word columns are summed in sorted order so the result does not
    depend on word order.
    """
    s = as_mat(scores)
    per_word = stable_softmax(s, tau_vcs, axis=0)  # (T, N)
    n = per_word.shape[1]
    # canonical column order: lexicographic on the column values
    order = np.lexsort(per_word[::-1]) if n > 1 else np.arange(1)
    acc = np.zeros(per_word.shape[0])
    for j in order:
        acc = acc + per_word[:, j]
    return acc / n


def temporal_saliency(frames, words, tau_vcs: float = DEFAULT_TAU_VCS) -> SaliencyVector:
    """Saliency of each frame with respect to a category's word embeddings.

    Args:
        frames: ``FrameEmbeddings`` or a (T, d) matrix; rows are re-normalized.
        words: (N, d) word embeddings of the category name.
        tau_vcs: softmax temperature.
    """
    tau_vcs = _check_tau(tau_vcs)
    v = _frames(frames)
    t = l2_normalize_rows(words)
    if v.shape[1] != t.shape[1]:
        raise DimMismatch(f"frame dim {v.shape[1]} != word dim {t.shape[1]}")
    return SaliencyVector(saliency_from_scores(v @ t.T, tau_vcs), tau_vcs)


def aggregate(frames, s: SaliencyVector) -> VideoRepresentation:
    v = _frames(frames)
    w = np.asarray(s.weights, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] != v.shape[0]:
        raise LengthMismatch(f"{w.shape} saliency weights for {v.shape[0]} frames")
    return VideoRepresentation(w @ v, Aggregation.CONCEPT_SPOTTING)


def mean_pool(frames) -> VideoRepresentation:
    v = _frames(frames)
    return VideoRepresentation(v.mean(axis=0), Aggregation.MEAN_POOL)


def spot(frames, words, tau_vcs: float = DEFAULT_TAU_VCS) -> VideoRepresentation:
    """Saliency followed by weighted aggregation."""
    return aggregate(frames, temporal_saliency(frames, words, tau_vcs))
