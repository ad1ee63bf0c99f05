"""Seeded synthetic datasets for exercising the pipeline end to end."""

from __future__ import annotations

import numpy as np

from .errors import DimTooSmall, TooFewClasses
from .store import CategoryEntry, DatasetManifest, FrameEmbeddings, Lexicon


def orthonormal_rows(rng: np.random.Generator, k: int, dim: int) -> np.ndarray:
    """``k`` orthonormal rows in ``dim`` dimensions (QR of a Gaussian matrix)."""
    q, r = np.linalg.qr(rng.standard_normal((dim, k)))
    # fix signs so the result is a deterministic function of the draw
    q = q * np.sign(np.diag(r))
    return q.T.copy()


def orthogonal_noise(rng, basis: np.ndarray, dim: int) -> np.ndarray:
    """Random unit vector orthogonal to every row of ``basis``."""
    g = rng.standard_normal(dim)
    for _ in range(2):  # second pass removes round-off leakage
        g = g - basis.T @ (basis @ g)
    return g / np.linalg.norm(g)


def _unit(x):
    return x / np.linalg.norm(x)


def class_name(label: int) -> str:
    return f"action {label:02d}"


def _categories(rng, cls, word_noise):
    cats = []
    for y, c in enumerate(cls):
        n_words = len(class_name(y).split())
        words = [_unit(c + word_noise * rng.standard_normal(c.shape[0])) for _ in range(n_words)]
        cats.append(CategoryEntry(class_name(y), y, c, np.stack(words)))
    return cats


def _lexicon(rng, cls, phrases_per_class, phrase_noise, extra_phrases):
    dim = cls.shape[1]
    phrases, rows = [], []
    for y, c in enumerate(cls):
        for j in range(phrases_per_class):
            phrases.append(f"{class_name(y)} cue {j}")
            rows.append(_unit(c + phrase_noise * rng.standard_normal(dim)))
    for j in range(extra_phrases):
        phrases.append(f"background {j}")
        rows.append(_unit(rng.standard_normal(dim)))
    return Lexicon(tuple(phrases), np.stack(rows))


def gen_synthetic(classes: int = 8, videos: int = 64, frames: int = 8, dim: int = 32,
                  noise_frames: int = 0, seed: int = 0, word_noise: float = 0.05,
                  phrases_per_class: int = 5, extra_phrases: int = 8) -> DatasetManifest:
    """Separable dataset: orthonormal classes, frames equal to the class embedding.

    ``noise_frames`` of each video's ``frames`` are replaced by unit vectors
    orthogonal to every class embedding, at seeded positions. Videos cycle
    through the labels. A lexicon with ``phrases_per_class`` perturbed copies
    of each class embedding plus random background phrases is attached.
    """
    if classes < 2:
        raise TooFewClasses(f"need at least 2 classes, got {classes}")
    if dim < classes or (noise_frames > 0 and dim <= classes):
        raise DimTooSmall(f"dim {dim} too small for {classes} classes with noise frames")
    if not 0 <= noise_frames < frames:
        raise ValueError("noise_frames must be in [0, frames)")
    rng = np.random.default_rng(seed)
    cls = orthonormal_rows(rng, classes, dim)
    cats = _categories(rng, cls, word_noise)
    vids = []
    for i in range(videos):
        y = i % classes
        rows = np.repeat(cls[y][None, :], frames, axis=0)
        for t in rng.permutation(frames)[:noise_frames]:
            rows[t] = orthogonal_noise(rng, cls, dim)
        vids.append((FrameEmbeddings(f"video_{i:04d}", rows), y))
    lexicon = _lexicon(rng, cls, phrases_per_class, 0.1, extra_phrases)
    return DatasetManifest(dim, tuple(cats), tuple(vids), lexicon)


def distractor_dataset(classes: int = 8, videos: int = 64, frames: int = 8, dim: int = 16,
                       seed: int = 0, signal_noise: float = 0.3) -> DatasetManifest:
    """Videos whose frames are half weak class evidence, half a distractor.

    Signal frames are ``cls_y`` plus isotropic Gaussian noise of scale
    ``signal_noise``; the other half repeat one random unit vector per video,
    orthogonalized against the true class only, so it can resemble wrong
    classes. Mean pooling dilutes the evidence with the distractor;
    category-conditioned saliency can down-weight it.
    """
    if classes < 2:
        raise TooFewClasses(f"need at least 2 classes, got {classes}")
    if dim <= classes:
        raise DimTooSmall(f"dim {dim} must exceed {classes} classes")
    rng = np.random.default_rng(seed)
    cls = orthonormal_rows(rng, classes, dim)
    cats = _categories(rng, cls, 0.05)
    vids = []
    half = frames // 2
    for i in range(videos):
        y = i % classes
        distractor = orthogonal_noise(rng, cls[y][None, :], dim)
        rows = np.empty((frames, dim))
        for t in range(frames):
            if t < frames - half:
                rows[t] = _unit(cls[y] + signal_noise * rng.standard_normal(dim))
            else:
                rows[t] = distractor
        rows = rows[rng.permutation(frames)]
        vids.append((FrameEmbeddings(f"video_{i:04d}", rows), y))
    return DatasetManifest(dim, tuple(cats), tuple(vids), None)
