"""Deterministic stand-in for a text encoder.

Every lowercase whitespace token is mapped to a unit vector drawn from a
generator seeded by a keyed BLAKE2b hash of the token bytes; a text is the
normalized mean of its token vectors. Same ``(text, dim, seed)`` gives a
bit-identical vector on every platform numpy's PCG64 supports.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import DimTooSmall, EmptyText
from .numerics import l2_normalize


def tokenize(text: str) -> list[str]:
    if not isinstance(text, str):
        raise EmptyText("text must be a string")
    tokens = text.lower().split()
    if not tokens:
        raise EmptyText("text is empty after trimming")
    return tokens


def token_vector(token: str, dim: int, seed: int) -> np.ndarray:
    if dim < 2:
        raise DimTooSmall(f"surrogate dimension must be >= 2, got {dim}")
    key = (int(seed) & (2**64 - 1)).to_bytes(8, "little")
    digest = hashlib.blake2b(token.encode("utf-8"), key=key, digest_size=32).digest()
    words = np.frombuffer(digest, dtype="<u4").astype(np.uint64)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(words.tolist())))
    return l2_normalize(rng.standard_normal(dim))


def surrogate_encode(text: str, dim: int, seed: int = 0) -> np.ndarray:
    tokens = tokenize(text)
    # sum in sorted-token order so the mean is exactly order invariant
    vecs = [token_vector(t, dim, seed) for t in sorted(tokens)]
    total = np.zeros(dim)
    for v in vecs:
        total = total + v
    return l2_normalize(total / len(vecs))


def word_embeddings_of(name: str, dim: int, seed: int = 0) -> np.ndarray:
    """One unit row per whitespace word of ``name``, in word order."""
    return np.stack([token_vector(t, dim, seed) for t in tokenize(name)])
