"""Video-to-text direction: lexicon retrieval and attribute-sentence embedding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadK, DimMismatch, EmptyAttributes, EmptyText, MissingPlaceholder
from .numerics import _top_k, as_vec, l2_normalize
from .store import FrameEmbeddings, Lexicon
from .surrogate import surrogate_encode

DEFAULT_PREFIX = "This is a video about {}"
DEFAULT_K = 5
JOINER = ", "


@dataclass(frozen=True)
class AttributeSet:
    """Retrieved phrases, best first.

    Stores lexicon indices and cosines as arrays; phrase tuples are built on access so that
    large ``k`` stays cheap.
    """

    order: np.ndarray
    scores: np.ndarray
    vocabulary: tuple[str, ...]

    def __post_init__(self):
        order = np.asarray(self.order, dtype=np.int64)
        scores = np.asarray(self.scores, dtype=np.float64)
        if order.shape != scores.shape or order.ndim != 1:
            raise ValueError("order and scores must be equal-length vectors")
        for name, arr in (("order", order), ("scores", scores)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def k(self) -> int:
        return len(self.order)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(self.order.tolist())

    @property
    def texts(self) -> list[str]:
        return [self.vocabulary[i] for i in self.order.tolist()]

    @property
    def phrases(self) -> tuple[tuple[str, float], ...]:
        return tuple(zip(self.texts, self.scores.tolist()))


@dataclass(frozen=True)
class AttributeSentence:
    text: str
    prefix: str
    e_a: np.ndarray


@dataclass(frozen=True)
class Surrogate:
    """Encode the sentence with the hashing surrogate encoder."""

    seed: int = 0


@dataclass(frozen=True)
class Ingested:
    """Use an externally supplied sentence embedding."""

    vector: np.ndarray


def retrieval_embedding(frames) -> np.ndarray:
    """Normalized mean of the frame rows; raises ZeroVector if they cancel."""
    v = frames.frames if isinstance(frames, FrameEmbeddings) else np.asarray(frames, float)
    return l2_normalize(v.mean(axis=0))


def retrieve_attributes(vemb, lexicon: Lexicon, k: int = DEFAULT_K) -> AttributeSet:
    """Top-``k`` lexicon phrases by cosine to ``vemb``; ties go to the lower index."""
    q = l2_normalize(vemb)
    L = len(lexicon)
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= L:
        raise BadK(f"k must be in [1, {L}], got {k}")
    if q.shape[0] != lexicon.dim:
        raise DimMismatch(f"query dim {q.shape[0]} != lexicon dim {lexicon.dim}")
    scores = lexicon.embeddings @ q
    order, top = _top_k(scores, k)
    return AttributeSet(order, top, lexicon.phrases)


def build_attribute_sentence(attrs, prefix: str | None = DEFAULT_PREFIX) -> str:
    """Join phrases with ", " and drop them into the prefix's ``{}`` slot.

    ``prefix=None`` disables the prompt and returns the bare joined phrases.
    """
    texts = attrs.texts if isinstance(attrs, AttributeSet) else list(attrs)
    if not texts:
        raise EmptyAttributes("no attributes to join")
    joined = JOINER.join(texts)
    if prefix is None:
        return joined
    if "{}" not in prefix:
        raise MissingPlaceholder(f"prefix {prefix!r} has no '{{}}' placeholder")
    return prefix.replace("{}", joined, 1)


def attribute_embedding(sentence: str, source, dim: int | None = None) -> np.ndarray:
    """Embed an attribute sentence.

    ``Surrogate`` sources need ``dim``; ``Ingested`` vectors are re-normalized.
    """
    if not isinstance(sentence, str) or not sentence.strip():
        raise EmptyText("attribute sentence is empty")
    if isinstance(source, Ingested):
        return l2_normalize(as_vec(source.vector))
    if isinstance(source, Surrogate):
        if dim is None:
            raise DimMismatch("surrogate encoding needs an explicit dim")
        return surrogate_encode(sentence, dim, source.seed)
    raise TypeError(f"unknown attribute embedding source {source!r}")


def describe(frames, lexicon: Lexicon, k: int = DEFAULT_K, prefix=DEFAULT_PREFIX,
             source=None) -> tuple[AttributeSet, AttributeSentence]:
    """Full retrieval -> sentence -> embedding chain for one video.

    With ``source=None`` the sentence embedding is the normalized mean of the
    retrieved phrases' lexicon embeddings, passed through as ``Ingested``.
    """
    attrs = retrieve_attributes(retrieval_embedding(frames), lexicon, k)
    text = build_attribute_sentence(attrs, prefix)
    if source is None:
        source = Ingested(lexicon.embeddings[list(attrs.indices)].mean(axis=0))
    e_a = attribute_embedding(text, source, dim=lexicon.dim)
    return attrs, AttributeSentence(text, prefix or "", e_a)
