"""In-memory embedding containers and JSON manifest loading/saving."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .bemb import read_bemb, write_bemb
from .errors import DimMismatch, ManifestError, MissingFile, UnknownLabel
from .numerics import as_mat, l2_normalize, l2_normalize_rows


@dataclass(frozen=True)
class FrameEmbeddings:
    video_id: str
    frames: np.ndarray  # (T, d), unit rows

    def __post_init__(self):
        object.__setattr__(self, "frames", l2_normalize_rows(self.frames))
        self.frames.setflags(write=False)

    @property
    def T(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class CategoryEntry:
    name: str
    label: int
    cls_embedding: np.ndarray  # (d,)
    word_embeddings: np.ndarray  # (N, d)

    def __post_init__(self):
        if self.label < 0:
            raise UnknownLabel(f"negative label {self.label}")
        cls = l2_normalize(np.ravel(self.cls_embedding))
        words = l2_normalize_rows(self.word_embeddings)
        if words.shape[1] != cls.shape[0]:
            raise DimMismatch(
                f"category {self.name!r}: word dim {words.shape[1]} != cls dim {cls.shape[0]}"
            )
        cls.setflags(write=False)
        words.setflags(write=False)
        object.__setattr__(self, "cls_embedding", cls)
        object.__setattr__(self, "word_embeddings", words)

    @property
    def N(self) -> int:
        return self.word_embeddings.shape[0]


@dataclass(frozen=True)
class Lexicon:
    phrases: tuple[str, ...]
    embeddings: np.ndarray  # (L, d)

    def __post_init__(self):
        emb = l2_normalize_rows(self.embeddings)
        if len(self.phrases) == 0:
            raise ManifestError("lexicon has no phrases")
        if emb.shape[0] != len(self.phrases):
            raise DimMismatch(
                f"{len(self.phrases)} phrases but {emb.shape[0]} embedding rows"
            )
        emb.setflags(write=False)
        object.__setattr__(self, "phrases", tuple(self.phrases))
        object.__setattr__(self, "embeddings", emb)

    def __len__(self) -> int:
        return len(self.phrases)

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]


@dataclass(frozen=True)
class DatasetManifest:
    dim: int
    categories: tuple[CategoryEntry, ...]
    videos: tuple[tuple[FrameEmbeddings, int], ...]
    lexicon: Lexicon | None = field(default=None, compare=False)

    def __post_init__(self):
        cats = tuple(sorted(self.categories, key=lambda c: c.label))
        labels = [c.label for c in cats]
        if labels != list(range(len(cats))):
            raise UnknownLabel(f"category labels must be 0..K-1, got {labels}")
        for c in cats:
            if c.cls_embedding.shape[0] != self.dim:
                raise DimMismatch(f"category {c.name!r} has dim {c.cls_embedding.shape[0]}")
        for fe, y in self.videos:
            if fe.dim != self.dim:
                raise DimMismatch(f"video {fe.video_id!r} has dim {fe.dim}, expected {self.dim}")
            if not 0 <= y < len(cats):
                raise UnknownLabel(f"video {fe.video_id!r} has label {y} but only {len(cats)} categories")
        if self.lexicon is not None and self.lexicon.dim != self.dim:
            raise DimMismatch(f"lexicon dim {self.lexicon.dim} != dataset dim {self.dim}")
        object.__setattr__(self, "categories", cats)
        object.__setattr__(self, "videos", tuple(self.videos))

    @property
    def num_classes(self) -> int:
        return len(self.categories)

    def subset(self, labels) -> "DatasetManifest":
        """Restrict to the given class labels, relabelled 0..k-1 in ascending order."""
        keep = sorted(set(int(y) for y in labels))
        remap = {old: new for new, old in enumerate(keep)}
        cats = tuple(
            CategoryEntry(c.name, remap[c.label], c.cls_embedding, c.word_embeddings)
            for c in self.categories
            if c.label in remap
        )
        vids = tuple((fe, remap[y]) for fe, y in self.videos if y in remap)
        return DatasetManifest(self.dim, cats, vids, self.lexicon)


def _resolve(base: str, rel: str) -> str:
    path = rel if os.path.isabs(rel) else os.path.join(base, rel)
    if not os.path.isfile(path):
        raise MissingFile(f"referenced file not found: {path}")
    return path


def _load_rows(base, rel, dim, what):
    m = as_mat(read_bemb(_resolve(base, rel)))
    if m.shape[1] != dim:
        raise DimMismatch(f"{what}: {rel} has {m.shape[1]} columns, manifest dim is {dim}")
    return m


def load_manifest(path):
    """Load a dataset or lexicon manifest; the document's keys decide which."""
    if not os.path.isfile(path):
        raise MissingFile(f"manifest not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: invalid JSON ({exc})") from exc
    base = os.path.dirname(os.path.abspath(path))
    try:
        dim = int(doc["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"{path}: missing or invalid 'dim'") from exc

    if "phrases" in doc:
        return _lexicon_from_doc(doc, base, dim)
    if "categories" not in doc or "videos" not in doc:
        raise ManifestError(f"{path}: need either 'phrases' or 'categories'+'videos'")

    cats = []
    for entry in doc["categories"]:
        cls = _load_rows(base, entry["cls_bemb"], dim, entry["name"])
        if cls.shape[0] != 1:
            raise DimMismatch(f"category {entry['name']!r}: cls_bemb must hold one row")
        words = _load_rows(base, entry["words_bemb"], dim, entry["name"])
        cats.append(CategoryEntry(entry["name"], int(entry["label"]), cls[0], words))
    known = {c.label for c in cats}
    videos = []
    for entry in doc["videos"]:
        y = int(entry["label"])
        if y not in known:
            raise UnknownLabel(f"video {entry['id']!r}: label {y} matches no category")
        frames = _load_rows(base, entry["frames_bemb"], dim, entry["id"])
        videos.append((FrameEmbeddings(str(entry["id"]), frames), y))

    lexicon = None
    if doc.get("lexicon"):
        lexicon = load_manifest(_resolve(base, doc["lexicon"]))
        if not isinstance(lexicon, Lexicon):
            raise ManifestError(f"{doc['lexicon']} is not a lexicon manifest")
    return DatasetManifest(dim, tuple(cats), tuple(videos), lexicon)


def _lexicon_from_doc(doc, base, dim):
    emb = _load_rows(base, doc["embeddings_bemb"], dim, "lexicon")
    return Lexicon(tuple(str(p) for p in doc["phrases"]), emb)


def save_lexicon(directory, lexicon: Lexicon, name: str = "lexicon") -> str:
    os.makedirs(directory, exist_ok=True)
    bemb_name = f"{name}.bemb"
    write_bemb(os.path.join(directory, bemb_name), lexicon.embeddings)
    path = os.path.join(directory, f"{name}.json")
    doc = {"dim": lexicon.dim, "phrases": list(lexicon.phrases), "embeddings_bemb": bemb_name}
    _dump(path, doc)
    return path


def save_dataset(directory, dataset: DatasetManifest, name: str = "manifest") -> str:
    """Write BEMB files plus a JSON manifest under ``directory``; returns the manifest path."""
    os.makedirs(os.path.join(directory, "emb"), exist_ok=True)
    doc = {"dim": dataset.dim, "categories": [], "videos": []}
    for c in dataset.categories:
        cls_rel = f"emb/cls_{c.label:05d}.bemb"
        words_rel = f"emb/words_{c.label:05d}.bemb"
        write_bemb(os.path.join(directory, cls_rel), c.cls_embedding[None, :])
        write_bemb(os.path.join(directory, words_rel), c.word_embeddings)
        doc["categories"].append(
            {"name": c.name, "label": c.label, "cls_bemb": cls_rel, "words_bemb": words_rel}
        )
    for i, (fe, y) in enumerate(dataset.videos):
        rel = f"emb/video_{i:06d}.bemb"
        write_bemb(os.path.join(directory, rel), fe.frames)
        doc["videos"].append({"id": fe.video_id, "frames_bemb": rel, "label": y})
    if dataset.lexicon is not None:
        save_lexicon(directory, dataset.lexicon)
        doc["lexicon"] = "lexicon.json"
    path = os.path.join(directory, f"{name}.json")
    _dump(path, doc)
    return path


def _dump(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
