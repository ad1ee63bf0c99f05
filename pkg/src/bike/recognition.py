"""Per-category scoring, two-branch fusion, top-k metrics, half-class protocol."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field

import numpy as np

from .attributes import DEFAULT_K, DEFAULT_PREFIX, Surrogate, describe
from .concept_spotting import DEFAULT_TAU_VCS, Aggregation, mean_pool, saliency_from_scores
from .errors import (
    BadK,
    DimMismatch,
    EmptyDataset,
    LambdaOutOfRange,
    LengthMismatch,
    ManifestError,
    TooFewClasses,
)
from .numerics import l2_normalize, l2_normalize_rows, _top_k
from .store import DatasetManifest, FrameEmbeddings, Lexicon

DEFAULT_LAMBDA = 0.6


class Branch(str, enum.Enum):
    VIDEO = "video"
    ATTRIBUTES = "attributes"
    FUSED = "fused"


@dataclass(frozen=True)
class ScoreVector:
    scores: np.ndarray
    branch: Branch

    def __len__(self) -> int:
        return self.scores.shape[0]


@dataclass(frozen=True)
class FusionConfig:
    lam: float = DEFAULT_LAMBDA
    tau_vcs: float = DEFAULT_TAU_VCS
    k_attributes: int = DEFAULT_K
    prefix: str | None = DEFAULT_PREFIX
    aggregation: Aggregation = Aggregation.CONCEPT_SPOTTING
    use_attributes: bool = True
    # "lexicon": mean of retrieved phrase embeddings; "surrogate": hashing encoder
    attr_encoder: str = "lexicon"
    surrogate_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise LambdaOutOfRange(f"fusion weight must be in [0, 1], got {self.lam}")
        object.__setattr__(self, "aggregation", Aggregation(self.aggregation))
        if self.attr_encoder not in ("lexicon", "surrogate"):
            raise ValueError(f"unknown attribute encoder {self.attr_encoder!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["aggregation"] = self.aggregation.value
        return d


@dataclass
class EvalReport:
    top1: float
    top5: float
    k5: int
    predictions: list = field(repr=False)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "top1": self.top1,
            "top5": self.top5,
            "top5_k": self.k5,
            "num_videos": len(self.predictions),
            "predictions": self.predictions,
            "config": self.config,
        }


def video_scores(video: FrameEmbeddings, cats, cfg: FusionConfig = FusionConfig()) -> ScoreVector:
    """Cosine between the video representation and every category's cls embedding.

    Under concept spotting the representation is recomputed per category from
    that category's word embeddings.
    """
    if any(c.cls_embedding.shape[0] != video.dim for c in cats):
        raise DimMismatch("category and frame dimensions differ")
    cls = np.stack([c.cls_embedding for c in cats])
    if cfg.aggregation is Aggregation.MEAN_POOL:
        reps = mean_pool(video).e_v[None, :]
    else:
        # one frame-by-word product for all categories, then per-category saliency
        words = np.concatenate([c.word_embeddings for c in cats])
        dots = video.frames @ words.T
        bounds = np.cumsum([0] + [c.N for c in cats])
        sal = np.stack([saliency_from_scores(dots[:, a:b], cfg.tau_vcs)
                        for a, b in zip(bounds[:-1], bounds[1:])])
        reps = sal @ video.frames
    reps = l2_normalize_rows(reps)
    out = np.clip(np.sum(reps * cls, axis=1), -1.0, 1.0)
    return ScoreVector(out, Branch.VIDEO)


def attribute_scores(e_a, cats) -> ScoreVector:
    e_a = l2_normalize(e_a)
    if any(c.cls_embedding.shape[0] != e_a.shape[0] for c in cats):
        raise DimMismatch("attribute and category dimensions differ")
    cls = np.stack([c.cls_embedding for c in cats])
    return ScoreVector(np.clip(cls @ e_a, -1.0, 1.0), Branch.ATTRIBUTES)


def fuse(sv: ScoreVector, sa: ScoreVector, lam: float = DEFAULT_LAMBDA) -> ScoreVector:
    if not 0.0 <= lam <= 1.0:
        raise LambdaOutOfRange(f"fusion weight must be in [0, 1], got {lam}")
    a = np.asarray(sv.scores if isinstance(sv, ScoreVector) else sv, dtype=np.float64)
    b = np.asarray(sa.scores if isinstance(sa, ScoreVector) else sa, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"score lengths differ: {a.shape} vs {b.shape}")
    # exact passthrough at the endpoints
    if lam == 1.0:
        fused = a.copy()
    elif lam == 0.0:
        fused = b.copy()
    else:
        fused = lam * a + (1.0 - lam) * b
    return ScoreVector(fused, Branch.FUSED)


def predict_topk(s, k: int) -> list[int]:
    """Labels of the ``k`` best scores, descending, ties to the lower label."""
    scores = np.asarray(s.scores if isinstance(s, ScoreVector) else s, dtype=np.float64)
    K = scores.shape[0]
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= K:
        raise BadK(f"k must be in [1, {K}], got {k}")
    return _top_k(scores, k)[0].tolist()


def score_video(video: FrameEmbeddings, cats, cfg: FusionConfig,
                lexicon: Lexicon | None = None) -> tuple[ScoreVector, dict]:
    """Final score vector for one video plus a small trace of the attribute branch."""
    sv = video_scores(video, cats, cfg)
    if not cfg.use_attributes:
        return sv, {}
    if lexicon is None:
        raise ManifestError("the attributes branch needs a lexicon")
    source = Surrogate(cfg.surrogate_seed) if cfg.attr_encoder == "surrogate" else None
    attrs, sentence = describe(video, lexicon, cfg.k_attributes, cfg.prefix, source)
    sa = attribute_scores(sentence.e_a, cats)
    return fuse(sv, sa, cfg.lam), {"attributes": attrs.texts, "sentence": sentence.text}


def evaluate(dataset: DatasetManifest, cfg: FusionConfig = FusionConfig(),
             lexicon: Lexicon | None = None) -> EvalReport:
    if not dataset.videos:
        raise EmptyDataset("dataset has no videos")
    lexicon = lexicon if lexicon is not None else dataset.lexicon
    cats = dataset.categories
    K = len(cats)
    k5 = min(5, K)
    hit1 = hit5 = 0
    predictions = []
    for video, label in dataset.videos:
        scores, trace = score_video(video, cats, cfg, lexicon)
        top = predict_topk(scores, k5)
        hit1 += top[0] == label
        hit5 += label in top
        predictions.append({"video_id": video.video_id, "label": label, "topk": top, **trace})
    n = len(dataset.videos)
    return EvalReport(hit1 / n, hit5 / n, k5, predictions, cfg.to_dict())


def half_class_eval(dataset: DatasetManifest, cfg: FusionConfig = FusionConfig(),
                    repeats: int = 10, seed: int = 0, lexicon: Lexicon | None = None):
    """Top-1 over random halves of the class set.

    Each repeat draws ``K // 2`` classes without replacement from one seeded
    generator and evaluates on the restricted dataset. Returns
    ``(mean, population std, per-repeat list)``.
    """
    K = dataset.num_classes
    if K < 2:
        raise TooFewClasses(f"need at least 2 classes, got {K}")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    rng = np.random.default_rng(seed)
    accs = []
    for _ in range(repeats):
        keep = rng.choice(K, size=K // 2, replace=False)
        sub = dataset.subset(keep)
        accs.append(evaluate(sub, cfg, lexicon).top1)
    mean = sum(accs) / len(accs)
    std = float(np.sqrt(sum((a - mean) ** 2 for a in accs) / len(accs)))
    return mean, std, accs

