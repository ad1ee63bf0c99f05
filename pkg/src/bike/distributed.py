"""Simulated multi-worker InfoNCE with batch gathering.

Each of ``M`` workers owns ``N`` contiguous rows of a global batch of size
``N * M``. After an all-gather every worker scores its local rows against
all ``N * M`` rows of the other modality, in both directions, and the mean
of the worker losses is the full-batch symmetric loss.

Workers can run sequentially or on threads; the gather is a barrier and the
final reduction is a fixed left fold in worker order, so the result is
bit-identical either way.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import GatherNotRun, InconsistentShardPlan, IndivisibleBatch
from .numerics import _check_tau
from .objective import Batch, contrastive_logits, positive_mask, row_losses


@dataclass(frozen=True)
class ShardPlan:
    M: int
    N: int

    @property
    def global_size(self) -> int:
        return self.M * self.N

    def rows(self, worker: int) -> range:
        return range(worker * self.N, (worker + 1) * self.N)


@dataclass
class WorkerState:
    worker_id: int
    plan: ShardPlan
    local_vision: np.ndarray
    local_text: np.ndarray
    gathered_vision: np.ndarray | None = field(default=None, repr=False)
    gathered_text: np.ndarray | None = field(default=None, repr=False)

    @property
    def gathered(self) -> bool:
        return self.gathered_vision is not None and self.gathered_text is not None


def shard_batch(batch: Batch, M: int) -> tuple[list[WorkerState], ShardPlan]:
    B = batch.size
    if M < 1 or B % M:
        raise IndivisibleBatch(f"batch of {B} cannot be split across {M} workers")
    plan = ShardPlan(M, B // M)
    states = []
    for w in range(M):
        r = plan.rows(w)
        states.append(
            WorkerState(
                w,
                plan,
                batch.video_embs[r.start:r.stop].copy(),
                batch.cat_embs[r.start:r.stop].copy(),
            )
        )
    return states, plan


class GatherGroup:
    """In-process all-gather: every member blocks until all have contributed."""

    def __init__(self, size: int):
        self.size = size
        self._slots: list = [None] * size
        self._lock = threading.Lock()
        self._barrier = threading.Barrier(size)

    def all_gather(self, rank: int, tensor: np.ndarray) -> np.ndarray:
        with self._lock:
            self._slots[rank] = tensor
        self._barrier.wait()
        # concatenation in rank order, identical on every member
        out = np.concatenate(self._slots, axis=0)
        # slots stay untouched until every member has read them
        self._barrier.wait()
        return out


def _check_plan(states) -> ShardPlan:
    if not states:
        raise InconsistentShardPlan("no workers")
    plan = states[0].plan
    ids = [s.worker_id for s in states]
    if ids != list(range(plan.M)) or any(s.plan != plan for s in states):
        raise InconsistentShardPlan(f"workers {ids} do not match plan {plan}")
    for s in states:
        if s.local_vision.shape[0] != plan.N or s.local_text.shape[0] != plan.N:
            raise InconsistentShardPlan(f"worker {s.worker_id} holds the wrong row count")
    return plan


def batch_gather(states: list[WorkerState], concurrent: bool = False) -> list[WorkerState]:
    """Populate every worker's gathered matrices with the global batch."""
    plan = _check_plan(states)
    if not concurrent:
        gv = np.concatenate([s.local_vision for s in states], axis=0)
        gt = np.concatenate([s.local_text for s in states], axis=0)
        for s in states:
            s.gathered_vision = gv.copy()
            s.gathered_text = gt.copy()
        return states

    group = GatherGroup(plan.M)
    errors = []

    def run(s):
        try:
            s.gathered_vision = group.all_gather(s.worker_id, s.local_vision)
            s.gathered_text = group.all_gather(s.worker_id, s.local_text)
        except Exception as exc:  # surfaced after join
            errors.append(exc)
            group._barrier.abort()

    _run_threads(run, states)
    if errors:
        raise errors[0]
    return states


def _run_threads(fn, states):
    threads = [threading.Thread(target=fn, args=(s,)) for s in states]
    for t in threads:
        t.start()
    for t in threads:
        t.join()


def shard_loss(state: WorkerState, labels, tau: float, multi_positive: bool = True) -> float:
    """Symmetric loss of one worker's ``N`` rows against all ``N * M`` columns.

    Vision rows softmax over all gathered text rows and vice versa; positives
    are taken from the global labels.
    """
    if not state.gathered:
        raise GatherNotRun(f"worker {state.worker_id} has not gathered")
    tau = _check_tau(tau)
    labels = np.asarray(labels).ravel()
    rows = state.plan.rows(state.worker_id)
    if multi_positive:
        mask = positive_mask(labels[rows.start:rows.stop], labels)
    else:
        mask = np.zeros((state.plan.N, state.plan.global_size), dtype=bool)
        mask[np.arange(state.plan.N), np.arange(rows.start, rows.stop)] = True
    n = state.plan.N
    # text rows vs all videos: the video-to-category term
    per_text = row_losses(contrastive_logits(state.local_text, state.gathered_vision, tau), mask)
    # video rows vs all categories: the category-to-video term
    per_vision = row_losses(contrastive_logits(state.local_vision, state.gathered_text, tau), mask)
    return (float(np.sum(per_text) / n) + float(np.sum(per_vision) / n)) / 2


def distributed_loss(batch: Batch, M: int, tau: float | None = None,
                     concurrent: bool = False, multi_positive: bool = True):
    """Mean of the per-worker losses; returns ``(loss, per_worker)``."""
    tau = batch.tau if tau is None else tau
    states, plan = shard_batch(batch, M)
    batch_gather(states, concurrent=concurrent)
    per_worker = [0.0] * plan.M

    def run(s):
        per_worker[s.worker_id] = shard_loss(s, batch.labels, tau, multi_positive)

    if concurrent:
        _run_threads(run, states)
    else:
        for s in states:
            run(s)
    total = 0.0
    for value in per_worker:
        total = total + value
    return total / plan.M, per_worker
