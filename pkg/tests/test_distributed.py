import math

import numpy as np
import pytest

from bike.distributed import (
    GatherGroup,
    WorkerState,
    batch_gather,
    distributed_loss,
    shard_batch,
    shard_loss,
)
from bike.errors import GatherNotRun, InconsistentShardPlan, IndivisibleBatch
from bike.objective import Batch, random_batch, symmetric_infonce, total_loss


def _batch(B, seed=0, tau=0.01, n_labels=None):
    return random_batch(np.random.default_rng(seed), B, 8, tau, num_labels=n_labels,
                        with_attrs=False)


def test_shard_batch_contiguous():
    b = _batch(4)
    states, plan = shard_batch(b, 2)
    assert (plan.M, plan.N) == (2, 2)
    np.testing.assert_array_equal(states[0].local_vision, b.video_embs[:2])
    np.testing.assert_array_equal(states[1].local_text, b.cat_embs[2:])
    one, _ = shard_batch(b, 1)
    np.testing.assert_array_equal(one[0].local_vision, b.video_embs)
    with pytest.raises(IndivisibleBatch):
        shard_batch(_batch(5), 2)


@pytest.mark.parametrize("concurrent", [False, True])
def test_gather_reassembles_global_batch(concurrent):
    b = _batch(8, seed=3)
    states, _ = shard_batch(b, 4)
    batch_gather(states, concurrent=concurrent)
    for s in states:
        assert s.gathered_vision.tobytes() == b.video_embs.tobytes()
        assert s.gathered_text.tobytes() == states[0].gathered_text.tobytes()


def test_gather_single_worker_is_local():
    states, _ = shard_batch(_batch(3), 1)
    batch_gather(states)
    np.testing.assert_array_equal(states[0].gathered_vision, states[0].local_vision)


def test_gather_rejects_inconsistent_plan():
    states, _ = shard_batch(_batch(4), 2)
    with pytest.raises(InconsistentShardPlan):
        batch_gather(states[:1])
    bad = WorkerState(1, states[1].plan, states[1].local_vision[:1], states[1].local_text)
    with pytest.raises(InconsistentShardPlan):
        batch_gather([states[0], bad])


def test_gather_group_repeated_rounds():
    import threading

    group = GatherGroup(3)
    out = {}

    def run(rank):
        out[rank] = [group.all_gather(rank, np.full((1, 2), rank * 10 + r)) for r in range(5)]

    threads = [threading.Thread(target=run, args=(r,)) for r in range(3)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for r in range(5):
        expected = np.array([[r, r], [10 + r, 10 + r], [20 + r, 20 + r]], dtype=float)
        for rank in range(3):
            np.testing.assert_array_equal(out[rank][r], expected)


def test_shard_loss_requires_gather():
    states, _ = shard_batch(_batch(4), 2)
    with pytest.raises(GatherNotRun):
        shard_loss(states[0], np.arange(4), 0.01)


def test_single_worker_equals_single_node_exactly():
    b = _batch(6, seed=9, n_labels=3)
    states, _ = shard_batch(b, 1)
    batch_gather(states)
    assert shard_loss(states[0], b.labels, b.tau) == total_loss(b).l_v
    assert distributed_loss(b, 1)[0] == total_loss(b).l_v


def test_aligned_pairs_give_equal_worker_losses():
    e = np.eye(4)
    b = Batch(e, e, [0, 1, 2, 3], 1.0)
    _, per_worker = distributed_loss(b, 2)
    assert per_worker[0] == pytest.approx(per_worker[1], abs=1e-15)
    # oracle: log(e + 3) - 1 per row
    assert per_worker[0] == pytest.approx(math.log(math.e + 3) - 1, abs=1e-14)


def test_identical_embeddings_give_log_nm():
    same = np.tile([[0.6, 0.8]], (4, 1))
    b = Batch(same, same, [0, 1, 2, 3], 0.01)
    _, per_worker = distributed_loss(b, 2)
    for v in per_worker:
        assert v == pytest.approx(math.log(4), abs=1e-12)


def test_worker_count_invariance():
    for seed in range(5):
        b = _batch(8, seed=seed, n_labels=4)
        ref = total_loss(b).l_v
        results = [distributed_loss(b, M)[0] for M in (1, 2, 4)]
        for r in results:
            assert r == pytest.approx(ref, abs=1e-12)
        assert len(distributed_loss(b, 4)[1]) == 4


def test_strict_mode_matches_plain_infonce():
    # distinct text rows per sample; with text rows equal to C[y] both modes coincide
    rng = np.random.default_rng(1)
    rows = rng.standard_normal((2, 8, 8))
    rows /= np.linalg.norm(rows, axis=2, keepdims=True)
    b = Batch(rows[0], rows[1], [0, 1, 2, 0, 1, 2, 0, 1], 0.1)
    strict = symmetric_infonce(b.cat_embs, b.video_embs, b.labels, b.tau, multi_positive=False)[2]
    assert distributed_loss(b, 4, multi_positive=False)[0] == pytest.approx(strict, abs=1e-12)
    multi = distributed_loss(b, 4)[0]
    assert multi != pytest.approx(strict, abs=1e-6)


def test_concurrent_is_bit_identical():
    b = _batch(16, seed=2, n_labels=5)
    for M in (2, 4, 8, 16):
        seq, seq_w = distributed_loss(b, M)
        con, con_w = distributed_loss(b, M, concurrent=True)
        assert seq == con and seq_w == con_w
