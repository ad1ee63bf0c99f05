import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bike.errors import NonPositiveTemperature
from bike.objective import (
    Batch,
    contrastive_logits,
    finite_diff_check,
    positive_sets,
    random_batch,
    symmetric_infonce,
    total_loss,
)


def brute_directional(Q, K, labels, tau):
    """-(1/B) sum_i 1/|K(i)| sum_{k in K(i)} log(exp(q_i.k_k/tau) / sum_j exp(q_i.k_j/tau))."""
    B = len(labels)
    total = 0.0
    for i in range(B):
        pos = [k for k in range(B) if labels[k] == labels[i]]
        logits = [sum(a * b for a, b in zip(Q[i], K[j])) / tau for j in range(B)]
        denom = math.fsum(math.exp(z) for z in logits)
        total += math.fsum(math.log(math.exp(logits[k]) / denom) for k in pos) / len(pos)
    return -total / B


def test_positive_sets():
    assert positive_sets([0, 1, 2]) == [{0}, {1}, {2}]
    assert positive_sets([7, 7]) == [{0, 1}, {0, 1}]
    assert positive_sets([0, 1, 0]) == [{0, 2}, {1}, {0, 2}]


def test_contrastive_logits():
    np.testing.assert_array_equal(contrastive_logits(np.eye(3), np.eye(3), 1.0), np.eye(3))
    rng = np.random.default_rng(0)
    X, Y = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
    np.testing.assert_allclose(contrastive_logits(X, Y, 0.5), 2 * contrastive_logits(X, Y, 1.0))
    assert contrastive_logits([[1, 0]], [[0, 1]], 0.01).tolist() == [[0.0]]
    with pytest.raises(NonPositiveTemperature):
        contrastive_logits(X, Y, 0)


def test_infonce_examples():
    assert symmetric_infonce([[1.0, 0.0]], [[0.0, 1.0]], [3], 0.01) == (0.0, 0.0, 0.0)
    same = np.tile([[0.6, 0.8]], (2, 1))
    for labels in ([0, 1], [0, 0]):
        for value in symmetric_infonce(same, same, labels, 0.01):
            assert value == pytest.approx(math.log(2), abs=1e-12)
        assert brute_directional(same, same, labels, 0.01) == pytest.approx(math.log(2), abs=1e-15)


def test_total_loss_without_attributes():
    b = random_batch(np.random.default_rng(1), 5, 6, 0.1, with_attrs=False)
    out = total_loss(b)
    assert out.total == out.l_v and out.l_a == 0.0 and out.grad_attr is None


def test_aligned_batch_is_near_zero():
    e = np.eye(4)
    out = total_loss(Batch(e, e, [0, 1, 2, 3], 0.01, attr_embs=e))
    # oracle: every row loss is log(1 + 3 exp(-100)) ~ 1e-43
    assert out.total < 1e-10
    assert brute_directional(e, e, [0, 1, 2, 3], 0.01) < 1e-10


def test_duplicated_rows_match_brute_force():
    rng = np.random.default_rng(4)
    base = random_batch(rng, 3, 5, 0.5)
    idx = np.repeat(np.arange(3), 2)
    b = Batch(base.video_embs[idx], base.cat_embs[idx], base.labels[idx], 0.5, base.attr_embs[idx])
    out = total_loss(b)
    V, C, A, y = b.video_embs.tolist(), b.cat_embs.tolist(), b.attr_embs.tolist(), b.labels.tolist()
    l_v = (brute_directional(C, V, y, 0.5) + brute_directional(V, C, y, 0.5)) / 2
    l_a = (brute_directional(C, A, y, 0.5) + brute_directional(A, C, y, 0.5)) / 2
    assert out.l_v == pytest.approx(l_v, abs=1e-12)
    assert out.total == pytest.approx(l_v + l_a, abs=1e-12)


def test_distinct_labels_reduce_to_plain_infonce():
    rng = np.random.default_rng(8)
    b = random_batch(rng, 6, 5, 0.07, with_attrs=False)
    Z = b.cat_embs @ b.video_embs.T / 0.07
    direct = np.mean([np.log(np.sum(np.exp(Z[i]))) - Z[i, i] for i in range(6)])
    assert symmetric_infonce(b.cat_embs, b.video_embs, b.labels, 0.07)[0] == pytest.approx(
        direct, abs=1e-12)
    strict = symmetric_infonce(b.cat_embs, b.video_embs, b.labels, 0.07, multi_positive=False)
    assert strict == symmetric_infonce(b.cat_embs, b.video_embs, b.labels, 0.07)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(1, 8),
       st.sampled_from([0.01, 0.1, 1.0]))
def test_loss_properties(seed, B, n_labels, tau):
    rng = np.random.default_rng(seed)
    b = random_batch(rng, B, 6, tau, num_labels=n_labels)
    out = total_loss(b)
    for v in (out.l_v2c, out.l_c2v, out.l_a2c, out.l_c2a):
        assert v >= 0
    assert out.l_v == (out.l_v2c + out.l_c2v) / 2
    assert out.total == out.l_v + out.l_a
    # consistent permutation of the batch
    p = total_loss(b.permuted(rng.permutation(B)))
    for name in ("l_v2c", "l_c2v", "l_a2c", "l_c2a", "total"):
        assert getattr(p, name) == pytest.approx(getattr(out, name), abs=1e-12)
    # transpose duality
    xy = symmetric_infonce(b.video_embs, b.cat_embs, b.labels, tau)
    yx = symmetric_infonce(b.cat_embs, b.video_embs, b.labels, tau)
    assert xy[0] == yx[1] and xy[1] == yx[0]


def test_gradient_check_examples():
    rng = np.random.default_rng(2)
    assert finite_diff_check(random_batch(rng, 4, 8, 1.0), 1e-5) < 1e-5
    assert finite_diff_check(random_batch(rng, 4, 8, 0.01, num_labels=2), 1e-5) < 1e-4
    with pytest.raises(ValueError):
        finite_diff_check(random_batch(rng, 2, 2, 1.0), 1e-2)


def test_gradient_zero_for_symmetric_construction():
    # identical rows everywhere: every logit equal, softmax uniform, targets uniform
    same = np.tile([[0.6, 0.8]], (2, 1))
    b = Batch(same, same, [0, 0], 1.0, same)
    out = total_loss(b)
    for g in (out.grad_video, out.grad_cat, out.grad_attr):
        np.testing.assert_allclose(g, 0, atol=1e-15)
    assert finite_diff_check(b, 1e-5) < 1e-5


def test_gradient_direction_reduces_loss():
    b = random_batch(np.random.default_rng(3), 6, 8, 0.1, num_labels=3)
    out = total_loss(b)
    step = 1e-3
    moved = Batch(b.video_embs - step * out.grad_video, b.cat_embs - step * out.grad_cat,
                  b.labels, b.tau, b.attr_embs - step * out.grad_attr)
    assert total_loss(moved).total < out.total
