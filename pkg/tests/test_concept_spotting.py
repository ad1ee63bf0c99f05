import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bike.concept_spotting import (
    Aggregation,
    SaliencyVector,
    aggregate,
    mean_pool,
    saliency_from_scores,
    temporal_saliency,
)
from bike.errors import DimMismatch, LengthMismatch, NonPositiveTemperature


def unit_rows(rng, n, d):
    m = rng.standard_normal((n, d))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def brute_saliency(scores, tau):
    """Direct transcription at 50 digits: mean over words of a softmax over frames."""
    mpmath.mp.dps = 50
    T, N = len(scores), len(scores[0])
    out = []
    for t in range(T):
        acc = mpmath.mpf(0)
        for n in range(N):
            den = mpmath.fsum(mpmath.exp(mpmath.mpf(scores[u][n]) / tau) for u in range(T))
            acc += mpmath.exp(mpmath.mpf(scores[t][n]) / tau) / den
        out.append(float(acc / N))
    return out


def test_uniform_when_scores_equal():
    frames = np.tile([1.0, 0.0, 0.0], (3, 1))
    words = np.array([[0.6, 0.8, 0.0], [0.0, 0.0, 1.0]])
    s = temporal_saliency(frames, words, 0.01)
    np.testing.assert_allclose(s.weights, [1 / 3] * 3, atol=1e-15)


def test_two_frames_one_word():
    # dots (1, 0) at tau = 1
    s = temporal_saliency(np.eye(2), [[1.0, 0.0]], 1.0)
    np.testing.assert_allclose(s.weights, brute_saliency([[1.0], [0.0]], 1), atol=1e-15)
    np.testing.assert_allclose(s.weights, [0.73105858, 0.26894142], atol=1e-8)


def test_two_words_symmetric():
    s = temporal_saliency(np.eye(2), np.eye(2), 1.0)
    np.testing.assert_allclose(s.weights, [0.5, 0.5], atol=1e-15)


def test_softmax_runs_over_frames_not_words():
    scores = np.array([[0.9, 0.1], [0.2, 0.3], [0.5, -0.4]])
    np.testing.assert_allclose(saliency_from_scores(scores, 0.5),
                               brute_saliency(scores.tolist(), 0.5), atol=1e-15)


def test_errors():
    with pytest.raises(DimMismatch):
        temporal_saliency(np.eye(2), np.eye(3), 1.0)
    with pytest.raises(NonPositiveTemperature):
        temporal_saliency(np.eye(2), np.eye(2), 0.0)
    with pytest.raises(LengthMismatch):
        aggregate(np.eye(2), SaliencyVector(np.array([1.0, 0.0, 0.0]), 1.0))


def test_aggregate_examples():
    frames = np.eye(2)
    np.testing.assert_array_equal(aggregate(frames, SaliencyVector(np.array([1.0, 0.0]), 1)).e_v,
                                  [1.0, 0.0])
    rep = aggregate(frames, SaliencyVector(np.array([0.75, 0.25]), 1))
    np.testing.assert_allclose(rep.e_v, [0.75, 0.25])
    assert rep.method is Aggregation.CONCEPT_SPOTTING
    uniform = aggregate(frames, SaliencyVector(np.array([0.5, 0.5]), 1)).e_v
    np.testing.assert_allclose(uniform, mean_pool(frames).e_v)


def test_mean_pool_examples():
    v = np.array([[0.6, 0.8]])
    np.testing.assert_allclose(mean_pool(v).e_v, [0.6, 0.8])
    np.testing.assert_allclose(mean_pool(np.eye(2)).e_v, [0.5, 0.5])
    np.testing.assert_allclose(mean_pool(np.tile(v, (5, 1))).e_v, [0.6, 0.8])
    assert mean_pool(v).method is Aggregation.MEAN_POOL


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 32), st.integers(1, 8),
       st.sampled_from([0.01, 0.1, 1.0]))
def test_saliency_properties(seed, T, N, tau):
    rng = np.random.default_rng(seed)
    frames, words = unit_rows(rng, T, 8), unit_rows(rng, N, 8)
    s = temporal_saliency(frames, words, tau).weights
    assert abs(s.sum() - 1) <= 1e-9 and np.all(s >= 0)
    # word order does not matter
    s_words = temporal_saliency(frames, words[rng.permutation(N)], tau).weights
    np.testing.assert_allclose(s_words, s, atol=1e-12, rtol=0)
    # frame permutation permutes the saliency
    perm = rng.permutation(T)
    np.testing.assert_allclose(temporal_saliency(frames[perm], words, tau).weights, s[perm],
                               atol=1e-12, rtol=0)
    # temperature can be folded into the scores
    folded = saliency_from_scores((frames @ words.T) / tau, 1.0)
    np.testing.assert_allclose(folded, s, atol=1e-12, rtol=0)


def test_high_temperature_is_mean_pool():
    rng = np.random.default_rng(11)
    for _ in range(20):
        frames = unit_rows(rng, int(rng.integers(1, 16)), 12)
        words = unit_rows(rng, int(rng.integers(1, 6)), 12)
        s = temporal_saliency(frames, words, 1e6)
        assert np.max(np.abs(s.weights - 1 / len(frames))) < 1e-6
        diff = aggregate(frames, s).e_v - mean_pool(frames).e_v
        assert np.max(np.abs(diff)) < 1e-6


def test_low_temperature_is_one_hot():
    rng = np.random.default_rng(5)
    for _ in range(20):
        frames = unit_rows(rng, 6, 10)
        word = unit_rows(rng, 1, 10)
        dots = np.sort(frames @ word[0])
        if dots[-1] - dots[-2] < 5e-3:  # argmax must be clearly unique
            continue
        dots = frames @ word[0]
        s = temporal_saliency(frames, word, 1e-4).weights
        assert s[np.argmax(dots)] > 1 - 1e-9
