import json
import math

import numpy as np
import pytest

from structaware.corpus import build_toy_corpus
from structaware.errors import ShapeMismatch
from structaware.probe import ProbeConfig, binarize, cat_score, head_scores, probe_attention
from structaware.syntax import SourceUnit, distance_matrix

from conftest import RENDER_BODY_RB

A4 = np.array([[0.10, 0.40, 0.30, 0.20],
               [0.50, 0.10, 0.20, 0.20],
               [0.30, 0.30, 0.10, 0.30],
               [0.25, 0.25, 0.20, 0.30]])
D4 = np.array([[0, 2, 3, 5], [2, 0, 3, 5], [3, 3, 0, 4], [5, 5, 4, 0]])


def _loop_indicators(a, d, theta_a, theta_d):
    n = len(a)
    ah = [[a[i][j] > theta_a for j in range(n)] for i in range(n)]
    dh = [[d[i][j] < theta_d for j in range(n)] for i in range(n)]
    return np.array(ah), np.array(dh)


def test_hand_counted_instance():
    # agreeing off-diagonal cells per row: 3, 2, 2, 3 (ties at 0.25 and 4 count as false)
    assert cat_score(A4, D4, ProbeConfig(theta_A=0.25, theta_D=4)) == pytest.approx(10 / 12)


def test_full_agreement_and_disagreement():
    cfg = ProbeConfig(theta_A=0.25, theta_D=4)
    _, d_hat = binarize(A4, D4, cfg)
    agree = np.where(d_hat, 0.9, 0.1)
    assert cat_score(agree, D4, cfg) == 1.0
    assert cat_score(1.0 - agree, D4, cfg) == 0.0


def test_zero_attention_threshold():
    a = A4.copy()
    a[0, 3] = 0.0
    a_hat, _ = binarize(a, D4, ProbeConfig(theta_A=0.0))
    off = ~np.eye(4, dtype=bool)
    assert a_hat[off].sum() == off.sum() - 1 and not a_hat[0, 3]


def test_unit_distance_threshold_at_token_level():
    _, leaves, d = distance_matrix(SourceUnit(RENDER_BODY_RB, "ruby"))
    n = len(leaves)
    _, d_hat = binarize(np.full((n, n), 1.0 / n), d, ProbeConfig(theta_D=1))
    assert not d_hat[~np.eye(n, dtype=bool)].any()


def test_indicators_match_scalar_loops():
    rng = np.random.default_rng(0)
    for _ in range(30):
        n = int(rng.integers(2, 9))
        a = rng.dirichlet(np.ones(n), size=n)
        d = np.triu(rng.integers(2, 10, (n, n)), 1)
        d = d + d.T
        theta_a, theta_d = float(rng.random() * 0.5), int(rng.integers(2, 10))
        got = binarize(a, d, ProbeConfig(theta_A=theta_a, theta_D=theta_d))
        ref = _loop_indicators(a.tolist(), d.tolist(), theta_a, theta_d)
        assert np.array_equal(got[0], ref[0]) and np.array_equal(got[1], ref[1])


def test_permutation_invariance_and_range():
    rng = np.random.default_rng(1)
    for reduction in ("mean", "per-head"):
        cfg = ProbeConfig(head_reduction=reduction)
        for _ in range(20):
            n = int(rng.integers(2, 8))
            a = rng.dirichlet(np.ones(n), size=(3, n))
            d = np.triu(rng.integers(2, 10, (n, n)), 1)
            d = d + d.T
            p = rng.permutation(n)
            s = cat_score(a, d, cfg)
            assert 0.0 <= s <= 1.0
            assert cat_score(a[:, p][:, :, p], d[p][:, p], cfg) == pytest.approx(s)


def test_softmax_of_distances_agrees_by_construction():
    corpus = build_toy_corpus(20, seed=2)
    for ex in corpus.examples:
        d = ex.distances.astype(float)
        n = len(d)
        theta_d = math.floor(np.median(d[~np.eye(n, dtype=bool)])) + 0.5
        gap = np.abs(d - theta_d).min()
        w = 2 * math.log(n) / gap
        logits = -(w * d + 0.7)
        a = np.exp(logits - logits.max(-1, keepdims=True))
        a /= a.sum(-1, keepdims=True)
        cfg = ProbeConfig(theta_A=math.exp(-w * theta_d), theta_D=theta_d)
        assert cat_score(a, d, cfg) == 1.0


def test_head_reductions_differ():
    heads = np.stack([A4, np.full((4, 4), 0.25)])
    cfg = ProbeConfig(theta_A=0.25, theta_D=4, head_reduction="per-head")
    assert head_scores(heads, D4, cfg) == [pytest.approx(10 / 12), pytest.approx(6 / 12)]
    assert cat_score(heads, D4, cfg) == pytest.approx(8 / 12)


def test_default_thresholds():
    a = np.full((4, 4), 0.25)  # exactly 1/n: never above the default theta_A
    a_hat, d_hat = binarize(a, D4)
    assert not a_hat.any()
    # median off-diagonal distance of D4 is 3.5
    assert d_hat[0, 2] and not d_hat[2, 3]


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        binarize(np.ones((3, 3)) / 3, D4)


def test_config_ranges():
    for bad in (dict(theta_A=1.0), dict(theta_D=0), dict(head_reduction="max")):
        with pytest.raises(ValueError):
            ProbeConfig(**bad)


def test_report():
    report = probe_attention([(A4[None], D4), (np.eye(4)[None], D4)],
                             ProbeConfig(theta_A=0.25, theta_D=4))
    obj = json.loads(report.to_json())
    assert obj["label"] == "CAT-style score"
    assert len(obj["scores"]) == 2 and obj["mean"] == pytest.approx(np.mean(obj["scores"]))
    assert obj["config"]["theta_D"] == 4
