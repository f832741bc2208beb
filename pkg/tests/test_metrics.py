import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdaas.errors import EmptySet, LengthMismatch, TooFewPoints, UndefinedMetric, ZeroVector
from fdaas.metrics import (
    ConfusionMatrix,
    MetricsReport,
    avg_cosine_similarity,
    balanced_accuracy,
    confusion,
    cosine_similarity,
    f1_precision_recall,
    f1_sens_spec,
    feature_matrix,
    feature_vector,
    pca_2d,
    project_2d,
    sensitivity,
    specificity,
    tsne_2d,
)


def brute_force(y_true, y_pred):
    """Exact rational metrics from a plain loop over the labels."""
    tp = fp = tn = fn = 0
    for t, p in zip(y_true, y_pred):
        if t == 1 and p == 1:
            tp += 1
        elif t == 0 and p == 1:
            fp += 1
        elif t == 0 and p == 0:
            tn += 1
        else:
            fn += 1
    se, sp = Fraction(tp, tp + fn), Fraction(tn, tn + fp)
    return (tp, fp, tn, fn), se, sp, 2 * se * sp / (se + sp), (se + sp) / 2


# -- confusion and rates ----------------------------------------------------


def test_all_correct_and_inverted():
    y = np.array([0, 1, 1, 0, 0, 1, 0])
    cm = confusion(y, y)
    assert cm.fp == cm.fn == 0
    inv = confusion(y, 1 - y)
    assert (inv.tp, inv.fn, inv.tn, inv.fp) == (cm.fn, cm.tp, cm.fp, cm.tn)


def test_confusion_errors():
    with pytest.raises(LengthMismatch):
        confusion([0, 1], [0])
    with pytest.raises(EmptySet):
        confusion([], [])


@pytest.mark.parametrize("seed", range(5))
def test_thousand_labels_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    t, p = rng.integers(0, 2, 1000), rng.integers(0, 2, 1000)
    counts, se, sp, f1, ba = brute_force(t.tolist(), p.tolist())
    cm = confusion(t, p)
    assert (cm.tp, cm.fp, cm.tn, cm.fn) == counts
    assert abs(sensitivity(cm) - float(se)) < 1e-12
    assert abs(specificity(cm) - float(sp)) < 1e-12
    assert abs(f1_sens_spec(cm) - float(f1)) < 1e-12
    assert abs(balanced_accuracy(cm) - float(ba)) < 1e-12


def test_rate_examples():
    assert sensitivity(ConfusionMatrix(tp=9, fp=0, tn=0, fn=1)) == 0.9
    with pytest.raises(UndefinedMetric):
        specificity(ConfusionMatrix(tp=3, fp=0, tn=0, fn=1))
    cm = ConfusionMatrix(tp=200, fp=880, tn=8000, fn=50)
    assert sensitivity(cm) == 0.8
    assert abs(specificity(cm) - 8000 / 8880) < 1e-15
    assert abs(specificity(cm) - 0.9009009) < 1e-7


def test_f1_and_ba_examples():
    cm = ConfusionMatrix(tp=200, fp=880, tn=8000, fn=50)
    se, sp = 0.8, 8000 / 8880
    assert abs(f1_sens_spec(cm) - 2 * se * sp / (se + sp)) < 1e-12
    assert abs(f1_sens_spec(cm) - 0.84746) < 1e-5
    assert abs(balanced_accuracy(cm) - 0.85045) < 1e-5
    assert f1_sens_spec(ConfusionMatrix(5, 0, 5, 0)) == 1.0
    assert f1_sens_spec(ConfusionMatrix(0, 0, 5, 5)) == 0.0
    assert balanced_accuracy(ConfusionMatrix(3, 1, 3, 1)) == 0.75


def test_f1_undefined_when_both_rates_zero():
    with pytest.raises(UndefinedMetric):
        f1_sens_spec(ConfusionMatrix(tp=0, fp=4, tn=0, fn=4))


def test_precision_recall_f1_is_a_different_quantity():
    cm = ConfusionMatrix(tp=200, fp=880, tn=8000, fn=50)
    assert abs(f1_precision_recall(cm) - 2 * 200 / (2 * 200 + 880 + 50)) < 1e-12
    assert f1_precision_recall(cm) < f1_sens_spec(cm)


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 500), st.integers(0, 500), st.integers(0, 500), st.integers(0, 500))
def test_ba_dominates_f1(tp, fp, tn, fn):
    cm = ConfusionMatrix(tp, fp, tn, fn)
    try:
        f1, ba = f1_sens_spec(cm), balanced_accuracy(cm)
    except UndefinedMetric:
        return
    assert 0.0 <= f1 <= ba + 1e-15 <= 1.0 + 1e-15


def test_report_marks_undefined_as_absent():
    r = MetricsReport.from_labels([0, 0, 0], [0, 1, 0], "FCN", "None")
    assert r.sensitivity is None and r.f1 is None and r.balanced_accuracy is None
    assert r.specificity == pytest.approx(2 / 3)
    assert MetricsReport.from_dict(r.to_dict()) == r


# -- feature vectors and cosine similarity ----------------------------------


def test_feature_vector_arithmetic():
    w = np.zeros((8, 4))
    w[:, 0] = np.arange(1, 9)
    w[:, 1] = 2.0
    w[:, 2] = -np.arange(1, 9)
    w[:, 3] = 1.0
    f = feature_vector(w).reshape(4, 7)
    assert np.allclose(f[0], [4.5, 4.5, math.sqrt(5.25), 5.25, math.sqrt(25.5), 1, 8], atol=1e-12)
    assert np.array_equal(f[1], [2, 2, 0, 0, 2, 2, 2])
    neg = f[2]
    assert np.allclose(neg[[0, 1]], -f[0][[0, 1]]) and np.allclose(neg[2:5], f[0][2:5])
    assert neg[5] == -f[0][6] and neg[6] == -f[0][5]
    assert feature_vector(w).shape == (28,)


def test_feature_matrix_matches_rows():
    X = np.random.default_rng(0).normal(size=(5, 8, 4))
    M = feature_matrix(X)
    for i in range(5):
        assert np.allclose(M[i], feature_vector(X[i]))


def test_cosine_examples():
    e = np.eye(28)
    assert cosine_similarity(e[0] + 3 * e[4], e[0] + 3 * e[4]) == pytest.approx(1.0, abs=1e-15)
    assert cosine_similarity(e[0], e[1]) == 0.0
    assert abs(cosine_similarity(e[0] + e[1], e[0]) - 0.70710678) < 1e-8
    with pytest.raises(ZeroVector):
        cosine_similarity(np.zeros(28), e[0])


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 100), st.floats(0.01, 100), st.integers(0, 1000))
def test_cosine_scale_invariance(a, b, seed):
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=28), rng.normal(size=28)
    assert abs(cosine_similarity(a * u, b * v) - cosine_similarity(u, v)) < 1e-12


def test_average_cosine_identity_and_determinism():
    X = np.random.default_rng(1).normal(loc=2.0, size=(40, 8, 4))
    assert abs(avg_cosine_similarity(X, X.copy(), pairing="identity") - 1.0) < 1e-12
    Y = np.random.default_rng(2).normal(loc=2.0, size=(30, 8, 4))
    assert avg_cosine_similarity(X, Y, seed=3) == avg_cosine_similarity(X, Y, seed=3)
    all_pairs = avg_cosine_similarity(X, Y, pairing="all")
    fa, fb = feature_matrix(X), feature_matrix(Y)
    oracle = np.mean([cosine_similarity(a, b) for a in fa for b in fb])
    assert abs(all_pairs - oracle) < 1e-12
    with pytest.raises(EmptySet):
        avg_cosine_similarity(X[:0], Y)
    with pytest.raises(ZeroVector):
        avg_cosine_similarity(np.zeros((2, 8, 4)), Y)


# -- projections ------------------------------------------------------------


def test_pca_recovers_a_planar_cloud():
    rng = np.random.default_rng(0)
    basis = np.linalg.qr(rng.normal(size=(28, 2)))[0]
    F = rng.normal(size=(50, 2)) * [5.0, 1.0] @ basis.T + rng.normal(size=28)
    proj = pca_2d(F)
    recon = proj.points @ proj.components + proj.center
    assert np.max(np.abs(recon - F)) < 1e-9


def test_pca_ignores_row_order():
    F = np.random.default_rng(3).normal(size=(40, 28))
    perm = np.random.default_rng(4).permutation(40)
    a, b = pca_2d(F).points, pca_2d(F[perm]).points
    assert np.allclose(np.abs(a[perm]), np.abs(b), atol=1e-9)


def test_projection_errors_and_determinism():
    with pytest.raises(TooFewPoints):
        pca_2d(np.zeros((2, 28)))
    with pytest.raises(TooFewPoints):
        tsne_2d(np.zeros((2, 28)))
    X = np.random.default_rng(5).normal(size=(30, 8, 4))
    a, b = project_2d(X, "tSNE", seed=7), project_2d(X, "tSNE", seed=7)
    assert a.points.shape == (30, 2) and np.array_equal(a.points, b.points)
    with pytest.raises(ValueError):
        project_2d(X, "UMAP")
