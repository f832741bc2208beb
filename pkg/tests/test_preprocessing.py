import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fdaas.core import Annotation, Category, EventSequence, HealthSensingEvent, RadarReading
from fdaas.errors import EmptyTrainingSet, InsufficientContext, MissingClass, StatsMismatch
from fdaas.preprocessing import (
    ADL,
    EPSILON,
    FALL,
    LabeledWindow,
    StandardizationStats,
    WindowSet,
    apply_standardizer,
    extract_fall_window,
    fit_standardizer,
    slide_adl_windows,
    stratified_split,
    windows_from_session,
)
from fdaas.simulator import AnnotatedSession


def session_of(n: int, annotations=(), t0: int = 0) -> AnnotatedSession:
    """A session whose hr channel equals the timestamp, so windows reveal their span."""
    readings = [RadarReading(float(t0 + i), 15.0, 1.5, 1) for i in range(n)]
    seq = EventSequence([HealthSensingEvent("s-0000", readings, range(t0, t0 + n), "room")])
    return AnnotatedSession("s", seq, tuple(annotations))


def toy_windows(n_adl: int, n_fall: int, seed: int = 0) -> WindowSet:
    rng = np.random.default_rng(seed)
    n = n_adl + n_fall
    return WindowSet(
        rng.normal(size=(n, 8, 4)),
        [ADL] * n_adl + [FALL] * n_fall,
        ["STA"] * n_adl + ["FTR"] * n_fall,
        ["s"] * n,
        np.arange(n),
    )


# -- fall windows -----------------------------------------------------------


def test_fall_window_covers_four_seconds_each_side():
    s = session_of(30, [Annotation("FTR", 15, 17)])
    w = extract_fall_window(s, s.annotations[0])
    assert w.values.shape == (8, 4) and w.label is Category.FALL
    assert list(w.values[:, 0]) == list(map(float, range(11, 19)))
    assert w.source == ("s", 11) and w.code == "FTR"


def test_fall_too_close_to_boundary():
    s = session_of(30, [Annotation("FTR", 2, 4)])
    with pytest.raises(InsufficientContext):
        extract_fall_window(s, s.annotations[0])
    late = session_of(30, [Annotation("FTR", 27, 29)])
    with pytest.raises(InsufficientContext):
        extract_fall_window(late, late.annotations[0])


def test_boundary_fall_is_dropped_not_padded():
    s = session_of(40, [Annotation("FTR", 2, 4), Annotation("FST", 20, 22)])
    ws = windows_from_session(s)
    assert ws.counts() == {"ADL": 0, "Fall": 1} and ws.codes[0] == "FST"


def test_fall_window_at_exact_margins():
    s = session_of(12, [Annotation("FTR", 4, 6), Annotation("FOB", 8, 9)])
    assert extract_fall_window(s, s.annotations[0]).values[0, 0] == 0.0
    assert extract_fall_window(s, s.annotations[1]).values[-1, 0] == 11.0


# -- ADL windows ------------------------------------------------------------


@pytest.mark.parametrize("T, expected", [(8, 1), (20, 13), (7, 0), (0, 0)])
def test_adl_window_counts(T, expected):
    assert len(slide_adl_windows(np.zeros((T, 4)))) == expected


@settings(max_examples=60, deadline=None)
@given(st.integers(8, 60))
def test_adl_windows_stride_one(T):
    seg = np.arange(T * 4, dtype=float).reshape(T, 4)
    ws = slide_adl_windows(seg, "WLK", "s", 100)
    assert len(ws) == T - 7
    for a, b in zip(ws, ws[1:]):
        assert np.array_equal(a.values[1:], b.values[:-1])
        assert b.source[1] - a.source[1] == 1
    assert all(w.label is Category.ADL and w.values.shape == (8, 4) for w in ws)


def test_window_rejects_bad_shape_or_missing_values():
    with pytest.raises(ValueError):
        LabeledWindow(np.zeros((7, 4)), Category.ADL, ("s", 0), "STA")
    bad = np.zeros((8, 4))
    bad[3, 2] = np.nan
    with pytest.raises(ValueError):
        LabeledWindow(bad, Category.ADL, ("s", 0), "STA")


def test_session_windowing_counts():
    s = session_of(60, [Annotation("STA", 0, 20), Annotation("FTR", 30, 32), Annotation("WLK", 40, 60)])
    ws = windows_from_session(s)
    assert ws.counts() == {"ADL": 13 + 13, "Fall": 1}


# -- standardization --------------------------------------------------------


def test_constant_channel_stats():
    w = np.ones((8, 4))
    w[:, 0] = 2.0
    w[:, 1] = np.arange(8)
    stats = fit_standardizer(WindowSet(w[None], [ADL], ["STA"], ["s"], [0]))
    assert stats.mean[0] == 2.0 and stats.std[0] == 0.0
    out = stats.transform(w)
    assert np.all(out[:, 0] == 0.0)


def test_empty_train_rejected():
    with pytest.raises(EmptyTrainingSet):
        fit_standardizer(WindowSet.empty())
    with pytest.raises(EmptyTrainingSet):
        fit_standardizer([])


def test_epsilon_is_fixed():
    with pytest.raises(ValueError):
        StandardizationStats((0.0,) * 4, (1.0,) * 4, epsilon=1e-8)
    assert EPSILON == 1e-10


def test_unit_std_closed_form():
    stats = StandardizationStats((1.0, 2.0, 3.0, 4.0), (1.0, 1.0, 1.0, 1.0))
    out = stats.transform(np.array([2.0, 3.0, 4.0, 5.0]))
    assert np.allclose(out, 1.0 / (1.0 + 1e-10), atol=0, rtol=1e-15)
    assert np.all(np.abs(out - 1.0) < 1e-9)


def test_transform_is_not_idempotent():
    stats = StandardizationStats((1.0, 2.0, 3.0, 4.0), (2.0, 2.0, 2.0, 2.0))
    x = np.full((8, 4), 5.0)
    assert not np.allclose(stats.transform(stats.transform(x)), stats.transform(x))


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float64, st.tuples(st.integers(1, 12), st.just(8), st.just(4)),
           elements=st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)),
)
def test_refit_after_transform_is_standard(X):
    ws = WindowSet(X, [ADL] * len(X), ["STA"] * len(X), ["s"] * len(X), np.arange(len(X)), provenance="train")
    stats = fit_standardizer(ws)
    out = apply_standardizer(stats, ws)
    refit = fit_standardizer(out)
    flat = X.reshape(-1, 4)
    for c in range(4):
        spread = flat[:, c].max() - flat[:, c].min()
        if spread == 0:
            assert np.all(out.X[:, :, c] == 0.0)
        elif stats.std[c] > 1e-6 * max(1.0, np.abs(flat[:, c]).max()):
            assert abs(refit.mean[c]) < 1e-6
            assert abs(refit.std[c] - 1.0) < 1e-3
            assert np.allclose(stats.inverse(out.X)[:, :, c], X[:, :, c], rtol=0, atol=1e-9 * max(1.0, np.abs(X).max()))


def test_test_split_needs_train_stats():
    split = stratified_split(toy_windows(50, 10), 0.8, seed=0)
    leaked = fit_standardizer(split.test)
    assert leaked.provenance == "test"
    with pytest.raises(StatsMismatch):
        apply_standardizer(leaked, split.test)
    stats = fit_standardizer(split.train)
    assert stats.provenance == "train"
    out = apply_standardizer(stats, split.test)
    assert out.standardized_with == stats.fingerprint and out.provenance == "test"


# -- split ------------------------------------------------------------------


def test_split_exact_arithmetic():
    split = stratified_split(toy_windows(100, 10), 0.8, seed=1)
    assert split.train.counts() == {"ADL": 80, "Fall": 8}
    assert split.test.counts() == {"ADL": 20, "Fall": 2}


def test_split_is_deterministic_partition():
    ws = toy_windows(57, 9)
    a, b = stratified_split(ws, 0.8, seed=3), stratified_split(ws, 0.8, seed=3)
    assert np.array_equal(a.train.starts, b.train.starts)
    tr, te = set(a.train.starts), set(a.test.starts)
    assert not tr & te and tr | te == set(ws.starts)
    c = stratified_split(ws, 0.8, seed=4)
    assert not np.array_equal(a.train.starts, c.train.starts)


def test_split_needs_both_classes():
    with pytest.raises(MissingClass):
        stratified_split(toy_windows(20, 0), 0.8, seed=0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 300), st.integers(1, 40))
def test_split_ratio_property(n_adl, n_fall):
    ws = toy_windows(n_adl, n_fall)
    split = stratified_split(ws, 0.8, seed=0)
    for name, n in (("ADL", n_adl), ("Fall", n_fall)):
        assert abs(split.train.counts()[name] - 0.8 * n) <= 0.5
        assert split.train.counts()[name] + split.test.counts()[name] == n


def test_windowset_persistence(tmp_path):
    ws = toy_windows(6, 2)
    ws.synthetic[-1] = True
    ws.save(tmp_path / "w")
    back = WindowSet.load(tmp_path / "w")
    assert back.fingerprint() == ws.fingerprint()
    assert list(back.codes) == list(ws.codes) and back.synthetic.tolist() == ws.synthetic.tolist()
