"""Windowing, standardization and stratified splitting of annotated sessions."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import Annotation, Category
from .errors import EmptyTrainingSet, InsufficientContext, MissingClass, StatsMismatch
from .simulator import AnnotatedSession

log = logging.getLogger(__name__)

WINDOW = 8
HALF = WINDOW // 2
N_CHANNELS = 4
EPSILON = 1e-10

ADL, FALL = 0, 1


@dataclass(frozen=True)
class LabeledWindow:
    values: np.ndarray
    label: Category
    source: tuple[str, int]
    code: str

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (WINDOW, N_CHANNELS):
            raise ValueError(f"window must be {WINDOW}x{N_CHANNELS}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("window contains missing or non-finite values")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "label", Category(self.label))


@dataclass
class WindowSet:
    """Columnar collection of labeled windows.

    ``provenance`` tags where the windows came from ("raw", "train", "test");
    ``standardized_with`` holds the fingerprint of the stats applied, if any.
    """

    X: np.ndarray
    y: np.ndarray
    codes: np.ndarray
    sessions: np.ndarray
    starts: np.ndarray
    synthetic: np.ndarray | None = None
    provenance: str = "raw"
    standardized_with: str | None = None

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=np.float64).reshape(-1, WINDOW, N_CHANNELS)
        n = len(self.X)
        self.y = np.asarray(self.y, dtype=np.int64).reshape(n)
        self.codes = np.asarray(self.codes, dtype=object).reshape(n)
        self.sessions = np.asarray(self.sessions, dtype=object).reshape(n)
        self.starts = np.asarray(self.starts, dtype=np.int64).reshape(n)
        if self.synthetic is None:
            self.synthetic = np.zeros(n, dtype=bool)
        self.synthetic = np.asarray(self.synthetic, dtype=bool).reshape(n)

    def __len__(self) -> int:
        return len(self.X)

    @classmethod
    def empty(cls, provenance: str = "raw") -> "WindowSet":
        return cls(np.zeros((0, WINDOW, N_CHANNELS)), [], [], [], [], provenance=provenance)

    @classmethod
    def from_windows(cls, windows: Sequence[LabeledWindow], provenance: str = "raw") -> "WindowSet":
        if not windows:
            return cls.empty(provenance)
        return cls(
            np.stack([w.values for w in windows]),
            [FALL if w.label is Category.FALL else ADL for w in windows],
            [w.code for w in windows],
            [w.source[0] for w in windows],
            [w.source[1] for w in windows],
            provenance=provenance,
        )

    def windows(self) -> Iterable[LabeledWindow]:
        for i in range(len(self)):
            yield LabeledWindow(
                self.X[i],
                Category.FALL if self.y[i] == FALL else Category.ADL,
                (str(self.sessions[i]), int(self.starts[i])),
                str(self.codes[i]),
            )

    def subset(self, idx) -> "WindowSet":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(
            self,
            X=self.X[idx],
            y=self.y[idx],
            codes=self.codes[idx],
            sessions=self.sessions[idx],
            starts=self.starts[idx],
            synthetic=self.synthetic[idx],
        )

    def counts(self) -> dict[str, int]:
        return {"ADL": int(np.sum(self.y == ADL)), "Fall": int(np.sum(self.y == FALL))}

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.X).tobytes())
        h.update(self.y.tobytes())
        return h.hexdigest()[:16]

    def save(self, stem: str | Path, extra: dict | None = None) -> None:
        """Write ``<stem>.npz`` plus a ``<stem>.json`` metadata sidecar."""
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        np.savez(
            stem.with_suffix(".npz"),
            X=self.X,
            y=self.y,
            codes=self.codes.astype(str),
            sessions=self.sessions.astype(str),
            starts=self.starts,
            synthetic=self.synthetic,
        )
        meta = {
            "format": "fdaas-windows/1",
            "n": len(self),
            "counts": self.counts(),
            "provenance": self.provenance,
            "standardized_with": self.standardized_with,
            "fingerprint": self.fingerprint(),
        }
        meta.update(extra or {})
        stem.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, stem: str | Path) -> "WindowSet":
        stem = Path(stem)
        meta = json.loads(stem.with_suffix(".json").read_text())
        with np.load(stem.with_suffix(".npz"), allow_pickle=False) as z:
            return cls(
                z["X"], z["y"], z["codes"], z["sessions"], z["starts"], z["synthetic"],
                provenance=meta.get("provenance", "raw"),
                standardized_with=meta.get("standardized_with"),
            )


def concat(sets: Sequence[WindowSet], provenance: str | None = None) -> WindowSet:
    sets = [s for s in sets]
    if not sets:
        return WindowSet.empty(provenance or "raw")
    return WindowSet(
        np.concatenate([s.X for s in sets]),
        np.concatenate([s.y for s in sets]),
        np.concatenate([s.codes for s in sets]),
        np.concatenate([s.sessions for s in sets]),
        np.concatenate([s.starts for s in sets]),
        np.concatenate([s.synthetic for s in sets]),
        provenance=provenance or sets[0].provenance,
        standardized_with=sets[0].standardized_with,
    )


# --------------------------------------------------------------------------
# windowing


def extract_fall_window(session: AnnotatedSession, annotation: Annotation) -> LabeledWindow:
    """The 8 readings covering [start - 4 s, start + 4 s) around a fall onset."""
    if not annotation.is_fall:
        raise ValueError(f"{annotation.code} is not a fall")
    i = annotation.start - session.start
    arr = session.to_array()
    if i - HALF < 0 or i + HALF > len(arr):
        raise InsufficientContext(
            f"fall at {annotation.start} needs {HALF} s of context on each side in session {session.session_id}"
        )
    return LabeledWindow(arr[i - HALF : i + HALF], Category.FALL, (session.session_id, annotation.start - HALF), annotation.code)


def slide_adl_windows(
    segment: np.ndarray, code: str = "ADL", session_id: str = "", start_time: int = 0, stride: int = 1
) -> list[LabeledWindow]:
    """All stride-1 8-second windows over an ADL run of T readings (T - 7 of them)."""
    seg = np.asarray(segment, dtype=np.float64)
    n = len(seg) - WINDOW + 1
    if n <= 0:
        return []
    return [
        LabeledWindow(seg[k : k + WINDOW], Category.ADL, (session_id, start_time + k), code)
        for k in range(0, n, stride)
    ]


def windows_from_session(session: AnnotatedSession) -> WindowSet:
    """Fall windows per fall annotation plus sliding windows over every ADL annotation."""
    arr = session.to_array()
    t0 = session.start
    out: list[LabeledWindow] = []
    dropped = 0
    for a in session.annotations:
        if a.is_fall:
            try:
                out.append(extract_fall_window(session, a))
            except InsufficientContext:
                dropped += 1
        else:
            seg = arr[a.start - t0 : a.end - t0]
            out.extend(slide_adl_windows(seg, a.code, session.session_id, a.start))
    if dropped:
        log.info("session %s: dropped %d fall windows with insufficient context", session.session_id, dropped)
    return WindowSet.from_windows(out)


def windows_from_sessions(sessions: Iterable[AnnotatedSession]) -> WindowSet:
    return concat([windows_from_session(s) for s in sessions], provenance="raw")


# --------------------------------------------------------------------------
# standardization


@dataclass(frozen=True)
class StandardizationStats:
    mean: tuple[float, ...]
    std: tuple[float, ...]
    epsilon: float = EPSILON
    provenance: str = "train"

    def __post_init__(self) -> None:
        if self.epsilon != EPSILON:
            raise ValueError("epsilon is fixed at 1e-10")
        if len(self.mean) != N_CHANNELS or len(self.std) != N_CHANNELS:
            raise ValueError("stats need one mean and std per channel")
        if any(s < 0 for s in self.std):
            raise ValueError("std must be non-negative")

    @property
    def fingerprint(self) -> str:
        payload = json.dumps([list(map(float.hex, self.mean)), list(map(float.hex, self.std))])
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {"mean": list(self.mean), "std": list(self.std), "epsilon": self.epsilon, "provenance": self.provenance}

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizationStats":
        return cls(tuple(d["mean"]), tuple(d["std"]), d.get("epsilon", EPSILON), d.get("provenance", "train"))

    def transform(self, X: np.ndarray) -> np.ndarray:
        mean = np.asarray(self.mean)
        std = np.asarray(self.std)
        return (np.asarray(X, dtype=np.float64) - mean) / (std + self.epsilon)

    def inverse(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) * (np.asarray(self.std) + self.epsilon) + np.asarray(self.mean)


def fit_standardizer(train: WindowSet | Sequence[LabeledWindow]) -> StandardizationStats:
    """Per-channel mean and population std over every timestep of every window."""
    if not isinstance(train, WindowSet):
        train = WindowSet.from_windows(list(train), provenance="train")
    if len(train) == 0:
        raise EmptyTrainingSet("cannot fit standardizer on an empty training set")
    flat = train.X.reshape(-1, N_CHANNELS)
    mean, std = flat.mean(axis=0), flat.std(axis=0)
    # summation rounding can leave a constant channel with a tiny non-zero spread
    const = flat.min(axis=0) == flat.max(axis=0)
    mean = np.where(const, flat[0], mean)
    std = np.where(const, 0.0, std)
    return StandardizationStats(
        tuple(float(v) for v in mean),
        tuple(float(v) for v in std),
        provenance=train.provenance,
    )


def apply_standardizer(stats: StandardizationStats, windows: WindowSet) -> WindowSet:
    """out = (x - mean) / (std + 1e-10), channel-wise.

    Test windows may only be transformed with statistics fitted on a
    training split.
    """
    if windows.provenance == "test" and stats.provenance != "train":
        raise StatsMismatch(f"test windows must use train statistics, got provenance {stats.provenance!r}")
    return replace(windows, X=stats.transform(windows.X), standardized_with=stats.fingerprint)


# --------------------------------------------------------------------------
# splitting


@dataclass
class DatasetSplit:
    train: WindowSet
    test: WindowSet
    seed: int


def _n_train(n: int, fraction: float) -> int:
    return int(np.floor(n * fraction + 0.5))


def stratified_split(windows: WindowSet, train_fraction: float = 0.8, seed: int = 0) -> DatasetSplit:
    """Per-class shuffled split that preserves the ADL:fall ratio."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in (ADL, FALL):
        idx = np.flatnonzero(windows.y == cls)
        if len(idx) == 0:
            raise MissingClass(f"no {'Fall' if cls == FALL else 'ADL'} windows to split")
        idx = idx[rng.permutation(len(idx))]
        k = _n_train(len(idx), train_fraction)
        train_idx.append(idx[:k])
        test_idx.append(idx[k:])
    tr = np.sort(np.concatenate(train_idx))
    te = np.sort(np.concatenate(test_idx))
    train = windows.subset(tr)
    test = windows.subset(te)
    train.provenance, test.provenance = "train", "test"
    return DatasetSplit(train, test, seed)
