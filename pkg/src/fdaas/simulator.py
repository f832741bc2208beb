"""Seeded synthetic sessions that follow the fall/ADL collection protocol.

Each activity is rendered from a per-channel template (posture distance
offset, physiological-state pattern, heart/breathing-rate deltas) plus
Gaussian noise. Falls are an abrupt distance step toward the floor plane,
a short ps=4 burst, then a flat plateau with ps in {0, 1}.

The ``difficulty`` knob in [0, 1] speeds up near-miss ADL transitions
(sitting/lying down), occasionally makes them abrupt, shrinks fall steps
and inflates noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (
    ADL_CODES,
    FALL_CODES,
    Annotation,
    Category,
    EventSequence,
    HealthSensingEvent,
    Manifest,
    ManifestEntry,
    RadarReading,
    label_category,
    parse_annotations,
    parse_event_stream,
    serialize_annotations,
    serialize_event_stream,
)

MIN_DISTANCE = 1.0
MAX_DISTANCE = 3.0

# posture distance offsets (m) relative to the standing baseline
STAND = 0.0
SIT = 0.25
BED = 0.40
FLOOR = 0.80

ADL_DURATION = 20
FALL_DURATION = 2
FALL_BUFFER = 10
SETTLE_GAP = 3
RECOVERY = 5
DEFAULT_DIFFICULTY = 0.5

SESSION_EPOCH = 1_700_000_000

# posture (from, to) for transition ADLs
_TRANSITIONS: dict[str, tuple[float, float]] = {
    "SDC": (STAND, SIT),
    "SUC": (SIT, STAND),
    "SEB": (STAND, SIT),
    "TOB": (SIT, BED),
    "LDB": (SIT, BED),
    "RIB": (BED, SIT),
    "TFR": (BED, SIT),
    "SUG": (FLOOR, STAND),
}
_STATIC: dict[str, float] = {"STA": STAND, "SOB": SIT, "SOC": SIT, "LOB": BED, "LOG": FLOOR}
_NEAR_MISS = frozenset({"SDC", "SEB", "TOB", "LDB"})
# (hr delta, br delta) during the activity
_VITALS: dict[str, tuple[float, float]] = {
    "STA": (4.0, 1.0), "SOB": (0.0, 0.0), "SOC": (0.0, 0.0), "LOB": (-5.0, -2.0),
    "LOG": (-3.0, -1.0), "WLK": (14.0, 4.0), "SUG": (8.0, 2.0),
}
# posture just before each fall type
_FALL_PRE: dict[str, float] = {"FOB": BED, "FTR": STAND, "FST": STAND, "FSU": SIT, "FTU": STAND}


@dataclass(frozen=True)
class ParticipantProfile:
    id: str
    resting_hr: float = 70.0
    resting_br: float = 15.0
    baseline_distance: float = 1.6
    noise_scale: tuple[float, float, float] = (1.5, 0.8, 0.02)

    def __post_init__(self) -> None:
        if not 40.0 <= self.resting_hr <= 120.0:
            raise ValueError("resting_hr must lie in [40, 120]")
        if not 5.0 <= self.resting_br <= 30.0:
            raise ValueError("resting_br must lie in [5, 30]")
        if not MIN_DISTANCE <= self.baseline_distance <= MAX_DISTANCE:
            raise ValueError("baseline_distance must lie in the radar range [1, 3] m")
        if len(self.noise_scale) != 3 or any(s < 0 for s in self.noise_scale):
            raise ValueError("noise_scale holds three non-negative standard deviations (hr, br, d)")


@dataclass(frozen=True)
class ScriptItem:
    code: str
    duration: int
    repetitions: int = 3


@dataclass(frozen=True)
class ProtocolScript:
    items: tuple[ScriptItem, ...]
    buffer: int = FALL_BUFFER

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))
        if self.buffer < FALL_BUFFER:
            raise ValueError(f"fall buffer must be at least {FALL_BUFFER} s")
        for it in self.items:
            label_category(it.code)
            if it.repetitions < 3:
                raise ValueError(f"{it.code}: every activity is repeated at least 3 times")
            if it.duration < 1:
                raise ValueError(f"{it.code}: duration must be positive")

    @classmethod
    def default(cls) -> "ProtocolScript":
        """All 19 codes x 3 repetitions: ADLs first, then each fall type."""
        items = [ScriptItem(c, ADL_DURATION) for c in ADL_CODES]
        items += [ScriptItem(c, FALL_DURATION) for c in FALL_CODES]
        return cls(tuple(items))


@dataclass(frozen=True)
class AnnotatedSession:
    session_id: str
    sequence: EventSequence
    annotations: tuple[Annotation, ...]
    participant: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "annotations", tuple(self.annotations))
        spans = sorted((a.start, a.end) for a in self.annotations)
        for (_, e0), (s1, _) in zip(spans, spans[1:]):
            if s1 < e0:
                raise ValueError("annotations overlap")
        if spans and self.sequence.events:
            if spans[0][0] < self.start or spans[-1][1] > self.end:
                raise ValueError("annotation outside the session")

    @property
    def start(self) -> int:
        return self.sequence.events[0].start if self.sequence.events else 0

    @property
    def end(self) -> int:
        return self.sequence.events[-1].end if self.sequence.events else 0

    def to_array(self) -> np.ndarray:
        """(n_seconds, 4) float array of hr, br, d, ps in stream order."""
        rows = [r.as_tuple() for e in self.sequence.events for r in e.data]
        return np.asarray(rows, dtype=np.float64).reshape(-1, 4)

    def timestamps(self) -> np.ndarray:
        return np.asarray([t for e in self.sequence.events for t in e.ts], dtype=np.int64)


def _ramp(n: int, onset: float, tau: float, a: float, b: float) -> np.ndarray:
    """Half-cosine transition from a to b starting at ``onset`` over ``tau`` seconds."""
    t = np.arange(n, dtype=np.float64)
    u = np.clip((t - onset) / tau, 0.0, 1.0)
    return a + (b - a) * 0.5 * (1.0 - np.cos(math.pi * u))


@dataclass
class _Timeline:
    d: list[np.ndarray] = field(default_factory=list)
    ps: list[np.ndarray] = field(default_factory=list)
    hr: list[np.ndarray] = field(default_factory=list)
    br: list[np.ndarray] = field(default_factory=list)
    # (length, annotation code or None, annotation start shift)
    segments: list[tuple[int, str | None, int]] = field(default_factory=list)

    def add(self, d, ps, hr, br, code: str | None, shift: int = 0) -> None:
        n = len(d)
        self.d.append(np.asarray(d, float))
        self.ps.append(np.asarray(ps, float))
        self.hr.append(np.broadcast_to(np.asarray(hr, float), (n,)).copy())
        self.br.append(np.broadcast_to(np.asarray(br, float), (n,)).copy())
        self.segments.append((n, code, shift))

    @property
    def last_d(self) -> float:
        return float(self.d[-1][-1]) if self.d else STAND


def _calm_ps(rng: np.random.Generator, n: int, level: int = 1) -> np.ndarray:
    ps = np.full(n, float(level))
    flicker = rng.random(n) < 0.1
    ps[flicker] = min(level + 1, 4)
    return ps


def _settle(tl: _Timeline, rng: np.random.Generator, target: float, n: int = SETTLE_GAP) -> None:
    start = tl.last_d
    d = _ramp(n, 0.0, n, start, target)
    tl.add(d, _calm_ps(rng, n, 2), 0.0, 0.0, None)


def _adl(tl: _Timeline, rng: np.random.Generator, code: str, n: int, difficulty: float) -> float:
    """Append one ADL segment; returns its first distance offset."""
    hr_d, br_d = _VITALS.get(code, (3.0, 0.5))
    if code in _STATIC:
        d = np.full(n, _STATIC[code])
        ps = _calm_ps(rng, n)
    elif code == "WLK":
        period = rng.uniform(8.0, 12.0)
        phase = rng.uniform(0, 2 * math.pi)
        t = np.arange(n)
        d = 0.15 + 0.15 * np.sin(2 * math.pi * t / period + phase)
        ps = np.full(n, 4.0)
    else:
        a, b = _TRANSITIONS[code]
        if code == "RIB" and rng.random() < 0.5:
            a, b = SIT, STAND
        if code in _NEAR_MISS and rng.random() < difficulty:
            d, ps, hr_d, br_d = _flop(rng, a, n, difficulty, hr_d, br_d)
        else:
            if code == "SUG":
                tau = rng.uniform(5.0, 8.0)
            else:
                tau = max(rng.uniform(2.5, 5.0) * (1.0 - 0.6 * difficulty), 1.0)
            onset = rng.uniform(3.0, max(3.0, n - tau - 3.0))
            d = _ramp(n, onset, tau, a, b)
            ps = _calm_ps(rng, n)
            t = np.arange(n)
            ps[(t >= math.floor(onset)) & (t <= math.ceil(onset + tau))] = 3.0
    tl.add(d, ps, hr_d, br_d, code)
    return float(d[0])


def _impact_response(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Heart/breathing-rate spike after an impact, decaying over ~8 s."""
    k = np.arange(n)
    return rng.uniform(10.0, 20.0) * np.exp(-k / 8.0), rng.uniform(3.0, 6.0) * np.exp(-k / 8.0)


def _flop(rng: np.random.Generator, a: float, n: int, difficulty: float, hr_d: float, br_d: float):
    """A near-miss ADL rendered with the fall impact template (e.g. dropping onto a bed)."""
    magnitude = 1.0 - 0.4 * difficulty
    pre = rng.choice([STAND, SIT, BED])
    step = (FLOOR - pre) * magnitude
    k = int(rng.integers(4, n - 6))
    t = np.arange(n)
    d = np.where(t < k, a, a + step)
    ps = _calm_ps(rng, n)
    prep = int(rng.integers(0, 4))
    ps[max(0, k - prep) : k] = 3.0
    ps[k : k + 2] = 4.0
    hr_s, br_s = _impact_response(rng, n - k)
    hr = np.full(n, hr_d, dtype=float)
    br = np.full(n, br_d, dtype=float)
    hr[k:] += hr_s
    br[k:] += br_s
    return d, ps, hr, br


def _fall(
    tl: _Timeline, rng: np.random.Generator, code: str, n: int, buffer: int, difficulty: float
) -> None:
    """Pre-fall buffer, annotated impact of ``n`` seconds, floor plateau buffer, recovery."""
    pre = _FALL_PRE[code]
    _settle(tl, rng, pre)
    t = np.arange(buffer)
    if code == "FTR":
        d_pre = pre + 0.1 * np.clip(t - (buffer - 4), 0, None) / 4.0
        ps_pre = np.where(t >= buffer - 4, 4.0, 1.0)
    elif code == "FST":
        d_pre = _ramp(buffer, buffer - 2.0, 4.0, STAND, SIT)
        ps_pre = np.where(t >= buffer - 2, 3.0, 1.0)
    elif code == "FSU":
        d_pre = _ramp(buffer, buffer - 2.0, 4.0, SIT, STAND)
        ps_pre = np.where(t >= buffer - 2, 3.0, 1.0)
    elif code == "FTU":
        d_pre = np.full(buffer, pre)
        ps_pre = np.where(t >= buffer - 3, 3.0, 1.0)
    else:
        d_pre = np.full(buffer, pre)
        ps_pre = _calm_ps(rng, buffer)
    tl.add(d_pre, ps_pre, 0.0, 0.0, None)

    magnitude = 1.0 - 0.4 * difficulty
    start_d = float(d_pre[-1])
    floor_d = start_d + (FLOOR - start_d) * magnitude
    post_ps = 0.0 if rng.random() < 0.3 * (1.0 - difficulty) else 1.0
    # impact: descent over one or two samples, then flat
    impact = np.full(n, floor_d)
    if n >= 2 and code in ("FST", "FSU") and rng.random() < 0.5:
        impact[0] = start_d + 0.6 * (floor_d - start_d)
    ps_imp = _calm_ps(rng, n, int(post_ps))
    ps_imp[: min(2, n)] = 4.0
    hr_spike, br_spike = _impact_response(rng, n + buffer)
    # manual labels are off by up to a second
    jitter = int(rng.integers(-1, 2)) if difficulty > 0 else 0
    tl.add(impact, ps_imp, hr_spike[:n], br_spike[:n], code, shift=jitter)

    plateau = np.full(buffer, floor_d)
    tl.add(plateau, _calm_ps(rng, buffer, int(post_ps)), hr_spike[n:], br_spike[n:], None)
    rec = _ramp(RECOVERY, 0.0, RECOVERY, floor_d, STAND)
    tl.add(rec, np.full(RECOVERY, 3.0), 6.0, 2.0, None)


def simulate_session(
    profile: ParticipantProfile,
    script: ProtocolScript,
    seed: int,
    difficulty: float = DEFAULT_DIFFICULTY,
    session_id: str | None = None,
    start_time: int = SESSION_EPOCH,
    location: str = "bedroom",
) -> AnnotatedSession:
    """Render one participant's run through ``script``.

    Deterministic in (profile, script, seed, difficulty).
    """
    if not 0.0 <= difficulty <= 1.0:
        raise ValueError("difficulty must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    sid = session_id or f"{profile.id}-s{seed}"
    tl = _Timeline()
    lead = np.full(script.buffer, STAND)
    tl.add(lead, _calm_ps(rng, script.buffer), 0.0, 0.0, None)

    for item in script.items:
        fall = label_category(item.code) is Category.FALL
        for _ in range(item.repetitions):
            if fall:
                _fall(tl, rng, item.code, item.duration, script.buffer, difficulty)
            else:
                seg_rng = np.random.default_rng(rng.integers(2**63))
                first = _peek_first(seg_rng, item.code, item.duration, difficulty)
                _settle(tl, rng, first)
                _adl(tl, seg_rng, item.code, item.duration, difficulty)
    _settle(tl, rng, STAND)

    noise = np.asarray(profile.noise_scale, float) * (0.5 + difficulty)
    d = profile.baseline_distance + np.concatenate(tl.d)
    n = len(d)
    d = np.clip(d + rng.normal(0.0, noise[2], n), MIN_DISTANCE, MAX_DISTANCE)
    hr = np.clip(profile.resting_hr + np.concatenate(tl.hr) + rng.normal(0.0, noise[0], n), 0.0, None)
    br = np.clip(profile.resting_br + np.concatenate(tl.br) + rng.normal(0.0, noise[1], n), 0.0, None)
    ps = np.concatenate(tl.ps).astype(int)

    events: list[HealthSensingEvent] = []
    annotations: list[Annotation] = []
    pos = 0
    for k, (length, code, shift) in enumerate(tl.segments):
        ts = tuple(range(start_time + pos, start_time + pos + length))
        data = tuple(
            RadarReading(round(float(hr[i]), 2), round(float(br[i]), 2), round(float(d[i]), 3), int(ps[i]))
            for i in range(pos, pos + length)
        )
        events.append(HealthSensingEvent(f"{sid}-{k:04d}", data, ts, location))
        if code is not None:
            annotations.append(Annotation(code, ts[0] + shift, ts[-1] + 1 + shift))
        pos += length
    return AnnotatedSession(sid, EventSequence(tuple(events)), tuple(annotations), profile.id)


def _peek_first(rng: np.random.Generator, code: str, n: int, difficulty: float) -> float:
    """Starting distance offset of an ADL segment, without consuming ``rng``."""
    probe = _Timeline()
    state = rng.bit_generator.state
    first = _adl(probe, rng, code, n, difficulty)
    rng.bit_generator.state = state
    return first


def sample_profile(rng: np.random.Generator, pid: str) -> ParticipantProfile:
    return ParticipantProfile(
        id=pid,
        resting_hr=float(rng.uniform(58.0, 85.0)),
        resting_br=float(rng.uniform(11.0, 19.0)),
        baseline_distance=float(rng.uniform(1.2, 2.0)),
        noise_scale=(float(rng.uniform(1.0, 2.0)), float(rng.uniform(0.5, 1.0)), float(rng.uniform(0.015, 0.03))),
    )


def generate_dataset(
    n_participants: int,
    seed: int,
    difficulty: float = DEFAULT_DIFFICULTY,
    script: ProtocolScript | None = None,
) -> list[AnnotatedSession]:
    """One annotated session per simulated participant."""
    if n_participants < 1:
        raise ValueError("n_participants must be >= 1")
    script = script or ProtocolScript.default()
    ss = np.random.SeedSequence(seed)
    sessions = []
    for i, child in enumerate(ss.spawn(n_participants)):
        rng = np.random.default_rng(child)
        profile = sample_profile(rng, f"P{i + 1:02d}")
        sessions.append(
            simulate_session(
                profile,
                script,
                seed=int(rng.integers(2**31)),
                difficulty=difficulty,
                session_id=f"{profile.id}",
                start_time=SESSION_EPOCH + i * 100_000,
            )
        )
    return sessions


def fall_step_magnitude(code: str, difficulty: float = DEFAULT_DIFFICULTY) -> float:
    """Nominal distance step (m) the generator applies for a fall type."""
    pre = _FALL_PRE[code]
    return (FLOOR - pre) * (1.0 - 0.4 * difficulty)


def fall_script(codes: Sequence[str] = ("FTR",), repetitions: int = 3, lead_adl: str = "STA") -> ProtocolScript:
    """A small script: one calm ADL then the given fall types."""
    items = [ScriptItem(lead_adl, ADL_DURATION, 3)]
    items += [ScriptItem(c, FALL_DURATION, repetitions) for c in codes]
    return ProtocolScript(tuple(items))


def make_separable_windows(n: int, seed: int = 0, fall_fraction: float = 0.5, step_sigmas: float = 3.0):
    """Toy windows in raw units: calm ADLs versus a distance step inside the window.

    ADL windows hold a steady posture with per-window vitals and sensor
    noise. Fall windows add a step of 0.5 to 1.5 times ``step_sigmas`` ADL
    distance spreads at timestep 3, 4 or 5, with the ps burst and vitals spike of a
    simulated fall. Half the ADL windows carry a movement burst with no
    step, so the step is the only reliable cue. Returns a raw ``WindowSet``.
    """
    from .preprocessing import ADL, FALL, WINDOW, WindowSet

    rng = np.random.default_rng(seed)
    n_fall = int(round(n * fall_fraction))
    labels = np.array([FALL] * n_fall + [ADL] * (n - n_fall))
    labels = labels[rng.permutation(n)]
    base_d = rng.uniform(1.2, 2.0, n) + rng.choice([STAND, SIT, BED], n)
    d_spread = float(np.std(base_d))
    step = step_sigmas * d_spread
    X = np.empty((n, WINDOW, 4))
    codes = []
    for i in range(n):
        hr = rng.uniform(58.0, 85.0) + rng.normal(0.0, 1.5, WINDOW)
        br = rng.uniform(11.0, 19.0) + rng.normal(0.0, 0.8, WINDOW)
        d = base_d[i] + rng.normal(0.0, 0.02, WINDOW)
        ps = np.where(rng.random(WINDOW) < 0.1, 2.0, 1.0)
        if labels[i] == FALL:
            k = int(rng.integers(3, 6))
            d[k:] += step * rng.uniform(0.5, 1.5)
            ps[k : k + 2] = 4.0
            ps[k + 2 :] = 1.0
            spike = rng.uniform(10.0, 20.0) * np.exp(-np.arange(WINDOW - k) / 8.0)
            hr[k:] += spike
            br[k:] += spike / 4.0
            codes.append("FTR")
        else:
            if rng.random() < 0.5:
                # movement without a posture change
                k = int(rng.integers(0, WINDOW - 2))
                ps[k : k + int(rng.integers(2, 5))] = 4.0
            codes.append("STA")
        X[i] = np.stack([hr, br, np.clip(d, MIN_DISTANCE, MAX_DISTANCE), ps], axis=1)
    return WindowSet(X, labels, codes, ["toy"] * n, np.arange(n))


def save_sessions(sessions: Sequence[AnnotatedSession], out_dir: str | Path) -> Path:
    """Write each session as a record file plus an annotation file; return the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for s in sessions:
        rec, ann = f"{s.session_id}.csv", f"{s.session_id}.ann.csv"
        (out / rec).write_bytes(serialize_event_stream(s.sequence))
        (out / ann).write_bytes(serialize_annotations(s.annotations))
        entries.append(ManifestEntry(s.session_id, rec, ann, s.participant))
    path = out / "manifest.json"
    Manifest(entries, out).save(path)
    return path


def load_sessions(manifest_path: str | Path) -> list[AnnotatedSession]:
    manifest = Manifest.load(manifest_path)
    sessions = []
    for e in manifest.entries:
        seq = parse_event_stream((manifest.root / e.session_file).read_bytes())
        anns = parse_annotations((manifest.root / e.annotation_file).read_bytes())
        sessions.append(AnnotatedSession(e.session_id, seq, tuple(anns), e.participant))
    return sessions
