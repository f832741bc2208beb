"""Service data model: radar readings, sensing events, activity taxonomy, QoS.

Record streams are line-delimited CSV with no header, one reading per line::

    hse_id,timestamp,location,hr,br,d,ps

Timestamps are integer epoch seconds (1 Hz sensing).
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    InvalidCategory,
    MalformedRecord,
    NonMonotonicTimestamps,
    UnknownCode,
)

N_CHANNELS = 4
CHANNELS = ("hr", "br", "d", "ps")
RECORD_FIELDS = ("hse_id", "timestamp", "location", "hr", "br", "d", "ps")

PS_NO_PRESENCE = 0
PS_CONSTANT_CALM = 1
PS_INTERMITTENT = 2
PS_MINOR_MOVEMENT = 3
PS_CONTINUED = 4


class Category(str, Enum):
    ADL = "ADL"
    FALL = "Fall"


# code -> row descriptions; RIB covers both of its table rows
ADL_CODES: dict[str, tuple[str, ...]] = {
    "STA": ("Standing",),
    "SOB": ("Sitting on a bed edge",),
    "SOC": ("Sitting on a chair",),
    "LOB": ("Lying on a bed",),
    "LOG": ("Lying on the ground",),
    "WLK": ("Walking",),
    "SDC": ("Sitting down on a chair",),
    "SUC": ("Standing up from a chair",),
    "SEB": ("Sitting down on a bed edge",),
    "TOB": ("Putting legs onto a bed",),
    "LDB": ("Lying down on a bed",),
    "RIB": ("Rising up from a bed", "Standing up from a bed edge"),
    "TFR": ("Putting legs out of a bed",),
    "SUG": ("Standing up from the ground",),
}
FALL_CODES: dict[str, tuple[str, ...]] = {
    "FOB": ("Falling out of a bed",),
    "FTR": ("Falling by tripping",),
    "FST": ("Falling while sitting down",),
    "FSU": ("Falling while standing up",),
    "FTU": ("Falling while turning",),
}
ALL_CODES: tuple[str, ...] = tuple(ADL_CODES) + tuple(FALL_CODES)


def label_category(code: str) -> Category:
    """Map an activity code to ADL or Fall."""
    if code in FALL_CODES:
        return Category.FALL
    if code in ADL_CODES:
        return Category.ADL
    raise UnknownCode(code)


def describe(code: str) -> tuple[str, ...]:
    label_category(code)
    return ADL_CODES.get(code) or FALL_CODES[code]


@dataclass(frozen=True)
class ActivityLabel:
    code: str

    def __post_init__(self) -> None:
        label_category(self.code)

    @property
    def category(self) -> Category:
        return label_category(self.code)


@dataclass(frozen=True)
class RadarReading:
    """One per-second sample: heart rate, breathing rate, distance, physiological state."""

    hr: float
    br: float
    d: float
    ps: int

    def __post_init__(self) -> None:
        if isinstance(self.ps, bool) or not isinstance(self.ps, int) or not 0 <= self.ps <= 4:
            raise InvalidCategory(self.ps)
        for name in ("hr", "br", "d"):
            v = getattr(self, name)
            if not v >= 0.0 or v != v or v == float("inf"):
                raise ValueError(f"{name} must be a finite non-negative number, got {v!r}")

    def as_tuple(self) -> tuple[float, float, float, int]:
        return (self.hr, self.br, self.d, self.ps)


@dataclass(frozen=True)
class HealthSensingEvent:
    hse_id: str
    data: tuple[RadarReading, ...]
    ts: tuple[int, ...]
    location: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", tuple(self.data))
        object.__setattr__(self, "ts", tuple(int(t) for t in self.ts))
        if not self.data or len(self.data) != len(self.ts):
            raise ValueError(f"event {self.hse_id!r}: data and timestamps must be non-empty and equal length")
        if any(b - a != 1 for a, b in zip(self.ts, self.ts[1:])):
            raise NonMonotonicTimestamps(self.hse_id)

    @property
    def start(self) -> int:
        return self.ts[0]

    @property
    def end(self) -> int:
        """Exclusive end second."""
        return self.ts[-1] + 1


@dataclass(frozen=True)
class EventSequence:
    events: tuple[HealthSensingEvent, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))
        seen: set[str] = set()
        for e in self.events:
            if e.hse_id in seen:
                raise ValueError(f"duplicate hse_id {e.hse_id!r}")
            seen.add(e.hse_id)
        starts = [e.start for e in self.events]
        if starts != sorted(starts):
            raise ValueError("events are not in chronological order")

    def __len__(self) -> int:
        return len(self.events)

    def readings(self) -> list[tuple[int, RadarReading]]:
        """Flatten to (timestamp, reading) pairs in stream order."""
        return [(t, r) for e in self.events for t, r in zip(e.ts, e.data)]


@dataclass(frozen=True)
class HealthSensingService:
    id: str
    rid: str
    location: str
    duration: tuple[int, int]
    stream: tuple[RadarReading, ...] = ()

    def __post_init__(self) -> None:
        start, end = self.duration
        if not start < end:
            raise ValueError("service start_time must precede end_time")
        object.__setattr__(self, "stream", tuple(self.stream))
        if self.stream and len(self.stream) != end - start:
            raise ValueError("stream length must equal whole seconds in the service duration")

    def contains(self, seq: EventSequence) -> bool:
        start, end = self.duration
        return all(start <= e.start and e.end <= end for e in seq.events)


class PrivacyLevel(str, Enum):
    LOCAL_ONLY = "local-only"
    ANONYMIZED = "anonymized"


@dataclass(frozen=True)
class FdaasQos:
    accuracy: float = 0.95
    f1: float = 0.90
    max_latency: float = 2.0
    privacy: PrivacyLevel = PrivacyLevel.LOCAL_ONLY
    reliability: float = 0.999

    def __post_init__(self) -> None:
        for name in ("accuracy", "f1", "reliability"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not self.max_latency > 0:
            raise ValueError("max_latency must be positive")
        object.__setattr__(self, "privacy", PrivacyLevel(self.privacy))

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "f1": self.f1,
            "max_latency": self.max_latency,
            "privacy": self.privacy.value,
            "reliability": self.reliability,
        }


class AgeGroup(str, Enum):
    ELDERLY_80_PLUS = "Elderly80Plus"
    OTHER = "Other"


class HealthCondition(str, Enum):
    CRITICAL = "Critical"
    STABLE = "Stable"


class ResourceAvailability(str, Enum):
    LIMITED = "Limited"
    AMPLE = "Ample"


@dataclass(frozen=True)
class ResidentContext:
    age_group: AgeGroup
    health_condition: HealthCondition
    resource_availability: ResourceAvailability

    def __post_init__(self) -> None:
        object.__setattr__(self, "age_group", AgeGroup(self.age_group))
        object.__setattr__(self, "health_condition", HealthCondition(self.health_condition))
        object.__setattr__(self, "resource_availability", ResourceAvailability(self.resource_availability))


# --------------------------------------------------------------------------
# record streams


def _format_float(x: float) -> str:
    return repr(float(x))


def iter_record_lines(seq: EventSequence) -> Iterable[str]:
    for e in seq.events:
        for t, r in zip(e.ts, e.data):
            yield format_record(e.hse_id, t, e.location, r)


def format_record(hse_id: str, ts: int, location: str, r: RadarReading) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(
        [hse_id, int(ts), location, _format_float(r.hr), _format_float(r.br), _format_float(r.d), int(r.ps)]
    )
    return buf.getvalue()


def serialize_event_stream(seq: EventSequence) -> bytes:
    return "".join(iter_record_lines(seq)).encode("utf-8")


def parse_record(row: Sequence[str], line_no: int) -> tuple[str, int, str, RadarReading]:
    """Parse one already-split CSV row into (hse_id, ts, location, reading)."""
    if len(row) != len(RECORD_FIELDS):
        raise MalformedRecord(line_no, f"expected {len(RECORD_FIELDS)} fields, got {len(row)}")
    hse_id, ts, location, hr, br, d, ps = row
    if not hse_id:
        raise MalformedRecord(line_no, "empty hse_id")
    try:
        ts_i = int(ts)
        hr_f, br_f, d_f = float(hr), float(br), float(d)
        ps_i = int(ps)
    except ValueError as exc:
        raise MalformedRecord(line_no, str(exc)) from None
    if not 0 <= ps_i <= 4:
        raise InvalidCategory(ps_i)
    try:
        reading = RadarReading(hr_f, br_f, d_f, ps_i)
    except ValueError as exc:
        raise MalformedRecord(line_no, str(exc)) from None
    return hse_id, ts_i, location, reading


def parse_record_line(line: str, line_no: int = 1) -> tuple[str, int, str, RadarReading]:
    rows = list(csv.reader([line.rstrip("\r\n")]))
    if len(rows) != 1:
        raise MalformedRecord(line_no, "empty line")
    return parse_record(rows[0], line_no)


def parse_event_stream(data: bytes | str) -> EventSequence:
    """Parse line-delimited records into an EventSequence.

    Consecutive lines with the same hse_id form one event. An id that
    reappears after another event has started is rejected.
    """
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    events: list[HealthSensingEvent] = []
    cur_id: str | None = None
    cur_loc = ""
    cur_data: list[RadarReading] = []
    cur_ts: list[int] = []
    closed: set[str] = set()

    def flush() -> None:
        if cur_id is None:
            return
        events.append(HealthSensingEvent(cur_id, tuple(cur_data), tuple(cur_ts), cur_loc))
        closed.add(cur_id)

    for line_no, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row:
            continue
        hse_id, ts, location, reading = parse_record(row, line_no)
        if hse_id != cur_id:
            flush()
            if hse_id in closed:
                raise MalformedRecord(line_no, f"event {hse_id!r} is not contiguous")
            cur_id, cur_loc, cur_data, cur_ts = hse_id, location, [], []
        elif location != cur_loc:
            raise MalformedRecord(line_no, "location changes within one event")
        if cur_ts and ts - cur_ts[-1] != 1:
            raise NonMonotonicTimestamps(hse_id)
        cur_data.append(reading)
        cur_ts.append(ts)
    flush()
    try:
        return EventSequence(tuple(events))
    except ValueError as exc:
        raise MalformedRecord(0, str(exc)) from None


# --------------------------------------------------------------------------
# annotations and manifests


@dataclass(frozen=True)
class Annotation:
    """A labeled segment, [start, end) in epoch seconds."""

    code: str
    start: int
    end: int

    def __post_init__(self) -> None:
        label_category(self.code)
        if not self.start < self.end:
            raise ValueError("annotation start must precede end")

    @property
    def category(self) -> Category:
        return label_category(self.code)

    @property
    def is_fall(self) -> bool:
        return self.category is Category.FALL


def serialize_annotations(annotations: Sequence[Annotation]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for a in annotations:
        w.writerow([a.code, a.start, a.end])
    return buf.getvalue().encode("utf-8")


def parse_annotations(data: bytes | str) -> list[Annotation]:
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    out = []
    for line_no, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row:
            continue
        if len(row) != 3:
            raise MalformedRecord(line_no, "annotation needs code,start_time,end_time")
        try:
            out.append(Annotation(row[0], int(row[1]), int(row[2])))
        except UnknownCode:
            raise
        except ValueError as exc:
            raise MalformedRecord(line_no, str(exc)) from None
    return out


@dataclass
class ManifestEntry:
    session_id: str
    session_file: str
    annotation_file: str
    participant: str = ""


@dataclass
class Manifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    root: Path = Path(".")

    def to_json(self) -> str:
        payload = {
            "format": "fdaas-manifest/1",
            "sessions": [vars(e) for e in self.entries],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        path = Path(path)
        payload = json.loads(path.read_text())
        entries = [ManifestEntry(**e) for e in payload["sessions"]]
        return cls(entries, path.parent)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")
