"""Edge fall-detection runtime.

Readings arrive as record lines, are routed to a resident by event-id
prefix, and fill an 8-reading window per resident. Each full window is
scored by the detector that the rule-based selector assigned to the
resident. Alerts go to an asynchronous dispatcher that writes them to the
configured sinks; nothing else ever leaves the process.

Decisions use record timestamps only: the cooldown, the window-continuity
check and the alert timestamp never consult the wall clock, so a stream
yields the same alerts at any replay speed. Wall time is used only to
measure latency and to pace replay.
"""
from __future__ import annotations

import json
import logging
import os
import signal
import socket
import threading
import time
import urllib.error
import urllib.request
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Protocol, TextIO

import numpy as np

from .core import FdaasQos, RadarReading, ResidentContext, parse_record_line
from .errors import ConfigInvalid, InvalidCategory, MalformedRecord, MissingArtifact, SinkUnavailable, UnknownResident
from .models import TrainedDetector, load_detector, predict_raw
from .models.training import THRESHOLD
from .preprocessing import WINDOW
from .prompt import select_model

log = logging.getLogger(__name__)

DEFAULT_COOLDOWN = 30.0


@dataclass(frozen=True)
class FallAlert:
    resident_id: str
    timestamp: int
    probability: float
    window: tuple[tuple[float, ...], ...]
    latency: float
    architecture: str = ""
    hse_id: str = ""

    def __post_init__(self) -> None:
        if self.probability < THRESHOLD:
            raise ValueError("an alert needs a fall probability at or above the threshold")
        if self.latency < 0:
            raise ValueError("latency cannot be negative")

    def to_dict(self) -> dict:
        return {
            "resident_id": self.resident_id,
            "timestamp": self.timestamp,
            "probability": self.probability,
            "latency": self.latency,
            "architecture": self.architecture,
            "hse_id": self.hse_id,
            "window": [list(r) for r in self.window],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "FallAlert":
        d = dict(d)
        d["window"] = tuple(tuple(r) for r in d["window"])
        return cls(**d)


@dataclass
class ResidentSessionState:
    resident_id: str
    detector: TrainedDetector
    qos: FdaasQos = field(default_factory=FdaasQos)
    streams: tuple[str, ...] = ()
    buffer: deque = field(default_factory=lambda: deque(maxlen=WINDOW))
    last_ts: int | None = None
    last_alert_ts: int | None = None
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def stats(self):
        return self.detector.stats

    @property
    def architecture(self) -> str:
        return self.detector.architecture


@dataclass
class ServiceMetrics:
    readings_received: int = 0
    readings_processed: int = 0
    malformed: int = 0
    unknown_resident: int = 0
    dropped: int = 0
    inferences: int = 0
    alerts: int = 0
    suppressed: int = 0
    window_resets: int = 0
    qos_violations: int = 0
    latencies: list[float] = field(default_factory=list)
    started: float = field(default_factory=time.monotonic)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add(self, name: str, n: int = 1) -> None:
        with self.lock:
            setattr(self, name, getattr(self, name) + n)

    def to_dict(self, deliveries: dict | None = None) -> dict:
        with self.lock:
            uptime = time.monotonic() - self.started
            lat = list(self.latencies)
            d = {
                "uptime_seconds": uptime,
                "throughput_per_second": self.readings_processed / uptime if uptime > 0 else 0.0,
                "readings_received": self.readings_received,
                "readings_processed": self.readings_processed,
                "malformed": self.malformed,
                "unknown_resident": self.unknown_resident,
                "dropped": self.dropped,
                "inferences": self.inferences,
                "alerts": self.alerts,
                "suppressed": self.suppressed,
                "window_resets": self.window_resets,
                "qos_violations": self.qos_violations,
                "alert_latencies": lat,
                "max_latency": max(lat) if lat else None,
            }
        if deliveries is not None:
            d["deliveries"] = deliveries
        return d


# --------------------------------------------------------------------------
# sinks and dispatch


class AlertSink(Protocol):
    name: str

    def send(self, alert: FallAlert) -> int:
        """Deliver one alert; return the number of attempts. Raise SinkUnavailable on failure."""
        ...


def _require_alert(alert) -> None:
    # sinks are the only egress; refuse anything but alerts
    if not isinstance(alert, FallAlert):
        raise TypeError(f"sinks accept FallAlert only, got {type(alert).__name__}")


class FileSink:
    """Append-only JSON-lines alert log; each alert is one write of one full line."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.name = f"file:{self.path}"
        self._lock = threading.Lock()

    def send(self, alert: FallAlert) -> int:
        _require_alert(alert)
        data = (alert.to_json() + "\n").encode("utf-8")
        try:
            with self._lock:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                fd = os.open(self.path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
                try:
                    os.write(fd, data)
                    os.fsync(fd)
                finally:
                    os.close(fd)
        except OSError as exc:
            raise SinkUnavailable(f"{self.name}: {exc}") from exc
        return 1


def read_alert_log(path: str | Path) -> list[FallAlert]:
    p = Path(path)
    if not p.exists():
        return []
    return [FallAlert.from_dict(json.loads(line)) for line in p.read_text().splitlines() if line.strip()]


class WebhookSink:
    """HTTP POST of one JSON alert; 2xx is success, anything else is retried with exponential backoff."""

    def __init__(self, url: str, max_attempts: int = 5, backoff: float = 0.2, max_backoff: float = 5.0,
                 timeout: float = 2.0, sleep: Callable[[float], None] = time.sleep) -> None:
        if max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        self.url = url
        self.name = f"webhook:{url}"
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.max_backoff = max_backoff
        self.timeout = timeout
        self._sleep = sleep

    def send(self, alert: FallAlert) -> int:
        _require_alert(alert)
        body = alert.to_json().encode("utf-8")
        last = ""
        for attempt in range(1, self.max_attempts + 1):
            req = urllib.request.Request(
                self.url, data=body, method="POST", headers={"Content-Type": "application/json"}
            )
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    if 200 <= resp.status < 300:
                        return attempt
                    last = f"HTTP {resp.status}"
            except urllib.error.HTTPError as exc:
                last = f"HTTP {exc.code}"
            except (urllib.error.URLError, OSError) as exc:
                last = str(exc)
            if attempt < self.max_attempts:
                self._sleep(min(self.backoff * 2 ** (attempt - 1), self.max_backoff))
        err = SinkUnavailable(f"{self.name}: {last} after {self.max_attempts} attempts")
        err.attempts = self.max_attempts
        raise err


@dataclass(frozen=True)
class DeliveryRecord:
    sink: str
    resident_id: str
    timestamp: int
    attempts: int
    delivered: bool
    error: str = ""


def dispatch_alert(alert: FallAlert, sinks: Iterable[AlertSink]) -> list[DeliveryRecord]:
    """Send ``alert`` to every sink. Failures are recorded, never raised."""
    _require_alert(alert)
    records = []
    for sink in sinks:
        try:
            attempts = sink.send(alert)
            records.append(DeliveryRecord(sink.name, alert.resident_id, alert.timestamp, attempts, True))
        except Exception as exc:  # a sink must never take ingestion down
            attempts = getattr(exc, "attempts", 1)
            records.append(DeliveryRecord(sink.name, alert.resident_id, alert.timestamp, attempts, False, str(exc)))
            log.warning("alert delivery failed: %s", exc)
    return records


class AlertDispatcher:
    """Background delivery with a bounded redelivery queue for failed (alert, sink) pairs.

    ``submit`` blocks rather than discard when the alert queue is full. If
    the redelivery queue overflows, its oldest entry is given up and counted
    in ``abandoned``.
    """

    def __init__(self, sinks: Iterable[AlertSink], queue_size: int = 1024, redelivery_size: int = 1000,
                 retry_interval: float = 1.0) -> None:
        self.sinks = list(sinks)
        self.retry_interval = retry_interval
        self.records: list[DeliveryRecord] = []
        self.pending: deque[tuple[FallAlert, AlertSink]] = deque()
        self.redelivery_size = redelivery_size
        self.abandoned = 0
        self._queue: deque[FallAlert] = deque()
        self._queue_size = queue_size
        self._cond = threading.Condition()
        self._closing = False
        self._thread: threading.Thread | None = None

    def start(self) -> "AlertDispatcher":
        if self._thread is None:
            self._thread = threading.Thread(target=self._run, name="alert-dispatch", daemon=True)
            self._thread.start()
        return self

    def submit(self, alert: FallAlert) -> None:
        _require_alert(alert)
        with self._cond:
            while len(self._queue) >= self._queue_size and not self._closing:
                self._cond.wait(0.1)
            self._queue.append(alert)
            self._cond.notify_all()
        if self._thread is None:
            self._drain()

    def _deliver(self, alert: FallAlert, sinks: list[AlertSink]) -> None:
        for rec, sink in zip(dispatch_alert(alert, sinks), sinks):
            with self._cond:
                self.records.append(rec)
                if not rec.delivered:
                    if len(self.pending) >= self.redelivery_size:
                        self.pending.popleft()
                        self.abandoned += 1
                    self.pending.append((alert, sink))

    def _drain(self) -> None:
        while True:
            with self._cond:
                if not self._queue:
                    return
                alert = self._queue.popleft()
                self._cond.notify_all()
            self._deliver(alert, self.sinks)

    def retry_pending(self) -> None:
        with self._cond:
            batch = list(self.pending)
            self.pending.clear()
        for alert, sink in batch:
            self._deliver(alert, [sink])

    def _run(self) -> None:
        last_retry = time.monotonic()
        while True:
            with self._cond:
                if not self._queue and not self._closing:
                    self._cond.wait(self.retry_interval)
                closing = self._closing and not self._queue
            self._drain()
            if self.pending and time.monotonic() - last_retry >= self.retry_interval:
                self.retry_pending()
                last_retry = time.monotonic()
            if closing:
                return

    def close(self, timeout: float | None = 30.0) -> None:
        """Deliver everything queued, make one last redelivery pass, stop the thread."""
        with self._cond:
            self._closing = True
            self._cond.notify_all()
        if self._thread is not None:
            self._thread.join(timeout)
            self._thread = None
        self._drain()
        if self.pending:
            self.retry_pending()

    def summary(self) -> dict:
        with self._cond:
            return {
                "delivered": sum(r.delivered for r in self.records),
                "failed_attempts": sum(not r.delivered for r in self.records),
                "pending": len(self.pending),
                "abandoned": self.abandoned,
            }


# --------------------------------------------------------------------------
# ingestion


class EdgeService:
    """Per-resident windows, inference and alerting."""

    def __init__(self, residents: Iterable[ResidentSessionState], dispatcher: AlertDispatcher | None = None,
                 cooldown: float = DEFAULT_COOLDOWN, metrics: ServiceMetrics | None = None) -> None:
        self.residents = {r.resident_id: r for r in residents}
        self.dispatcher = dispatcher
        self.cooldown = cooldown
        self.metrics = metrics or ServiceMetrics()
        self.alerts: list[FallAlert] = []
        self._alerts_lock = threading.Lock()

    def resolve(self, hse_id: str) -> ResidentSessionState:
        """Resident owning event ``hse_id``; a lone resident without stream prefixes owns every stream."""
        for r in self.residents.values():
            if any(hse_id.startswith(p) for p in r.streams):
                return r
        if len(self.residents) == 1:
            (only,) = self.residents.values()
            if not only.streams:
                return only
        raise UnknownResident(hse_id)

    def parse(self, line: str, line_no: int = 0) -> tuple[ResidentSessionState, str, int, RadarReading] | None:
        """Parse and route one record line; malformed lines are counted and yield None."""
        self.metrics.add("readings_received")
        try:
            hse_id, ts, _, reading = parse_record_line(line, line_no)
        except (MalformedRecord, InvalidCategory, ValueError) as exc:
            self.metrics.add("malformed")
            log.debug("skipping record: %s", exc)
            return None
        try:
            resident = self.resolve(hse_id)
        except UnknownResident:
            self.metrics.add("unknown_resident")
            raise
        return resident, hse_id, ts, reading

    def ingest_line(self, line: str, line_no: int = 0, received: float | None = None) -> FallAlert | None:
        parsed = self.parse(line, line_no)
        if parsed is None:
            return None
        resident, hse_id, ts, reading = parsed
        return self.ingest(resident, ts, reading, hse_id, received)

    def ingest(self, resident: ResidentSessionState | str, ts: int, reading: RadarReading, hse_id: str = "",
               received: float | None = None) -> FallAlert | None:
        """Advance the resident's window by one reading; score it once full."""
        if isinstance(resident, str):
            if resident not in self.residents:
                self.metrics.add("unknown_resident")
                raise UnknownResident(resident)
            resident = self.residents[resident]
        received = time.monotonic() if received is None else received
        with resident.lock:
            if resident.last_ts is not None and ts != resident.last_ts + 1:
                # a window must cover consecutive seconds
                if resident.buffer:
                    self.metrics.add("window_resets")
                resident.buffer.clear()
            resident.last_ts = ts
            resident.buffer.append(reading.as_tuple())
            self.metrics.add("readings_processed")
            if len(resident.buffer) < WINDOW:
                return None
            window = np.asarray(resident.buffer, dtype=np.float64)
            p = float(predict_raw(resident.detector, window[None])[0])
            self.metrics.add("inferences")
            if p < THRESHOLD:
                return None
            if resident.last_alert_ts is not None and ts - resident.last_alert_ts < self.cooldown:
                self.metrics.add("suppressed")
                log.info("alert for %s at %d suppressed by cooldown", resident.resident_id, ts)
                return None
            resident.last_alert_ts = ts
            alert = FallAlert(
                resident.resident_id, int(ts), p, tuple(map(tuple, window.tolist())),
                max(0.0, time.monotonic() - received), resident.architecture, hse_id,
            )
        with self.metrics.lock:
            self.metrics.alerts += 1
            self.metrics.latencies.append(alert.latency)
            if alert.latency > resident.qos.max_latency:
                self.metrics.qos_violations += 1
        with self._alerts_lock:
            self.alerts.append(alert)
        if self.dispatcher is not None:
            self.dispatcher.submit(alert)
        return alert


class ResidentInbox:
    """Bounded per-resident reading queue; when full, the oldest reading is dropped."""

    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self._items: deque = deque()
        self._cond = threading.Condition()
        self._closed = False

    def put(self, item, block: bool = False) -> int:
        """Enqueue ``item``; return how many readings were dropped to make room."""
        with self._cond:
            dropped = 0
            if block:
                while len(self._items) >= self.capacity and not self._closed:
                    self._cond.wait(0.1)
            while len(self._items) >= self.capacity:
                self._items.popleft()
                dropped += 1
            self._items.append(item)
            self._cond.notify_all()
            return dropped

    def get(self):
        """Next item, or None once closed and empty."""
        with self._cond:
            while not self._items and not self._closed:
                self._cond.wait()
            if not self._items:
                return None
            item = self._items.popleft()
            self._cond.notify_all()
            return item

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()


# --------------------------------------------------------------------------
# input sources


def _record_ts(line: str) -> int | None:
    parts = line.split(",")
    try:
        return int(parts[1])
    except (IndexError, ValueError):
        return None


def replay_lines(lines: Iterable[str], rate: float | None, stop: threading.Event | None = None,
                 sleep: Callable[[float], None] = time.sleep) -> Iterator[str]:
    """Yield lines paced by their record timestamps at ``rate`` x real time (None: unpaced)."""
    t0_rec = t0_wall = None
    for line in lines:
        if stop is not None and stop.is_set():
            return
        ts = _record_ts(line)
        if rate and ts is not None:
            if t0_rec is None:
                t0_rec, t0_wall = ts, time.monotonic()
            delay = t0_wall + (ts - t0_rec) / rate - time.monotonic()
            if delay > 0:
                sleep(delay)
        yield line


def stream_lines(stream: TextIO, stop: threading.Event | None = None) -> Iterator[str]:
    for line in stream:
        if stop is not None and stop.is_set():
            return
        yield line


def socket_lines(host: str, port: int, stop: threading.Event, ready: Callable[[int], None] | None = None,
                 accept_timeout: float = 0.2) -> Iterator[str]:
    """Serve one TCP client at a time; each connection carries newline-delimited records."""
    with socket.create_server((host, port)) as srv:
        srv.settimeout(accept_timeout)
        if ready is not None:
            ready(srv.getsockname()[1])
        while not stop.is_set():
            try:
                conn, _ = srv.accept()
            except socket.timeout:
                continue
            with conn, conn.makefile("r", encoding="utf-8", newline="\n") as fh:
                conn.settimeout(None)
                for line in fh:
                    yield line
                    if stop.is_set():
                        return


# --------------------------------------------------------------------------
# configuration and the long-running process


@dataclass(frozen=True)
class ResidentConfig:
    id: str
    context: ResidentContext
    streams: tuple[str, ...] = ()


@dataclass
class ServiceConfig:
    residents: list[ResidentConfig]
    artifacts: dict[str, Path]
    sinks: list[dict] = field(default_factory=list)
    cooldown: float = DEFAULT_COOLDOWN
    qos: FdaasQos = field(default_factory=FdaasQos)
    input: dict = field(default_factory=lambda: {"type": "stdin"})
    metrics_file: Path | None = None
    queue_size: int = 256
    redelivery_size: int = 1000
    retry_interval: float = 1.0

    @classmethod
    def from_dict(cls, d: dict, base: str | Path = ".") -> "ServiceConfig":
        base = Path(base)

        def path(p) -> Path:
            p = Path(p)
            return p if p.is_absolute() else base / p

        if not isinstance(d, dict):
            raise ConfigInvalid("config must be a JSON object")
        try:
            residents = []
            for r in d["residents"]:
                ctx = r["context"]
                context = ResidentContext(ctx["age_group"], ctx["health_condition"], ctx["resource_availability"])
                residents.append(ResidentConfig(str(r["id"]), context, tuple(r.get("streams", ()))))
            if not residents:
                raise ConfigInvalid("at least one resident is required")
            if len({r.id for r in residents}) != len(residents):
                raise ConfigInvalid("resident ids must be unique")
            artifacts = {str(k): path(v) for k, v in d.get("artifacts", {}).items()}
            sinks = []
            for s in d.get("sinks", []):
                kind = s.get("type")
                if kind == "file":
                    sinks.append({**s, "path": str(path(s["path"]))})
                elif kind == "webhook":
                    if not str(s.get("url", "")).startswith(("http://", "https://")):
                        raise ConfigInvalid(f"webhook url must be http(s): {s.get('url')!r}")
                    sinks.append(dict(s))
                else:
                    raise ConfigInvalid(f"unknown sink type {kind!r}")
            source = dict(d.get("input", {"type": "stdin"}))
            if source.get("type") not in ("stdin", "file", "tcp"):
                raise ConfigInvalid(f"unknown input type {source.get('type')!r}")
            if source["type"] == "file":
                source["path"] = str(path(source["path"]))
            cfg = cls(
                residents=residents,
                artifacts=artifacts,
                sinks=sinks,
                cooldown=float(d.get("cooldown", DEFAULT_COOLDOWN)),
                qos=FdaasQos(**d.get("qos", {})),
                input=source,
                metrics_file=path(d["metrics_file"]) if d.get("metrics_file") else None,
                queue_size=int(d.get("queue_size", 256)),
                redelivery_size=int(d.get("redelivery_size", 1000)),
                retry_interval=float(d.get("retry_interval", 1.0)),
            )
        except ConfigInvalid:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigInvalid(f"invalid service config: {exc!r}") from None
        if cfg.cooldown < 0 or cfg.queue_size < 1 or cfg.redelivery_size < 1:
            raise ConfigInvalid("cooldown must be non-negative and queue sizes positive")
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ServiceConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"{path}: {exc}") from None
        return cls.from_dict(raw, base=path.parent)


def build_sinks(specs: Iterable[dict]) -> list[AlertSink]:
    sinks: list[AlertSink] = []
    for s in specs:
        if s["type"] == "file":
            sinks.append(FileSink(s["path"]))
        else:
            opts = {k: s[k] for k in ("max_attempts", "backoff", "max_backoff", "timeout") if k in s}
            sinks.append(WebhookSink(s["url"], **opts))
    return sinks


def load_residents(cfg: ServiceConfig) -> list[ResidentSessionState]:
    """Select each resident's architecture and load its artifact (shared between residents)."""
    loaded: dict[str, TrainedDetector] = {}
    states = []
    for r in cfg.residents:
        arch = select_model(r.context, cfg.qos).architecture
        if arch not in loaded:
            p = cfg.artifacts.get(arch)
            if p is None or not Path(p).is_file():
                raise MissingArtifact(f"no detector artifact for {arch} (resident {r.id}): {p}")
            loaded[arch] = load_detector(p, arch)
        log.info("resident %s -> %s", r.id, arch)
        states.append(ResidentSessionState(r.id, loaded[arch], cfg.qos, r.streams))
    return states


def _source_lines(cfg: ServiceConfig, stop: threading.Event, stdin: TextIO | None,
                  on_listen: Callable[[int], None] | None) -> tuple[Iterator[str], bool]:
    """Line iterator for the configured input and whether producers may block instead of dropping."""
    src = cfg.input
    if src["type"] == "file":
        rate = src.get("rate")
        rate = float(rate) if rate else None
        fh = open(src["path"], encoding="utf-8")

        def gen():
            with fh:
                yield from replay_lines(fh, rate, stop)

        return gen(), rate is None
    if src["type"] == "tcp":
        return socket_lines(src.get("host", "127.0.0.1"), int(src.get("port", 0)), stop, on_listen), False
    import sys

    return stream_lines(stdin or sys.stdin, stop), False


def run_service(config: ServiceConfig | dict | str | Path, stop: threading.Event | None = None,
                stdin: TextIO | None = None, on_listen: Callable[[int], None] | None = None) -> dict:
    """Run until the input ends or ``stop`` is set; return the final metrics.

    Readings are routed by a reader thread into bounded per-resident
    inboxes, each drained by its own worker. On shutdown the inboxes are
    drained, queued alerts are delivered and the metrics file is written.
    """
    if isinstance(config, (str, Path)):
        cfg = ServiceConfig.load(config)
    elif isinstance(config, dict):
        cfg = ServiceConfig.from_dict(config)
    else:
        cfg = config
    stop = stop or threading.Event()
    states = load_residents(cfg)
    dispatcher = AlertDispatcher(build_sinks(cfg.sinks), redelivery_size=cfg.redelivery_size,
                                 retry_interval=cfg.retry_interval).start()
    svc = EdgeService(states, dispatcher, cfg.cooldown)
    inboxes = {s.resident_id: ResidentInbox(cfg.queue_size) for s in states}

    def work(rid: str) -> None:
        box = inboxes[rid]
        while (item := box.get()) is not None:
            ts, reading, hse_id, received = item
            try:
                svc.ingest(rid, ts, reading, hse_id, received)
            except Exception:
                log.exception("inference failed for %s at %d", rid, ts)

    workers = [threading.Thread(target=work, args=(rid,), name=f"resident-{rid}", daemon=True) for rid in inboxes]
    for w in workers:
        w.start()

    lines, lossless = _source_lines(cfg, stop, stdin, on_listen)
    reader_done = threading.Event()

    def read() -> None:
        try:
            for no, line in enumerate(lines, 1):
                if not line.strip():
                    continue
                received = time.monotonic()
                try:
                    parsed = svc.parse(line, no)
                except UnknownResident as exc:
                    log.warning("record for unknown resident: %s", exc)
                    continue
                if parsed is None:
                    continue
                resident, hse_id, ts, reading = parsed
                dropped = inboxes[resident.resident_id].put((ts, reading, hse_id, received), block=lossless)
                if dropped:
                    svc.metrics.add("dropped", dropped)
        except Exception:
            log.exception("input source failed")
        finally:
            reader_done.set()

    reader = threading.Thread(target=read, name="reader", daemon=True)
    reader.start()

    previous = {}
    if threading.current_thread() is threading.main_thread():
        for sig in (signal.SIGINT, signal.SIGTERM):
            previous[sig] = signal.signal(sig, lambda *_: stop.set())
    try:
        while not reader_done.wait(0.1):
            if stop.is_set():
                break
    finally:
        for sig, handler in previous.items():
            signal.signal(sig, handler)
        stop.set()
        for box in inboxes.values():
            box.close()
        for w in workers:
            w.join()
        dispatcher.close()
    metrics = svc.metrics.to_dict(dispatcher.summary())
    if cfg.metrics_file is not None:
        cfg.metrics_file.parent.mkdir(parents=True, exist_ok=True)
        tmp = cfg.metrics_file.with_suffix(cfg.metrics_file.suffix + ".tmp")
        tmp.write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
        tmp.replace(cfg.metrics_file)
    return metrics
