import io
import json
import socket
import threading
import time
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

import fdaas.service as service
from fdaas.core import FdaasQos, ResidentContext
from fdaas.errors import ConfigInvalid, MissingArtifact, SinkUnavailable, UnknownResident
from fdaas.service import (
    AlertDispatcher,
    EdgeService,
    FallAlert,
    FileSink,
    ResidentConfig,
    ResidentInbox,
    ResidentSessionState,
    ServiceConfig,
    WebhookSink,
    dispatch_alert,
    load_residents,
    read_alert_log,
    replay_lines,
    run_service,
)

from service_harness import (
    calm,
    line,
    rule_detector,
    step_stream,
    three_fall_session,
    toy_fcn,
    untrained_fcn,
    write_service_config,
)


def edge(**kw) -> EdgeService:
    return EdgeService([ResidentSessionState("r1", rule_detector())], **kw)


def an_alert(ts: int = 100) -> FallAlert:
    return FallAlert("r1", ts, 0.9, tuple((70.0, 15.0, 1.5, 1.0) for _ in range(8)), 0.01, "FCN", "r1-e0")


class Recorder:
    name = "recorder"

    def __init__(self) -> None:
        self.received = []

    def send(self, alert) -> int:
        service._require_alert(alert)
        self.received.append(alert)
        return 1


class Down:
    name = "down"

    def send(self, alert) -> int:
        raise SinkUnavailable("down")


@pytest.fixture(scope="module")
def fcn():
    return toy_fcn()


# -- ingestion --------------------------------------------------------------


def test_no_inference_before_the_window_fills():
    svc = edge()
    for i in range(7):
        assert svc.ingest("r1", 10 + i, calm(1.0 if i < 5 else 2.5)) is None
    assert svc.metrics.inferences == 0
    assert svc.ingest("r1", 17, calm(2.5)) is not None
    assert svc.metrics.inferences == 1


def test_cooldown_suppresses_a_second_fall():
    svc = edge(cooldown=30)
    alerts = [a for ln in step_stream(40, (10, 20)) if (a := svc.ingest_line(ln))]
    assert len(alerts) == 1 and alerts[0].timestamp == 1010
    assert svc.metrics.suppressed >= 1


def test_alerts_after_the_cooldown_expires():
    svc = edge(cooldown=30)
    alerts = [a for ln in step_stream(80, (10, 50)) if (a := svc.ingest_line(ln))]
    assert [a.timestamp for a in alerts] == [1010, 1050]


def test_alert_contents():
    svc = edge()
    (alert,) = [a for ln in step_stream(20, (10,)) if (a := svc.ingest_line(ln))]
    assert alert.probability >= 0.5 and alert.latency >= 0
    assert alert.resident_id == "r1" and alert.hse_id == "r1-e0" and alert.architecture == "FCN"
    assert np.asarray(alert.window).shape == (8, 4) and alert.window[-1][2] == 2.0
    assert svc.metrics.latencies == [alert.latency]


def test_timestamp_gap_restarts_the_window():
    svc = edge()
    for i in range(6):
        svc.ingest("r1", 100 + i, calm(1.0))
    for i in range(3):
        svc.ingest("r1", 200 + i, calm(2.0))
    assert svc.metrics.inferences == 0 and svc.metrics.window_resets == 1


def test_unknown_resident_and_malformed_records():
    svc = EdgeService([ResidentSessionState("r1", rule_detector(), streams=("r1-",)),
                       ResidentSessionState("r2", rule_detector(), streams=("r2-",))])
    with pytest.raises(UnknownResident):
        svc.ingest_line(line(5, hse_id="zz-1"))
    with pytest.raises(UnknownResident):
        svc.ingest("nobody", 5, calm())
    assert svc.ingest_line("r1-e0,5,bedroom,70.0,15.0,1.5\n") is None
    assert svc.ingest_line("r1-e0,5,bedroom,70.0,15.0,1.5,7\n") is None
    assert svc.metrics.malformed == 2
    svc.ingest_line(line(6, hse_id="r2-x"))
    assert svc.residents["r2"].last_ts == 6 and svc.residents["r1"].last_ts is None


def test_replay_speed_does_not_change_decisions():
    lines = step_stream(120, (20, 40, 90))
    runs = []
    for received in (lambda i: float(i), lambda i: i / 60.0):
        svc = edge()
        runs.append([a.timestamp for i, ln in enumerate(lines) if (a := svc.ingest_line(ln, received=received(i)))])
    assert runs[0] == runs[1] == [1020, 1090]


def test_alert_validation():
    with pytest.raises(ValueError):
        FallAlert("r1", 1, 0.2, (), 0.0)
    with pytest.raises(ValueError):
        FallAlert("r1", 1, 0.7, (), -1.0)
    a = an_alert()
    assert FallAlert.from_dict(json.loads(a.to_json())) == a


# -- sinks ------------------------------------------------------------------


def test_file_sink_appends_one_line_per_alert(tmp_path):
    sink = FileSink(tmp_path / "log" / "alerts.jsonl")
    for ts in (1, 2, 3):
        assert sink.send(an_alert(ts)) == 1
    text = (tmp_path / "log" / "alerts.jsonl").read_text()
    assert text.count("\n") == 3 and text.endswith("\n")
    assert [a.timestamp for a in read_alert_log(tmp_path / "log" / "alerts.jsonl")] == [1, 2, 3]


def test_file_sink_failure_is_reported(tmp_path):
    (tmp_path / "dir").mkdir()
    with pytest.raises(SinkUnavailable):
        FileSink(tmp_path / "dir").send(an_alert())


class _Flaky(BaseHTTPRequestHandler):
    codes: list[int] = []
    bodies: list[dict] = []

    def do_POST(self):
        body = self.rfile.read(int(self.headers["Content-Length"]))
        type(self).bodies.append(json.loads(body))
        code = type(self).codes.pop(0) if type(self).codes else 200
        self.send_response(code)
        self.end_headers()

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    srv = HTTPServer(("127.0.0.1", 0), _Flaky)
    _Flaky.codes, _Flaky.bodies = [], []
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    yield f"http://127.0.0.1:{srv.server_port}/alerts", _Flaky
    srv.shutdown()
    srv.server_close()


def test_webhook_retries_server_errors(stub_server):
    url, handler = stub_server
    handler.codes = [500, 500, 200]
    waits = []
    sink = WebhookSink(url, backoff=0.1, sleep=waits.append)
    (rec,) = dispatch_alert(an_alert(), [sink])
    assert rec.delivered and rec.attempts == 3
    assert waits == [0.1, 0.2]
    assert len(handler.bodies) == 3 and handler.bodies[-1]["resident_id"] == "r1"


def test_webhook_gives_up_after_the_cap(stub_server):
    url, handler = stub_server
    handler.codes = [503] * 10
    waits = []
    (rec,) = dispatch_alert(an_alert(), [WebhookSink(url, max_attempts=4, backoff=1.0, max_backoff=2.5, sleep=waits.append)])
    assert not rec.delivered and rec.attempts == 4
    assert waits == [1.0, 2.0, 2.5]


def test_dead_sinks_fill_the_redelivery_queue_only():
    disp = AlertDispatcher([Down()], redelivery_size=3)
    svc = edge(dispatcher=disp, cooldown=0)
    lines = step_stream(60, (10, 20, 30, 40, 50))
    alerts = [a for ln in lines if (a := svc.ingest_line(ln))]
    assert len(alerts) >= 5 and svc.metrics.readings_processed == 60
    assert len(disp.pending) == 3 and disp.abandoned == len(alerts) - 3


def test_redelivery_after_recovery(tmp_path):
    class Flaky:
        name = "flaky"
        up = False
        got = []

        def send(self, alert):
            if not self.up:
                raise SinkUnavailable("down")
            self.got.append(alert)
            return 1

    sink = Flaky()
    disp = AlertDispatcher([sink])
    disp.submit(an_alert(1))
    assert len(disp.pending) == 1
    sink.up = True
    disp.retry_pending()
    assert [a.timestamp for a in sink.got] == [1] and not disp.pending
    assert disp.summary()["delivered"] == 1


def test_sinks_receive_alerts_only():
    rec = Recorder()
    with pytest.raises(TypeError):
        rec.send({"hr": 70})
    with pytest.raises(TypeError):
        FileSink("/nonexistent/x").send(calm())
    with pytest.raises(TypeError):
        dispatch_alert([70.0, 15.0, 1.5, 1], [rec])
    svc = edge(dispatcher=AlertDispatcher([rec]))
    for ln in step_stream(60, (10, 45)):
        svc.ingest_line(ln)
    assert rec.received and all(isinstance(a, FallAlert) for a in rec.received)


# -- backpressure -----------------------------------------------------------


def test_inbox_drops_oldest_first():
    box = ResidentInbox(3)
    assert [box.put(i) for i in range(5)] == [0, 0, 0, 1, 1]
    box.close()
    assert [box.get() for _ in range(4)] == [2, 3, 4, None]


def test_slow_inference_drops_readings_not_alerts(tmp_path, monkeypatch):
    class Slow(type(rule_detector().model)):
        def forward(self, x):
            time.sleep(0.01)
            return super().forward(x)

    det = rule_detector()
    det.model = Slow()
    monkeypatch.setattr(service, "load_residents",
                        lambda cfg: [ResidentSessionState("r1", det, cfg.qos)])
    cfg = ServiceConfig([ResidentConfig("r1", ResidentContext("Other", "Critical", "Limited"))], {},
                        sinks=[{"type": "file", "path": str(tmp_path / "a.jsonl")}], queue_size=4)
    stdin = io.StringIO("".join(step_stream(300, tuple(range(10, 300, 40)))))
    m = run_service(cfg, stdin=stdin)
    assert m["dropped"] > 0
    assert m["readings_processed"] + m["dropped"] == m["readings_received"] == 300
    assert len(read_alert_log(tmp_path / "a.jsonl")) == m["alerts"] == m["deliveries"]["delivered"]


# -- configuration ----------------------------------------------------------


def test_critical_limited_resident_gets_fcn(tmp_path):
    cfg = ServiceConfig.load(write_service_config(tmp_path, untrained_fcn()))
    (state,) = load_residents(cfg)
    assert state.architecture == "FCN"


def test_missing_artifact(tmp_path):
    path = write_service_config(tmp_path, untrained_fcn())
    raw = json.loads(path.read_text())
    raw["residents"][0]["context"]["health_condition"] = "Stable"
    path.write_text(json.dumps(raw))
    with pytest.raises(MissingArtifact):
        load_residents(ServiceConfig.load(path))


@pytest.mark.parametrize(
    "mutate",
    [
        lambda c: c.pop("residents"),
        lambda c: c.update(residents=[]),
        lambda c: c["residents"][0]["context"].update(age_group="Teen"),
        lambda c: c.update(sinks=[{"type": "carrier-pigeon"}]),
        lambda c: c.update(sinks=[{"type": "webhook", "url": "ftp://x"}]),
        lambda c: c.update(input={"type": "serial"}),
        lambda c: c.update(cooldown=-1),
        lambda c: c.update(qos={"max_latency": 0}),
    ],
)
def test_invalid_configs(tmp_path, mutate):
    path = write_service_config(tmp_path, untrained_fcn())
    raw = json.loads(path.read_text())
    mutate(raw)
    with pytest.raises(ConfigInvalid):
        ServiceConfig.from_dict(raw, tmp_path)


def test_unreadable_config(tmp_path):
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigInvalid):
        ServiceConfig.load(tmp_path / "bad.json")


def test_relative_paths_resolve_against_the_config(tmp_path):
    cfg = ServiceConfig.load(write_service_config(tmp_path, untrained_fcn(), qos={"max_latency": 1.5}))
    assert cfg.artifacts["FCN"] == tmp_path / "fcn.pt"
    assert cfg.sinks[0]["path"] == str(tmp_path / "alerts.jsonl")
    assert cfg.qos == FdaasQos(max_latency=1.5)


# -- replay and the running service -----------------------------------------


def test_replay_paces_by_record_time():
    waits = []
    lines = [line(t) for t in (100, 101, 103)]
    out = list(replay_lines(lines, rate=2.0, sleep=waits.append))
    assert out == lines and len(waits) == 2
    assert waits[0] == pytest.approx(0.5, abs=0.05) and waits[1] == pytest.approx(1.5, abs=0.05)
    assert list(replay_lines(lines, rate=None, sleep=waits.append)) == lines and len(waits) == 2


def test_service_end_to_end_unpaced_and_accelerated(fcn, tmp_path):
    lines, falls = three_fall_session(seed=0)
    results = {}
    for rate in (None, 60.0):
        d = tmp_path / str(rate)
        d.mkdir()
        m = run_service(write_service_config(d, fcn, lines, rate=rate))
        alerts = read_alert_log(d / "alerts.jsonl")
        results[rate] = [a.timestamp for a in alerts]
        assert m["alerts"] == 3 and m["max_latency"] < 2.0
        assert json.loads((d / "metrics.json").read_text())["readings_processed"] == len(lines)
    assert results[None] == results[60.0]
    for ts, fall in zip(results[None], falls):
        assert fall - 4 <= ts < fall + 8


def test_tcp_input_and_clean_shutdown(tmp_path):
    stop, port = threading.Event(), []
    ready = threading.Event()
    cfg = ServiceConfig([ResidentConfig("r1", ResidentContext("Other", "Critical", "Limited"))], {},
                        sinks=[{"type": "file", "path": str(tmp_path / "a.jsonl")}],
                        input={"type": "tcp", "host": "127.0.0.1", "port": 0})
    det = rule_detector()
    out = {}
    orig = service.load_residents
    service.load_residents = lambda c: [ResidentSessionState("r1", det, c.qos)]
    try:
        t = threading.Thread(target=lambda: out.update(run_service(cfg, stop, on_listen=lambda p: (port.append(p), ready.set()))))
        t.start()
        assert ready.wait(5)
        with socket.create_connection(("127.0.0.1", port[0])) as conn:
            conn.sendall("".join(step_stream(60, (10, 45))).encode())
        deadline = time.monotonic() + 10
        while time.monotonic() < deadline and len(read_alert_log(tmp_path / "a.jsonl")) < 2:
            time.sleep(0.05)
        stop.set()
        t.join(10)
    finally:
        service.load_residents = orig
    assert not t.is_alive()
    text = (tmp_path / "a.jsonl").read_text()
    assert text.endswith("\n") and all(json.loads(ln) for ln in text.splitlines())
    assert out["alerts"] == 2 and out["readings_processed"] == 60
