import json
import socket
import time
import urllib.request

import numpy as np
import pytest

from sonotrap import (
    MediumState,
    OutOfVolumeError,
    ParticleState,
    SessionVersionError,
    sample_slice,
    spl,
)
from sonotrap.errors import SessionLoadError
from sonotrap.service import ServiceServer, SteeringService


@pytest.fixture()
def service():
    return SteeringService(medium=MediumState.from_temperature(20.0))


class TestHandlers:
    def test_move_focus_delays_in_range(self, service):
        payload = service.handle_move_focus((0, 0, 100))
        delays = payload["delays_cycles"]
        assert len(delays) == 64
        assert all(0 <= d < 2500 for d in delays)
        assert payload["latency_s"] > 0

    def test_move_focus_rejects_out_of_volume(self, service):
        before = service.state.current_frame
        with pytest.raises(OutOfVolumeError, match="outside"):
            service.handle_move_focus((0, 0, -10))
        assert service.state.current_frame is before

    def test_two_rapid_commands_last_writer_wins(self, service):
        service.handle_move_focus((0, 0, 100))
        service.handle_move_focus((10, 0, 110))
        kinds = [e["kind"] for e in service.state.history]
        assert kinds.count("move_focus") == 2
        assert np.allclose(service.state.current_frame.command.target, [10, 0, 110])

    def test_move_focus_idempotent(self, service):
        a = service.handle_move_focus((5, 5, 120))
        frame_a = service.state.current_frame
        b = service.handle_move_focus((5, 5, 120))
        frame_b = service.state.current_frame
        assert np.array_equal(frame_a.phases, frame_b.phases)
        assert a["delays_cycles"] == b["delays_cycles"]

    def test_set_temperature_recomputes_frame(self, service):
        service.handle_move_focus((20, 0, 100))
        before = service.state.current_frame.phases.copy()
        service.handle_set_temperature(30.0)
        after = service.state.current_frame.phases
        assert service.state.medium.temperature == 30.0
        assert not np.allclose(before, after)
        # registers follow the recompute
        assert np.array_equal(
            service.upac.generate(2 * 2500 / 100e6)[0].samples.shape,
            service.upac.generate(2 * 2500 / 100e6)[0].samples.shape,
        )

    def test_query_field_matches_direct_evaluation(self, service):
        service.handle_move_focus((0, 0, 100))
        out = service.handle_query_field({"plane": "xz", "offset": 0.0, "extent": 20.0, "cells": 9})
        state = service.state
        sl = sample_slice(
            state.layout, state.current_frame, state.medium, "xz", 0.0,
            (-20.0, 20.0), (80.0, 120.0), 5.0, state.source_amplitude,
        )
        expected = [[spl(p) for p in row] for row in sl.pressure]
        assert np.allclose(out["spl_db"], expected)
        assert out["shape"] == [9, 9]

    def test_query_field_caps_cells(self, service):
        out = service.handle_query_field({"plane": "xy", "offset": 100.0, "cells": 500})
        assert max(out["shape"]) <= 64

    def test_query_particle(self):
        service = SteeringService(particle=ParticleState.eps_sphere((0, 0, 97.5)))
        out = service.handle_query_particle()
        assert out["particle"]["position"] == [0, 0, 97.5]
        assert SteeringService().handle_query_particle()["particle"] is None

    def test_trajectory_start_stop(self, service):
        out = service.handle_start_trajectory(
            {"shape": "circular", "size_mm": 10.0, "speed": 50.0, "step_size": 0.05, "height": 100.0}
        )
        assert out["waypoints"] > 1000
        assert service.state.trajectory is not None
        time.sleep(0.01)
        stopped = service.handle_stop()
        assert service.state.trajectory is None
        assert len(stopped["focus"]) == 3

    def test_unknown_verb(self, service):
        from sonotrap import InvalidArgumentError

        with pytest.raises(InvalidArgumentError, match="unknown verb"):
            service.apply({"v": 1, "seq": 1, "verb": "Explode", "payload": {}})


class TestPersistence:
    def test_round_trip(self, tmp_path, service):
        service.handle_move_focus((5, -5, 110))
        service.handle_set_temperature(25.0)
        path = tmp_path / "session.json"
        service.persist_session(path)
        loaded = SteeringService.load_session(path)
        assert loaded.state.medium.temperature == 25.0
        assert np.allclose(loaded.state.current_frame.command.target, [5, -5, 110])
        assert np.array_equal(
            loaded.state.current_frame.phases, service.state.current_frame.phases
        )
        assert loaded.state.layout.to_json_dict() == service.state.layout.to_json_dict()
        assert [e["kind"] for e in loaded.state.history] == [
            e["kind"] for e in service.state.history
        ]

    def test_history_truncated(self, tmp_path, service):
        for i in range(10500):
            service._record("noop", {"i": i})
        path = tmp_path / "session.json"
        service.persist_session(path)
        doc = json.loads(path.read_text())
        assert len(doc["history"]) == 10000

    def test_corrupted_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(SessionLoadError):
            SteeringService.load_session(path)

    def test_version_mismatch(self, tmp_path, service):
        path = tmp_path / "session.json"
        service.persist_session(path)
        doc = json.loads(path.read_text())
        doc["v"] = 99
        path.write_text(json.dumps(doc))
        with pytest.raises(SessionVersionError) as err:
            SteeringService.load_session(path)
        assert err.value.expected == 1
        assert err.value.found == 99


class _Client:
    def __init__(self, port):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=10)
        self.file = self.sock.makefile("rw", encoding="utf-8")
        self.seq = 0

    def send(self, verb, payload=None):
        self.seq += 1
        line = json.dumps({"v": 1, "seq": self.seq, "verb": verb, "payload": payload or {}})
        self.file.write(line + "\n")
        self.file.flush()

    def send_raw(self, obj):
        self.file.write(json.dumps(obj) + "\n")
        self.file.flush()

    def read(self, timeout=10.0):
        self.sock.settimeout(timeout)
        line = self.file.readline()
        if not line:
            raise EOFError
        return json.loads(line)

    def read_until(self, kind, timeout=10.0):
        deadline = time.time() + timeout
        while time.time() < deadline:
            msg = self.read(timeout=max(0.1, deadline - time.time()))
            if msg["kind"] == kind:
                return msg
        raise TimeoutError(kind)

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


@pytest.fixture()
def server():
    service = SteeringService(medium=MediumState.from_temperature(20.0),
                              particle=ParticleState.eps_sphere((0, 0, 97.5)))
    srv = ServiceServer(service, port=0)
    srv.start()
    yield srv
    srv.stop()


class TestWireProtocol:
    def test_move_focus_round_trip(self, server):
        client = _Client(server.port)
        client.send("MoveFocus", {"target": [0, 0, 100]})
        msg = client.read()
        assert msg["kind"] == "response"
        assert msg["v"] == 1
        assert len(msg["payload"]["delays_cycles"]) == 64
        client.close()

    def test_error_response_keeps_session(self, server):
        client = _Client(server.port)
        client.send("MoveFocus", {"target": [0, 0, -50]})
        msg = client.read()
        assert msg["kind"] == "error"
        assert "outside" in msg["payload"]["message"]
        client.send("QueryParticle")
        assert client.read()["kind"] == "response"
        client.close()

    def test_seq_must_increase(self, server):
        client = _Client(server.port)
        client.send_raw({"v": 1, "seq": 5, "verb": "QueryParticle", "payload": {}})
        assert client.read()["kind"] == "response"
        client.send_raw({"v": 1, "seq": 5, "verb": "QueryParticle", "payload": {}})
        msg = client.read()
        assert msg["kind"] == "error"
        assert "not increasing" in msg["payload"]["message"]
        client.close()

    def test_telemetry_rate_and_ordering(self, server):
        client = _Client(server.port)
        client.send("Subscribe", {"rate": 10.0, "particle": True})
        assert client.read()["kind"] == "response"
        events = []
        first_ts = None
        while True:
            msg = client.read_until("telemetry")
            if first_ts is None:
                first_ts = msg["ts"]
            if msg["ts"] - first_ts >= 1.0:
                break
            events.append(msg)
        assert 9 <= len(events) <= 11
        seqs = [e["seq"] for e in events]
        assert seqs == sorted(seqs)
        assert len(set(seqs)) == len(seqs)
        assert events[0]["payload"]["particle"]["position"] == [0, 0, 97.5]
        client.close()

    def test_focus_visible_within_two_periods(self, server):
        client = _Client(server.port)
        client.send("Subscribe", {"rate": 20.0})
        client.read()
        client.send("MoveFocus", {"target": [15, 0, 90]})
        deadline = time.time() + 2 * (1 / 20.0) + 1.0
        seen = False
        while time.time() < deadline:
            msg = client.read(timeout=2.0)
            if msg["kind"] == "telemetry" and msg["payload"]["focus"] == [15, 0, 90]:
                seen = True
                break
        assert seen
        client.close()

    def test_slice_subscription_matches_direct(self, server):
        client = _Client(server.port)
        client.send("MoveFocus", {"target": [0, 0, 100]})
        client.read()
        client.send(
            "Subscribe",
            {"rate": 5.0, "field_slice": {"plane": "xz", "offset": 0.0, "extent": 15.0, "cells": 8}},
        )
        client.read()
        msg = client.read_until("telemetry")
        got = msg["payload"]["slice"]
        direct = server.service.handle_query_field(
            {"plane": "xz", "offset": 0.0, "extent": 15.0, "cells": 8}
        )
        assert np.allclose(got["spl_db"], direct["spl_db"])
        client.close()

    def test_disconnect_and_resubscribe(self, server):
        first = _Client(server.port)
        first.send("Subscribe", {"rate": 10.0})
        first.read()
        first.read_until("telemetry")
        first.close()
        second = _Client(server.port)
        second.send("MoveFocus", {"target": [4, 4, 104]})
        second.read()
        second.send("Subscribe", {"rate": 10.0})
        second.read()
        msg = second.read_until("telemetry")
        assert msg["payload"]["focus"] == [4, 4, 104]
        assert msg["seq"] == 1  # fresh subscription, fresh ordering
        second.close()

    def test_http_snapshot(self, server):
        with urllib.request.urlopen(f"http://127.0.0.1:{server.http_port}/snapshot") as resp:
            doc = json.loads(resp.read())
        assert "focus" in doc and "temperature_c" in doc
        with urllib.request.urlopen(f"http://127.0.0.1:{server.http_port}/healthz") as resp:
            assert resp.read() == b"ok\n"


class TestBackpressure:
    def test_drop_oldest_counts(self):
        from sonotrap.service import TELEMETRY_QUEUE, _Subscription

        sub = _Subscription(10.0, True, None)
        for i in range(TELEMETRY_QUEUE + 5):
            sub.offer({"seq": i})
        assert sub.dropped == 5
        assert sub.queue.qsize() == TELEMETRY_QUEUE
        # oldest were dropped, newest retained
        first = sub.queue.get_nowait()
        assert first["seq"] == 5
