from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from streammap.config import PipelineConfig
from streammap.messages import Query
from streammap.server import create_app, parse_query, BadQueryError
from streammap.wire import validate_frame_dict


@pytest.fixture
def app():
    # autostart=False: ticks are driven manually so tests stay deterministic
    return create_app(PipelineConfig(), autostart=False)


@pytest.fixture
def client(app):
    with TestClient(app) as c:
        yield c


def ndjson(*texts, start=0):
    return "\n".join(
        json.dumps({"id": f"m{start + i}", "ts": 1000 + start + i, "text": t})
        for i, t in enumerate(texts))


class TestHttp:
    def test_healthz(self, client):
        r = client.get("/healthz")
        assert r.status_code == 200 and r.text == "ok"

    def test_latest_frame_empty_pipeline(self, client):
        r = client.get("/frames/latest?q=")
        assert r.status_code == 200
        data = r.json()
        validate_frame_dict(data)
        assert data["nodes"] == []

    def test_ingest_counts(self, client):
        r = client.post("/ingest", content=ndjson("graph layout", "graph stress")
                        + "\nnot json\n")
        assert r.json() == {"accepted": 2, "malformed": 1}

    def test_ingested_messages_reach_frames(self, client, app):
        hub = app.state.hub
        client.post("/ingest", content=ndjson("graph layout news", "graph layout gossip"))
        inst = hub.instance(Query())
        inst.run_tick(ts=42)
        data = client.get("/frames/latest?q=").json()
        validate_frame_dict(data)
        assert len(data["nodes"]) == 2
        assert data["ts"] == 42

    def test_query_filters_messages(self, client, app):
        hub = app.state.hub
        inst = hub.instance(Query.parse("espresso"))
        client.post("/ingest", content=ndjson("espresso roast crema",
                                              "graph layout stress"))
        inst.run_tick(ts=1)
        data = client.get("/frames/latest?q=espresso").json()
        assert [n["id"] for n in data["nodes"]] == ["m0"]

    def test_no_match_query_still_ticks(self, client, app):
        hub = app.state.hub
        inst = hub.instance(Query.parse("zzzzz"))
        client.post("/ingest", content=ndjson("graph layout"))
        inst.run_tick(ts=1)
        inst.run_tick(ts=2)
        data = client.get("/frames/latest?q=zzzzz").json()
        assert data["nodes"] == []
        assert data["seq"] >= 2

    def test_bad_query_rejected(self, client):
        assert client.get("/frames/latest?q=" + "x" * 300).status_code == 400
        assert client.get("/frames/latest", params={"q": "a\x01b"}).status_code == 400

    def test_parse_query_normalizes(self):
        assert parse_query("Graph  LAYOUT graph").normalized() == "graph layout"
        with pytest.raises(BadQueryError):
            parse_query("x" * 500)


class TestStream:
    def test_stream_pushes_frames_in_order(self, client, app):
        hub = app.state.hub
        inst = hub.instance(Query())  # triggers the initial frame
        with client.websocket_connect("/stream?q=") as ws:
            first = json.loads(ws.receive_text())
            validate_frame_dict(first)
            inst.run_tick(ts=10)
            second = json.loads(ws.receive_text())
            assert second["seq"] == first["seq"] + 1
            inst.run_tick(ts=11)
            third = json.loads(ws.receive_text())
            assert third["seq"] == second["seq"] + 1

    def test_two_subscribers_same_query_identical(self, client, app):
        hub = app.state.hub
        inst = hub.instance(Query())
        with client.websocket_connect("/stream?q=") as ws1, \
                client.websocket_connect("/stream?q=") as ws2:
            a1 = ws1.receive_text()
            a2 = ws2.receive_text()
            assert a1 == a2
            inst.run_tick(ts=5)
            assert ws1.receive_text() == ws2.receive_text()

    def test_same_query_shares_instance(self, app):
        hub = app.state.hub
        i1 = hub.instance(Query.parse("graph layout"))
        i2 = hub.instance(Query.parse("LAYOUT  graph"))
        assert i1 is i2

    def test_bad_query_closes_socket(self, client):
        with pytest.raises(Exception):
            with client.websocket_connect("/stream?q=" + "y" * 400) as ws:
                ws.receive_text()

    def test_failed_tick_keeps_previous_frame(self, client, app, monkeypatch):
        hub = app.state.hub
        inst = hub.instance(Query())
        before = client.get("/frames/latest?q=").json()
        import streammap.pipeline

        def boom(*args, **kwargs):
            raise RuntimeError("injected failure")

        monkeypatch.setattr("streammap.server.tick", boom)
        assert inst.run_tick(ts=9) is None
        assert inst.tick_errors == 1
        after = client.get("/frames/latest?q=").json()
        assert after == before
