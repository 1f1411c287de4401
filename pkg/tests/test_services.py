import json
import time

import pytest
from fastapi.testclient import TestClient

from livehost.config import load_config
from livehost.services import create_dialogue_app, create_media_app


@pytest.fixture()
def gateway():
    with TestClient(create_dialogue_app()) as client:
        yield client


@pytest.fixture()
def media():
    with TestClient(create_media_app()) as client:
        yield client


def _create_session(client, config=None):
    reply = client.post("/sessions", json={"config": config} if config else {})
    assert reply.status_code == 201, reply.text
    return reply.json()["session_id"]


def read_sse_events(client, url, count, headers=None):
    """Collect the first `count` SSE events (id, type, payload) via a bounded
    stream (this TestClient buffers whole responses, so the server-side
    max_events bound makes the request finite)."""
    sep = "&" if "?" in url else "?"
    response = client.get(f"{url}{sep}max_events={count}", headers=headers or {})
    assert response.status_code == 200
    assert response.headers["content-type"].startswith("text/event-stream")
    events = []
    current = {}
    for line in response.text.splitlines():
        if line.startswith("id:"):
            current["id"] = int(line[3:].strip())
        elif line.startswith("event:"):
            current["event"] = line[6:].strip()
        elif line.startswith("data:"):
            current["data"] = json.loads(line[5:].strip())
        elif line == "" and current:
            events.append(current)
            current = {}
    return events


# -- session lifecycle -----------------------------------------------------------


def test_health(gateway, media):
    assert gateway.get("/health").json()["status"] == "ok"
    assert media.get("/health").json()["status"] == "ok"


def test_create_session_defaults(gateway):
    reply = gateway.post("/sessions", json={})
    assert reply.status_code == 201
    body = reply.json()
    assert body["stage"] == "idle_narration"
    assert body["session_id"]


def test_create_sessions_have_distinct_ids(gateway):
    assert _create_session(gateway) != _create_session(gateway)


def test_negative_hold_period_rejected(gateway):
    reply = gateway.post("/sessions", json={"config": {"hold_period_ms": -1}})
    assert reply.status_code == 400


def test_unknown_config_field_rejected(gateway):
    reply = gateway.post("/sessions", json={"config": {"volume": 11}})
    assert reply.status_code == 400


def test_post_comment_ack(gateway):
    sid = _create_session(gateway)
    reply = gateway.post(f"/sessions/{sid}/comments",
                         json={"text": "主播有什么推荐的面霜吗", "author": "甲"})
    assert reply.status_code == 200
    assert reply.json()["comment_id"].startswith("c")


def test_unknown_session_404(gateway):
    assert gateway.post("/sessions/nope/comments", json={"text": "hi"}).status_code == 404
    assert gateway.get("/sessions/nope").status_code == 404


def test_empty_comment_400(gateway):
    sid = _create_session(gateway)
    reply = gateway.post(f"/sessions/{sid}/comments", json={"text": "   ", "author": "a"})
    assert reply.status_code == 400


def test_comment_burst_acks_and_drops(gateway):
    sid = _create_session(gateway)
    acks = []
    for i in range(20):
        reply = gateway.post(f"/sessions/{sid}/comments",
                             json={"text": f"第{i}个问题面霜怎么样", "author": "甲"})
        assert reply.status_code == 200
        acks.append(reply.json()["comment_id"])
    assert len(set(acks)) == 20
    session = gateway.app.state.manager.get(sid)
    events = session.events_since(0)
    received = [e for e in events if e.type == "comment_received"]
    dropped = [e for e in events if e.type == "comment_dropped"]
    assert len(received) == 20
    # one in flight + queue capacity 8; the remaining 11 dropped oldest-first
    assert len(dropped) == 11
    assert gateway.get(f"/sessions/{sid}").json()["queue_length"] == 8


# -- event stream ----------------------------------------------------------------


def test_stream_replays_backlog_in_order(gateway):
    sid = _create_session(gateway)
    gateway.post(f"/sessions/{sid}/comments", json={"text": "面霜推荐一下", "author": "甲"})
    events = read_sse_events(gateway, f"/sessions/{sid}/events?from_seq=0", count=5)
    assert [e["id"] for e in events] == [1, 2, 3, 4, 5]
    assert events[0]["event"] == "narration_segment"
    assert events[0]["data"]["data"]["script_index"] == 0


def test_stream_resumes_gaplessly(gateway):
    sid = _create_session(gateway)
    gateway.post(f"/sessions/{sid}/comments", json={"text": "面霜推荐一下", "author": "甲"})
    first = read_sse_events(gateway, f"/sessions/{sid}/events?from_seq=0", count=3)
    cursor = first[-1]["id"]
    rest = read_sse_events(gateway, f"/sessions/{sid}/events?from_seq={cursor}", count=3)
    assert [e["id"] for e in rest] == [cursor + 1, cursor + 2, cursor + 3]
    combined = [e["id"] for e in first + rest]
    assert combined == sorted(set(combined))


def test_stream_honours_last_event_id_header(gateway):
    sid = _create_session(gateway)
    gateway.post(f"/sessions/{sid}/comments", json={"text": "面霜推荐一下", "author": "甲"})
    events = read_sse_events(gateway, f"/sessions/{sid}/events?from_seq=0", count=4)
    resumed = read_sse_events(gateway, f"/sessions/{sid}/events", count=1,
                              headers={"Last-Event-ID": str(events[1]["id"])})
    assert resumed[0]["id"] == events[1]["id"] + 1


# -- ablation --------------------------------------------------------------------


def test_set_ablation_roundtrip(gateway):
    sid = _create_session(gateway)
    reply = gateway.post(f"/sessions/{sid}/ablation", json={"pci_disabled": True})
    assert reply.status_code == 200
    assert reply.json()["ablation"]["pci_disabled"] is True
    snap = gateway.get(f"/sessions/{sid}").json()
    assert snap["ablation"]["pci_disabled"] is True
    reply = gateway.post(f"/sessions/{sid}/ablation", json={"bogus": True})
    assert reply.status_code == 400


# -- products --------------------------------------------------------------------


def test_product_list_and_detail(gateway, catalogue):
    listing = gateway.get("/products").json()["products"]
    assert len(listing) == 12
    rid = listing[0]["routing_id"]
    detail = gateway.get(f"/products/{rid}").json()
    assert detail["name"] == catalogue.product(rid).name
    assert detail["talking_points"]
    assert detail["image_url"] == f"/images/{rid}"
    assert gateway.get("/products/424242").status_code == 404


# -- media service ---------------------------------------------------------------


def test_synthesize_and_fetch_asset(media):
    reply = media.post("/synthesize", json={"text": "甲" * 20})
    assert reply.status_code == 200
    body = reply.json()
    assert body["duration_ms"] == 5000
    again = media.post("/synthesize", json={"text": "甲" * 20}).json()
    assert again["asset_id"] == body["asset_id"]
    asset = media.get(f"/assets/{body['asset_id']}")
    assert asset.status_code == 200
    assert asset.headers["content-type"].startswith("audio/wav")
    assert asset.content == media.get(f"/assets/{body['asset_id']}").content


def test_synthesize_empty_400(media):
    assert media.post("/synthesize", json={"text": " "}).status_code == 400


def test_unknown_asset_404(media):
    assert media.get("/assets/deadbeef").status_code == 404


def test_product_image_served(media, catalogue):
    rid = catalogue.products[0].routing_id
    reply = media.get(f"/images/{rid}")
    assert reply.status_code == 200
    assert reply.headers["content-type"] == "image/png"
    assert media.get("/images/999999").status_code == 404


# -- isolation and latency ---------------------------------------------------------


def test_gateway_functions_without_media_service(gateway):
    # default wiring uses the in-process stub; a full comment->response cycle
    # must work with no media deployment anywhere
    sid = _create_session(gateway)
    gateway.post(f"/sessions/{sid}/comments", json={"text": "面霜推荐", "author": "甲"})
    session = gateway.app.state.manager.get(sid)
    deliveries = [e for e in session.events_since(0) if e.type == "response_delivery"]
    assert deliveries
    assert deliveries[0].data["duration_ms"] > 0


def test_comment_to_response_under_200ms(gateway):
    sid = _create_session(gateway)
    t0 = time.perf_counter()
    gateway.post(f"/sessions/{sid}/comments",
                 json={"text": "主播有什么推荐的面霜吗", "author": "甲"})
    session = gateway.app.state.manager.get(sid)
    while not any(e.type == "response_delivery" for e in session.events_since(0)):
        if time.perf_counter() - t0 > 0.2:
            break
    elapsed = time.perf_counter() - t0
    assert elapsed < 0.2
    assert any(e.type == "response_delivery" for e in session.events_since(0))


def test_gateway_overhead_under_50ms(gateway, catalogue, settings, cfg):
    from livehost.backends import StubBackend
    from livehost.runtime import LiveSession
    from livehost.session import SessionConfig

    direct = LiveSession("direct", catalogue, settings, SessionConfig(),
                         StubBackend(cfg, seed=0), wall_clock=False)
    direct.start(now=0)
    t0 = time.perf_counter()
    direct.submit_comment("主播有什么推荐的面霜吗", "甲", now=100)
    direct_time = time.perf_counter() - t0

    sid = _create_session(gateway)
    t0 = time.perf_counter()
    gateway.post(f"/sessions/{sid}/comments",
                 json={"text": "主播有什么推荐的面霜吗", "author": "甲"})
    gateway_time = time.perf_counter() - t0
    assert gateway_time - direct_time < 0.05


# -- config ----------------------------------------------------------------------


def test_env_overrides(monkeypatch):
    cfg = load_config(env={"LIVEHOST_HOLD_MS": "750", "LIVEHOST_DIALOGUE_PORT": "9100"})
    assert cfg["session"]["hold_period_ms"] == 750
    assert cfg["service"]["dialogue_port"] == 9100
