from __future__ import annotations

import socket

import pytest
from fastapi.testclient import TestClient

from commentary_engine.config import AppConfig, load_config
from commentary_engine.errors import BindError, ConfigError
from commentary_engine.gateway import GatewayConfig
from commentary_engine.service import build_state, create_app, serve


@pytest.fixture
def client(tmp_path):
    config = AppConfig(gateway=GatewayConfig(retry_backoff_ms=0),
                       data_dir=str(tmp_path / "data"))
    return TestClient(create_app(config))


def drive_full_session(client) -> str:
    session = client.post("/v1/sessions", json={"keywords": "smoking ban"}).json()
    sid = session["id"]
    assert client.post(f"/v1/sessions/{sid}/peg").status_code == 200
    assert client.post(f"/v1/sessions/{sid}/main-arguments", json={}).status_code == 200
    assert client.post(
        f"/v1/sessions/{sid}/main-argument/select", json={"rank": 1}
    ).status_code == 200
    body = client.post(
        f"/v1/sessions/{sid}/supporting-arguments", json={"structure": "parallel"}
    ).json()
    for index in range(len(body["supporting_arguments"])):
        assert client.post(f"/v1/sessions/{sid}/evidence/{index}").status_code == 200
    assert client.post(f"/v1/sessions/{sid}/combine").status_code == 200
    return sid


def test_health(client):
    body = client.get("/v1/health").json()
    assert body["status"] == "ok"
    assert body["version"]


def test_full_session_flow(client):
    sid = drive_full_session(client)
    session = client.get(f"/v1/sessions/{sid}").json()
    assert all(session["stage_valid"][stage] for stage in session["stage_valid"])
    markdown = client.get(f"/v1/sessions/{sid}/export", params={"format": "md"})
    assert markdown.status_code == 200
    assert markdown.text.startswith("# ")
    structured = client.get(f"/v1/sessions/{sid}/export", params={"format": "json"}).json()
    assert structured["title"]
    assert len(structured["sections"]) == len(session["supporting_arguments"])


def test_session_not_found(client):
    response = client.get("/v1/sessions/nope")
    assert response.status_code == 404
    assert response.json()["code"] == "not_found"


def test_bad_request_code(client):
    response = client.post("/v1/sessions", json={})
    assert response.status_code == 400
    assert response.json()["code"] == "bad_request"


def test_out_of_order_edit_is_conflict(client):
    sid = client.post("/v1/sessions", json={"event_detail": "d"}).json()["id"]
    response = client.patch(
        f"/v1/sessions/{sid}/stages/supporting_arguments", json={"output": ["x"]}
    )
    assert response.status_code == 409
    assert response.json()["code"] == "conflict"


def test_edit_marks_downstream_stale(client):
    sid = drive_full_session(client)
    edited = client.patch(
        f"/v1/sessions/{sid}/stages/peg", json={"output": "fresh peg"}
    ).json()
    assert edited["peg"] == "fresh peg"
    for stage in ("main_argument", "supporting_arguments", "evidence", "combination"):
        assert edited["stage_status"][stage] == "stale"
    # export now fails: combination is no longer valid
    assert client.get(f"/v1/sessions/{sid}/export").status_code == 400


def test_select_rank_out_of_range(client):
    sid = client.post("/v1/sessions", json={"event_detail": "d"}).json()["id"]
    client.post(f"/v1/sessions/{sid}/peg")
    client.post(f"/v1/sessions/{sid}/main-arguments", json={})
    response = client.post(f"/v1/sessions/{sid}/main-argument/select", json={"rank": 11})
    assert response.status_code == 400
    assert response.json()["code"] == "bad_request"


def test_knowledge_endpoints(client):
    report = client.post(
        "/v1/knowledge/events", json={"titles": ["City bans smoking in parks"]}
    ).json()
    assert report == {"added": 1, "failed": 0, "skipped": 0, "failures": []}
    book = client.post(
        "/v1/knowledge/books",
        json={"title": "Health Law", "subject": "law", "body": "clean air " * 100},
    ).json()
    assert book["chunks"] >= 1
    hits = client.get("/v1/knowledge/search", params={"q": "mock", "threshold": 0.0}).json()
    assert hits["results"]
    numbers = [r["ref_number"] for r in hits["results"]]
    assert numbers == list(range(1, len(numbers) + 1))


def test_evaluate_endpoint(client):
    report = client.post("/v1/evaluate", json={"text": "A commentary."}).json()
    assert report["overall"] == 8.0
    assert len(report["scores"]) == 5


def test_human_scores_import(client, tmp_path):
    body = {
        "item_id": "item-1",
        "scores": {"structure_soundness": 8.0},
        "timeliness": 9.0,
    }
    response = client.post("/v1/human-scores", json=body)
    assert response.status_code == 200
    assert response.json() == {"stored": "item-1"}


def test_sessions_survive_restart_on_same_data_dir(tmp_path):
    config = AppConfig(gateway=GatewayConfig(retry_backoff_ms=0),
                       data_dir=str(tmp_path / "data"))
    first = TestClient(create_app(config))
    sid = drive_full_session(first)
    exported = first.get(f"/v1/sessions/{sid}/export").text

    second = TestClient(create_app(config))  # fresh process state, same disk
    assert second.get(f"/v1/sessions/{sid}/export").text == exported


def test_restart_recovers_torn_event_log(tmp_path):
    config = AppConfig(gateway=GatewayConfig(retry_backoff_ms=0),
                       data_dir=str(tmp_path / "data"))
    first = TestClient(create_app(config))
    sid = drive_full_session(first)
    log_path = config.sessions_dir / f"{sid}.jsonl"
    before = first.get(f"/v1/sessions/{sid}").json()
    with log_path.open("a", encoding="utf-8") as fh:
        fh.write('{"seq": 999, "op": "peg_set", "data": {"peg":')  # simulated crash

    second = TestClient(create_app(config))
    session = second.get(f"/v1/sessions/{sid}").json()
    assert any("torn event-log line" in w for w in session["warnings"])
    session["warnings"] = before["warnings"]
    assert session == before


def test_serve_refuses_occupied_port(tmp_path):
    blocker = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    blocker.bind(("127.0.0.1", 0))
    port = blocker.getsockname()[1]
    try:
        config = AppConfig(data_dir=str(tmp_path / "data"))
        config.http.port = port
        with pytest.raises(BindError):
            serve(config)
    finally:
        blocker.close()


def test_config_validation(tmp_path):
    config = AppConfig()
    config.retrieval.threshold = 1.4
    with pytest.raises(ConfigError):
        config.validate()

    path = tmp_path / "config.json"
    path.write_text('{"retrieval": {"threshold": 0.4, "k_max": 7}, "data_dir": "dd"}')
    loaded = load_config(path)
    assert loaded.retrieval.threshold == 0.4
    assert loaded.retrieval.k_max == 7
    assert loaded.data_dir == "dd"

    path.write_text('{"retrieval": {"bogus_key": 1}}')
    with pytest.raises(ConfigError):
        load_config(path)


def test_mutating_endpoints_wrap_exactly_one_operation():
    # endpoint -> operation map; each handler body must invoke its one
    # engine/knowledge operation and no other mutating operation
    import inspect

    from commentary_engine import service

    source = inspect.getsource(service.create_app)
    handlers = {}
    current = None
    for line in source.splitlines():
        stripped = line.strip()
        if stripped.startswith("def ") and "(" in stripped:
            current = stripped[4 : stripped.index("(")]
            handlers[current] = []
        elif current:
            handlers[current].append(stripped)

    operations = {
        "start_session": "engine.start_session",
        "generate_peg": "engine.generate_peg",
        "generate_main_arguments": "engine.generate_main_arguments",
        "select_main_argument": "engine.select_main_argument",
        "generate_supporting": "engine.generate_supporting_arguments",
        "generate_evidence": "engine.generate_evidence",
        "combine": "engine.combine_article",
        "edit_stage": "engine.edit_stage",
        "ingest_events": "knowledge.refresh_daily",
        "ingest_book": "knowledge.ingest_book",
        "evaluate_text": "evaluate(",
    }
    all_ops = set(operations.values())
    for handler, operation in operations.items():
        body = "\n".join(handlers[handler])
        assert operation in body, f"{handler} must call {operation}"
        others = all_ops - {operation}
        assert not any(op in body for op in others), (
            f"{handler} calls more than one operation"
        )


def test_ranker_loaded_from_config(tmp_path):
    from commentary_engine.ranking import ScorerModel

    model_path = tmp_path / "model.json"
    ScorerModel.zeros(16).save(model_path)
    config = AppConfig(data_dir=str(tmp_path / "data"),
                       ranking_model_path=str(model_path))
    state = build_state(config)
    assert state.engine.ranker.feature_dim == 16
