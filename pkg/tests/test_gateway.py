import json
import threading

import httpx
import pytest

from xaichain.exceptions import (
    ConfigurationError,
    EmptyResponseError,
    InvalidArgumentError,
    ProtocolError,
    StageError,
    TransportError,
)
from xaichain.gateway import (
    ChatTurn,
    Gateway,
    GatewayConfig,
    LiveBackend,
    complete_chat,
    extract_feedback,
    judge_question_count,
    run_two_stage,
)


def reply(text):
    return {"choices": [{"message": {"role": "assistant", "content": text}}], "usage": {"total_tokens": 3}}


def live(url, **kw):
    kw.setdefault("backoff_base", 0.001)
    return GatewayConfig(endpoint_url=url, backend="live", model_name="stub-model", **kw)


def test_mock_is_deterministic():
    h = [ChatTurn("user", "Tell me something.")]
    assert complete_chat(h).text == complete_chat(h).text
    assert complete_chat(h).text != complete_chat([ChatTurn("user", "Something else.")]).text


def test_history_preconditions():
    with pytest.raises(InvalidArgumentError):
        complete_chat([ChatTurn("user", "q"), ChatTurn("assistant", "a")])
    with pytest.raises(InvalidArgumentError):
        complete_chat([])
    with pytest.raises(InvalidArgumentError):
        ChatTurn("user", "   ")
    with pytest.raises(InvalidArgumentError):
        complete_chat([ChatTurn("assistant", "a"), ChatTurn("assistant", "b"), ChatTurn("user", "c")])


def test_config_validation():
    with pytest.raises(ConfigurationError):
        GatewayConfig(max_in_flight=0)
    with pytest.raises(ConfigurationError):
        GatewayConfig(backend="live")
    with pytest.raises(ConfigurationError):
        GatewayConfig.from_dict({"api_key": "secret"})


def test_mock_judge_reply_matches_question_count():
    prompt = "GENERATED TEXT:\nx\n\nQUESTIONS:\n1. a?\n2. b?\n3. c?\n\nFORMAT:\nA list of YES/NO answers"
    assert judge_question_count(prompt) == 3
    assert complete_chat([ChatTurn("user", prompt)]).text == "[YES, YES, YES]"


def test_mock_never_touches_network(monkeypatch):
    def boom(*a, **k):
        raise AssertionError("network used")

    monkeypatch.setattr(httpx.Client, "send", boom)
    monkeypatch.setattr(httpx, "post", boom)
    gw = Gateway(GatewayConfig(endpoint_url="http://10.255.255.1/never", backend="mock"))
    assert gw.complete([ChatTurn("user", "hello")]).backend == "mock"


def test_live_reads_message_content(stub_server, monkeypatch):
    monkeypatch.setenv("ILLUM_API_KEY", "k123")
    srv = stub_server([(200, reply("fixed body"))])
    with Gateway(live(srv.url, temperature=0.2, max_output_tokens=77)) as gw:
        out = gw.complete([ChatTurn("system", "be brief"), ChatTurn("user", "hi")])
    assert out.text == "fixed body"
    assert out.usage == {"total_tokens": 3}
    sent = srv.requests[0]
    assert sent["payload"] == {
        "model": "stub-model",
        "messages": [{"role": "system", "content": "be brief"}, {"role": "user", "content": "hi"}],
        "temperature": 0.2,
        "max_tokens": 77,
    }
    assert sent["headers"]["Authorization"] == "Bearer k123"


def test_custom_auth_header(stub_server, monkeypatch):
    monkeypatch.setenv("OTHER_KEY", "zz")
    srv = stub_server()
    with Gateway(live(srv.url, api_key_env="OTHER_KEY", auth_header="api-key", auth_scheme="")) as gw:
        gw.complete([ChatTurn("user", "hi")])
    assert srv.requests[0]["headers"]["api-key"] == "zz"


def test_retries_then_succeeds(stub_server):
    srv = stub_server([(429, {"error": "slow down"}), (503, {}), (200, reply("third time"))])
    sleeps = []
    with Gateway(live(srv.url, max_retries=3), sleep=sleeps.append) as gw:
        out = gw.complete([ChatTurn("user", "hi")])
    assert out.text == "third time" and out.attempts == 3
    assert len(sleeps) == 2


def test_retries_exhausted(stub_server):
    srv = stub_server([(500, {})])
    with Gateway(live(srv.url, max_retries=2), sleep=lambda s: None) as gw:
        with pytest.raises(TransportError):
            gw.complete([ChatTurn("user", "hi")])
    assert len(srv.requests) == 3


def test_unreachable_endpoint_is_transport_error():
    cfg = live("http://127.0.0.1:9/none", max_retries=1, timeout=0.5)
    with Gateway(cfg, sleep=lambda s: None) as gw:
        with pytest.raises(TransportError):
            gw.complete([ChatTurn("user", "hi")])


@pytest.mark.parametrize(
    "body,error",
    [
        (b"<html>oops</html>", ProtocolError),
        ({"choices": []}, ProtocolError),
        (reply("   "), EmptyResponseError),
    ],
)
def test_bad_bodies(stub_server, body, error):
    srv = stub_server([(200, body)])
    with Gateway(live(srv.url)) as gw:
        with pytest.raises(error):
            gw.complete([ChatTurn("user", "hi")])


def test_client_error_is_not_retried(stub_server):
    srv = stub_server([(400, {"error": "bad"})])
    with Gateway(live(srv.url, max_retries=3)) as gw:
        with pytest.raises(ProtocolError):
            gw.complete([ChatTurn("user", "hi")])
    assert len(srv.requests) == 1


def test_backoff_grows_with_jitter():
    backend = LiveBackend(live("http://x", backoff_base=1.0, backoff_cap=100.0))
    for attempt in range(4):
        d = backend.backoff(attempt)
        assert 0.5 * 2**attempt <= d <= 2**attempt
    assert backend.backoff(0, retry_after=2.5) == 2.5
    backend.close()


def test_in_flight_limit(stub_server):
    srv = stub_server(delay=0.15)
    gw = Gateway(live(srv.url, max_in_flight=2))
    threads = [threading.Thread(target=gw.complete, args=([ChatTurn("user", f"q{i}")],)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    gw.close()
    assert len(srv.requests) == 8
    assert srv.peak == 2
    assert gw.peak_in_flight == 2


def test_two_stage_threads_history():
    seen = []

    def responder(messages):
        seen.append([m["role"] for m in messages])
        if len(messages) == 1:
            return "stage one report"
        return '{"feedback": "keep going"}'

    gw = Gateway(GatewayConfig(), responder=responder)
    out = run_two_stage("select please", "present please", gateway=gw)
    assert seen == [["user"], ["user", "assistant", "user"]]
    assert out.selection_response == "stage one report"
    assert out.parsed_feedback == "keep going" and out.parse_status == "ok"
    assert [t.content for t in out.history[:3]] == ["select please", "stage one report", "present please"]


def test_two_stage_fallback_and_fences():
    assert extract_feedback("no json here") == ("no json here", "fallback")
    fenced = 'Sure!\n```json\n{"feedback": "revisit week 4"}\n```\nThanks.'
    assert extract_feedback(fenced) == ("revisit week 4", "ok")
    assert extract_feedback('x {"n": 3, "text": "first string"} y') == ("first string", "ok")
    assert extract_feedback("{broken {\"a\": \"b\"}") == ("b", "ok")


def test_two_stage_stage_tags():
    def fail_first(messages):
        raise RuntimeError("down")

    with pytest.raises(StageError) as info:
        run_two_stage("a", "b", gateway=Gateway(GatewayConfig(), responder=fail_first))
    assert info.value.stage == "selection"

    def fail_second(messages):
        if len(messages) > 1:
            raise RuntimeError("down")
        return "ok"

    with pytest.raises(StageError) as info:
        run_two_stage("a", "b", gateway=Gateway(GatewayConfig(), responder=fail_second))
    assert info.value.stage == "presentation"


def test_two_stage_mock_default_parses():
    out = run_two_stage("Analyse the data.", "Return a JSON file with a string with your feedback to the student.")
    assert out.parse_status == "ok"
    assert json.loads(out.presentation_response)["feedback"] == out.parsed_feedback
