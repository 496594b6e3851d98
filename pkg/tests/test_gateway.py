import json

import httpx
import pytest

from feedstack.gateway import (
    CompletionRequest,
    GatewayConfig,
    GatewayRemoteError,
    GatewayTimeout,
    GatewayTransportError,
    TemplateId,
    complete,
    config_from_env,
    render_prompt,
    stub_completion,
)
from feedstack.model import ValidationError


def _request(template=TemplateId.ASSISTANT_REPLY, **variables):
    return CompletionRequest(template_id=template, variables=variables)


class TestRequestValidation:
    def test_materials_requires_zero_temperature(self):
        with pytest.raises(ValidationError):
            CompletionRequest(
                template_id=TemplateId.MATERIALS, variables={}, temperature=0.5
            )

    def test_detect_requires_zero_temperature(self):
        with pytest.raises(ValidationError):
            CompletionRequest(template_id=TemplateId.DETECT, variables={}, temperature=0.1)

    def test_assistant_reply_may_be_warm(self):
        CompletionRequest(
            template_id=TemplateId.ASSISTANT_REPLY, variables={}, temperature=0.7
        )

    def test_max_tokens_positive(self):
        with pytest.raises(ValidationError):
            CompletionRequest(template_id=TemplateId.CUES, variables={}, max_tokens=0)


class TestConfigValidation:
    def test_defaults(self):
        config = GatewayConfig()
        assert config.mode == "stub"
        assert config.timeout_ms == 10_000
        assert config.max_retries == 2
        assert config.backoff_base_ms == 250
        assert config.api_key_ref == "FEEDSTACK_LLM_API_KEY"

    def test_bad_mode(self):
        with pytest.raises(ValidationError):
            GatewayConfig(mode="remote")

    def test_live_needs_endpoint(self):
        with pytest.raises(ValidationError):
            GatewayConfig(mode="live")

    def test_bad_timeout(self):
        with pytest.raises(ValidationError):
            GatewayConfig(timeout_ms=0)

    def test_env_selects_live(self):
        config = config_from_env({"FEEDSTACK_LLM_BASE_URL": "http://models.example"})
        assert config.mode == "live"
        assert config.endpoint == "http://models.example"

    def test_env_defaults_to_stub(self):
        assert config_from_env({}).mode == "stub"

    def test_api_key_resolution(self):
        config = GatewayConfig(api_key_ref="MY_KEY")
        assert config.resolve_api_key({"MY_KEY": "sk-123"}) == "sk-123"
        assert config.resolve_api_key({}) == ""


class TestPromptRendering:
    def test_deterministic(self):
        variables = {"transcript": "user: fix the contrast"}
        first = render_prompt(TemplateId.ASSISTANT_REPLY, variables)
        assert first == render_prompt(TemplateId.ASSISTANT_REPLY, variables)
        assert "fix the contrast" in first

    def test_missing_variable(self):
        with pytest.raises(ValidationError):
            render_prompt(TemplateId.MATERIALS, {"name": "Contrast"})

    def test_every_template_renders(self):
        filled = {
            TemplateId.ASSISTANT_REPLY: {"transcript": "t"},
            TemplateId.MATERIALS: {
                "name": "n",
                "definition": "d",
                "mention_count": "1",
                "first_message_index": "0",
                "terms": "[]",
            },
            TemplateId.CUES: {"name": "n", "transcript": "t"},
            TemplateId.DETECT: {"text": "t", "principles": "p"},
        }
        for template_id, variables in filled.items():
            assert render_prompt(template_id, variables)


class TestStub:
    def test_deterministic(self):
        request = _request(text="the contrast is low")
        assert stub_completion(request) == stub_completion(request)

    def test_assistant_reply_keyed_by_first_term(self):
        contrast = stub_completion(_request(text="please fix the contrast"))
        balance = stub_completion(_request(text="the balance is off"))
        fallback = stub_completion(_request(text="hello there"))
        assert len({contrast, balance, fallback}) == 3
        assert "contrast" in contrast.lower()

    def test_first_term_wins_when_two_appear(self):
        both = stub_completion(_request(text="balance then contrast"))
        balance_only = stub_completion(_request(text="balance"))
        assert both == balance_only

    def test_materials_shape(self):
        raw = stub_completion(
            CompletionRequest(
                template_id=TemplateId.MATERIALS,
                variables={
                    "name": "Contrast",
                    "definition": "Strong visual difference.",
                    "mention_count": "2",
                    "first_message_index": "3",
                    "terms": json.dumps(["contrast", "contrasting"]),
                },
            )
        )
        data = json.loads(raw)
        assert data["definition"] == "Strong visual difference."
        assert data["relation_to_design"] == "Mentioned 2 time(s), first in message 3."
        assert data["key_terms"] == [
            ["contrast", "Strong visual difference."],
            ["contrasting", "Strong visual difference."],
        ]

    def test_cue_texts(self):
        raw = stub_completion(
            CompletionRequest(template_id=TemplateId.CUES, variables={"name": "Balance"})
        )
        assert json.loads(raw) == [
            "Can you show an example applying Balance?",
            "Why does Balance matter for my design?",
            "How do I make this Balance feedback actionable?",
        ]

    def test_detect_is_empty_list(self):
        raw = stub_completion(
            CompletionRequest(template_id=TemplateId.DETECT, variables={"text": "x"})
        )
        assert json.loads(raw) == []

    def test_complete_routes_to_stub(self):
        request = _request(text="contrast")
        assert complete(request, GatewayConfig()) == stub_completion(request)


LIVE = GatewayConfig(
    mode="live",
    endpoint="http://models.example",
    timeout_ms=100,
    max_retries=2,
    backoff_base_ms=250,
)


def _ok_response(completion="fine"):
    return httpx.Response(
        200, json={"completion": completion}, request=httpx.Request("POST", "http://x")
    )


class TestLive:
    def test_success_first_try(self, monkeypatch):
        calls = []

        def fake_post(url, **kwargs):
            calls.append(url)
            return _ok_response("model says hi")

        monkeypatch.setattr(httpx, "post", fake_post)
        out = complete(_request(text="t", transcript="c"), LIVE)
        assert out == "model says hi"
        assert calls == ["http://models.example/completions"]

    def test_timeout_retries_then_raises(self, monkeypatch):
        attempts = []
        sleeps = []

        def fake_post(url, **kwargs):
            attempts.append(url)
            raise httpx.ConnectTimeout("slow")

        monkeypatch.setattr(httpx, "post", fake_post)
        with pytest.raises(GatewayTimeout):
            complete(_request(text="t", transcript="c"), LIVE, sleeper=sleeps.append)
        assert len(attempts) == 3
        assert sleeps == [0.25, 0.5]

    def test_transport_error_retries(self, monkeypatch):
        state = {"n": 0}

        def fake_post(url, **kwargs):
            state["n"] += 1
            if state["n"] < 3:
                raise httpx.ConnectError("refused")
            return _ok_response("eventually")

        monkeypatch.setattr(httpx, "post", fake_post)
        out = complete(_request(text="t", transcript="c"), LIVE, sleeper=lambda _s: None)
        assert out == "eventually"
        assert state["n"] == 3

    def test_client_error_no_retry(self, monkeypatch):
        attempts = []

        def fake_post(url, **kwargs):
            attempts.append(1)
            return httpx.Response(401, request=httpx.Request("POST", "http://x"))

        monkeypatch.setattr(httpx, "post", fake_post)
        with pytest.raises(GatewayRemoteError) as info:
            complete(_request(text="t", transcript="c"), LIVE, sleeper=lambda _s: None)
        assert info.value.status_code == 401
        assert len(attempts) == 1

    def test_server_error_retries(self, monkeypatch):
        state = {"n": 0}

        def fake_post(url, **kwargs):
            state["n"] += 1
            if state["n"] == 1:
                return httpx.Response(503, request=httpx.Request("POST", "http://x"))
            return _ok_response("recovered")

        monkeypatch.setattr(httpx, "post", fake_post)
        out = complete(_request(text="t", transcript="c"), LIVE, sleeper=lambda _s: None)
        assert out == "recovered"
        assert state["n"] == 2

    def test_all_transport_failures_surface_last_error(self, monkeypatch):
        def fake_post(url, **kwargs):
            raise httpx.ConnectError("refused")

        monkeypatch.setattr(httpx, "post", fake_post)
        with pytest.raises(GatewayTransportError):
            complete(_request(text="t", transcript="c"), LIVE, sleeper=lambda _s: None)

    def test_unusable_body(self, monkeypatch):
        def fake_post(url, **kwargs):
            return httpx.Response(
                200, json={"unexpected": 1}, request=httpx.Request("POST", "http://x")
            )

        monkeypatch.setattr(httpx, "post", fake_post)
        with pytest.raises(GatewayRemoteError):
            complete(_request(text="t", transcript="c"), LIVE, sleeper=lambda _s: None)

    def test_api_key_header(self, monkeypatch):
        seen = {}

        def fake_post(url, **kwargs):
            seen.update(kwargs.get("headers") or {})
            return _ok_response()

        monkeypatch.setattr(httpx, "post", fake_post)
        monkeypatch.setenv("FEEDSTACK_LLM_API_KEY", "sk-test")
        complete(_request(text="t", transcript="c"), LIVE)
        assert seen.get("Authorization") == "Bearer sk-test"

    def test_budget_never_exceeds_contract(self, monkeypatch):
        config = GatewayConfig(
            mode="live",
            endpoint="http://models.example",
            timeout_ms=40,
            max_retries=3,
            backoff_base_ms=10,
        )
        sleeps = []

        def fake_post(url, **kwargs):
            raise httpx.ReadTimeout("slow")

        monkeypatch.setattr(httpx, "post", fake_post)
        with pytest.raises(GatewayTimeout):
            complete(_request(text="t", transcript="c"), config, sleeper=sleeps.append)
        # schedule is base, 2x, 4x; total pause stays within the doubling budget
        assert sleeps == [0.01, 0.02, 0.04]
        assert sum(sleeps) * 1000 <= config.backoff_base_ms * (2 ** config.max_retries - 1)
