from __future__ import annotations

import json

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import FlakyProvider
from eftchat.domain import ChatMessage, Role
from eftchat.gateway import (
    BudgetExceeded,
    EchoProvider,
    LlmGateway,
    ProviderRefusal,
    ProviderRequest,
    ProviderResponse,
    RemoteProvider,
    RetryPolicy,
    ScriptEntry,
    ScriptError,
    ScriptedProvider,
    TransportError,
    token_estimate,
)


def make_request(content="hello", stage_tag="", max_output_tokens=100, n_copies=1):
    messages = tuple(
        ChatMessage(role=Role.USER, content=content) for _ in range(n_copies)
    )
    return ProviderRequest(
        model_name="gpt-4",
        messages=messages,
        temperature=0.7,
        max_output_tokens=max_output_tokens,
        stage_tag=stage_tag,
    )


class TestTokenEstimate:
    def test_empty(self):
        assert token_estimate("") == 0

    def test_eight_chars(self):
        assert token_estimate("abcdefgh") == 2

    @given(st.text(max_size=200), st.text(max_size=200))
    def test_concatenation_bound(self, a, b):
        assert token_estimate(a + b) <= token_estimate(a) + token_estimate(b) + 1

    @given(st.text(max_size=200), st.text(max_size=50))
    def test_monotone(self, a, suffix):
        assert token_estimate(a + suffix) >= token_estimate(a)


class TestRequestValidation:
    def test_rejects_empty_messages(self):
        with pytest.raises(ValueError):
            ProviderRequest("gpt-4", (), 0.5, 10)

    def test_rejects_bad_temperature(self):
        with pytest.raises(ValueError):
            ProviderRequest("gpt-4", make_request().messages, 2.5, 10)

    def test_response_content_empty_only_when_filtered(self):
        with pytest.raises(ValueError):
            ProviderResponse(content="", finish_reason="stop")
        assert ProviderResponse(content="", finish_reason="filtered").content == ""


class TestScriptedProvider:
    def test_single_reply_matches_any_request(self):
        gateway = LlmGateway(ScriptedProvider.single("Hello!"))
        response = gateway.complete(make_request(stage_tag="anything"))
        assert (response.content, response.finish_reason) == ("Hello!", "stop")

    def test_keyed_by_stage_and_ordinal(self):
        provider = ScriptedProvider(
            [
                ScriptEntry("greeting", 0, "first"),
                ScriptEntry("greeting", 1, "second"),
                ScriptEntry("feedback", 0, "other"),
            ]
        )
        gateway = LlmGateway(provider)
        assert gateway.complete(make_request(stage_tag="greeting")).content == "first"
        assert gateway.complete(make_request(stage_tag="feedback")).content == "other"
        assert gateway.complete(make_request(stage_tag="greeting")).content == "second"

    def test_missing_entry_raises(self):
        gateway = LlmGateway(ScriptedProvider([ScriptEntry("greeting", 0, "only")]))
        gateway.complete(make_request(stage_tag="greeting"))
        with pytest.raises(ScriptError):
            gateway.complete(make_request(stage_tag="greeting"))

    def test_replay_is_deterministic(self):
        entries = [ScriptEntry("a", i, f"reply {i}") for i in range(5)]
        requests = [make_request(stage_tag="a") for _ in range(5)]
        transcripts = []
        for _ in range(2):
            gateway = LlmGateway(ScriptedProvider(list(entries)))
            transcripts.append([gateway.complete(r).content for r in requests])
        assert transcripts[0] == transcripts[1]

    def test_from_file(self, tmp_path):
        path = tmp_path / "script.json"
        path.write_text(
            json.dumps([{"stage": "*", "ordinal": -1, "content": "canned"}]), "utf-8"
        )
        provider = ScriptedProvider.from_file(path)
        assert provider.send(make_request()).content == "canned"


class TestEchoProvider:
    def test_echoes_last_user_message(self):
        text = "In about 1 month, I am playing golf with my friends."
        gateway = LlmGateway(EchoProvider())
        assert gateway.complete(make_request(content=text)).content == text


class TestBudget:
    def test_budget_exceeded(self):
        # 8100 estimated input tokens + 200 output > 8192.
        request = make_request(content="x" * (8100 * 4), max_output_tokens=200)
        gateway = LlmGateway(ScriptedProvider.single("hi"), context_budget=8192)
        with pytest.raises(BudgetExceeded):
            gateway.complete(request)

    def test_within_budget_passes(self):
        request = make_request(content="x" * (7900 * 4), max_output_tokens=200)
        gateway = LlmGateway(ScriptedProvider.single("hi"), context_budget=8192)
        assert gateway.complete(request).content == "hi"


class TestCallLog:
    def test_empty_log(self):
        gateway = LlmGateway(ScriptedProvider.single("hi"))
        assert gateway.record_call_log() == []

    def test_two_calls_in_order(self):
        gateway = LlmGateway(ScriptedProvider.single("hi"))
        first = make_request(content="one")
        second = make_request(content="two")
        gateway.complete(first)
        gateway.complete(second)
        assert gateway.record_call_log() == [first, second]

    def test_budget_rejected_requests_not_logged(self):
        gateway = LlmGateway(ScriptedProvider.single("hi"), context_budget=10)
        with pytest.raises(BudgetExceeded):
            gateway.complete(make_request(content="x" * 400))
        assert gateway.record_call_log() == []


class TestRetry:
    def test_retries_then_succeeds(self):
        provider = FlakyProvider(failures=2)
        delays: list[float] = []
        gateway = LlmGateway(
            provider, retry=RetryPolicy(retry_limit=3, backoff_base=0.5), sleep=delays.append
        )
        assert gateway.complete(make_request()).content == "ok"
        assert provider.calls == 3
        assert delays == [0.5, 1.0]

    def test_gives_up_after_limit(self):
        provider = FlakyProvider(failures=10)
        gateway = LlmGateway(
            provider, retry=RetryPolicy(retry_limit=2, backoff_base=0.0), sleep=lambda _: None
        )
        with pytest.raises(TransportError):
            gateway.complete(make_request())
        assert provider.calls == 3  # first try + 2 retries

    def test_backoff_is_capped(self):
        policy = RetryPolicy(retry_limit=10, backoff_base=0.5, backoff_cap=8.0)
        assert policy.delay(0) == 0.5
        assert policy.delay(4) == 8.0
        assert policy.delay(9) == 8.0


class TestRemoteProvider:
    def _provider(self, handler):
        transport = httpx.MockTransport(handler)
        return RemoteProvider(
            "https://example.test/v1/chat",
            credential_env="EFTCHAT_TEST_KEY",
            client=httpx.Client(transport=transport),
        )

    def test_wire_format(self, monkeypatch):
        monkeypatch.setenv("EFTCHAT_TEST_KEY", "secret-token")
        seen = {}

        def handler(request: httpx.Request) -> httpx.Response:
            seen["body"] = json.loads(request.content)
            seen["auth"] = request.headers.get("Authorization")
            return httpx.Response(
                200,
                json={
                    "choices": [
                        {"message": {"content": "reply"}, "finish_reason": "stop"}
                    ],
                    "usage": {"prompt_tokens": 3, "completion_tokens": 2},
                },
            )

        provider = self._provider(handler)
        response = provider.send(make_request(content="hi there", max_output_tokens=64))
        assert response.content == "reply"
        assert response.usage == {"input_tokens": 3, "output_tokens": 2}
        assert seen["auth"] == "Bearer secret-token"
        assert seen["body"]["model"] == "gpt-4"
        assert seen["body"]["max_tokens"] == 64
        assert seen["body"]["messages"] == [{"role": "user", "content": "hi there"}]

    def test_server_error_is_transient(self):
        provider = self._provider(lambda request: httpx.Response(503, text="down"))
        with pytest.raises(TransportError) as err:
            provider.send(make_request())
        assert err.value.transient is True

    def test_client_error_is_not_transient(self):
        provider = self._provider(lambda request: httpx.Response(401, text="no"))
        with pytest.raises(TransportError) as err:
            provider.send(make_request())
        assert err.value.transient is False

    def test_content_filter_maps_to_refusal(self):
        def handler(request):
            return httpx.Response(
                200,
                json={
                    "choices": [
                        {"message": {"content": ""}, "finish_reason": "content_filter"}
                    ]
                },
            )

        gateway = LlmGateway(self._provider(handler))
        with pytest.raises(ProviderRefusal):
            gateway.complete(make_request())
