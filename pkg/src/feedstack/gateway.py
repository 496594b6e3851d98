"""Model gateway: prompt rendering plus a two-mode completion client.

Every model call in the system funnels through :func:`complete`. Stub mode
answers from canned material shipped with the package and is a pure function
of the request, which is what the test suite and offline replays run on. Live
mode posts to an HTTP completion endpoint with a timeout and bounded retries
with exponential backoff. Callers never branch on mode themselves.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Callable, Mapping, Optional

import httpx

from .model import FeedstackError, ValidationError

ENV_API_KEY = "FEEDSTACK_LLM_API_KEY"
ENV_BASE_URL = "FEEDSTACK_LLM_BASE_URL"

DEFAULT_TIMEOUT_MS = 10_000
DEFAULT_MAX_RETRIES = 2
DEFAULT_BACKOFF_BASE_MS = 250
DEFAULT_MAX_TOKENS = 512


class GatewayError(FeedstackError):
    """Base class for completion failures."""


class GatewayTimeout(GatewayError):
    """The endpoint did not answer within the configured timeout."""


class GatewayTransportError(GatewayError):
    """Connection-level failure before any HTTP response arrived."""


class GatewayRemoteError(GatewayError):
    """The endpoint answered with an error status or an unusable body."""

    def __init__(self, message: str, status_code: Optional[int] = None):
        super().__init__(message)
        self.status_code = status_code


class TemplateId(str, Enum):
    ASSISTANT_REPLY = "assistant_reply"
    MATERIALS = "materials"
    CUES = "cues"
    DETECT = "detect"


# Structured outputs must be reproducible, so these two run at temperature 0.
_ZERO_TEMPERATURE_TEMPLATES = frozenset({TemplateId.MATERIALS, TemplateId.DETECT})


@dataclass(frozen=True)
class CompletionRequest:
    """One completion call: a template plus the strings that fill it."""

    template_id: TemplateId
    variables: Mapping[str, str]
    max_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ValidationError("max_tokens must be positive")
        if self.template_id in _ZERO_TEMPERATURE_TEMPLATES and self.temperature != 0.0:
            raise ValidationError(
                f"template {self.template_id.value!r} requires temperature 0"
            )


@dataclass(frozen=True)
class GatewayConfig:
    """How completions are produced.

    ``mode`` is ``"stub"`` or ``"live"``. Live mode needs ``endpoint``;
    ``api_key_ref`` names the environment variable holding the key. Stub mode
    ignores both.
    """

    mode: str = "stub"
    endpoint: str = ""
    api_key_ref: str = ENV_API_KEY
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    max_retries: int = DEFAULT_MAX_RETRIES
    backoff_base_ms: int = DEFAULT_BACKOFF_BASE_MS

    def __post_init__(self) -> None:
        if self.mode not in ("stub", "live"):
            raise ValidationError(f"gateway mode must be 'stub' or 'live', got {self.mode!r}")
        if self.mode == "live" and not self.endpoint:
            raise ValidationError("live gateway mode requires an endpoint")
        if self.timeout_ms <= 0:
            raise ValidationError("timeout_ms must be positive")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be non-negative")

    def resolve_api_key(self, env: Optional[Mapping[str, str]] = None) -> str:
        source = env if env is not None else os.environ
        return source.get(self.api_key_ref, "")


def config_from_env(env: Optional[Mapping[str, str]] = None) -> GatewayConfig:
    """Build a config from the environment; live mode when a base URL is set."""
    source = env if env is not None else os.environ
    endpoint = source.get(ENV_BASE_URL, "")
    if endpoint:
        return GatewayConfig(mode="live", endpoint=endpoint)
    return GatewayConfig(mode="stub")


@lru_cache(maxsize=None)
def _template_text(template_id: TemplateId) -> str:
    return resources.files("feedstack.prompts").joinpath(f"{template_id.value}.txt").read_text(
        encoding="utf-8"
    )


def render_prompt(template_id: TemplateId, variables: Mapping[str, str]) -> str:
    """Fill a shipped prompt template; a missing placeholder is an error."""
    template = _template_text(template_id)
    try:
        return template.format(**dict(variables))
    except (KeyError, IndexError) as exc:
        raise ValidationError(
            f"template {template_id.value!r} is missing variable {exc}"
        ) from exc


@lru_cache(maxsize=1)
def _stub_replies() -> dict[str, str]:
    raw = resources.files("feedstack.data").joinpath("stub_replies.json").read_text(
        encoding="utf-8"
    )
    return json.loads(raw)


@lru_cache(maxsize=1)
def _stub_lexicon():
    # Imported lazily so this module stays importable without the catalog
    # machinery; the stub only needs it to pick a canned reply.
    from .catalog import default_catalog
    from .detection import build_lexicon

    return build_lexicon(default_catalog())


def stub_completion(request: CompletionRequest) -> str:
    """Deterministic canned completion for any template.

    Assistant replies are keyed by the first default-catalog term found in the
    user text (generic fallback when none is found). The structured templates
    answer with JSON assembled from the request variables, so the same request
    always yields byte-identical output.
    """
    v = request.variables
    if request.template_id is TemplateId.ASSISTANT_REPLY:
        from .detection import scan_text

        replies = _stub_replies()
        spans = scan_text(str(v.get("text", "")), _stub_lexicon())
        key = spans[0].principle_id if spans else "_default"
        return replies.get(key, replies["_default"])
    if request.template_id is TemplateId.MATERIALS:
        definition = str(v.get("definition", ""))
        try:
            terms = json.loads(v.get("terms", "[]"))
        except json.JSONDecodeError:
            terms = []
        return json.dumps(
            {
                "definition": definition,
                "relation_to_design": "Mentioned {0} time(s), first in message {1}.".format(
                    v.get("mention_count", "0"), v.get("first_message_index", "0")
                ),
                "key_terms": [[str(t), definition] for t in terms],
            },
            ensure_ascii=False,
        )
    if request.template_id is TemplateId.CUES:
        name = str(v.get("name", "this principle"))
        return json.dumps(
            [
                f"Can you show an example applying {name}?",
                f"Why does {name} matter for my design?",
                f"How do I make this {name} feedback actionable?",
            ],
            ensure_ascii=False,
        )
    if request.template_id is TemplateId.DETECT:
        return "[]"
    raise ValidationError(f"unknown template: {request.template_id!r}")


def _live_completion(
    request: CompletionRequest,
    config: GatewayConfig,
    sleeper: Callable[[float], None],
) -> str:
    url = config.endpoint.rstrip("/") + "/completions"
    headers = {"Content-Type": "application/json"}
    api_key = config.resolve_api_key()
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    body = {
        "template_id": request.template_id.value,
        "prompt": render_prompt(request.template_id, request.variables),
        "max_tokens": request.max_tokens,
        "temperature": request.temperature,
    }
    timeout_s = config.timeout_ms / 1000.0

    last_error: Optional[GatewayError] = None
    for attempt in range(config.max_retries + 1):
        if attempt:
            sleeper(config.backoff_base_ms / 1000.0 * (2 ** (attempt - 1)))
        try:
            response = httpx.post(url, json=body, headers=headers, timeout=timeout_s)
        except httpx.TimeoutException:
            last_error = GatewayTimeout(f"completion timed out after {config.timeout_ms}ms")
            continue
        except httpx.TransportError as exc:
            last_error = GatewayTransportError(f"transport failure: {exc}")
            continue
        if response.status_code >= 500:
            last_error = GatewayRemoteError(
                f"endpoint returned {response.status_code}", status_code=response.status_code
            )
            continue
        if response.status_code >= 400:
            # Client errors will not improve on retry.
            raise GatewayRemoteError(
                f"endpoint rejected request with {response.status_code}",
                status_code=response.status_code,
            )
        try:
            data = response.json()
            completion = data["completion"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise GatewayRemoteError(f"unusable completion body: {exc}") from exc
        if not isinstance(completion, str):
            raise GatewayRemoteError("completion field was not a string")
        return completion
    assert last_error is not None
    raise last_error


def complete(
    request: CompletionRequest,
    config: GatewayConfig,
    *,
    sleeper: Callable[[float], None] = time.sleep,
) -> str:
    """Produce a completion for the request under the given config."""
    if config.mode == "stub":
        return stub_completion(request)
    return _live_completion(request, config, sleeper)
