"""Chat-completion client for real models behind an OpenAI-compatible API."""

from __future__ import annotations

import os
import threading
import time
from typing import Callable

import httpx
import openai

from sand.core.errors import EmptyActionError, PolicyUnavailableError
from sand.core.tools.log import log
from sand.core.types import History, StepSample
from sand.policy.base import (
    CompletionModel,
    Policy,
    PolicyConfig,
    history_to_messages,
    parse_step_text,
)
from sand.prompts import system_prompt

API_KEY_ENV = "SAND_API_KEY"
API_BASE_ENV = "SAND_API_BASE"


class RemoteChatPolicy(Policy, CompletionModel):
    """
    One chat completion per call, with bounded retries and exponential backoff.

    The SDK's own retry loop is disabled so attempts, backoff and the
    in-flight limit are all governed here.
    """

    def __init__(
        self,
        config: PolicyConfig,
        http_client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.config = config
        base_url = config.endpoint or os.environ.get(API_BASE_ENV) or None
        self.client = openai.OpenAI(
            api_key=os.environ.get(API_KEY_ENV, "") or "unset",
            base_url=base_url,
            timeout=config.timeout,
            max_retries=0,
            http_client=http_client,
        )
        self._sleep = sleep
        self._in_flight = threading.BoundedSemaphore(config.max_in_flight)
        self._system_prompt = system_prompt(config.env_prompt)

    @classmethod
    def from_config(cls, config: PolicyConfig) -> "RemoteChatPolicy":
        return cls(config)

    def _create(self, messages: list[dict[str, str]], temperature: float) -> str:
        kwargs = {}
        if self.config.max_tokens is not None:
            kwargs["max_tokens"] = self.config.max_tokens
        with self._in_flight:
            response = self.client.chat.completions.create(
                model=self.config.model,
                messages=messages,
                temperature=temperature,
                **kwargs,
            )
        choice = response.choices[0]
        if choice.finish_reason == "length":
            raise _Truncated("completion hit max_tokens")
        content = choice.message.content
        if not content:
            raise _Truncated("completion came back empty")
        return content

    def chat(self, messages: list[dict[str, str]], temperature: float) -> str:
        """Issue one completion, retrying transient failures."""
        delay = self.config.backoff
        last_error: Exception | None = None
        for attempt in range(1, self.config.retries + 1):
            try:
                return self._create(messages, temperature)
            except (openai.APIError, _Truncated) as exc:
                last_error = exc
                if isinstance(exc, openai.APIStatusError) and 400 <= exc.status_code < 500 and exc.status_code != 429:
                    break
                if attempt < self.config.retries:
                    log.warning(
                        f"completion attempt {attempt}/{self.config.retries} failed "
                        f"({type(exc).__name__}); retrying in {delay:.2f}s"
                    )
                    self._sleep(delay)
                    delay *= 2.0
        raise PolicyUnavailableError(
            f"model '{self.config.model}' unavailable after {self.config.retries} attempts: {last_error}"
        )

    def sample_step(self, history: History, temperature: float, seed: int) -> StepSample:
        messages = history_to_messages(history, self._system_prompt)
        text = self.chat(messages, temperature)
        try:
            return parse_step_text(text)
        except EmptyActionError:
            pass
        # One more try for a turn that carried no action.
        try:
            return parse_step_text(self.chat(messages, temperature))
        except EmptyActionError as exc:
            raise PolicyUnavailableError(
                f"model '{self.config.model}' returned no action twice in a row"
            ) from exc

    def complete_text(self, prompt: str, temperature: float) -> str:
        return self.chat([{"role": "user", "content": prompt}], temperature)


class _Truncated(Exception):
    pass
