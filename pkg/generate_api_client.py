"""
Local inference server client

A client for a local model server's non-streaming generate endpoint
(Ollama-compatible `POST /api/generate`).
"""

import logging
import time
from dataclasses import dataclass
from typing import Any, Dict, Optional

import requests

from config import InferenceConfig
from errors import ConnectionFailed, HttpError, MalformedResponse

logger = logging.getLogger(__name__)

DEFAULT_BASE_URL = "http://localhost:11434"
DEFAULT_GENERATE_PATH = "/api/generate"


@dataclass(frozen=True)
class Generation:
    """
    One model response.

    Args:
        text: Response text
        eval_count: Generated token count, when the server reports it
        eval_duration_ns: Generation time in nanoseconds, when reported
    """
    text: str
    eval_count: Optional[int] = None
    eval_duration_ns: Optional[int] = None


class GenerateAPIClient:
    """
    Client for a local model server.

    Every request is retried up to `retries` extra times with exponential
    backoff (`backoff_s`, 2x, 4x, ...) on connection failures, HTTP errors
    and malformed responses.
    """

    def __init__(
        self,
        base_url: str = DEFAULT_BASE_URL,
        path: str = DEFAULT_GENERATE_PATH,
        timeout: float = 120,
        retries: int = 3,
        backoff_s: float = 0.5,
        send_beam_size: bool = False,
    ):
        """
        Initialize the client.

        Args:
            base_url: Server root, e.g. http://localhost:11434. A URL that
                already ends in `path` is accepted as well.
            path: Generate endpoint path
            timeout: Per-request timeout in seconds
            retries: Extra attempts after the first failure
            backoff_s: First backoff delay; doubles on each retry
            send_beam_size: Pass beam_size through in the request options.
                Common generate APIs ignore or reject it, so it is off by default.
        """
        self.path = path if path.startswith("/") else f"/{path}"
        base_url = base_url.rstrip("/")
        if base_url.endswith(self.path):
            base_url = base_url[: -len(self.path)]
        self.base_url = base_url
        self.timeout = timeout
        self.retries = retries
        self.backoff_s = backoff_s
        self.send_beam_size = send_beam_size
        self.session = requests.Session()
        self.session.headers.update({"Content-Type": "application/json"})
        logger.info(f"GenerateAPIClient ready at {self.endpoint} (retries={retries})")

    @property
    def endpoint(self) -> str:
        return f"{self.base_url}{self.path}"

    def build_payload(self, config: InferenceConfig, prompt: str) -> Dict[str, Any]:
        options: Dict[str, Any] = {
            "temperature": config.temperature,
            "top_p": config.top_p,
            "top_k": config.top_k,
            "num_predict": config.max_tokens,
        }
        if self.send_beam_size:
            options["beam_size"] = config.beam_size
        return {
            "model": config.model_name,
            "prompt": prompt,
            "stream": False,
            "options": options,
        }

    def _make_request(self, payload: Dict[str, Any]) -> Generation:
        """
        Send one request.

        Raises:
            ConnectionFailed: If the server cannot be reached
            HttpError: On a non-2xx status
            MalformedResponse: If the body is not the documented JSON shape
        """
        try:
            response = self.session.post(self.endpoint, json=payload, timeout=self.timeout)
        except (requests.exceptions.ConnectionError, requests.exceptions.Timeout) as e:
            raise ConnectionFailed(f"Could not reach {self.endpoint}: {e}") from e

        if not response.ok:
            raise HttpError(response.status_code, response.text)

        try:
            data = response.json()
        except ValueError as e:
            raise MalformedResponse(f"Non-JSON response (status {response.status_code}): {response.text[:200]!r}") from e

        if not isinstance(data, dict) or not isinstance(data.get("response"), str):
            raise MalformedResponse(f"Response JSON has no 'response' string: {str(data)[:200]}")

        eval_count = data.get("eval_count")
        eval_duration = data.get("eval_duration")
        return Generation(
            text=data["response"],
            eval_count=int(eval_count) if isinstance(eval_count, (int, float)) else None,
            eval_duration_ns=int(eval_duration) if isinstance(eval_duration, (int, float)) else None,
        )

    def generate(self, config: InferenceConfig, prompt: str) -> Generation:
        """
        Generate a response for one prompt.

        Args:
            config: Model name and sampling options
            prompt: Prompt text

        Returns:
            Generation with text and, when present, token count and duration

        Example:
            >>> client = GenerateAPIClient("http://localhost:11434")
            >>> client.generate(InferenceConfig(model_name="phi3:mini"), "Shares rose.").text
        """
        payload = self.build_payload(config, prompt)
        attempts = self.retries + 1
        attempt = 1
        while True:
            try:
                generation = self._make_request(payload)
                logger.debug(f"Generated {len(generation.text)} characters from {config.model_name}")
                return generation
            except (ConnectionFailed, HttpError, MalformedResponse) as e:
                if attempt >= attempts:
                    logger.info(f"Giving up on {self.endpoint} after {attempts} attempt(s): {e}")
                    raise
                wait = self.backoff_s * (2 ** (attempt - 1))
                logger.debug(f"Attempt {attempt}/{attempts} failed ({e}); retrying in {wait:.2f}s")
                time.sleep(wait)
                attempt += 1


def http_generate(base_url: str, config: InferenceConfig, prompt: str, **client_options) -> Generation:
    """One-shot helper: build a client for `base_url` and generate once."""
    return GenerateAPIClient(base_url, **client_options).generate(config, prompt)
