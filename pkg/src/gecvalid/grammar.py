"""Grammar-checker clients: an HTTP client for LT-compatible services and a
deterministic offline rule set for tests and air-gapped runs.

The remote protocol is ``POST <base>/v2/check`` with form fields ``text`` and
``language``; the error count is the length of the response's ``matches``
array.  Transport failures and 5xx responses are retried with exponential
backoff; anything else fails fast.  Scores never see transport details, only
counts.
"""

from __future__ import annotations

import re
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass

import requests

ENDPOINT_ENV_VAR = "GECVALID_GRAMMAR_URL"
OFFLINE_RULES_VERSION = "1"

_VOWELS = frozenset("aeiouAEIOU")
_TOKEN_RE = re.compile(r"\S+")


class CheckerError(Exception):
    """Base class for grammar-checking failures."""


class TransportError(CheckerError):
    """Connection/timeout trouble, or retryable failures after the retry budget."""


class ProtocolError(CheckerError):
    def __init__(self, status: int, body: str = ""):
        super().__init__(f"checker returned HTTP {status}")
        self.status = status
        self.body = body


class DecodeError(CheckerError):
    """Response body was not the expected JSON shape."""


@dataclass(frozen=True)
class RuleHit:
    rule_id: str
    offset: int
    length: int


@dataclass(frozen=True)
class CheckResult:
    error_count: int
    matches: tuple[RuleHit, ...] = ()

    def __post_init__(self):
        if self.error_count < 0:
            raise ValueError("error_count must be >= 0")
        if self.matches and len(self.matches) != self.error_count:
            raise ValueError("error_count must equal the number of matches")


@dataclass(frozen=True)
class CheckerEndpoint:
    base_url: str
    timeout_ms: int = 10_000
    max_retries: int = 3
    language: str = "en-US"
    max_rps: float = 10.0
    backoff_base_s: float = 0.25

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_rps <= 0:
            raise ValueError("max_rps must be > 0")


def check_remote(text: str, endpoint: CheckerEndpoint, session: requests.Session | None = None) -> CheckResult:
    """One checked sentence via the remote service; retries transient failures."""
    sess = session or requests
    url = endpoint.base_url.rstrip("/") + "/v2/check"
    timeout = endpoint.timeout_ms / 1000.0
    last_failure: Exception | None = None
    for attempt in range(endpoint.max_retries + 1):
        if attempt:
            time.sleep(endpoint.backoff_base_s * 2 ** (attempt - 1))
        try:
            response = sess.post(url, data={"text": text, "language": endpoint.language}, timeout=timeout)
        except (requests.ConnectionError, requests.Timeout) as exc:
            last_failure = exc
            continue
        if 500 <= response.status_code < 600:
            last_failure = ProtocolError(response.status_code)
            continue
        if not 200 <= response.status_code < 300:
            raise ProtocolError(response.status_code, response.text[:500])
        try:
            payload = response.json()
            matches = payload["matches"]
            hits = tuple(
                RuleHit(
                    rule_id=str(m.get("rule", {}).get("id", "")),
                    offset=int(m.get("offset", 0)),
                    length=int(m.get("length", 0)),
                )
                for m in matches
            )
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            raise DecodeError(f"malformed checker response: {exc}") from exc
        return CheckResult(len(hits), hits)
    raise TransportError(f"checker unreachable after {endpoint.max_retries + 1} attempts: {last_failure}")


def check_offline(text: str) -> CheckResult:
    """Deterministic bundled rule set (version 1).

    Rules: consecutive duplicate token; sentence-initial lowercase letter;
    "a" before a vowel-initial token; "an" before a consonant-initial token.
    """
    hits: list[RuleHit] = []
    tokens = list(_TOKEN_RE.finditer(text))
    if tokens:
        first = tokens[0].group()
        if first[0].isalpha() and first[0].islower():
            hits.append(RuleHit("lowercase-start", tokens[0].start(), len(first)))
    for cur, nxt in zip(tokens, tokens[1:]):
        a, b = cur.group(), nxt.group()
        if a == b:
            hits.append(RuleHit("repeated-token", cur.start(), nxt.end() - cur.start()))
        if a.lower() == "a" and b[0] in _VOWELS:
            hits.append(RuleHit("a-before-vowel", cur.start(), nxt.end() - cur.start()))
        if a.lower() == "an" and b[0].isalpha() and b[0] not in _VOWELS:
            hits.append(RuleHit("an-before-consonant", cur.start(), nxt.end() - cur.start()))
    hits.sort(key=lambda h: (h.offset, h.rule_id))
    return CheckResult(len(hits), tuple(hits))


class OfflineChecker:
    """Pure checker wrapping the bundled rules; safe to share anywhere."""

    version = OFFLINE_RULES_VERSION

    def check(self, text: str) -> CheckResult:
        return check_offline(text)

    def describe(self) -> dict:
        return {"mode": "offline", "rules_version": self.version}


class _RateLimiter:
    def __init__(self, max_rps: float):
        self._interval = 1.0 / max_rps
        self._lock = threading.Lock()
        self._next_allowed = 0.0

    def wait(self) -> None:
        with self._lock:
            now = time.monotonic()
            delay = self._next_allowed - now
            self._next_allowed = max(now, self._next_allowed) + self._interval
        if delay > 0:
            time.sleep(delay)


class RemoteChecker:
    """Rate-limited, caching client for an LT-compatible checker.

    The cache is an exact-match LRU keyed by sentence text; lattice nodes
    recur across chains, so repeated sentences cost one request.
    """

    def __init__(self, endpoint: CheckerEndpoint, cache_size: int = 65_536):
        self.endpoint = endpoint
        self._session = requests.Session()
        self._limiter = _RateLimiter(endpoint.max_rps)
        self._cache: OrderedDict[str, CheckResult] = OrderedDict()
        self._cache_size = cache_size
        self._cache_lock = threading.Lock()

    def check(self, text: str) -> CheckResult:
        with self._cache_lock:
            if text in self._cache:
                self._cache.move_to_end(text)
                return self._cache[text]
        self._limiter.wait()
        result = check_remote(text, self.endpoint, self._session)
        with self._cache_lock:
            self._cache[text] = result
            if len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        return result

    def describe(self) -> dict:
        return {
            "mode": "remote",
            "base_url": self.endpoint.base_url,
            "language": self.endpoint.language,
            "timeout_ms": self.endpoint.timeout_ms,
            "max_retries": self.endpoint.max_retries,
            "max_rps": self.endpoint.max_rps,
        }


def make_checker(endpoint_url: str | None, offline: bool, **endpoint_kwargs):
    if offline or not endpoint_url:
        return OfflineChecker()
    return RemoteChecker(CheckerEndpoint(endpoint_url, **endpoint_kwargs))
