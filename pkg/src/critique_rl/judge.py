"""Client for external LLM judges.

Requests use the chat-completions wire shape (``model``, ``messages``,
``temperature``). Responses are cached on disk, one JSON file per SHA-256
digest of ``(template_id, rendered prompt, model)``, so reruns and offline
replays never touch the network.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import httpx

from .prompts import RenderError, render_prompt
from .similarity import SimilarityScores

DIGEST_ALGORITHM = "sha256"
SCORE_TEMPLATES = ("similarity_core", "similarity_all", "meta_judge")
CHOICE_TEMPLATES = ("grm",)
TEXT_TEMPLATES = ("edit",)

_SCORES_BLOCK = re.compile(r"<scores>(.*?)</scores>", re.S)
_CHOICE_BLOCK = re.compile(r"<choice>(.*?)</choice>", re.S)
_CRITICS_BLOCK = re.compile(r"<critics>(.*?)</critics>", re.S)


class JudgeError(Exception):
    pass


class JudgeConfigError(JudgeError):
    pass


class TransportError(JudgeError):
    pass


class CacheMiss(JudgeError):
    """Raised in replay mode when a prompt has no recorded response."""


class ParseError(JudgeError):
    def __init__(self, message, raw=""):
        super().__init__(message)
        self.raw = raw


class FormatInvalid(ParseError):
    """The output cannot be read as a verdict; scored as an invalid format."""


# --- parsing -----------------------------------------------------------------

def _tag_value(block, tag, raw):
    m = re.search(rf"<{tag}>(.*?)</{tag}>", block, re.S)
    if m is None:
        raise ParseError(f"missing <{tag}> in scores block", raw)
    text = m.group(1).strip()
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"<{tag}> is not a number: {text!r}", raw) from None
    if math.isnan(value) or not 0.0 <= value <= 1.0:
        raise ParseError(f"<{tag}> out of [0, 1]: {text}", raw)
    return value


def parse_scores(raw: str) -> SimilarityScores:
    """Read f1 / precision / recall from the last ``<scores>`` block."""
    blocks = _SCORES_BLOCK.findall(raw or "")
    if not blocks:
        raise ParseError("no <scores> block", raw)
    block = blocks[-1]
    return SimilarityScores(
        f1=_tag_value(block, "critique_f1", raw),
        precision=_tag_value(block, "critique_precision", raw),
        recall=_tag_value(block, "critique_recall", raw),
    )


def parse_choice(raw: str) -> str:
    """``"A"`` or ``"B"`` from the last ``<choice>`` block; anything ambiguous is invalid."""
    blocks = _CHOICE_BLOCK.findall(raw or "")
    if not blocks:
        raise FormatInvalid("no <choice> block", raw)
    block = blocks[-1]
    has_a, has_b = "[[A]]" in block, "[[B]]" in block
    if has_a == has_b:
        raise FormatInvalid("choice block must name exactly one of [[A]] / [[B]]", raw)
    return "A" if has_a else "B"


def parse_critics(raw: str) -> str:
    """Reasoning text of the last ``<critics>`` block, or an empty string."""
    blocks = _CRITICS_BLOCK.findall(raw or "")
    return blocks[-1].strip() if blocks else ""


def parse_response(template_id: str, raw: str):
    if template_id in SCORE_TEMPLATES:
        return parse_scores(raw)
    if template_id in CHOICE_TEMPLATES:
        return parse_choice(raw)
    if template_id in TEXT_TEMPLATES:
        return raw
    raise RenderError(f"unknown template {template_id!r}")


@dataclass(frozen=True)
class JudgeResponse:
    template_id: str
    prompt: str
    raw: str
    parsed: object
    cached: bool = False


# --- rate limiting and cache ---------------------------------------------------

class TokenBucket:
    """Blocking token bucket: ``rate`` tokens per second, at most ``capacity`` stored."""

    def __init__(self, rate: float, capacity: float = 1.0, clock=time.monotonic, sleep=time.sleep):
        if rate <= 0 or capacity <= 0:
            raise ValueError("rate and capacity must be > 0")
        self.rate = rate
        self.capacity = capacity
        self._tokens = capacity
        self._clock = clock
        self._sleep = sleep
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self):
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self.capacity, self._tokens + (now - self._last) * self.rate)
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            self._sleep(wait)


def cache_key(template_id: str, prompt: str, model: str) -> str:
    payload = json.dumps([template_id, prompt, model], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class DiskCache:
    """One ``<digest>.json`` file per entry; reads are lock-free, writes serialised and atomic."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    def path(self, digest: str) -> Path:
        return self.directory / f"{digest}.json"

    def get(self, digest: str):
        try:
            with open(self.path(digest), encoding="utf-8") as fh:
                return json.load(fh)
        except FileNotFoundError:
            return None

    def put(self, digest: str, entry: dict) -> None:
        target = self.path(digest)
        with self._write_lock:
            tmp = target.with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(entry, fh, ensure_ascii=False, indent=1, sort_keys=True)
                fh.write("\n")
            os.replace(tmp, target)


# --- client --------------------------------------------------------------------

class JudgeClient:
    """Thread-safe judge handle.

    ``transport`` is passed to ``httpx.Client`` (tests inject a
    ``httpx.MockTransport``). ``offline=True`` serves only from the cache and
    raises ``CacheMiss`` otherwise. Retries cover connection errors, 429 and
    5xx; ``max_retries=2`` means at most three attempts.
    """

    def __init__(self, endpoint=None, model=None, api_key=None, cache_dir=None, *,
                 temperature: float = 0.0, max_retries: int = 2, backoff: float = 0.5,
                 max_concurrency: int = 4, rate_per_second: float | None = None, burst: float = 1.0,
                 timeout: float = 60.0, transport=None, offline: bool = False, sleep=time.sleep):
        self.endpoint = endpoint or os.environ.get("JUDGE_ENDPOINT")
        self.model = model or os.environ.get("JUDGE_MODEL", "")
        self.api_key = api_key if api_key is not None else os.environ.get("JUDGE_API_KEY")
        self.offline = offline
        if not self.endpoint and not offline:
            raise JudgeConfigError("no judge endpoint: pass one or set JUDGE_ENDPOINT")
        if max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        self.temperature = temperature
        self.max_retries = max_retries
        self.backoff = backoff
        self.cache = DiskCache(cache_dir) if cache_dir is not None else None
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_concurrency)
        self._bucket = TokenBucket(rate_per_second, burst, sleep=sleep) if rate_per_second else None
        self._http = None
        if not offline:
            headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
            self._http = httpx.Client(transport=transport, timeout=timeout, headers=headers)

    def close(self):
        if self._http is not None:
            self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def request_body(self, prompt: str) -> dict:
        return {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
        }

    def call(self, template_id: str, bindings: dict) -> JudgeResponse:
        prompt = render_prompt(template_id, bindings)
        digest = cache_key(template_id, prompt, self.model)
        entry = self.cache.get(digest) if self.cache else None
        cached = entry is not None
        if entry is None:
            if self.offline:
                raise CacheMiss(f"no cached response for digest {digest}")
            body = self.request_body(prompt)
            raw = self._post(body)
            entry = {"digest": digest, "digest_algorithm": DIGEST_ALGORITHM, "template_id": template_id,
                     "model": self.model, "request": body, "raw": raw}
            if self.cache:
                # cached before parsing so a malformed answer is never paid for twice
                self.cache.put(digest, entry)
        raw = entry["raw"]
        return JudgeResponse(template_id, prompt, raw, parse_response(template_id, raw), cached)

    def _post(self, body: dict) -> str:
        last = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                self._sleep(self.backoff * 2 ** (attempt - 1))
            if self._bucket:
                self._bucket.acquire()
            with self._slots:
                try:
                    resp = self._http.post(self.endpoint, json=body)
                except httpx.HTTPError as exc:
                    last = f"{type(exc).__name__}: {exc}"
                    continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise TransportError(f"malformed completion payload: {exc}") from None
        raise TransportError(f"gave up after {self.max_retries + 1} attempts ({last})")


def remote_similarity(client: JudgeClient, ref_text: str, gen_text: str, mode: str = "core") -> SimilarityScores:
    """Similarity scored by an LLM judge from the critique texts."""
    template_id = "similarity_core" if mode == "core" else "similarity_all"
    return client.call(template_id, {"critiques": gen_text, "reference_critiques": ref_text}).parsed
