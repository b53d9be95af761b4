"""Uniform access to chat completion, embeddings, and fine-tune jobs.

Two providers share one wire contract: an HTTP provider speaking the usual
chat-completions / embeddings / fine-tuning endpoints, and a deterministic
script-driven mock so every pipeline stage can run offline and reproducibly.
The gateway layers retry with exponential backoff, a disk cache for
embeddings, bounded concurrency, and line-delimited audit logging on top.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path


class GatewayError(Exception):
    pass


class AuthError(GatewayError):
    """Credential rejected; never retried."""


class TransientProviderError(GatewayError):
    """Rate limits, 5xx, network failures; retried with backoff."""


class ProviderResponseError(GatewayError):
    """Provider returned a payload we cannot interpret."""


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[tuple[str, str], ...]
    model: str
    temperature: float = 0.0
    max_output_tokens: int = 2048

    def __post_init__(self):
        roles = [r for r, _ in self.messages]
        if any(r not in ("system", "user", "assistant") for r in roles):
            raise ValueError(f"unknown role in messages: {roles}")
        if "system" in roles[1:]:
            raise ValueError("system message is only allowed first")
        if "user" not in roles:
            raise ValueError("at least one user message is required")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")

    def last_user_content(self) -> str:
        for role, content in reversed(self.messages):
            if role == "user":
                return content
        raise ValueError("no user message")


def chat_request(
    system: str | None,
    user: str,
    model: str,
    temperature: float = 0.0,
    max_output_tokens: int = 2048,
) -> ChatRequest:
    messages: list[tuple[str, str]] = []
    if system:
        messages.append(("system", system))
    messages.append(("user", user))
    return ChatRequest(tuple(messages), model, temperature, max_output_tokens)


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    model: str

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding contains non-finite values")


@dataclass(frozen=True)
class Hyperparams:
    epochs: int = 3
    batch_size: int = 1
    lr_multiplier: float = 1.0

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0 or self.lr_multiplier <= 0:
            raise ValueError("hyperparameters must be positive")


@dataclass
class FinetuneJob:
    id: str
    base_model: str
    hyperparams: Hyperparams
    status: str = "queued"
    result_model: str | None = None

    def __post_init__(self):
        if self.status not in ("queued", "running", "succeeded", "failed"):
            raise ValueError(f"unknown job status {self.status!r}")
        if (self.result_model is not None) != (self.status == "succeeded"):
            raise ValueError("result_model present iff status is succeeded")


# --- mock provider ----------------------------------------------------------


@dataclass
class MockRule:
    """One scripted reply. Patterns match against the last user message."""

    reply: str
    suffix: str | None = None
    contains: str | None = None
    regex: str | None = None

    def matches(self, prompt: str) -> bool:
        if self.suffix is not None and prompt.endswith(self.suffix):
            return True
        if self.contains is not None and self.contains in prompt:
            return True
        if self.regex is not None and re.search(self.regex, prompt, re.DOTALL):
            return True
        return False


class MockProvider:
    """Deterministic provider: canned replies, hash-derived embeddings,
    and a fine-tune state machine that succeeds after a fixed poll count."""

    def __init__(
        self,
        rules: list[MockRule] | None = None,
        default_reply: str = "None",
        fail_times: int = 0,
        embed_dim: int = 16,
        embed_overrides: dict[str, list[float]] | None = None,
        poll_transitions: int = 3,
    ):
        self.rules = list(rules or [])
        self.default_reply = default_reply
        self._fail_remaining = fail_times
        self.embed_dim = embed_dim
        self.embed_overrides = dict(embed_overrides or {})
        self.poll_transitions = poll_transitions
        self.chat_calls = 0
        self.embed_calls = 0
        self._jobs: dict[str, tuple[FinetuneJob, int]] = {}
        self._lock = threading.Lock()

    def _maybe_fail(self):
        with self._lock:
            if self._fail_remaining > 0:
                self._fail_remaining -= 1
                raise TransientProviderError("scripted transient failure")

    def chat(self, request: ChatRequest) -> str:
        with self._lock:
            self.chat_calls += 1
        self._maybe_fail()
        prompt = request.last_user_content()
        for rule in self.rules:
            if rule.matches(prompt):
                return rule.reply
        return self.default_reply

    def embed(self, texts: list[str], model: str) -> list[list[float]]:
        with self._lock:
            self.embed_calls += 1
        self._maybe_fail()
        return [self._vector(t) for t in texts]

    def _vector(self, text: str) -> list[float]:
        if text in self.embed_overrides:
            return list(self.embed_overrides[text])
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        raw = []
        for i in range(self.embed_dim):
            byte = digest[i % len(digest)] + 7 * i
            raw.append(((byte % 255) / 127.0) - 1.0)
        return raw

    def create_finetune_job(self, training_file: str, base_model: str, hp: Hyperparams) -> FinetuneJob:
        path = Path(training_file)
        if not path.exists():
            raise GatewayError(f"training file not found: {training_file}")
        for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                roles = [m["role"] for m in record["messages"]]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise GatewayError(f"bad training file line {lineno}: {exc}") from exc
            if roles != ["system", "user", "assistant"]:
                raise GatewayError(f"bad training file line {lineno}: roles {roles}")
        with self._lock:
            job_id = f"ftjob-mock-{len(self._jobs) + 1:04d}"
            job = FinetuneJob(id=job_id, base_model=base_model, hyperparams=hp)
            self._jobs[job_id] = (job, 0)
        return job

    def poll_job(self, job_id: str) -> FinetuneJob:
        with self._lock:
            if job_id not in self._jobs:
                raise GatewayError(f"unknown job id {job_id!r}")
            job, polls = self._jobs[job_id]
            polls += 1
            if polls >= self.poll_transitions:
                job = FinetuneJob(
                    id=job.id,
                    base_model=job.base_model,
                    hyperparams=job.hyperparams,
                    status="succeeded",
                    result_model=job.base_model + ":ft-mock",
                )
            elif polls >= 1:
                job = FinetuneJob(
                    id=job.id, base_model=job.base_model, hyperparams=job.hyperparams, status="running"
                )
            self._jobs[job_id] = (job, polls)
        return job


# --- HTTP provider ----------------------------------------------------------


class HttpProvider:
    """Chat-completions / embeddings / fine-tuning over HTTP.

    The credential is read from an environment variable so it never lands in
    config files or run records.
    """

    def __init__(
        self,
        base_url: str,
        credential_env: str = "ONTOFORGE_API_KEY",
        timeout: float = 60.0,
        transport=None,
    ):
        import httpx

        self.base_url = base_url.rstrip("/")
        key = os.environ.get(credential_env, "")
        if not key:
            raise AuthError(f"credential environment variable {credential_env} is not set")
        self._client = httpx.Client(
            timeout=timeout,
            headers={"Authorization": f"Bearer {key}"},
            transport=transport,
        )

    def _post(self, route: str, payload: dict) -> dict:
        import httpx

        try:
            response = self._client.post(self.base_url + route, json=payload)
        except httpx.HTTPError as exc:
            raise TransientProviderError(f"network failure: {exc}") from exc
        return self._handle(response)

    def _get(self, route: str) -> dict:
        import httpx

        try:
            response = self._client.get(self.base_url + route)
        except httpx.HTTPError as exc:
            raise TransientProviderError(f"network failure: {exc}") from exc
        return self._handle(response)

    @staticmethod
    def _handle(response) -> dict:
        if response.status_code in (401, 403):
            raise AuthError(f"authentication failed ({response.status_code})")
        if response.status_code == 429 or response.status_code >= 500:
            raise TransientProviderError(f"provider status {response.status_code}")
        if response.status_code >= 400:
            raise GatewayError(f"provider rejected request ({response.status_code}): {response.text}")
        try:
            return response.json()
        except ValueError as exc:
            raise ProviderResponseError("response body is not JSON") from exc

    def chat(self, request: ChatRequest) -> str:
        payload = {
            "model": request.model,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        data = self._post("/chat/completions", payload)
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderResponseError(f"malformed chat response: {data!r}") from exc
        if not isinstance(content, str):
            raise ProviderResponseError("chat content is not a string")
        return content

    def embed(self, texts: list[str], model: str) -> list[list[float]]:
        data = self._post("/embeddings", {"model": model, "input": texts})
        try:
            rows = sorted(data["data"], key=lambda row: row["index"])
            vectors = [list(map(float, row["embedding"])) for row in rows]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderResponseError(f"malformed embeddings response: {data!r}") from exc
        if len(vectors) != len(texts):
            raise ProviderResponseError("embedding count does not match input count")
        return vectors

    def create_finetune_job(self, training_file: str, base_model: str, hp: Hyperparams) -> FinetuneJob:
        import httpx

        with open(training_file, "rb") as handle:
            try:
                response = self._client.post(
                    self.base_url + "/files",
                    files={"file": (Path(training_file).name, handle)},
                    data={"purpose": "fine-tune"},
                )
            except httpx.HTTPError as exc:
                raise TransientProviderError(f"network failure: {exc}") from exc
        file_id = self._handle(response).get("id")
        data = self._post(
            "/fine_tuning/jobs",
            {
                "training_file": file_id,
                "model": base_model,
                "hyperparameters": {
                    "n_epochs": hp.epochs,
                    "batch_size": hp.batch_size,
                    "learning_rate_multiplier": hp.lr_multiplier,
                },
            },
        )
        return self._job_from(data, hp)

    def poll_job(self, job_id: str) -> FinetuneJob:
        data = self._get(f"/fine_tuning/jobs/{job_id}")
        hp_raw = data.get("hyperparameters", {})
        hp = Hyperparams(
            epochs=int(hp_raw.get("n_epochs", 3)),
            batch_size=int(hp_raw.get("batch_size", 1)),
            lr_multiplier=float(hp_raw.get("learning_rate_multiplier", 1.0)),
        )
        return self._job_from(data, hp)

    @staticmethod
    def _job_from(data: dict, hp: Hyperparams) -> FinetuneJob:
        status_map = {
            "validating_files": "queued",
            "queued": "queued",
            "running": "running",
            "succeeded": "succeeded",
            "failed": "failed",
            "cancelled": "failed",
        }
        try:
            status = status_map.get(data["status"], "running")
            return FinetuneJob(
                id=data["id"],
                base_model=data["model"],
                hyperparams=hp,
                status=status,
                result_model=data.get("fine_tuned_model") if status == "succeeded" else None,
            )
        except KeyError as exc:
            raise ProviderResponseError(f"malformed job response: {data!r}") from exc


# --- gateway ----------------------------------------------------------------


def _request_hash(request: ChatRequest) -> str:
    canonical = json.dumps(
        {
            "messages": list(request.messages),
            "model": request.model,
            "temperature": request.temperature,
            "max_output_tokens": request.max_output_tokens,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _sanitize(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", name)


class LlmGateway:
    """Retry, caching, concurrency bounds, and audit logging over a provider.

    Thread-safe: callers may share one gateway. In-flight provider calls are
    bounded by a semaphore; cache writes and audit appends are serialized.
    """

    def __init__(
        self,
        provider,
        chat_model: str = "gpt-4.1-mini-2025-04-14",
        embed_model: str = "mock-embed",
        cache_dir: str | Path | None = None,
        audit_path: str | Path | None = None,
        max_attempts: int = 5,
        backoff_base: float = 1.0,
        max_concurrency: int = 4,
        sleep=time.sleep,
        clock=None,
    ):
        self.provider = provider
        self.chat_model = chat_model
        self.embed_model = embed_model
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.audit_path = Path(audit_path) if audit_path else None
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._clock = clock or (lambda: time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()))
        self._slots = threading.Semaphore(max_concurrency)
        self._io_lock = threading.Lock()

    # audit ------------------------------------------------------------

    def _audit(self, record: dict) -> None:
        if self.audit_path is None:
            return
        line = json.dumps({"at": self._clock(), **record}, ensure_ascii=False)
        with self._io_lock:
            self.audit_path.parent.mkdir(parents=True, exist_ok=True)
            with self.audit_path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")

    def _with_retry(self, kind: str, request_hash: str, call):
        last_error: GatewayError | None = None
        for attempt in range(1, self.max_attempts + 1):
            started = time.monotonic()
            try:
                result = call()
            except AuthError:
                self._audit({"kind": kind, "hash": request_hash, "attempt": attempt, "outcome": "auth-error"})
                raise
            except TransientProviderError as exc:
                last_error = exc
                self._audit(
                    {
                        "kind": kind,
                        "hash": request_hash,
                        "attempt": attempt,
                        "outcome": "retry" if attempt < self.max_attempts else "gave-up",
                        "error": str(exc),
                    }
                )
                if attempt < self.max_attempts:
                    self._sleep(self.backoff_base * (2 ** (attempt - 1)))
                continue
            except GatewayError as exc:
                self._audit({"kind": kind, "hash": request_hash, "attempt": attempt, "outcome": "error", "error": str(exc)})
                raise
            latency_ms = int((time.monotonic() - started) * 1000)
            self._audit(
                {"kind": kind, "hash": request_hash, "attempt": attempt, "outcome": "ok", "latency_ms": latency_ms}
            )
            return result
        raise last_error  # exhausted attempts

    # chat ---------------------------------------------------------------

    def chat(self, request: ChatRequest) -> str:
        request_hash = _request_hash(request)
        with self._slots:
            return self._with_retry("chat", request_hash, lambda: self.provider.chat(request))

    # embeddings -----------------------------------------------------------

    def _cache_file(self, model: str, text: str) -> Path | None:
        if self.cache_dir is None:
            return None
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return self.cache_dir / _sanitize(model) / f"{digest}.json"

    def _check_dim(self, model: str, dim: int) -> None:
        if self.cache_dir is None:
            return
        marker = self.cache_dir / _sanitize(model) / "_dim"
        with self._io_lock:
            if marker.exists():
                existing = int(marker.read_text().strip())
                if existing != dim:
                    raise GatewayError(
                        f"embedding dimension {dim} does not match cached dimension "
                        f"{existing} for model {model!r}"
                    )
            else:
                marker.parent.mkdir(parents=True, exist_ok=True)
                marker.write_text(str(dim))

    def embed(self, texts: list[str], model: str | None = None) -> list[EmbeddingVector]:
        if not texts:
            raise ValueError("embed requires a non-empty list of texts")
        model = model or self.embed_model
        results: list[EmbeddingVector | None] = [None] * len(texts)
        misses: list[int] = []
        for i, text in enumerate(texts):
            cached = self._cache_read(model, text)
            if cached is not None:
                results[i] = cached
                self._audit({"kind": "embed", "hash": self._cache_file(model, text).stem[:16], "outcome": "cache-hit"})
            else:
                misses.append(i)
        if misses:
            batch = [texts[i] for i in misses]
            batch_hash = hashlib.sha256("\x00".join(batch).encode("utf-8")).hexdigest()[:16]
            with self._slots:
                vectors = self._with_retry(
                    "embed", batch_hash, lambda: self.provider.embed(batch, model)
                )
            if len(vectors) != len(batch):
                raise ProviderResponseError("provider returned wrong number of embeddings")
            dims = {len(v) for v in vectors}
            if len(dims) != 1:
                raise ProviderResponseError(f"inconsistent embedding dimensions: {dims}")
            self._check_dim(model, dims.pop())
            for i, values in zip(misses, vectors):
                results[i] = EmbeddingVector(tuple(float(v) for v in values), model)
                self._cache_write(model, texts[i], values)
        return [v for v in results if v is not None]

    def _cache_read(self, model: str, text: str) -> EmbeddingVector | None:
        cache_file = self._cache_file(model, text)
        if cache_file is None:
            return None
        try:
            values = json.loads(cache_file.read_text(encoding="utf-8"))["values"]
        except (OSError, json.JSONDecodeError, KeyError):
            return None  # missing or mid-write: treat as a miss
        return EmbeddingVector(tuple(values), model)

    def _cache_write(self, model: str, text: str, values) -> None:
        cache_file = self._cache_file(model, text)
        if cache_file is None:
            return
        payload = json.dumps({"model": model, "values": list(values)})
        with self._io_lock:
            cache_file.parent.mkdir(parents=True, exist_ok=True)
            # atomic replace: concurrent readers never observe a partial file
            temp = cache_file.with_suffix(f".{os.getpid()}.{threading.get_ident()}.tmp")
            temp.write_text(payload, encoding="utf-8")
            os.replace(temp, cache_file)

    # fine-tuning ----------------------------------------------------------

    def create_finetune_job(self, training_file: str | Path, base_model: str, hp: Hyperparams) -> FinetuneJob:
        training_file = str(training_file)
        job = self._with_retry(
            "finetune-create",
            _sanitize(Path(training_file).name)[:16],
            lambda: self.provider.create_finetune_job(training_file, base_model, hp),
        )
        return job

    def poll_job(self, job_id: str) -> FinetuneJob:
        return self._with_retry("finetune-poll", _sanitize(job_id)[:16], lambda: self.provider.poll_job(job_id))
