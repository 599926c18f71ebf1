"""Completion providers behind one streaming interface.

``complete(cfg, request)`` returns a :class:`CompletionStream`: an iterator of
timestamped :class:`Chunk` objects fed by a single producer thread through a
bounded queue.  The stream applies stop-string and ``max_tokens`` handling
itself, so every provider kind behaves the same way:

* ``remote``   - an HTTP completion endpoint speaking JSON / server-sent events
* ``replay``   - recorded completions keyed by prompt hash, optionally with timings
* ``emulated`` - a local search planner whose plan is streamed line by line
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator

from .artobj import ChainConfig, make_domain, reconstitute
from .dataset import (
    CHARS_PER_TOKEN,
    NO_MACRO_TAG,
    AuditReport,
    TrainingSample,
    make_completion,
    read_jsonl,
    split_prompt,
    write_jsonl,
)
from .solver import SearchBudget, solve_optimal, solve_satisficing

log = logging.getLogger(__name__)

DEFAULT_STOP = "END"
DEFAULT_MAX_TOKENS = 1900


class ProviderError(RuntimeError):
    pass


class AuthError(ProviderError):
    pass


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    model: str = "planner"
    temperature: float = 0.0
    presence_penalty: float = 0.0
    frequency_penalty: float = 0.0
    stop: str | None = DEFAULT_STOP
    max_tokens: int = DEFAULT_MAX_TOKENS
    stream: bool = True

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be within [0, 2]")
        for name in ("presence_penalty", "frequency_penalty"):
            if not -2.0 <= getattr(self, name) <= 2.0:
                raise ValueError(f"{name} must be within [-2, 2]")
        if self.stop is not None and not self.stop:
            raise ValueError("stop must be non-empty when given")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    def to_json(self) -> dict:
        d = {
            "model": self.model,
            "prompt": self.prompt,
            "temperature": self.temperature,
            "presence_penalty": self.presence_penalty,
            "frequency_penalty": self.frequency_penalty,
            "max_tokens": self.max_tokens,
            "stream": self.stream,
        }
        if self.stop is not None:
            d["stop"] = self.stop
        return d


@dataclass(frozen=True)
class Chunk:
    text: str
    t: float  # time.monotonic() at emission


@dataclass(frozen=True)
class ReplayEntry:
    completion: str
    # (seconds since request, number of characters) per recorded chunk
    chunk_timings: tuple[tuple[float, int], ...] = ()


@dataclass
class ProviderConfig:
    kind: str  # "remote" | "replay" | "emulated"
    endpoint: str | None = None
    auth_env: str | None = None
    delay_ms: float = 0.0
    chain: ChainConfig | None = None
    planner: str = "satisficing"
    budget: SearchBudget | None = None
    replay: dict[str, ReplayEntry] = field(default_factory=dict)
    timeout: float = 120.0
    queue_size: int = 64

    def __post_init__(self):
        if self.kind not in ("remote", "replay", "emulated"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.kind == "remote" and not (self.endpoint and self.auth_env):
            raise ValueError("remote providers need an endpoint and an auth environment variable")
        if self.kind == "emulated" and self.chain is None:
            raise ValueError("emulated providers need a chain configuration to plan with")
        if self.planner not in ("satisficing", "optimal"):
            raise ValueError(f"unknown planner {self.planner!r}")


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# the stream


class _Cancelled(Exception):
    pass


_END = object()


class CompletionStream:
    """Single-consumer iterator over the chunks of one completion.

    After iteration ``status`` is one of ``stopped`` (stop string seen),
    ``finished`` (producer ended without it), ``truncated`` (max_tokens hit),
    ``cancelled`` or ``error``; ``text`` holds everything yielded.
    """

    def __init__(self, request: CompletionRequest, producer: Callable, queue_size: int = 64):
        self.request = request
        self.started = time.monotonic()
        self.status: str | None = None
        self.error: str | None = None
        self.text = ""
        self.chunks: list[Chunk] = []
        self._queue: queue.Queue = queue.Queue(maxsize=queue_size)
        self._cancel = threading.Event()
        self._remote_truncated = False
        self._producer = producer
        self._thread = threading.Thread(target=self._run, name="completion-producer", daemon=True)
        self._thread.start()

    # producer side ---------------------------------------------------------

    def _emit(self, text: str) -> None:
        item = (text, time.monotonic())
        while True:
            if self._cancel.is_set():
                raise _Cancelled()
            try:
                self._queue.put(item, timeout=0.05)
                return
            except queue.Full:
                continue

    def _sleep(self, seconds: float) -> None:
        if seconds > 0 and self._cancel.wait(seconds):
            raise _Cancelled()

    def _mark_truncated(self) -> None:
        self._remote_truncated = True

    def _run(self) -> None:
        outcome = _END
        try:
            self._producer(self)
        except _Cancelled:
            pass
        except Exception as exc:  # noqa: BLE001 - forwarded to the consumer
            outcome = exc
        while not self._cancel.is_set():
            try:
                self._queue.put(outcome, timeout=0.05)
                break
            except queue.Full:
                continue

    @property
    def cancelled(self) -> bool:
        return self._cancel.is_set()

    def cancel(self) -> None:
        """Abort the producer; no further chunks are delivered."""
        self._cancel.set()
        if self.status is None:
            self.status = "cancelled"

    def join(self, timeout: float | None = None) -> bool:
        self._thread.join(timeout)
        return not self._thread.is_alive()

    # consumer side ---------------------------------------------------------

    def __iter__(self) -> Iterator[Chunk]:
        stop = self.request.stop
        limit = self.request.max_tokens * CHARS_PER_TOKEN
        pending = ""
        while self.status is None:
            try:
                item = self._queue.get(timeout=0.05)
            except queue.Empty:
                continue
            if item is _END:
                if pending:
                    yield from self._deliver(pending, time.monotonic(), limit)
                if self.status is None:
                    self.status = "truncated" if self._remote_truncated else "finished"
                break
            if isinstance(item, Exception):
                if pending and self.status is None:
                    yield from self._deliver(pending, time.monotonic(), limit)
                if self.status is None:
                    self.status = "error"
                    self.error = f"{type(item).__name__}: {item}"
                break
            text, t = item
            pending += text
            if stop:
                idx = pending.find(stop)
                if idx >= 0:
                    yield from self._deliver(pending[:idx], t, limit)
                    if self.status is None:
                        self.status = "stopped"
                    self._cancel.set()
                    break
                keep = _partial_suffix(pending, stop)
                ready, pending = (pending[:-keep], pending[-keep:]) if keep else (pending, "")
            else:
                ready, pending = pending, ""
            if ready:
                yield from self._deliver(ready, t, limit)

    def _deliver(self, text: str, t: float, limit: int) -> Iterator[Chunk]:
        if self.status is not None or not text:
            return
        room = limit - len(self.text)
        if len(text) > room:
            text = text[:room]
            self.status = "truncated"
            self._cancel.set()
        if text:
            chunk = Chunk(text, t)
            self.text += text
            self.chunks.append(chunk)
            yield chunk

    def read(self) -> str:
        """Consume the whole stream and return the completion text."""
        for _ in self:
            pass
        return self.text


def _partial_suffix(text: str, stop: str) -> int:
    """Length of the longest suffix of ``text`` that is a proper prefix of ``stop``."""
    for k in range(min(len(stop) - 1, len(text)), 0, -1):
        if text.endswith(stop[:k]):
            return k
    return 0


# --------------------------------------------------------------------------
# producers


def _emulated_completion(cfg: ProviderConfig, prompt: str) -> str:
    tag, body = split_prompt(prompt)
    chain = cfg.chain.with_macros(False) if tag == NO_MACRO_TAG else cfg.chain
    problem = reconstitute(body, chain)
    domain = make_domain(chain)
    if cfg.planner == "optimal":
        result = solve_optimal(domain, problem)
    else:
        result = solve_satisficing(domain, problem, cfg.budget)
    if not result.solved:
        raise ProviderError(f"planner failed: {result.outcome}")
    return make_completion(result.plan)


def _emulated_producer(cfg: ProviderConfig, request: CompletionRequest):
    delay = cfg.delay_ms / 1000.0

    def produce(stream: CompletionStream):
        completion = _emulated_completion(cfg, request.prompt)
        lines = completion.splitlines(keepends=True)
        if not request.stream:
            stream._sleep(delay * max(len(lines) - 1, 1))
            stream._emit(completion)
            return
        for line in lines:
            # the terminator follows the last action immediately
            if line != DEFAULT_STOP:
                stream._sleep(delay)
            stream._emit(line)

    return produce


def _replay_producer(cfg: ProviderConfig, request: CompletionRequest):
    def produce(stream: CompletionStream):
        entry = cfg.replay.get(prompt_hash(request.prompt))
        if entry is None:
            raise ProviderError("no recorded completion for this prompt")
        if not entry.chunk_timings:
            stream._emit(entry.completion)
            return
        if not request.stream:
            stream._sleep(entry.chunk_timings[-1][0] - (time.monotonic() - stream.started))
            stream._emit(entry.completion)
            return
        pos = 0
        for offset, n in entry.chunk_timings:
            stream._sleep(offset - (time.monotonic() - stream.started))
            stream._emit(entry.completion[pos:pos + n])
            pos += n
        if pos < len(entry.completion):
            stream._emit(entry.completion[pos:])

    return produce


def _remote_producer(cfg: ProviderConfig, request: CompletionRequest):
    import httpx

    def produce(stream: CompletionStream):
        token = os.environ.get(cfg.auth_env or "")
        if not token:
            raise AuthError(f"environment variable {cfg.auth_env} is not set")
        headers = {"Authorization": f"Bearer {token}", "Content-Type": "application/json"}
        with httpx.Client(timeout=cfg.timeout) as client:
            if not request.stream:
                resp = client.post(cfg.endpoint, json=request.to_json(), headers=headers)
                _raise_for_status(resp)
                choice = resp.json()["choices"][0]
                stream._emit(choice.get("text", ""))
                if choice.get("finish_reason") == "length":
                    stream._mark_truncated()
                return
            with client.stream("POST", cfg.endpoint, json=request.to_json(), headers=headers) as resp:
                if resp.status_code >= 400:
                    resp.read()
                    _raise_for_status(resp)
                for line in resp.iter_lines():
                    if stream.cancelled:
                        raise _Cancelled()
                    if not line.startswith("data:"):
                        continue
                    data = line[5:].strip()
                    if data == "[DONE]":
                        break
                    choice = json.loads(data)["choices"][0]
                    if choice.get("text"):
                        stream._emit(choice["text"])
                    if choice.get("finish_reason") == "length":
                        stream._mark_truncated()

    return produce


def _raise_for_status(resp) -> None:
    if resp.status_code in (401, 403):
        raise AuthError(f"authentication rejected ({resp.status_code})")
    if resp.status_code >= 400:
        raise ProviderError(f"remote error {resp.status_code}: {resp.text[:200]}")


_PRODUCERS = {"emulated": _emulated_producer, "replay": _replay_producer, "remote": _remote_producer}


def complete(cfg: ProviderConfig, request: CompletionRequest) -> CompletionStream:
    """Start a completion; chunks can be read while it is still being produced."""
    return CompletionStream(request, _PRODUCERS[cfg.kind](cfg, request), cfg.queue_size)


# --------------------------------------------------------------------------
# record / replay


def load_replay_log(path) -> dict[str, ReplayEntry]:
    entries = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                timings = tuple((float(t), int(n)) for t, n in obj.get("chunk_timings") or ())
                entries[obj["prompt_hash"]] = ReplayEntry(obj["completion"], timings)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed replay record ({exc})") from None
    return entries


def make_replay(log_path, delay_ms: float = 0.0) -> ProviderConfig:
    return ProviderConfig("replay", replay=load_replay_log(log_path), delay_ms=delay_ms)


def append_replay_record(log_path, prompt: str, completion: str, chunk_timings=()) -> None:
    rec = {"prompt_hash": prompt_hash(prompt), "completion": completion,
           "chunk_timings": [[round(t, 6), n] for t, n in chunk_timings]}
    with Path(log_path).open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(rec) + "\n")


def record_completion(cfg: ProviderConfig, request: CompletionRequest, log_path) -> CompletionStream:
    """Run a completion to the end and append it (with chunk timings) to a replay log."""
    stream = complete(cfg, request)
    stream.read()
    timings = [(c.t - stream.started, len(c.text)) for c in stream.chunks]
    completion = stream.text
    if stream.status == "stopped" and request.stop:
        completion += request.stop
        if timings:
            t, n = timings[-1]
            timings[-1] = (t, n + len(request.stop))
    append_replay_record(log_path, request.prompt, completion, timings)
    return stream


# --------------------------------------------------------------------------
# fine-tuning submission


@dataclass
class FineTuneJob:
    """Opaque handle for a staged fine-tuning submission."""

    requests: list[dict] = field(default_factory=list)
    job_ids: list[str] = field(default_factory=list)
    snapshots: list[str] = field(default_factory=list)
    dry_run: bool = False


def _stage_files(train_path, sizes) -> list[tuple[int, list[TrainingSample]]]:
    train = read_jsonl(train_path)
    stages, prev = [], 0
    for size in sorted(sizes):
        if size > len(train):
            raise ValueError(f"stage size {size} exceeds the {len(train)} training samples")
        stages.append((size, train[prev:size]))
        prev = size
    return stages


def submit_finetune(train_path, base_model: str, epochs: int = 2, staged_sizes=(500, 1000, 2000, 4000, 8000),
                    audit: AuditReport | None = None, validation_path=None, cfg: ProviderConfig | None = None,
                    dry_run_dir=None, poll_interval: float = 30.0, max_polls: int = 10_000) -> FineTuneJob:
    """Request staged fine-tuning: each stage adds the next slice of training
    samples on top of the previous stage's snapshot.

    With ``dry_run_dir`` the exact request payloads are written there and
    nothing is sent.  Otherwise ``cfg`` must be a remote provider; each stage
    is polled until the service reports its snapshot, which the next stage
    then starts from.
    """
    if audit is None or not audit.clean:
        raise ProviderError("refusing to submit a dataset that has not passed the audit")
    if epochs < 1:
        raise ValueError("epochs must be positive")
    stages = _stage_files(train_path, staged_sizes)
    job = FineTuneJob(dry_run=dry_run_dir is not None)

    if dry_run_dir is not None:
        out = Path(dry_run_dir)
        out.mkdir(parents=True, exist_ok=True)
        model = base_model
        for k, (size, samples) in enumerate(stages):
            data = write_jsonl(samples, out / f"stage-{size}.jsonl")
            upload = {"purpose": "fine-tune", "file": data.name, "samples": len(samples)}
            request = _job_payload(f"file-stage-{size}", model, epochs, size,
                                   "file-validation" if validation_path else None)
            job.requests.append({"upload": upload, "job": request})
            (out / f"request-{k:02d}-stage-{size}.json").write_text(
                json.dumps({"upload": upload, "job": request}, indent=2) + "\n", encoding="utf-8")
            model = f"dry-run-snapshot-{size}"
            job.job_ids.append(f"dry-run-job-{size}")
            job.snapshots.append(model)
        return job

    if cfg is None or cfg.kind != "remote":
        raise ProviderError("a remote provider configuration is required")
    import httpx

    token = os.environ.get(cfg.auth_env or "")
    if not token:
        raise AuthError(f"environment variable {cfg.auth_env} is not set")
    headers = {"Authorization": f"Bearer {token}"}
    base = cfg.endpoint.rstrip("/")
    model = base_model
    with httpx.Client(timeout=cfg.timeout) as client:
        val_id = None
        if validation_path is not None:
            val_id = _upload(client, base, headers, Path(validation_path).name,
                             Path(validation_path).read_bytes())
        for size, samples in stages:
            payload = "".join(json.dumps(s.to_json(), ensure_ascii=False) + "\n" for s in samples)
            file_id = _upload(client, base, headers, f"stage-{size}.jsonl", payload.encode("utf-8"))
            request = _job_payload(file_id, model, epochs, size, val_id)
            job.requests.append({"upload": {"file": f"stage-{size}.jsonl", "samples": len(samples)}, "job": request})
            resp = client.post(f"{base}/fine-tunes", json=request, headers=headers)
            _raise_for_status(resp)
            job_id = resp.json()["id"]
            job.job_ids.append(job_id)
            model = _await_snapshot(client, base, headers, job_id, poll_interval, max_polls)
            job.snapshots.append(model)
    return job


def _job_payload(file_id: str, model: str, epochs: int, size: int, validation_id: str | None) -> dict:
    payload = {
        "training_file": file_id,
        "model": model,
        "n_epochs": epochs,
        "suffix": f"stage-{size}",
        "compute_classification_metrics": validation_id is not None,
    }
    if validation_id is not None:
        payload["validation_file"] = validation_id
    return payload


def _upload(client, base, headers, name: str, content: bytes) -> str:
    resp = client.post(f"{base}/files", headers=headers, data={"purpose": "fine-tune"},
                       files={"file": (name, content, "application/jsonl")})
    _raise_for_status(resp)
    return resp.json()["id"]


def _await_snapshot(client, base, headers, job_id, poll_interval, max_polls) -> str:
    for _ in range(max_polls):
        resp = client.get(f"{base}/fine-tunes/{job_id}", headers=headers)
        _raise_for_status(resp)
        body = resp.json()
        status = body.get("status")
        if status == "succeeded" and body.get("fine_tuned_model"):
            return body["fine_tuned_model"]
        if status in ("failed", "cancelled"):
            raise ProviderError(f"fine-tune job {job_id} {status}")
        time.sleep(poll_interval)
    raise ProviderError(f"fine-tune job {job_id} did not finish")
