"""Fitness evaluation contract and its implementations.

Every evaluator maps an EvalRequest to a FitnessReport. Two deterministic
surrogates support fast, exact verification of search dynamics; the
ExternTrainer client hands candidates to a separate trainer process over a
newline-delimited JSON protocol on stdin/stdout.
"""

from __future__ import annotations

import json
import math
import os
import shlex
import subprocess
import threading
import time
from collections import deque
from dataclasses import dataclass
from queue import Empty, Queue

from . import arch as A

DEFAULT_TIMEOUT_ENV = "OPENNAS_TRAINER_TIMEOUT_S"
DEFAULT_TIMEOUT_S = 3600.0

# dataset_ref -> ((height, width, channels), num_classes)
DATASETS = {
    "fashion_mnist": ((28, 28, 1), 10),
    "cifar10": ((32, 32, 3), 10),
    "synthetic": ((16, 16, 3), 4),
}


class UnknownDataset(Exception):
    pass


class EvaluatorFailure(Exception):
    """The evaluation backend crashed, timed out, or rejected a request."""

    def __init__(self, message: str, diagnostics: str = ""):
        super().__init__(message)
        self.diagnostics = diagnostics


def dataset_spec(dataset_ref: str) -> tuple[tuple[int, int, int], int]:
    if dataset_ref not in DATASETS:
        raise UnknownDataset(f"unknown dataset {dataset_ref!r}; known: {sorted(DATASETS)}")
    return DATASETS[dataset_ref]


@dataclass(frozen=True)
class EvalRequest:
    architecture: A.Architecture
    epochs: int
    dataset_ref: str = "synthetic"
    subset_size: int | None = None
    seed: int = 0

    def check(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        dataset_spec(self.dataset_ref)


@dataclass(frozen=True)
class FitnessReport:
    val_accuracy: float
    val_loss: float
    wall_seconds: float
    param_count: int


class Evaluator:
    """Interface: evaluate() plus a concurrency bound and a close() hook."""

    max_parallelism: int = 1

    def evaluate(self, request: EvalRequest) -> FitnessReport:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def slot_distance(candidate: A.Architecture, target: A.Architecture) -> float:
    """Normalized slot-wise edit distance between two layer stacks.

    Per slot: wrong kind costs 1, right kind with wrong attributes costs
    0.5, each missing/extra slot costs 1; the total is divided by the
    longer length. Two empty stacks are at distance 0.
    """
    n = max(len(candidate.layers), len(target.layers))
    if n == 0:
        return 0.0
    d = 0.0
    for i in range(n):
        if i >= len(candidate.layers) or i >= len(target.layers):
            d += 1.0
        elif candidate.layers[i].kind != target.layers[i].kind:
            d += 1.0
        elif candidate.layers[i] != target.layers[i]:
            d += 0.5
    return d / n


class TargetSurrogate(Evaluator):
    """Fitness = 1 - slot distance to a hidden target architecture.

    Deterministic and instant; the training budget in the request is
    deliberately ignored so call-count assertions stay exact.
    """

    max_parallelism = 2**31

    def __init__(self, target: A.Architecture):
        self.target = target

    def evaluate(self, request: EvalRequest) -> FitnessReport:
        dataset_spec(request.dataset_ref)
        acc = 1.0 - slot_distance(request.architecture, self.target)
        return FitnessReport(acc, 1.0 - acc, 0.0, A.param_count(request.architecture))


class ParamBandSurrogate(Evaluator):
    """Fitness peaks when the parameter count hits a target order of magnitude.

    fitness = exp(-(log10(p) - log10(p_center))^2)
    """

    max_parallelism = 2**31

    def __init__(self, center: int = 100_000):
        if center < 1:
            raise ValueError("center must be positive")
        self.center = center

    def evaluate(self, request: EvalRequest) -> FitnessReport:
        dataset_spec(request.dataset_ref)
        p = A.param_count(request.architecture)
        acc = math.exp(-((math.log10(p) - math.log10(self.center)) ** 2))
        return FitnessReport(acc, 1.0 - acc, 0.0, p)


class CountingEvaluator(Evaluator):
    """Delegating wrapper that records every request; used by tests and sweeps."""

    def __init__(self, inner: Evaluator):
        self.inner = inner
        self.calls = 0
        self.requests: list[EvalRequest] = []

    @property
    def max_parallelism(self):  # type: ignore[override]
        return self.inner.max_parallelism

    def evaluate(self, request: EvalRequest) -> FitnessReport:
        self.calls += 1
        self.requests.append(request)
        return self.inner.evaluate(request)

    def close(self) -> None:
        self.inner.close()


def encode_request(req_id: int, request: EvalRequest, document: dict) -> str:
    """One wire line for an evaluate request; field order is part of the protocol."""
    return json.dumps(
        {
            "id": req_id,
            "op": "evaluate",
            "architecture": document,
            "epochs": request.epochs,
            "dataset": request.dataset_ref,
            "subset_size": request.subset_size,
            "seed": request.seed,
        },
        separators=(",", ":"),
    )


def decode_response(line: str) -> dict:
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as e:
        raise EvaluatorFailure(f"unparseable trainer response: {e.msg}", diagnostics=line[:500])
    if not isinstance(msg, dict):
        raise EvaluatorFailure("trainer response is not an object", diagnostics=line[:500])
    return msg


class ExternTrainer(Evaluator):
    """Client for a trainer subprocess speaking the evaluate wire protocol.

    The backend is spawned from a shell-style command string, greets with
    a hello line declaring its parallelism, then answers one JSON request
    per line. Architectures are expanded to their trainable form before
    they cross the wire when a space is given.
    """

    def __init__(
        self,
        command: str | list[str],
        timeout_s: float | None = None,
        expand_space: A.SpaceConfig | None = None,
    ):
        if timeout_s is None:
            timeout_s = float(os.environ.get(DEFAULT_TIMEOUT_ENV, DEFAULT_TIMEOUT_S))
        self.timeout_s = timeout_s
        self.expand_space = expand_space
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self._next_id = 0
        self._lock = threading.Lock()
        self._stderr_tail: deque[str] = deque(maxlen=200)
        self._lines: Queue[str | None] = Queue()

        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise EvaluatorFailure(f"could not spawn trainer {self.command!r}: {e}")

        threading.Thread(target=self._drain_stdout, daemon=True).start()
        threading.Thread(target=self._drain_stderr, daemon=True).start()

        hello = self._read_message()
        if hello.get("op") != "hello":
            raise EvaluatorFailure("trainer did not send a hello message", self.diagnostics())
        self.max_parallelism = int(hello.get("max_parallelism", 1))
        self.hello = hello

    def _drain_stdout(self):
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF marker

    def _drain_stderr(self):
        assert self._proc.stderr is not None
        for line in self._proc.stderr:
            self._stderr_tail.append(line.rstrip("\n"))

    def diagnostics(self) -> str:
        return "\n".join(self._stderr_tail)

    def _read_message(self) -> dict:
        deadline = time.monotonic() + self.timeout_s
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise EvaluatorFailure(
                    f"trainer timed out after {self.timeout_s}s", self.diagnostics()
                )
            try:
                line = self._lines.get(timeout=min(remaining, 1.0))
            except Empty:
                continue
            if line is None:
                code = self._proc.poll()
                raise EvaluatorFailure(
                    f"trainer exited (code {code}) mid-conversation", self.diagnostics()
                )
            line = line.strip()
            if line:
                return decode_response(line)

    def _send(self, line: str) -> None:
        try:
            assert self._proc.stdin is not None
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            raise EvaluatorFailure(f"trainer pipe closed: {e}", self.diagnostics())

    def _roundtrip(self, payload: str, req_id: int) -> dict:
        with self._lock:
            self._send(payload)
            msg = self._read_message()
        if msg.get("id") != req_id:
            raise EvaluatorFailure(
                f"trainer answered id {msg.get('id')} to request {req_id}", self.diagnostics()
            )
        if not msg.get("ok"):
            raise EvaluatorFailure(
                f"trainer error: {msg.get('error', 'unspecified')}", self.diagnostics()
            )
        return msg

    def evaluate(self, request: EvalRequest) -> FitnessReport:
        request.check()
        arch = request.architecture
        if self.expand_space is not None:
            arch = A.materialize(arch, self.expand_space)
        with self._lock:
            self._next_id += 1
            req_id = self._next_id
        msg = self._roundtrip(encode_request(req_id, request, A.to_document_dict(arch)), req_id)
        try:
            return FitnessReport(
                val_accuracy=float(msg["val_accuracy"]),
                val_loss=float(msg["val_loss"]),
                wall_seconds=float(msg["wall_seconds"]),
                param_count=int(msg["param_count"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise EvaluatorFailure(f"malformed trainer response: {e}", self.diagnostics())

    def probe_param_count(self, architecture: A.Architecture) -> int:
        """Ask the backend for its parameter count of a document (no training)."""
        arch = architecture
        if self.expand_space is not None:
            arch = A.materialize(arch, self.expand_space)
        with self._lock:
            self._next_id += 1
            req_id = self._next_id
        payload = json.dumps(
            {"id": req_id, "op": "param_count", "architecture": A.to_document_dict(arch)},
            separators=(",", ":"),
        )
        msg = self._roundtrip(payload, req_id)
        return int(msg["param_count"])

    def close(self) -> None:
        if getattr(self, "_proc", None) is None:
            return
        try:
            if self._proc.stdin:
                self._proc.stdin.close()
            self._proc.wait(timeout=5)
        except Exception:
            self._proc.kill()
        finally:
            self._proc = None
