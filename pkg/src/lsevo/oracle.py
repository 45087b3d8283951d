"""Expensive-assessment layer: synthetic objectives, budget accounting, wire client.

Built-in objectives are cheap stand-ins for the expensive property oracles the
framework is designed around; the budget ledger still counts every candidate
as one debit so cost figures mean the same thing in both worlds. External
assessors speak a newline-delimited JSON protocol over a subprocess' stdio or
a TCP stream.
"""

from __future__ import annotations

import json
import logging
import math
import os
import select
import socket
import subprocess
import threading
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .core import BITSTRING, REAL_VECTOR, TOKEN, AssessedRecord, Candidate, combine_scores
from .prescreener import fingerprint

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1

ONEMAX = "onemax"
LEADING_ONES = "leading_ones"
TRAP_K = "trap_k"
MOTIF_MATCH = "motif_match"
GAUSSIAN_PEAK = "gaussian_peak"

_BIT_KINDS = (ONEMAX, LEADING_ONES, TRAP_K, MOTIF_MATCH)


class BudgetExceededError(RuntimeError):
    """An assessment batch would push the ledger past its cap."""


class ProtocolError(RuntimeError):
    """The external assessor sent something outside the wire contract."""


class TransportError(RuntimeError):
    """The external assessor is unreachable, timed out, or hung up."""


class ConfigurationError(ValueError):
    """Components wired together disagree (objective names, domains, dims)."""


@dataclass(frozen=True)
class ObjectiveSpec:
    """One synthetic scoring function; every kind maps its domain into [0, 1]."""

    kind: str
    k: int | None = None
    target: str | None = None
    center: tuple[float, ...] | None = None
    width: float | None = None

    def __post_init__(self):
        if self.kind in (ONEMAX, LEADING_ONES):
            pass
        elif self.kind == TRAP_K:
            if self.k is None or self.k < 1:
                raise ValueError("trap_k requires a block size k >= 1")
        elif self.kind == MOTIF_MATCH:
            if not self.target or set(self.target) - {"0", "1"}:
                raise ValueError("motif_match requires a 0/1 target string")
        elif self.kind == GAUSSIAN_PEAK:
            if not self.center:
                raise ValueError("gaussian_peak requires a center vector")
            if self.width is None or self.width <= 0:
                raise ValueError("gaussian_peak requires width > 0")
        else:
            raise ValueError(f"unknown objective kind: {self.kind!r}")


def score_objective(spec: ObjectiveSpec, candidate: Candidate) -> float:
    """Score one candidate on one objective; result is always in [0, 1]."""
    if spec.kind in _BIT_KINDS:
        if candidate.kind != BITSTRING:
            raise ValueError(f"{spec.kind} scores bitstring candidates, got {candidate.kind}")
        bits = candidate.bits_array()
        n = bits.shape[0]
        if spec.kind == ONEMAX:
            return float(bits.sum() / n)
        if spec.kind == LEADING_ONES:
            zeros = np.flatnonzero(bits == 0.0)
            prefix = n if zeros.size == 0 else int(zeros[0])
            return prefix / n
        if spec.kind == MOTIF_MATCH:
            if len(spec.target) != n:
                raise ValueError(f"motif target length {len(spec.target)} != candidate length {n}")
            tgt = (np.frombuffer(spec.target.encode("ascii"), dtype=np.uint8) - ord("0")).astype(np.float64)
            return float((bits == tgt).sum() / n)
        # deceptive trap: all-ones block scores 1, otherwise fewer ones is better;
        # a short final block uses its own length in the same formula
        vals = []
        for start in range(0, n, spec.k):
            block = bits[start : start + spec.k]
            m = block.shape[0]
            ones = int(block.sum())
            vals.append(1.0 if ones == m else (m - 1 - ones) / m)
        return float(sum(vals) / len(vals))
    if candidate.kind != REAL_VECTOR:
        raise ValueError(f"{spec.kind} scores real vector candidates, got {candidate.kind}")
    x = candidate.vector_array()
    c = np.asarray(spec.center, dtype=np.float64)
    if x.shape != c.shape:
        raise ValueError(f"candidate dimension {x.shape[0]} != peak center dimension {c.shape[0]}")
    d = x - c
    return float(math.exp(-float(np.dot(d, d)) / spec.width))


class BudgetLedger:
    """Monotone oracle-call counter with an optional hard cap.

    Debits are atomic per batch: either the whole batch fits under the cap and
    is charged, or nothing is.
    """

    def __init__(self, cap: int | None = None):
        if cap is not None and cap < 1:
            raise ValueError("cap must be positive when set")
        self.cap = cap
        self._spent = 0
        self._log: list[tuple[int, int]] = []
        self._lock = threading.Lock()

    @property
    def spent(self) -> int:
        return self._spent

    @property
    def per_iteration_log(self) -> list[tuple[int, int]]:
        return list(self._log)

    def remaining(self) -> int | None:
        return None if self.cap is None else self.cap - self._spent

    def has_capacity(self, n: int) -> bool:
        return self.cap is None or self._spent + n <= self.cap

    def ensure_capacity(self, n: int) -> None:
        if not self.has_capacity(n):
            raise BudgetExceededError(
                f"assessing {n} candidates would exceed the budget cap ({self._spent}/{self.cap} spent)"
            )

    def charge(self, n: int, iteration: int) -> int:
        """Debit ``n`` calls; returns the first call_id of the batch."""
        if n < 0:
            raise ValueError("cannot charge a negative amount")
        with self._lock:
            self.ensure_capacity(n)
            first = self._spent
            self._spent += n
            if n:
                self._log.append((iteration, n))
            return first


@dataclass(frozen=True)
class OracleEndpoint:
    """Where assessments come from: built-in objective suite or a wire client."""

    kind: str
    objectives: tuple
    combiner: str = "mean"
    client: Any = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("builtin", "external"):
            raise ValueError(f"unknown endpoint kind: {self.kind!r}")
        if len(self.objectives) < 1:
            raise ValueError("an endpoint needs at least one objective")
        if self.kind == "builtin":
            if not all(isinstance(o, ObjectiveSpec) for o in self.objectives):
                raise ValueError("builtin endpoints take ObjectiveSpec objectives")
        else:
            if not all(isinstance(o, str) for o in self.objectives):
                raise ValueError("external endpoints declare objective names")
            if self.client is None:
                raise ValueError("external endpoint requires a wire client")


def _clamp_scores(rows: list[list[float]]) -> list[tuple[float, ...]]:
    clamped = 0
    out = []
    for row in rows:
        fixed = []
        for s in row:
            if not math.isfinite(s):
                raise ProtocolError(f"non-finite objective score from assessor: {s!r}")
            if s < 0.0 or s > 1.0:
                clamped += 1
                s = min(1.0, max(0.0, s))
            fixed.append(float(s))
        out.append(tuple(fixed))
    if clamped:
        logger.warning("clamped %d out-of-range objective scores into [0, 1]", clamped)
    return out


def assess(
    endpoint: OracleEndpoint,
    candidates: Sequence[Candidate],
    ledger: BudgetLedger,
    iteration: int,
) -> list[AssessedRecord]:
    """Score every candidate on all objectives, debiting one call per candidate.

    The debit is atomic: capacity is checked first and charged only after all
    scores are in hand, so failures (budget, transport, protocol) never spend.
    """
    if len(candidates) == 0:
        return []
    ledger.ensure_capacity(len(candidates))
    if endpoint.kind == "builtin":
        score_rows = [[score_objective(spec, c) for spec in endpoint.objectives] for c in candidates]
        scores = [tuple(row) for row in score_rows]
        fps = [fingerprint(c) for c in candidates]
    else:
        for c in candidates:
            if c.kind != TOKEN:
                raise ValueError(f"external endpoints assess token candidates, got {c.kind}")
        raw_scores, raw_fps = endpoint.client.assess([c.payload for c in candidates])
        if len(raw_scores) != len(candidates) or len(raw_fps) != len(candidates):
            raise ProtocolError(
                f"assessor returned {len(raw_scores)} score rows / {len(raw_fps)} fingerprints "
                f"for {len(candidates)} candidates"
            )
        n_obj = len(endpoint.objectives)
        if any(len(row) != n_obj for row in raw_scores):
            raise ProtocolError(f"score rows are not all length {n_obj}")
        scores = _clamp_scores(raw_scores)
        fps = [np.asarray(fp, dtype=np.float64) for fp in raw_fps]
    first = ledger.charge(len(candidates), iteration)
    return [
        AssessedRecord(
            candidate=c,
            fingerprint=fps[i],
            scores=scores[i],
            fitness=combine_scores(scores[i], endpoint.combiner),
            iteration=iteration,
            call_id=first + i,
        )
        for i, c in enumerate(candidates)
    ]


def check_handshake(endpoint: OracleEndpoint) -> "HelloReply":
    """Handshake an external endpoint and verify the declared objective names."""
    hello = endpoint.client.handshake()
    if tuple(hello.objectives) != tuple(endpoint.objectives):
        raise ConfigurationError(
            f"assessor scores objectives {list(hello.objectives)} "
            f"but the endpoint declares {list(endpoint.objectives)}"
        )
    return hello


def external_roundtrip(endpoint: OracleEndpoint, request: dict) -> dict:
    """One raw request/response exchange on an external endpoint's client."""
    if endpoint.kind != "external":
        raise ValueError("roundtrip requires an external endpoint")
    return endpoint.client.roundtrip(request)


@dataclass(frozen=True)
class HelloReply:
    objectives: tuple[str, ...]
    fingerprint_len: int


class _LineChannel:
    """Newline-delimited UTF-8 lines over a subprocess' stdio or a TCP socket."""

    def __init__(self, read_fd: int, recv, send, close, timeout: float | None):
        self._read_fd = read_fd
        self._recv = recv
        self._send = send
        self._close = close
        self.timeout = timeout
        self._buf = b""

    @classmethod
    def spawn(cls, argv: Sequence[str], timeout: float | None = None) -> "_LineChannel":
        try:
            proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
        except OSError as e:
            raise TransportError(f"could not launch assessor {argv!r}: {e}") from e

        def close():
            try:
                proc.stdin.close()
            except OSError:
                pass
            try:
                proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait()

        def send(data: bytes):
            try:
                proc.stdin.write(data)
                proc.stdin.flush()
            except (OSError, ValueError) as e:
                raise TransportError(f"assessor subprocess is gone: {e}") from e

        chan = cls(proc.stdout.fileno(), lambda n: os.read(proc.stdout.fileno(), n), send, close, timeout)
        chan.proc = proc
        return chan

    @classmethod
    def connect(cls, address: str, timeout: float | None = None) -> "_LineChannel":
        host, _, port = address.rpartition(":")
        try:
            sock = socket.create_connection((host, int(port)), timeout=timeout)
        except OSError as e:
            raise TransportError(f"could not connect to assessor at {address}: {e}") from e
        sock.settimeout(None)  # timeouts handled uniformly via select

        def send(data: bytes):
            try:
                sock.sendall(data)
            except OSError as e:
                raise TransportError(f"assessor connection lost: {e}") from e

        return cls(sock.fileno(), sock.recv, send, sock.close, timeout)

    def send_line(self, text: str) -> None:
        self._send(text.encode("utf-8") + b"\n")

    def recv_line(self) -> str:
        while b"\n" not in self._buf:
            ready, _, _ = select.select([self._read_fd], [], [], self.timeout)
            if not ready:
                raise TransportError(f"assessor did not answer within {self.timeout}s")
            chunk = self._recv(65536)
            if not chunk:
                raise TransportError("assessor closed the stream")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line.decode("utf-8")

    def close(self) -> None:
        self._close()


class OracleClient:
    """Client side of the assessor wire protocol.

    One JSON object per line. Requests carry a u64 id; responses may arrive
    out of order and are matched back by id. A response with an id that was
    never issued is a protocol error.
    """

    def __init__(self, channel: _LineChannel):
        self._channel = channel
        self._next_id = 0
        self._stash: dict[int, dict] = {}
        self._pending: set[int] = set()
        self.hello: HelloReply | None = None

    @classmethod
    def spawn(cls, argv: Sequence[str], timeout: float | None = None) -> "OracleClient":
        return cls(_LineChannel.spawn(argv, timeout))

    @classmethod
    def connect(cls, address: str, timeout: float | None = None) -> "OracleClient":
        return cls(_LineChannel.connect(address, timeout))

    def close(self) -> None:
        self._channel.close()

    def __enter__(self) -> "OracleClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _recv_msg(self) -> dict:
        line = self._channel.recv_line()
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as e:
            raise ProtocolError(f"assessor sent invalid JSON: {line[:200]!r}") from e
        if not isinstance(msg, dict) or "type" not in msg:
            raise ProtocolError(f"assessor message is not a typed object: {line[:200]!r}")
        return msg

    def roundtrip(self, request: dict) -> dict:
        """Send one request and return its matched response."""
        if request.get("type") == "hello":
            self._channel.send_line(json.dumps(request))
            msg = self._recv_msg()
            if msg.get("type") != "hello":
                raise ProtocolError(f"expected hello reply, got type {msg.get('type')!r}")
            return msg
        rid = request.get("id")
        if rid is None:
            rid = self._next_id
            self._next_id += 1
            request = dict(request, id=rid)
        self._pending.add(rid)
        self._channel.send_line(json.dumps(request))
        while rid not in self._stash:
            msg = self._recv_msg()
            mid = msg.get("id")
            if mid not in self._pending:
                raise ProtocolError(f"response for unknown request id {mid!r}")
            self._stash[mid] = msg
        self._pending.discard(rid)
        return self._stash.pop(rid)

    def handshake(self) -> HelloReply:
        msg = self.roundtrip({"type": "hello", "version": PROTOCOL_VERSION})
        if msg.get("version") != PROTOCOL_VERSION:
            raise ProtocolError(f"assessor speaks protocol version {msg.get('version')!r}")
        objectives = msg.get("objectives")
        fp_len = msg.get("fingerprint_len")
        if not isinstance(objectives, list) or not all(isinstance(o, str) for o in objectives):
            raise ProtocolError("hello reply lacks an objective name list")
        if not isinstance(fp_len, int) or fp_len < 1:
            raise ProtocolError("hello reply lacks a positive fingerprint_len")
        self.hello = HelloReply(tuple(objectives), fp_len)
        return self.hello

    def _checked(self, msg: dict, expect: str) -> dict:
        if msg.get("type") == "error":
            raise ProtocolError(f"assessor error: {msg.get('message', '<no message>')}")
        if msg.get("type") != expect:
            raise ProtocolError(f"expected {expect!r} response, got type {msg.get('type')!r}")
        return msg

    def assess(self, tokens: Sequence[str]) -> tuple[list[list[float]], list[list[int]]]:
        msg = self._checked(self.roundtrip({"type": "assess", "candidates": list(tokens)}), "result")
        scores = msg.get("scores")
        fps = msg.get("fingerprints")
        if not isinstance(scores, list) or not isinstance(fps, list):
            raise ProtocolError("result lacks scores/fingerprints arrays")
        return scores, fps

    # encode/decode mirror the assess framing so a generative back-end can sit
    # behind the same transport; assess-only servers answer these with errors
    def encode(self, tokens: Sequence[str]) -> list[list[float]]:
        msg = self._checked(self.roundtrip({"type": "encode", "candidates": list(tokens)}), "latents")
        vectors = msg.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(tokens):
            raise ProtocolError("latents reply is not aligned with the request")
        return vectors

    def decode(self, vectors: Sequence[Sequence[float]]) -> list[str]:
        msg = self._checked(
            self.roundtrip({"type": "decode", "vectors": [list(v) for v in vectors]}), "candidates"
        )
        tokens = msg.get("candidates")
        if not isinstance(tokens, list) or len(tokens) != len(vectors):
            raise ProtocolError("candidates reply is not aligned with the request")
        return tokens
