"""Newline-delimited JSON protocol for external editor/evaluator workers.

One UTF-8 JSON message per line, no embedded newlines. Each connection has
one request in flight at a time and request ids that strictly increase.
Message shapes:

    client hello   {"type": "hello", "protocol": 1, "roles": [...], "attr_ids": [...]}
    worker hello   {"type": "hello", "protocol": 1, "roles": [...], "attr_ids": [...]}
    edit request   {"id": n, "type": "edit", "episode_id": str, "context": str,
                    "anchor": null | {"seq": str, "attrs": {attr_id: value}},
                    "current": {"seq": str, "attrs": {attr_id: value}},
                    "target": [{"attr_id": str, "start": x, "end": y}, ...],
                    "n_candidates": int, "seed": int}
    edit response  {"id": n, "candidates": [str, ...]}
    eval request   {"id": n, "type": "eval", "attr_id": str, "sequences": [str, ...]}
    eval response  {"id": n, "values": [real, ...]}
    error reply    {"id": n | null, "type": "error", "error": str}
    shutdown       {"type": "shutdown"}

Protocol violations (id mismatch, wrong count, malformed JSON, error replies)
raise ProtocolError and abandon the connection; transport failures (launch,
timeout, EOF) raise BridgeError. The worker launch timeout is configurable
through the MACS_WORKER_TIMEOUT environment variable (seconds).
"""

from __future__ import annotations

import json
import logging
import os
import queue
import select
import socket
import subprocess
from contextlib import contextmanager
from typing import Sequence

from .editors import Editor, EditRequest
from .errors import BridgeError, ConfigurationError, ProtocolError
from .evaluators import AttributeSpec, Evaluator, EvaluatorSpec, ScoredSequence

logger = logging.getLogger(__name__)

PROTOCOL_VERSION = 1
LAUNCH_TIMEOUT_ENV = "MACS_WORKER_TIMEOUT"
DEFAULT_TIMEOUT = 30.0


def launch_timeout() -> float:
    raw = os.environ.get(LAUNCH_TIMEOUT_ENV)
    if raw is None:
        return DEFAULT_TIMEOUT
    try:
        value = float(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{LAUNCH_TIMEOUT_ENV}={raw!r} is not a number") from exc
    if value <= 0:
        raise ConfigurationError(f"{LAUNCH_TIMEOUT_ENV} must be positive")
    return value


class PipeTransport:
    """Line transport over a child process's standard streams."""

    def __init__(self, proc: subprocess.Popen):
        self._proc = proc
        self._buffer = b""

    def send_line(self, line: bytes) -> None:
        try:
            self._proc.stdin.write(line + b"\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BridgeError(f"worker stdin closed: {exc}") from exc

    def recv_line(self, timeout: float) -> bytes:
        fd = self._proc.stdout.fileno()
        while b"\n" not in self._buffer:
            ready, _, _ = select.select([fd], [], [], timeout)
            if not ready:
                raise BridgeError(f"worker reply timed out after {timeout:g}s")
            chunk = os.read(fd, 65536)
            if not chunk:
                raise BridgeError("worker closed its output stream")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line

    def close(self) -> None:
        for stream in (self._proc.stdin, self._proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        try:
            self._proc.wait(timeout=2)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()


class SocketTransport:
    """Line transport over a TCP connection."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._buffer = b""

    def send_line(self, line: bytes) -> None:
        try:
            self._sock.sendall(line + b"\n")
        except OSError as exc:
            raise BridgeError(f"socket send failed: {exc}") from exc

    def recv_line(self, timeout: float) -> bytes:
        self._sock.settimeout(timeout)
        while b"\n" not in self._buffer:
            try:
                chunk = self._sock.recv(65536)
            except socket.timeout as exc:
                raise BridgeError(f"worker reply timed out after {timeout:g}s") from exc
            except OSError as exc:
                raise BridgeError(f"socket read failed: {exc}") from exc
            if not chunk:
                raise BridgeError("worker closed the connection")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass


class WorkerClient:
    """Engine-side endpoint of one worker connection."""

    def __init__(
        self,
        transport,
        roles: Sequence[str],
        attr_ids: Sequence[str],
        timeout: float | None = None,
    ):
        self._transport = transport
        self.roles = tuple(roles)
        self.attr_ids = tuple(attr_ids)
        self.timeout = float(timeout) if timeout is not None else DEFAULT_TIMEOUT
        self._next_id = 1
        self._dead = False
        self.worker_hello: dict = {}

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def launch(
        cls,
        command: Sequence[str],
        roles: Sequence[str],
        attr_ids: Sequence[str],
        timeout: float | None = None,
        env: dict | None = None,
    ) -> "WorkerClient":
        """Spawn a worker child process and complete the handshake."""
        if not command:
            raise ConfigurationError("empty worker command")
        try:
            proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                env={**os.environ, **env} if env else None,
            )
        except OSError as exc:
            raise BridgeError(f"could not launch worker {command!r}: {exc}") from exc
        client = cls(PipeTransport(proc), roles, attr_ids, timeout)
        client.handshake(launch_timeout())
        return client

    @classmethod
    def connect(
        cls,
        host: str,
        port: int,
        roles: Sequence[str],
        attr_ids: Sequence[str],
        timeout: float | None = None,
    ) -> "WorkerClient":
        try:
            sock = socket.create_connection((host, port), timeout=launch_timeout())
        except OSError as exc:
            raise BridgeError(f"could not connect to {host}:{port}: {exc}") from exc
        client = cls(SocketTransport(sock), roles, attr_ids, timeout)
        client.handshake(launch_timeout())
        return client

    def handshake(self, timeout: float | None = None) -> None:
        hello = {
            "type": "hello",
            "protocol": PROTOCOL_VERSION,
            "roles": list(self.roles),
            "attr_ids": list(self.attr_ids),
        }
        self._send(hello)
        reply = self._recv(timeout or self.timeout)
        if reply.get("type") != "hello":
            self._abandon()
            raise ProtocolError(f"expected hello reply, got {reply!r}")
        if reply.get("protocol") != PROTOCOL_VERSION:
            self._abandon()
            raise ProtocolError(
                f"worker speaks protocol {reply.get('protocol')!r}, "
                f"need {PROTOCOL_VERSION}"
            )
        worker_roles = set(reply.get("roles") or [])
        missing = set(self.roles) - worker_roles
        if missing:
            self._abandon()
            raise ProtocolError(f"worker lacks roles {sorted(missing)}")
        self.worker_hello = reply

    def shutdown(self) -> None:
        if not self._dead:
            try:
                self._send({"type": "shutdown"})
            except BridgeError:
                pass
        self.close()

    def close(self) -> None:
        self._dead = True
        self._transport.close()

    def __enter__(self) -> "WorkerClient":
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()

    # -- requests ----------------------------------------------------------

    def edit(self, request: EditRequest) -> list[str]:
        """Round-trip one edit request; returns exactly n_candidates strings."""
        payload = {
            "id": None,  # filled by _roundtrip
            "type": "edit",
            "episode_id": request.episode_id,
            "context": request.context,
            "anchor": self._seq_payload(request.anchor),
            "current": self._seq_payload(request.current),
            "target": [
                {"attr_id": w.attr_id, "start": w.start, "end": w.end}
                for w in request.target.windows
            ],
            "n_candidates": request.n_candidates,
            "seed": request.seed,
        }
        reply = self._roundtrip(payload)
        candidates = reply.get("candidates")
        if not isinstance(candidates, list) or not all(
            isinstance(c, str) for c in candidates
        ):
            self._abandon()
            raise ProtocolError(f"malformed candidates in reply: {reply!r}")
        if len(candidates) != request.n_candidates:
            self._abandon()
            raise ProtocolError(
                f"asked for {request.n_candidates} candidates, got {len(candidates)}"
            )
        return candidates

    def evaluate(self, attr_id: str, sequences: Sequence[str]) -> list[float]:
        """Round-trip one eval request; returns one value per sequence."""
        payload = {
            "id": None,
            "type": "eval",
            "attr_id": attr_id,
            "sequences": list(sequences),
        }
        reply = self._roundtrip(payload)
        values = reply.get("values")
        if not isinstance(values, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
        ):
            self._abandon()
            raise ProtocolError(f"malformed values in reply: {reply!r}")
        if len(values) != len(sequences):
            self._abandon()
            raise ProtocolError(
                f"sent {len(sequences)} sequences, got {len(values)} values"
            )
        return [float(v) for v in values]

    # -- internals ----------------------------------------------------------

    def _seq_payload(self, s: ScoredSequence | None) -> dict | None:
        if s is None:
            return None
        if len(s.attrs) != len(self.attr_ids):
            raise ProtocolError(
                f"sequence carries {len(s.attrs)} attrs, connection declared "
                f"{len(self.attr_ids)}"
            )
        return {
            "seq": s.seq,
            "attrs": {a: v for a, v in zip(self.attr_ids, s.attrs)},
        }

    def _roundtrip(self, payload: dict) -> dict:
        request_id = self._next_id
        self._next_id += 1
        payload["id"] = request_id
        self._send(payload)
        reply = self._recv(self.timeout)
        if reply.get("type") == "error":
            self._abandon()
            raise ProtocolError(f"worker error: {reply.get('error')!r}")
        if reply.get("id") != request_id:
            self._abandon()
            raise ProtocolError(
                f"reply id {reply.get('id')!r} does not match request {request_id}"
            )
        return reply

    def _send(self, message: dict) -> None:
        if self._dead:
            raise BridgeError("connection already abandoned")
        line = json.dumps(message, ensure_ascii=False, separators=(",", ":"))
        if "\n" in line:
            raise ProtocolError("message would embed a newline")
        self._transport.send_line(line.encode("utf-8"))

    def _recv(self, timeout: float) -> dict:
        if self._dead:
            raise BridgeError("connection already abandoned")
        try:
            raw = self._transport.recv_line(timeout)
        except BridgeError:
            self._abandon()
            raise
        try:
            message = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            self._abandon()
            raise ProtocolError(f"malformed JSON from worker: {raw[:200]!r}") from exc
        if not isinstance(message, dict):
            self._abandon()
            raise ProtocolError(f"expected a JSON object, got {message!r}")
        return message

    def _abandon(self) -> None:
        self._dead = True
        try:
            self._transport.close()
        except Exception:  # noqa: BLE001 - best effort teardown
            logger.debug("transport close failed during abandon", exc_info=True)


class WorkerPool:
    """A fixed set of worker connections leased one episode at a time."""

    def __init__(
        self,
        command: Sequence[str],
        size: int,
        roles: Sequence[str],
        attr_ids: Sequence[str],
        timeout: float | None = None,
    ):
        if size < 1:
            raise ConfigurationError("worker pool size must be >= 1")
        self.clients = [
            WorkerClient.launch(command, roles, attr_ids, timeout) for _ in range(size)
        ]
        self._free: queue.Queue = queue.Queue()
        for client in self.clients:
            self._free.put(client)

    @contextmanager
    def lease(self):
        client = self._free.get()
        try:
            yield client
        finally:
            self._free.put(client)

    def close(self) -> None:
        for client in self.clients:
            client.shutdown()

    def __enter__(self) -> "WorkerPool":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class ExternalEditor(Editor):
    """Editor backed by a leased worker connection."""

    name = "external"

    def __init__(self, pool: WorkerPool):
        self.pool = pool

    def propose(self, request: EditRequest) -> list[str]:
        with self.pool.lease() as client:
            return client.edit(request)


class ExternalEvaluator(Evaluator):
    """Unary attribute evaluator backed by a leased worker connection.

    Marked deterministic only if the worker promises determinism; toy
    reference workers do, model-backed ones may not.
    """

    def __init__(
        self, id: str, spec: AttributeSpec, pool: WorkerPool, deterministic: bool = True
    ):
        super().__init__(EvaluatorSpec(id, "unary", spec, deterministic))
        self.pool = pool

    def score_batch(self, seqs: Sequence[str]) -> list[float]:
        if not seqs:
            return []
        with self.pool.lease() as client:
            return client.evaluate(self.info.id, seqs)
