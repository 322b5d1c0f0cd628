"""Single-threaded stdin/stdout request loop speaking protocol version 1.

One JSON object per line in, one per line out, replies in request order.
Nothing is served before a successful handshake, and a malformed or invalid
message produces an error reply (with the request id when one could be
parsed) rather than a crash: the loop keeps going until shutdown or EOF.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from typing import IO, Any

from .rules import candidates, proxy_score

PROTOCOL_VERSION = 1

_DEFAULT_ROLES = ("editor", "evaluator")


@dataclass
class WorkerState:
    """Connection state; ``negotiated`` stays None until a hello succeeds."""

    roles: tuple[str, ...] = _DEFAULT_ROLES
    negotiated: int | None = None
    attr_ids: tuple[str, ...] = ()
    last_id: int = 0


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _error(request_id: int | None, message: str) -> dict[str, Any]:
    return {"id": request_id, "type": "error", "error": message}


def _handle_hello(state: WorkerState, msg: dict[str, Any]) -> dict[str, Any]:
    if msg.get("protocol") != PROTOCOL_VERSION:
        return _error(
            None,
            f"unsupported protocol {msg.get('protocol')!r}; "
            f"this worker speaks version {PROTOCOL_VERSION}",
        )
    attr_ids = msg.get("attr_ids")
    if not isinstance(attr_ids, list) or not all(isinstance(a, str) for a in attr_ids):
        return _error(None, "hello must carry attr_ids as a list of strings")
    state.negotiated = PROTOCOL_VERSION
    state.attr_ids = tuple(attr_ids)
    return {
        "type": "hello",
        "protocol": PROTOCOL_VERSION,
        "roles": list(state.roles),
        "attr_ids": list(state.attr_ids),
    }


def _handle_edit(request_id: int, msg: dict[str, Any]) -> dict[str, Any]:
    current = msg.get("current")
    seq = current.get("seq") if isinstance(current, dict) else None
    if not isinstance(seq, str):
        return _error(request_id, "edit needs current.seq as a string")
    n = msg.get("n_candidates")
    if not _is_int(n) or n < 1:
        return _error(request_id, f"n_candidates must be a positive integer, got {n!r}")
    seed = msg.get("seed", 0)
    if not _is_int(seed):
        return _error(request_id, f"seed must be an integer, got {seed!r}")
    return {"id": request_id, "candidates": candidates(seq, n, seed)}


def _handle_eval(request_id: int, msg: dict[str, Any]) -> dict[str, Any]:
    attr_id = msg.get("attr_id")
    if not isinstance(attr_id, str):
        return _error(request_id, f"eval needs a string attr_id, got {attr_id!r}")
    seqs = msg.get("sequences")
    if not isinstance(seqs, list) or not all(isinstance(s, str) for s in seqs):
        return _error(request_id, "eval needs sequences as a list of strings")
    return {"id": request_id, "values": [proxy_score(attr_id, s) for s in seqs]}


def _handle(state: WorkerState, msg: dict[str, Any]) -> dict[str, Any] | None:
    """Reply for one message; None signals shutdown."""
    kind = msg.get("type")
    if kind == "hello":
        return _handle_hello(state, msg)
    if kind == "shutdown":
        return None

    raw_id = msg.get("id")
    request_id = raw_id if _is_int(raw_id) else None
    if state.negotiated is None:
        return _error(request_id, "no handshake yet; send hello first")
    if request_id is None or request_id <= state.last_id:
        return _error(request_id, f"request ids must be integers increasing from 1, got {raw_id!r}")
    state.last_id = request_id

    if kind == "edit":
        return _handle_edit(request_id, msg)
    if kind == "eval":
        return _handle_eval(request_id, msg)
    return _error(request_id, f"unknown request type {kind!r}")


def _write(stdout: IO[str], message: dict[str, Any]) -> None:
    # json.dumps escapes any newline inside strings, so this is one line.
    stdout.write(json.dumps(message, ensure_ascii=False, separators=(",", ":")) + "\n")
    stdout.flush()


def serve(
    stdin: IO[str] | None = None,
    stdout: IO[str] | None = None,
    roles: tuple[str, ...] = _DEFAULT_ROLES,
) -> int:
    """Run the request loop until shutdown or EOF; returns the exit code."""
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    state = WorkerState(roles=tuple(roles))
    for raw in stdin:
        line = raw.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            _write(stdout, _error(None, f"malformed JSON: {exc}"))
            continue
        if not isinstance(msg, dict):
            _write(stdout, _error(None, "expected a JSON object"))
            continue
        reply = _handle(state, msg)
        if reply is None:
            return 0
        _write(stdout, reply)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bridge-worker",
        description="stdio editor/evaluator worker: seeded rule-based paraphrases "
        "and surface-statistic scores over newline-delimited JSON",
    )
    parser.add_argument(
        "--roles",
        default=",".join(_DEFAULT_ROLES),
        help="comma-separated roles to declare in the handshake (default: %(default)s)",
    )
    args = parser.parse_args(argv)
    roles = tuple(r.strip() for r in args.roles.split(",") if r.strip())
    return serve(roles=roles)
