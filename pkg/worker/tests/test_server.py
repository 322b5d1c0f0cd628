"""Request-loop behavior through a real child process over raw pipes."""

import json
import subprocess
import sys

import pytest

ATTRS = ["sentiment", "complexity"]


class Proc:
    """Line-level driver around a worker subprocess."""

    def __init__(self, *args: str):
        self.p = subprocess.Popen(
            [sys.executable, "-m", "bridgeworker", *args],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
        )

    def send_raw(self, line: str) -> None:
        assert self.p.stdin is not None
        self.p.stdin.write(line + "\n")
        self.p.stdin.flush()

    def send(self, obj: dict) -> None:
        self.send_raw(json.dumps(obj))

    def recv(self) -> dict:
        assert self.p.stdout is not None
        line = self.p.stdout.readline()
        assert line, "worker closed stdout unexpectedly"
        return json.loads(line)

    def hello(self, protocol: int = 1) -> dict:
        self.send({"type": "hello", "protocol": protocol, "roles": ["editor", "evaluator"], "attr_ids": ATTRS})
        return self.recv()

    def edit(self, request_id: int, seq: str, n: int, seed: int = 0) -> dict:
        self.send(
            {
                "id": request_id,
                "type": "edit",
                "episode_id": "ep",
                "context": "",
                "anchor": None,
                "current": {"seq": seq, "attrs": {"sentiment": 3.0, "complexity": 0.0}},
                "target": [{"attr_id": "sentiment", "start": 3.5, "end": 5.0}],
                "n_candidates": n,
                "seed": seed,
            }
        )
        return self.recv()

    def close(self) -> int:
        if self.p.stdin is not None:
            self.p.stdin.close()
        return self.p.wait(timeout=10)


@pytest.fixture
def proc():
    w = Proc()
    yield w
    if w.p.poll() is None:
        w.p.kill()
    w.p.wait(timeout=10)


class TestHandshake:
    def test_round_trip(self, proc):
        reply = proc.hello()
        assert reply["type"] == "hello"
        assert reply["protocol"] == 1
        assert {"editor", "evaluator"} <= set(reply["roles"])
        assert reply["attr_ids"] == ATTRS

    def test_roles_flag_narrows_declaration(self):
        w = Proc("--roles", "editor")
        try:
            assert w.hello()["roles"] == ["editor"]
        finally:
            w.close()

    def test_wrong_protocol_refused_then_recovers(self, proc):
        reply = proc.hello(protocol=2)
        assert reply["type"] == "error"
        assert reply["id"] is None
        assert "protocol" in reply["error"]
        assert proc.hello()["type"] == "hello"

    def test_requests_before_handshake_are_refused(self, proc):
        reply = proc.edit(1, "some text", 2)
        assert reply["type"] == "error"
        assert reply["id"] == 1
        assert "handshake" in reply["error"]


class TestEdit:
    def test_exact_candidate_count(self, proc):
        proc.hello()
        reply = proc.edit(1, "The meal was good", 3, seed=7)
        assert set(reply) == {"id", "candidates"}
        assert reply["id"] == 1
        assert len(reply["candidates"]) == 3
        assert all(isinstance(c, str) and c != "The meal was good" for c in reply["candidates"])

    def test_same_request_same_candidates(self, proc):
        proc.hello()
        first = proc.edit(1, "The meal was good. Very tasty stuff.", 4, seed=11)
        second = proc.edit(2, "The meal was good. Very tasty stuff.", 4, seed=11)
        assert first["candidates"] == second["candidates"]

    def test_fresh_process_reproduces_candidates(self, proc):
        proc.hello()
        here = proc.edit(1, "Service felt slow but friendly", 5, seed=3)
        other = Proc()
        try:
            other.hello()
            there = other.edit(1, "Service felt slow but friendly", 5, seed=3)
        finally:
            other.close()
        assert here["candidates"] == there["candidates"]

    def test_invalid_counts_and_seeds_are_errors(self, proc):
        proc.hello()
        assert "n_candidates" in proc.edit(1, "text here", 0)["error"]
        assert "n_candidates" in proc.edit(2, "text here", -2)["error"]
        reply = proc.edit(3, "text here", 1)
        assert reply["candidates"]  # loop still alive after the errors

    def test_missing_current_seq_is_an_error(self, proc):
        proc.hello()
        proc.send({"id": 1, "type": "edit", "n_candidates": 2, "seed": 0, "current": {}})
        reply = proc.recv()
        assert reply["type"] == "error" and reply["id"] == 1


class TestEval:
    def test_values_in_order(self, proc):
        proc.hello()
        proc.send({"id": 1, "type": "eval", "attr_id": "fluency", "sequences": ["a a a a", "a b", ""]})
        reply = proc.recv()
        assert reply["id"] == 1
        assert reply["values"] == [0.25, 1.0, 0.0]

    def test_empty_batch(self, proc):
        proc.hello()
        proc.send({"id": 1, "type": "eval", "attr_id": "sentiment", "sequences": []})
        assert proc.recv()["values"] == []

    def test_non_string_sequences_are_an_error(self, proc):
        proc.hello()
        proc.send({"id": 1, "type": "eval", "attr_id": "sentiment", "sequences": ["ok", 5]})
        assert proc.recv()["type"] == "error"


class TestLoopRobustness:
    def test_malformed_line_gets_null_id_error_and_loop_continues(self, proc):
        proc.send_raw("this is not json")
        reply = proc.recv()
        assert reply == {"id": None, "type": "error", "error": reply["error"]}
        assert "malformed" in reply["error"]
        assert proc.hello()["type"] == "hello"

    def test_non_object_line_is_an_error(self, proc):
        proc.send_raw("[1, 2, 3]")
        assert proc.recv()["type"] == "error"

    def test_blank_lines_are_ignored(self, proc):
        proc.send_raw("")
        assert proc.hello()["type"] == "hello"

    def test_non_increasing_ids_are_errors(self, proc):
        proc.hello()
        assert proc.edit(1, "fine text", 1)["candidates"]
        reply = proc.edit(1, "fine text", 1)
        assert reply["type"] == "error" and "ids" in reply["error"]
        assert proc.edit(2, "fine text", 1)["candidates"]

    def test_missing_id_is_an_error(self, proc):
        proc.hello()
        proc.send({"type": "eval", "attr_id": "x", "sequences": []})
        reply = proc.recv()
        assert reply["type"] == "error" and reply["id"] is None

    def test_unknown_type_is_an_error(self, proc):
        proc.hello()
        proc.send({"id": 1, "type": "translate"})
        reply = proc.recv()
        assert reply["type"] == "error" and "unknown" in reply["error"]

    def test_newline_in_content_stays_one_line_per_reply(self, proc):
        proc.hello()
        reply = proc.edit(1, "line one\nline two. More text follows here.", 2)
        assert len(reply["candidates"]) == 2


class TestShutdown:
    def test_shutdown_message_exits_zero(self, proc):
        proc.hello()
        proc.send({"type": "shutdown"})
        assert proc.p.wait(timeout=10) == 0

    def test_eof_exits_zero(self, proc):
        proc.hello()
        assert proc.close() == 0

    def test_eof_before_handshake_exits_zero(self, proc):
        assert proc.close() == 0
