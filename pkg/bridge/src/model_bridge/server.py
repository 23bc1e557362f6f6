"""Wire protocol v1 server: newline-delimited JSON over stdio or TCP.

A session starts with a hello frame carrying the protocol version and the
environment name; a mismatch is answered with an error frame and the
connection is closed. After hello_ok the server answers strictly sequential
subgoals / value / policy requests, echoing each request's id. Per-request
problems (malformed JSON, unknown type, k mismatch, unknown policy pair) are
answered with an error frame and the connection stays open; end of stream
shuts the session down gracefully. Every response is one JSON object
followed by exactly one newline, flushed immediately.

Unseen states degrade in band: an empty candidate list and the model's
default value. Candidates go out in fitted order, which is probability
descending. TCP mode serves each connection in its own thread with an
independent session.
"""

from __future__ import annotations

import json
import socketserver
import sys
from typing import Callable

from .model import TabularModel

PROTOCOL_VERSION = 1


def _error(rid: int | None, message: str) -> dict:
    return {"type": "error", "id": rid, "message": message}


def _parse_frame(line: str) -> dict | None:
    try:
        frame = json.loads(line)
    except json.JSONDecodeError:
        return None
    return frame if isinstance(frame, dict) else None


def hello_response(env_name: str, line: str) -> tuple[dict, bool]:
    """First-frame handler; returns (reply, session may continue)."""
    frame = _parse_frame(line)
    if frame is None:
        return _error(None, "request is not a JSON object"), False
    if frame.get("type") != "hello":
        return _error(None, "expected a hello frame first"), False
    version = frame.get("version")
    if version != PROTOCOL_VERSION:
        return (
            _error(None, f"unsupported protocol version {version!r}, server speaks {PROTOCOL_VERSION}"),
            False,
        )
    env = frame.get("env")
    if env != env_name:
        return _error(None, f"server hosts env {env_name!r}, not {env!r}"), False
    return {"type": "hello_ok", "version": PROTOCOL_VERSION}, True


def request_response(model: TabularModel, line: str) -> dict:
    frame = _parse_frame(line)
    if frame is None:
        return _error(None, "request is not a JSON object")
    rid = frame.get("id")
    if not isinstance(rid, int) or isinstance(rid, bool):
        return _error(None, "missing or non-integer id")
    ftype = frame.get("type")

    if ftype == "subgoals":
        state = frame.get("state")
        if not isinstance(state, str):
            return _error(rid, "state must be a string")
        k = frame.get("k")
        if not isinstance(k, int) or isinstance(k, bool):
            return _error(rid, "k must be an integer")
        if k != model.k:
            return _error(rid, f"model is fitted for k={model.k}, got k={k}")
        max_candidates = frame.get("max_candidates")
        if (
            not isinstance(max_candidates, int)
            or isinstance(max_candidates, bool)
            or max_candidates < 0
        ):
            return _error(rid, "max_candidates must be a non-negative integer")
        rows = model.subgoals(state, max_candidates)
        return {
            "type": "subgoals_ok",
            "id": rid,
            "candidates": [{"state": s, "prob": p} for s, p in rows],
        }

    if ftype == "value":
        state = frame.get("state")
        if not isinstance(state, str):
            return _error(rid, "state must be a string")
        return {"type": "value_ok", "id": rid, "value": model.value(state)}

    if ftype == "policy":
        state = frame.get("state")
        subgoal = frame.get("subgoal")
        if not isinstance(state, str) or not isinstance(subgoal, str):
            return _error(rid, "state and subgoal must be strings")
        token = model.policy(state, subgoal)
        if token is None:
            return _error(rid, "no action recorded for that state/subgoal pair")
        return {"type": "policy_ok", "id": rid, "action": token}

    return _error(rid, f"unknown request type {ftype!r}")


def run_session(
    model: TabularModel,
    env_name: str,
    readline: Callable[[], str | None],
    writeline: Callable[[str], None],
) -> None:
    """Drive one connection: hello phase, then the request loop until EOF."""
    line = readline()
    if line is None:
        return
    reply, accepted = hello_response(env_name, line)
    writeline(json.dumps(reply))
    if not accepted:
        return
    while True:
        line = readline()
        if line is None:
            return
        writeline(json.dumps(request_response(model, line)))


def serve_stdio(model: TabularModel, env_name: str) -> None:
    stdin = sys.stdin
    stdout = sys.stdout

    def readline() -> str | None:
        line = stdin.readline()
        return None if line == "" else line

    def writeline(text: str) -> None:
        stdout.write(text + "\n")
        stdout.flush()

    try:
        run_session(model, env_name, readline, writeline)
    except BrokenPipeError:
        pass


class _ThreadingTCPServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


def make_tcp_server(
    model: TabularModel, env_name: str, host: str = "127.0.0.1", port: int = 0
) -> socketserver.ThreadingTCPServer:
    """Build (but do not start) a threaded TCP server; port 0 picks a free one."""

    class Handler(socketserver.StreamRequestHandler):
        def handle(self) -> None:
            def readline() -> str | None:
                raw = self.rfile.readline()
                return raw.decode("utf-8") if raw else None

            def writeline(text: str) -> None:
                self.wfile.write(text.encode("utf-8") + b"\n")
                self.wfile.flush()

            try:
                run_session(model, env_name, readline, writeline)
            except (BrokenPipeError, ConnectionResetError):
                pass

    return _ThreadingTCPServer((host, port), Handler)


def serve_tcp(
    model: TabularModel, env_name: str, host: str = "127.0.0.1", port: int = 0
) -> None:
    with make_tcp_server(model, env_name, host, port) as server:
        bound = server.server_address
        print(f"serving {env_name} on {bound[0]}:{bound[1]}", file=sys.stderr)
        server.serve_forever()
