"""Client for serving subgoal/value/policy queries over a wire protocol.

Protocol v1: newline-delimited UTF-8 JSON objects, one per line, over a
child process's standard streams or a TCP socket. The client sends a hello
carrying the protocol version and environment name, then issues strictly
sequential requests (one in flight); every request carries an id the server
echoes back. Responses are validated before use: candidate lists must be
sorted by probability descending, probabilities must lie in [0, 1] and sum
to at most 1, and state strings must stay within the environment's token
vocabulary (checked where the bundle parses them).

Failure taxonomy, each a distinct exception: timeout, malformed or invalid
response, handshake rejection / version mismatch, and a server-reported
error frame. The provider bundle maps server errors gracefully: a failed
subgoals query yields no proposals and a failed policy query marks the
subgoal unreachable, while value failures propagate (a planner cannot order
its frontier without values).
"""

from __future__ import annotations

import json
import os
import selectors
import shlex
import socket
import subprocess
import time
from typing import Sequence

from .types import Environment, ProviderBundle, SubgoalProposal

__all__ = [
    "PROTOCOL_VERSION",
    "BridgeError",
    "BridgeTimeout",
    "BridgeProtocolError",
    "BridgeHandshakeError",
    "BridgeServerError",
    "StdioTransport",
    "TcpTransport",
    "BridgeClient",
    "stdio_client",
    "tcp_client",
    "validate_candidates",
    "make_bridge_bundle",
]

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 10.0


class BridgeError(Exception):
    """Base class for all bridge failures."""


class BridgeTimeout(BridgeError):
    """No complete response line arrived within the deadline."""


class BridgeProtocolError(BridgeError):
    """Malformed frame, id mismatch, invalid candidates, or closed stream."""


class BridgeHandshakeError(BridgeError):
    """Server rejected the hello (version or environment mismatch)."""


class BridgeServerError(BridgeError):
    """Server answered a request with an error frame."""


class _LineChannel:
    """Newline framing with deadlines over a readable/writable fd pair."""

    def __init__(self, read_fd: int, write_file) -> None:
        self._read_fd = read_fd
        self._write_file = write_file
        self._buf = bytearray()
        os.set_blocking(read_fd, False)
        self._selector = selectors.DefaultSelector()
        self._selector.register(read_fd, selectors.EVENT_READ)

    def send_line(self, text: str) -> None:
        self._write_file.write(text.encode("utf-8") + b"\n")
        self._write_file.flush()

    def recv_line(self, timeout: float) -> str:
        deadline = time.monotonic() + timeout
        while True:
            newline = self._buf.find(b"\n")
            if newline >= 0:
                line = self._buf[:newline]
                del self._buf[: newline + 1]
                return line.decode("utf-8")
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise BridgeTimeout(f"no response within {timeout:.1f}s")
            if not self._selector.select(remaining):
                continue
            chunk = os.read(self._read_fd, 65536)
            if not chunk:
                raise BridgeProtocolError("connection closed by server")
            self._buf.extend(chunk)

    def close(self) -> None:
        self._selector.close()


class StdioTransport:
    """Spawns the server as a child process and talks over its std streams."""

    def __init__(self, command: Sequence[str] | str) -> None:
        if isinstance(command, str):
            command = shlex.split(command)
        self._proc = subprocess.Popen(
            list(command), stdin=subprocess.PIPE, stdout=subprocess.PIPE
        )
        assert self._proc.stdin is not None and self._proc.stdout is not None
        self._channel = _LineChannel(self._proc.stdout.fileno(), self._proc.stdin)

    def send_line(self, text: str) -> None:
        try:
            self._channel.send_line(text)
        except (BrokenPipeError, ValueError) as exc:
            raise BridgeProtocolError(f"server process gone: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        return self._channel.recv_line(timeout)

    def close(self) -> None:
        self._channel.close()
        if self._proc.stdin is not None:
            try:
                self._proc.stdin.close()
            except BrokenPipeError:
                pass
        try:
            self._proc.wait(timeout=5.0)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()


class TcpTransport:
    """Connects to a server listening on host:port."""

    def __init__(self, host: str, port: int, connect_timeout: float = 10.0) -> None:
        self._sock = socket.create_connection((host, port), timeout=connect_timeout)
        self._file = self._sock.makefile("wb")
        self._channel = _LineChannel(self._sock.fileno(), self._file)

    def send_line(self, text: str) -> None:
        try:
            self._channel.send_line(text)
        except (BrokenPipeError, ConnectionResetError) as exc:
            raise BridgeProtocolError(f"server connection gone: {exc}") from exc

    def recv_line(self, timeout: float) -> str:
        return self._channel.recv_line(timeout)

    def close(self) -> None:
        self._channel.close()
        try:
            self._file.close()
        except OSError:
            pass
        self._sock.close()


def validate_candidates(candidates: object) -> list[tuple[str, float]]:
    """Checks shape, probability bounds, sum, and descending order."""
    if not isinstance(candidates, list):
        raise BridgeProtocolError("candidates must be a list")
    out: list[tuple[str, float]] = []
    total = 0.0
    prev = 1.0
    for item in candidates:
        if not isinstance(item, dict) or "state" not in item or "prob" not in item:
            raise BridgeProtocolError(f"bad candidate entry: {item!r}")
        state, prob = item["state"], item["prob"]
        if not isinstance(state, str):
            raise BridgeProtocolError("candidate state must be a string")
        if not isinstance(prob, (int, float)) or isinstance(prob, bool):
            raise BridgeProtocolError("candidate prob must be a number")
        prob = float(prob)
        if not 0.0 <= prob <= 1.0:
            raise BridgeProtocolError(f"candidate prob {prob} outside [0, 1]")
        if prob > prev:
            raise BridgeProtocolError("candidates not sorted by prob descending")
        prev = prob
        total += prob
        out.append((state, prob))
    if total > 1.0 + 1e-9:
        raise BridgeProtocolError(f"candidate probs sum to {total} > 1")
    return out


class BridgeClient:
    """Strict request/response client for protocol v1.

    One request in flight at a time; a timeout or protocol error leaves the
    connection in an undefined state and the client should be closed.
    """

    def __init__(
        self,
        transport,
        env_name: str,
        *,
        version: int = PROTOCOL_VERSION,
        timeout: float = DEFAULT_TIMEOUT,
    ) -> None:
        self._transport = transport
        self.env_name = env_name
        self.version = version
        self.timeout = timeout
        self._next_id = 1
        self._ready = False

    def handshake(self) -> None:
        self._send({"type": "hello", "version": self.version, "env": self.env_name})
        reply = self._recv()
        kind = reply.get("type")
        if kind == "error":
            raise BridgeHandshakeError(str(reply.get("message", "hello rejected")))
        if kind != "hello_ok":
            raise BridgeProtocolError(f"expected hello_ok, got {kind!r}")
        if reply.get("version") != self.version:
            raise BridgeHandshakeError(
                f"server speaks version {reply.get('version')!r}, "
                f"client speaks {self.version}"
            )
        self._ready = True

    def subgoals(self, state: str, k: int, max_candidates: int) -> list[tuple[str, float]]:
        reply = self._request(
            {"type": "subgoals", "state": state, "k": k, "max_candidates": max_candidates},
            "subgoals_ok",
        )
        return validate_candidates(reply.get("candidates"))

    def value(self, state: str) -> float:
        reply = self._request({"type": "value", "state": state}, "value_ok")
        val = reply.get("value")
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise BridgeProtocolError(f"value_ok carries non-number: {val!r}")
        return float(val)

    def policy(self, state: str, subgoal: str) -> str:
        reply = self._request(
            {"type": "policy", "state": state, "subgoal": subgoal}, "policy_ok"
        )
        action = reply.get("action")
        if not isinstance(action, str):
            raise BridgeProtocolError(f"policy_ok carries non-string action: {action!r}")
        return action

    def close(self) -> None:
        self._transport.close()

    def __enter__(self) -> "BridgeClient":
        if not self._ready:
            self.handshake()
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def _request(self, frame: dict, expect: str) -> dict:
        if not self._ready:
            raise BridgeError("handshake() must complete before queries")
        frame["id"] = request_id = self._next_id
        self._next_id += 1
        self._send(frame)
        reply = self._recv()
        if reply.get("id") != request_id:
            raise BridgeProtocolError(
                f"response id {reply.get('id')!r} does not echo request id {request_id}"
            )
        kind = reply.get("type")
        if kind == "error":
            raise BridgeServerError(str(reply.get("message", "unspecified error")))
        if kind != expect:
            raise BridgeProtocolError(f"expected {expect}, got {kind!r}")
        return reply

    def _send(self, frame: dict) -> None:
        self._transport.send_line(json.dumps(frame))

    def _recv(self) -> dict:
        line = self._transport.recv_line(self.timeout)
        try:
            frame = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BridgeProtocolError(f"response is not JSON: {line!r}") from exc
        if not isinstance(frame, dict):
            raise BridgeProtocolError(f"response is not an object: {line!r}")
        return frame


def stdio_client(command: Sequence[str] | str, env_name: str, **kwargs) -> BridgeClient:
    return BridgeClient(StdioTransport(command), env_name, **kwargs)


def tcp_client(host: str, port: int, env_name: str, **kwargs) -> BridgeClient:
    return BridgeClient(TcpTransport(host, port), env_name, **kwargs)


def make_bridge_bundle(client: BridgeClient, env: Environment, k: int) -> ProviderBundle:
    """Adapts a connected client to the provider bundle interface.

    States cross the wire in the environment's text serialization; incoming
    candidate states are parsed (which enforces the token vocabulary) and a
    candidate that fails to parse is a protocol error. Server-side errors on
    subgoals/policy degrade to empty proposals / no action.
    """

    def generator(state, count: int) -> list[SubgoalProposal]:
        try:
            pairs = client.subgoals(env.serialize(state), k, count)
        except BridgeServerError:
            return []
        proposals = []
        for text, prob in pairs:
            try:
                parsed = env.parse(text)
            except ValueError as exc:
                raise BridgeProtocolError(f"unparseable candidate state: {exc}") from exc
            proposals.append(SubgoalProposal(parsed, prob))
        return proposals

    def value(state) -> float:
        return client.value(env.serialize(state))

    def policy(state, subgoal):
        try:
            token = client.policy(env.serialize(state), env.serialize(subgoal))
        except BridgeServerError:
            return None
        try:
            return env.parse_action(token)
        except ValueError as exc:
            raise BridgeProtocolError(f"unknown action token: {exc}") from exc

    return ProviderBundle(generator=generator, value=value, policy=policy)
