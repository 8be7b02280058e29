"""Line-delimited JSON wire adapter for external environments.

Requests::

    {"op": "reset", "task": {<task record>}}
    {"op": "step", "action": "<action>"}
    {"op": "score"}

Every reply is ``{"observation": str, "done": bool, "reward": number?}``.
One TCP connection carries one session; requests on a session are serialized.
"""

from __future__ import annotations

import json
import socket
import threading
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from sand.core.errors import EnvTimeoutError, ProtocolError, SandError
from sand.core.tools.log import log
from sand.core.types import Action, Observation, canonicalize
from sand.env.base import EnvBackend, EnvHandle, EnvOutcome
from sand.env.task import TaskRecord, TaskSpec

DEFAULT_TIMEOUT = 30.0


class WireReply(BaseModel):
    model_config = ConfigDict(extra="ignore")

    observation: str
    done: bool
    reward: float | None = Field(default=None, ge=0.0, le=1.0)


def parse_endpoint(endpoint: str) -> tuple[str, int]:
    """Accept ``host:port`` or ``tcp://host:port``."""
    address = endpoint.split("://", 1)[-1].rstrip("/")
    host, sep, port = address.rpartition(":")
    if not sep or not port.isdigit():
        raise ProtocolError(f"endpoint must look like host:port, got '{endpoint}'")
    return host or "127.0.0.1", int(port)


class _Connection:
    """One socket plus a line reader, with a lock so requests never interleave."""

    def __init__(self, endpoint: str, timeout: float) -> None:
        host, port = parse_endpoint(endpoint)
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise EnvTimeoutError(f"environment at {endpoint} unreachable: {exc}") from exc
        self._reader = self._sock.makefile("rb")
        self._lock = threading.Lock()
        self.endpoint = endpoint

    def request(self, payload: dict[str, Any]) -> WireReply:
        line = (json.dumps(payload, ensure_ascii=False) + "\n").encode("utf-8")
        with self._lock:
            try:
                self._sock.sendall(line)
                raw = self._reader.readline()
            except socket.timeout as exc:
                raise EnvTimeoutError(f"environment at {self.endpoint} timed out") from exc
            except OSError as exc:
                raise EnvTimeoutError(f"environment at {self.endpoint} failed: {exc}") from exc
        if not raw:
            raise ProtocolError(f"environment at {self.endpoint} closed the connection")
        try:
            data = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"reply is not a JSON record: {raw[:80]!r}") from exc
        if isinstance(data, dict) and "error" in data:
            raise ProtocolError(f"environment error: {data['error']}")
        try:
            return WireReply.model_validate(data)
        except ValidationError as exc:
            raise ProtocolError(f"malformed reply: {exc.errors()[0]['msg']} ({data!r})") from exc

    def close(self) -> None:
        try:
            self._reader.close()
            self._sock.close()
        except OSError:
            pass


class RemoteEnvHandle(EnvHandle):
    def __init__(self, spec: TaskSpec, connection: _Connection) -> None:
        super().__init__(spec)
        self._conn = connection
        self._final_reward: float | None = None

    def _step(self, action: Action) -> EnvOutcome:
        reply = self._conn.request({"op": "step", "action": action.raw})
        if reply.done and reply.reward is None:
            raise ProtocolError("reply ended the episode without a reward")
        if reply.done:
            self._final_reward = reply.reward
        return EnvOutcome(
            observation=Observation(text=reply.observation),
            done=reply.done,
            reward_if_done=reply.reward if reply.done else None,
        )

    def _score(self) -> float:
        if self._final_reward is not None:
            return self._final_reward
        reply = self._conn.request({"op": "score"})
        if reply.reward is None:
            raise ProtocolError("score reply carries no reward")
        self._final_reward = reply.reward
        return reply.reward

    def close(self) -> None:
        self._conn.close()


class RemoteEnv(EnvBackend):
    """Backend that opens one wire session per episode."""

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT) -> None:
        self.endpoint = endpoint
        self.timeout = timeout

    def reset(self, spec: TaskSpec) -> tuple[RemoteEnvHandle, Observation]:
        connection = _Connection(self.endpoint, self.timeout)
        task = TaskRecord.from_spec(spec).model_dump(mode="json", exclude_none=True)
        try:
            reply = connection.request({"op": "reset", "task": task})
        except SandError:
            connection.close()
            raise
        handle = RemoteEnvHandle(spec, connection)
        observation = Observation(text=reply.observation)
        handle.initial_observation = observation
        return handle, observation


def remote_env_session(
    endpoint: str, spec: TaskSpec, timeout: float = DEFAULT_TIMEOUT
) -> RemoteEnvHandle:
    """Open a session on a remote environment; the reset observation is on the handle."""
    handle, _ = RemoteEnv(endpoint, timeout).reset(spec)
    return handle


class WireServer:
    """
    Serve any :class:`EnvBackend` over the line protocol.

    Each accepted connection is one session handled on its own thread.
    """

    def __init__(self, backend: EnvBackend, host: str = "127.0.0.1", port: int = 0) -> None:
        self.backend = backend
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._sock.bind((host, port))
        self._sock.listen()
        self._sock.settimeout(1.0)
        self.host, self.port = self._sock.getsockname()[:2]
        self._stop_event = threading.Event()
        self.thread = threading.Thread(target=self._serve, daemon=True)

    @property
    def endpoint(self) -> str:
        return f"{self.host}:{self.port}"

    def start(self) -> "WireServer":
        self.thread.start()
        log.debug(f"wire server listening on {self.endpoint}")
        return self

    def stop(self) -> None:
        self._stop_event.set()
        if self.thread.is_alive():
            self.thread.join(timeout=2.0)
        self._sock.close()

    def serve_forever(self) -> None:
        self._serve()

    def __enter__(self) -> "WireServer":
        return self.start()

    def __exit__(self, *exc: object) -> None:
        self.stop()

    def _serve(self) -> None:
        while not self._stop_event.is_set():
            try:
                conn, _ = self._sock.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            threading.Thread(target=self._session, args=(conn,), daemon=True).start()

    def _session(self, conn: socket.socket) -> None:
        handle: EnvHandle | None = None
        try:
            with conn, conn.makefile("rb") as reader:
                for raw in reader:
                    try:
                        request = json.loads(raw.decode("utf-8"))
                        reply, handle = self._dispatch(request, handle)
                    except (SandError, ValueError, KeyError, TypeError) as exc:
                        reply = {"error": str(exc)}
                    conn.sendall((json.dumps(reply, ensure_ascii=False) + "\n").encode("utf-8"))
        except OSError as exc:
            log.debug(f"wire session dropped: {exc}")
        if handle is not None:
            handle.close()

    def _dispatch(
        self, request: dict[str, Any], handle: EnvHandle | None
    ) -> tuple[dict[str, Any], EnvHandle | None]:
        op = request.get("op")
        if op == "reset":
            spec = TaskRecord.model_validate(request["task"]).to_spec()
            handle, observation = self.backend.reset(spec)
            return {"observation": observation.text, "done": False}, handle
        if handle is None:
            raise ValueError(f"'{op}' before 'reset'")
        if op == "step":
            outcome = handle.step(canonicalize(str(request["action"])))
            reply: dict[str, Any] = {"observation": outcome.observation.text, "done": outcome.done}
            if outcome.done:
                reply["reward"] = outcome.reward_if_done
            return reply, handle
        if op == "score":
            if not handle.terminated:
                handle.terminate()
            return {"observation": "", "done": True, "reward": handle.score()}, handle
        raise ValueError(f"unknown op '{op}'")
