"""JSON-lines environment service.

Exposes one environment instance per session over a line-delimited JSON
protocol, so external trainers in any language can drive episodes.  One
request per line, one response per line, strictly alternating.  See
PROTOCOL.md at the repository root for the message schema and a worked
transcript.

Error replies carry ``{"ok": false, "error": {"code", "message"}}`` with
code PROTOCOL (malformed or out-of-order requests) or CONFIG (invalid
override values); the session survives both.
"""

from __future__ import annotations

import json
import socketserver
import sys
from typing import IO

from .env import Action, EnvConfig, PipeEnv
from .errors import ConfigError

PROTOCOL_VERSION = 1


def _error(code: str, message: str) -> dict:
    return {"ok": False, "error": {"code": code, "message": message}}


class EnvSession:
    """Protocol state machine for one connection.

    ``handle`` maps a request object to a response object; the transport
    layer owns framing.  ``closed`` flips once a close request was served.
    """

    def __init__(self, cfg: EnvConfig):
        self.cfg = cfg
        self.env = PipeEnv(cfg)
        self.ready = False          # a reset has happened
        self.closed = False

    def handle_line(self, line: str) -> dict:
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            return _error("PROTOCOL", f"malformed JSON: {exc}")
        if not isinstance(request, dict):
            return _error("PROTOCOL", "request must be a JSON object")
        return self.handle(request)

    def handle(self, request: dict) -> dict:
        op = request.get("op")
        if op == "spec":
            return self._spec()
        if op == "reset":
            return self._reset(request)
        if op == "step":
            return self._step(request)
        if op == "close":
            self.closed = True
            return {"ok": True}
        return _error("PROTOCOL", f"unknown op {op!r}")

    def _spec(self) -> dict:
        cfg = self.cfg
        return {
            "ok": True,
            "protocol": PROTOCOL_VERSION,
            "obs_dim": 13,
            "n_actions": 3,
            "decision_interval": cfg.decision_interval,
            "horizon": cfg.horizon,
            "n_segments": cfg.n_segments,
            "dynamics_family": cfg.dynamics.family.value,
            "prognosis_family": cfg.prognosis.family.value,
        }

    def _reset(self, request: dict) -> dict:
        seed = request.get("seed")
        start_age = request.get("start_age")
        if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
            return _error("CONFIG", "seed must be an integer")
        if start_age is not None:
            if not isinstance(start_age, (int, float)) or isinstance(start_age, bool):
                return _error("CONFIG", "start_age must be a number")
            if start_age < 0:
                return _error("CONFIG", "start_age must be nonnegative")
        try:
            self.env.reset(seed=seed, start_age=start_age)
        except ConfigError as exc:
            return _error("CONFIG", str(exc))
        self.ready = True
        return {
            "ok": True,
            "observation": [float(x) for x in self.env.observe()],
            "info": {"age": float(self.env.state.age), "elapsed": 0.0},
        }

    def _step(self, request: dict) -> dict:
        if not self.ready:
            return _error("PROTOCOL", "step before reset")
        if self.env.done:
            return _error("PROTOCOL", "episode finished; reset required")
        action = request.get("action")
        if isinstance(action, bool) or action not in (0, 1, 2):
            return _error("PROTOCOL", "action must be 0, 1 or 2")
        state, breakdown, done = self.env.step(Action(action))
        return {
            "ok": True,
            "observation": [float(x) for x in self.env.observe()],
            "reward": float(breakdown.r),
            "done": bool(done),
            "info": {
                "c_m": float(breakdown.c_m),
                "c_r": float(breakdown.c_r),
                "c_f": float(breakdown.c_f),
                "age": float(state.age),
                "elapsed": float(state.elapsed),
            },
        }


def serve_stream(infile: IO[str], outfile: IO[str], cfg: EnvConfig) -> None:
    """Run one session over text streams (used for stdio transport)."""
    session = EnvSession(cfg)
    for line in infile:
        if not line.strip():
            continue
        response = session.handle_line(line)
        outfile.write(json.dumps(response) + "\n")
        outfile.flush()
        if session.closed:
            break


class _SessionHandler(socketserver.StreamRequestHandler):
    def handle(self):
        session = EnvSession(self.server.env_config)
        for raw in self.rfile:
            line = raw.decode("utf-8", errors="replace")
            if not line.strip():
                continue
            response = session.handle_line(line)
            self.wfile.write((json.dumps(response) + "\n").encode("utf-8"))
            if session.closed:
                break


class EnvServer(socketserver.ThreadingTCPServer):
    """TCP server; every connection gets its own environment instance.

    Sessions share only the immutable degradation models (and their
    read-safe caches) baked into the config.
    """

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, cfg: EnvConfig, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _SessionHandler)
        self.env_config = cfg

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"


def serve_stdio(cfg: EnvConfig) -> None:
    serve_stream(sys.stdin, sys.stdout, cfg)
