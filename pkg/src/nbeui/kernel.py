"""Kernel sessions: isolated long-lived interpreter processes.

One subprocess per session, JSON-lines over pipes. Requests on a session
are serialized through a single execution lane; get/set of widget-bound
globals interleave between executions but never during one.
"""

from __future__ import annotations

import itertools
import json
import logging
import os
import queue
import subprocess
import sys
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (KernelDead, KernelTimeout, SpawnFailure, UnknownGlobal,
                     UnrepresentableValue)

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 30.0
# Caller is never blocked past timeout_s plus this grace.
TIMEOUT_GRACE_S = 2.0
# Environment passed through to kernel processes unless extended by config.
BASE_ENV_ALLOWLIST = ("PATH", "HOME", "LANG", "LC_ALL", "TMPDIR", "PYTHONHASHSEED")

STARTING = "starting"
IDLE = "idle"
BUSY = "busy"
DEAD = "dead"

_session_counter = itertools.count(1)


@dataclass
class KernelConfig:
    workdir: str | None = None
    timeout_s: float = DEFAULT_TIMEOUT_S
    memory_cap_mb: int | None = None
    env_allowlist: tuple[str, ...] = ()


@dataclass
class ExecResult:
    ok: bool
    stdout: str
    stderr: str
    error: dict | None = None
    value_repr: str | None = None
    duration_ms: int = 0


@dataclass
class CompileDiagnostic:
    line: int | None
    message: str


def compile_check(code: str) -> CompileDiagnostic | None:
    """Pure syntax validation: no execution, no namespace change.

    Returns None when the code compiles, else a diagnostic.
    """
    try:
        compile(code, "<cell>", "exec")
        return None
    except SyntaxError as exc:
        return CompileDiagnostic(line=exc.lineno, message=exc.msg or "syntax error")
    except ValueError as exc:  # e.g. source containing null bytes
        return CompileDiagnostic(line=None, message=str(exc))


class KernelSession:
    """Handle to one worker process. Use :func:`start_session` to create."""

    def __init__(self, config: KernelConfig, process: subprocess.Popen):
        self.session_id = f"kernel-{next(_session_counter)}"
        self.config = config
        self.state = STARTING
        self._process = process
        self._lock = threading.Lock()
        self._responses: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        for line in self._process.stdout:
            self._responses.put(line)
        self._responses.put(None)  # EOF sentinel

    def _kill(self) -> None:
        self.state = DEAD
        if self._process.poll() is None:
            self._process.kill()
        try:
            self._process.wait(timeout=5)
        except subprocess.TimeoutExpired:  # pragma: no cover - kill is forceful
            logger.warning("kernel %s did not die after kill", self.session_id)

    def _request(self, payload: dict, timeout: float) -> dict:
        with self._lock:
            if self.state == DEAD:
                raise KernelDead(f"session {self.session_id} is dead")
            self.state = BUSY
            try:
                try:
                    self._process.stdin.write(json.dumps(payload) + "\n")
                    self._process.stdin.flush()
                except (BrokenPipeError, OSError) as exc:
                    self._kill()
                    raise KernelDead(f"kernel process gone: {exc}") from exc
                try:
                    line = self._responses.get(timeout=timeout)
                except queue.Empty:
                    self._kill()
                    raise KernelTimeout(
                        f"no response within {timeout:.1f}s; kernel killed") from None
                if line is None:
                    self._kill()
                    raise KernelDead("kernel process exited unexpectedly")
                return json.loads(line)
            finally:
                if self.state == BUSY:
                    self.state = IDLE

    # -- operations -----------------------------------------------------------

    def execute(self, code: str, timeout_s: float | None = None) -> ExecResult:
        timeout = timeout_s if timeout_s is not None else self.config.timeout_s
        # Wait half the grace beyond the nominal timeout so a run finishing
        # right at the deadline still returns its result.
        response = self._request({"op": "execute", "code": code},
                                 timeout=timeout + TIMEOUT_GRACE_S / 2)
        return ExecResult(
            ok=response["ok"],
            stdout=response.get("stdout", ""),
            stderr=response.get("stderr", ""),
            error=response.get("error"),
            value_repr=response.get("value_repr"),
            duration_ms=response.get("duration_ms", 0),
        )

    def get_global(self, name: str):
        response = self._request({"op": "get_global", "name": name},
                                 timeout=self.config.timeout_s)
        if response["ok"]:
            return response["value"]
        self._raise_global_error(response["error"])

    def set_global(self, name: str, value) -> None:
        response = self._request({"op": "set_global", "name": name, "value": value},
                                 timeout=self.config.timeout_s)
        if not response["ok"]:
            self._raise_global_error(response["error"])

    @staticmethod
    def _raise_global_error(error: dict):
        if error["type"] == "UnknownGlobal":
            raise UnknownGlobal(error["message"])
        if error["type"] == "UnrepresentableValue":
            raise UnrepresentableValue(error["message"])
        raise KernelDead(f"unexpected kernel error: {error}")  # pragma: no cover

    def eval_json(self, expr: str):
        """Evaluate an expression kernel-side; result must be JSON-encodable.

        Internal plumbing for toolkit queries, not a user-facing operation.
        """
        response = self._request({"op": "eval_json", "expr": expr},
                                 timeout=self.config.timeout_s)
        if response["ok"]:
            return response["value"]
        error = response["error"]
        raise KernelDead(f"kernel eval failed: {error['type']}: {error['message']}")

    def namespace_digest(self) -> str:
        return self._request({"op": "digest"}, timeout=self.config.timeout_s)["digest"]

    def shutdown(self) -> None:
        """Idempotent; the worker process is gone within five seconds."""
        if self.state == DEAD:
            return
        self.state = DEAD
        try:
            self._process.stdin.write(json.dumps({"op": "exit"}) + "\n")
            self._process.stdin.flush()
        except (BrokenPipeError, OSError):
            pass
        try:
            self._process.wait(timeout=2)
        except subprocess.TimeoutExpired:
            self._process.kill()
            self._process.wait(timeout=3)


def _worker_env(config: KernelConfig) -> dict:
    env = {}
    for key in BASE_ENV_ALLOWLIST + tuple(config.env_allowlist):
        if key in os.environ:
            env[key] = os.environ[key]
    # Make the package importable in the worker even without installation.
    src_dir = str(Path(__file__).resolve().parents[1])
    existing = os.environ.get("PYTHONPATH", "")
    env["PYTHONPATH"] = src_dir + (os.pathsep + existing if existing else "")
    return env


def _limit_memory(cap_mb: int):
    def apply():  # pragma: no cover - runs in the child
        import resource
        cap = cap_mb * 1024 * 1024
        resource.setrlimit(resource.RLIMIT_AS, (cap, cap))
    return apply


def start_session(config: KernelConfig | None = None) -> KernelSession:
    """Spawn a fresh worker: empty user namespace, toolkit preloaded,
    working directory set for the notebook's files."""
    config = config or KernelConfig()
    preexec = _limit_memory(config.memory_cap_mb) if config.memory_cap_mb else None
    try:
        process = subprocess.Popen(
            [sys.executable, "-u", "-m", "nbeui.kernel_worker"],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            cwd=config.workdir,
            env=_worker_env(config),
            text=True,
            preexec_fn=preexec,
        )
    except OSError as exc:
        raise SpawnFailure(f"could not start kernel process: {exc}") from exc
    session = KernelSession(config, process)
    try:
        session._request({"op": "ping"}, timeout=30.0)
    except (KernelDead, KernelTimeout) as exc:
        session.shutdown()
        raise SpawnFailure(f"kernel did not come up: {exc}") from exc
    session.state = IDLE
    logger.debug("kernel %s started (workdir=%s)", session.session_id, config.workdir)
    return session
