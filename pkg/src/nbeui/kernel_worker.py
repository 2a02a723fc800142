"""Interpreter worker process: one long-lived namespace per session.

Speaks a JSON-lines protocol on stdin/stdout. All user output is captured
during execution so the protocol channel stays clean. The widget toolkit
is preloaded into the namespace under its reserved name before any user
code runs.
"""

from __future__ import annotations

import ast
import hashlib
import io
import json
import sys
import time
import traceback
from contextlib import redirect_stderr, redirect_stdout

from .toolkit import RESERVED_TOOLKIT_NAME, Toolkit


def is_syncable(value) -> bool:
    """Sync value domain: null, bool, number, string, and flat lists thereof."""
    if value is None or isinstance(value, (bool, str, int, float)):
        return True
    if isinstance(value, list):
        return all(v is None or isinstance(v, (bool, str, int, float)) for v in value)
    return False


def user_globals(namespace: dict) -> list[str]:
    """Names visible to the user: everything but dunders and the toolkit."""
    return sorted(
        name for name in namespace
        if not (name.startswith("__") and name.endswith("__"))
        and name != RESERVED_TOOLKIT_NAME
    )


def namespace_digest(namespace: dict) -> str:
    hasher = hashlib.sha256()
    for name in user_globals(namespace):
        hasher.update(name.encode("utf-8", "replace"))
        hasher.update(b"=")
        hasher.update(repr(namespace[name]).encode("utf-8", "replace"))
        hasher.update(b"\x00")
    return hasher.hexdigest()


def run_code(code: str, namespace: dict) -> dict:
    """Execute code REPL-style: a trailing expression yields a value repr."""
    stdout, stderr = io.StringIO(), io.StringIO()
    result: dict = {"ok": True, "stdout": "", "stderr": "", "error": None,
                    "value_repr": None}
    started = time.monotonic()
    old_stdin = sys.stdin
    sys.stdin = io.StringIO()  # protocol channel must not leak into user code
    try:
        with redirect_stdout(stdout), redirect_stderr(stderr):
            tree = ast.parse(code, "<cell>", "exec")
            trailing = None
            if tree.body and isinstance(tree.body[-1], ast.Expr):
                trailing = ast.Expression(tree.body.pop().value)
            exec(compile(tree, "<cell>", "exec"), namespace)
            if trailing is not None:
                value = eval(compile(trailing, "<cell>", "eval"), namespace)
                if value is not None:
                    result["value_repr"] = repr(value)
    except BaseException as exc:  # noqa: BLE001 - report everything, even SystemExit
        result["ok"] = False
        tb = exc.__traceback__.tb_next if exc.__traceback__ else None  # drop the worker frame
        result["error"] = {
            "type": type(exc).__name__,
            "message": str(exc),
            "traceback": "".join(traceback.format_exception(type(exc), exc, tb)),
        }
    finally:
        sys.stdin = old_stdin
    result["stdout"] = stdout.getvalue()
    result["stderr"] = stderr.getvalue()
    result["duration_ms"] = int((time.monotonic() - started) * 1000)
    return result


def handle(request: dict, namespace: dict) -> dict:
    op = request.get("op")
    if op == "ping":
        return {"ok": True}
    if op == "execute":
        return run_code(request.get("code", ""), namespace)
    if op == "get_global":
        name = request["name"]
        if name not in namespace:
            return {"ok": False, "error": {"type": "UnknownGlobal", "message": name}}
        value = namespace[name]
        if not is_syncable(value):
            return {"ok": False, "error": {"type": "UnrepresentableValue",
                                           "message": f"{name} holds {type(value).__name__}"}}
        return {"ok": True, "value": value}
    if op == "set_global":
        name, value = request["name"], request["value"]
        if not is_syncable(value):
            return {"ok": False, "error": {"type": "UnrepresentableValue",
                                           "message": f"value for {name}"}}
        namespace[name] = value
        return {"ok": True}
    if op == "digest":
        return {"ok": True, "digest": namespace_digest(namespace)}
    if op == "eval_json":
        # Internal channel for toolkit queries; result must be JSON-encodable.
        try:
            with redirect_stdout(io.StringIO()), redirect_stderr(io.StringIO()):
                value = eval(request["expr"], namespace)  # noqa: S307
            json.dumps(value)
            return {"ok": True, "value": value}
        except Exception as exc:  # noqa: BLE001
            return {"ok": False, "error": {"type": type(exc).__name__,
                                           "message": str(exc),
                                           "traceback": traceback.format_exc()}}
    return {"ok": False, "error": {"type": "UnknownOp", "message": repr(op)}}


def main() -> None:
    namespace: dict = {"__name__": "__main__", "__builtins__": __builtins__}
    namespace[RESERVED_TOOLKIT_NAME] = Toolkit(namespace)
    stdin = sys.stdin
    stdout = sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError:
            continue
        if request.get("op") == "exit":
            break
        response = handle(request, namespace)
        stdout.write(json.dumps(response) + "\n")
        stdout.flush()


if __name__ == "__main__":
    main()
