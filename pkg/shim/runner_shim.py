#!/usr/bin/env python3
"""In-sandbox candidate runner.

Loads a candidate program, wires stdin/argv or an entry-point invocation,
executes it, and emits a machine-readable outcome trailer as the final line
of stderr:

    <NONCE>|status=<clean|crashed>|exc=<name-or-dash>

The nonce arrives via the SHIM_NONCE environment variable and is removed
from the environment before any candidate code runs, so a candidate cannot
read it and forge a trailer. The trailer is written with os.write directly
to fd 2, so a candidate that closes or replaces sys.stderr cannot suppress
it. The shim itself never raises: every failure mode is encoded in the
trailer, and a missing trailer (process killed) is classified as crashed by
the harness.

Environment contract:
    SHIM_NONCE      required; trailer sentinel prefix
    SHIM_MODE       "script" (default) or "entry"
    SHIM_ENTRY      entry-point function name (entry mode)
    SHIM_ARGS_JSON  JSON list of argv strings; in entry mode each is parsed
                    as a Python literal where possible, else passed as text

In entry mode the return value, when not None, is printed to stdout with
print(). Script mode runs the candidate as __main__ with argv set.
"""

import ast
import json
import os
import sys


def _emit_trailer(nonce, status, exc_name):
    try:
        sys.stdout.flush()
    except Exception:
        pass
    try:
        sys.stderr.flush()
    except Exception:
        pass
    line = "\n%s|status=%s|exc=%s\n" % (nonce, status, exc_name or "-")
    try:
        os.write(2, line.encode("utf-8", errors="replace"))
    except OSError:
        pass


def _disable_network():
    # best-effort: candidates run with process-level isolation only
    try:
        import socket

        def _blocked(*_args, **_kwargs):
            raise OSError("network access is disabled in the sandbox")

        socket.socket = _blocked
        socket.create_connection = _blocked
        socket.getaddrinfo = _blocked
    except Exception:
        pass


def _parse_entry_args(raw_args):
    parsed = []
    for item in raw_args:
        try:
            parsed.append(ast.literal_eval(item))
        except (ValueError, SyntaxError):
            parsed.append(item)
    return parsed


def _run(candidate_path, mode, entry, argv):
    with open(candidate_path, "r", encoding="utf-8", errors="replace") as fh:
        source = fh.read()
    code = compile(source, candidate_path, "exec")
    module_globals = {"__name__": "__main__", "__file__": candidate_path}
    if mode == "entry":
        module_globals["__name__"] = "__candidate__"
        exec(code, module_globals)
        fn = module_globals.get(entry)
        if not callable(fn):
            raise NameError("entry point %r not found" % (entry,))
        result = fn(*_parse_entry_args(argv))
        if result is not None:
            print(result)
    else:
        sys.argv = [candidate_path] + list(argv)
        exec(code, module_globals)


def main():
    nonce = os.environ.pop("SHIM_NONCE", "")
    mode = os.environ.pop("SHIM_MODE", "script")
    entry = os.environ.pop("SHIM_ENTRY", "")
    raw = os.environ.pop("SHIM_ARGS_JSON", "[]")
    try:
        argv = json.loads(raw)
        if not isinstance(argv, list):
            argv = []
    except ValueError:
        argv = []

    if not nonce:
        os.write(2, b"runner shim: SHIM_NONCE not set\n")
        sys.exit(2)
    if len(sys.argv) < 2:
        _emit_trailer(nonce, "crashed", "MissingCandidate")
        return

    _disable_network()
    status, exc_name = "clean", "-"
    try:
        _run(sys.argv[1], mode, entry, argv)
    except SystemExit as exc:
        if exc.code not in (None, 0):
            status, exc_name = "crashed", "SystemExit"
    except BaseException as exc:  # total: any candidate failure -> trailer
        status, exc_name = "crashed", type(exc).__name__
    _emit_trailer(nonce, status, exc_name)


if __name__ == "__main__":
    main()
