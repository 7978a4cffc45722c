"""Sandboxed unit-test execution for candidate programs.

Every test runs in a fresh temporary working directory inside an interpreter
subprocess mediated by the runner shim; the harness never evaluates candidate
code in-process. Fixtures are re-materialized per test (a fresh sqlite
database file per test, its path exposed via the TASK_DB_PATH environment
variable). Resource limits are enforced per test; a violated limit yields a
crashed-or-timeout outcome, never a harness hang.

Isolation is process-level (own working directory, resource limits, network
guard in the shim); container-grade hardening is out of scope and this module
documents that trust boundary.
"""

from __future__ import annotations

import json
import os
import resource
import secrets
import signal
import sqlite3
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from rewardengine.frontend.syntax import SyntaxFailure, parse
from rewardengine.tasks import CandidateProgram, Fixture, TaskSpec, UnitTest

DB_PATH_ENV = "TASK_DB_PATH"
SHIM_PATH_ENV = "REWARDENGINE_SHIM"

PASSED = "passed"
FAILED = "failed"
CRASHED = "crashed"
TIMEOUT = "timeout"


class HarnessError(RuntimeError):
    """Infrastructure failure (sandbox or shim unavailable), distinguished
    from any candidate failure."""


def default_shim_path() -> Path:
    env = os.environ.get(SHIM_PATH_ENV)
    if env:
        return Path(env)
    return Path(__file__).resolve().parents[2] / "shim" / "runner_shim.py"


@dataclass(frozen=True)
class ResourceLimits:
    wall_timeout_ms: int | None = None       # None: take each test's timeout
    max_output_bytes: int = 1_000_000
    max_memory_bytes: int | None = 1 << 30   # best-effort, RLIMIT_AS
    workers: int = 4
    shim_path: Path | None = None

    def resolved_shim(self) -> Path:
        return Path(self.shim_path) if self.shim_path else default_shim_path()


@dataclass(frozen=True)
class TestOutcome:
    test_id: str
    status: str
    observed_stdout: str
    stderr_excerpt: str
    duration_ms: float

    def to_record(self) -> dict:
        return {
            "test_id": self.test_id,
            "status": self.status,
            "observed_stdout": self.observed_stdout,
            "stderr_excerpt": self.stderr_excerpt,
            "duration_ms": round(self.duration_ms, 3),
        }


@dataclass(frozen=True)
class ExecutionResult:
    outcomes: tuple[TestOutcome, ...]
    runnable: bool


def normalize_output(text: str) -> str:
    """Canonical form: per-line trailing whitespace stripped, trailing blank
    lines and the final newline ignored. No numeric fuzzy matching."""
    lines = [line.rstrip() for line in text.split("\n")]
    while lines and lines[-1] == "":
        lines.pop()
    return "\n".join(lines)


def compare_output(observed: str, expected: str) -> bool:
    return normalize_output(observed) == normalize_output(expected)


def _materialize_fixtures(fixtures: tuple[Fixture, ...], workdir: Path) -> dict[str, str]:
    env = {}
    for fixture in fixtures:
        if fixture.kind == "sqlite_script":
            db_path = workdir / f"{fixture.fixture_id}.sqlite3"
            conn = sqlite3.connect(db_path)
            try:
                conn.executescript(str(fixture.payload))
                conn.commit()
            finally:
                conn.close()
            env[DB_PATH_ENV] = str(db_path)
        elif fixture.kind == "file_tree":
            for rel, content in fixture.path_map.items():
                target = workdir / rel
                if not target.resolve().is_relative_to(workdir.resolve()):
                    raise HarnessError(f"fixture path escapes sandbox: {rel}")
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_text(content, encoding="utf-8")
    return env


def _limit_resources(max_memory_bytes: int | None):
    def apply():
        os.setsid()
        if max_memory_bytes:
            try:
                resource.setrlimit(resource.RLIMIT_AS, (max_memory_bytes, max_memory_bytes))
            except (ValueError, OSError):
                pass
        try:
            resource.setrlimit(resource.RLIMIT_NPROC, (256, 256))
        except (ValueError, OSError):
            pass
    return apply


def _parse_trailer(stderr_text: str, nonce: str) -> tuple[str, str] | None:
    """Last nonce-prefixed line wins; candidate output without the nonce can
    never spoof a trailer."""
    for line in reversed(stderr_text.splitlines()):
        if line.startswith(nonce + "|"):
            fields = line.split("|")
            status, exc = "crashed", "-"
            for part in fields[1:]:
                if part.startswith("status="):
                    status = part[len("status="):]
                elif part.startswith("exc="):
                    exc = part[len("exc="):]
            if status not in ("clean", "crashed"):
                status = "crashed"
            return status, exc
    return None


def _run_one_test(candidate_source: str, task: TaskSpec, test: UnitTest,
                  limits: ResourceLimits) -> TestOutcome:
    shim = limits.resolved_shim()
    if not shim.is_file():
        raise HarnessError(f"runner shim not found at {shim}")
    timeout_ms = limits.wall_timeout_ms or test.timeout_ms
    nonce = secrets.token_hex(16)
    start = time.monotonic()
    try:
        tmp_ctx = tempfile.TemporaryDirectory(prefix="rewardengine-")
    except OSError as exc:
        raise HarnessError(f"cannot create sandbox directory: {exc}") from exc
    with tmp_ctx as tmp:
        workdir = Path(tmp)
        candidate_path = workdir / "candidate.py"
        candidate_path.write_text(candidate_source, encoding="utf-8")
        env = {
            "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
            "LANG": "C.UTF-8",
            "SHIM_NONCE": nonce,
            "SHIM_MODE": "entry" if task.entry_point else "script",
            "SHIM_ENTRY": task.entry_point or "",
            "SHIM_ARGS_JSON": json.dumps(list(test.argv)),
        }
        env.update(_materialize_fixtures(task.fixtures, workdir))
        try:
            proc = subprocess.Popen(
                [sys.executable, str(shim), str(candidate_path)],
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                cwd=workdir,
                env=env,
                preexec_fn=_limit_resources(limits.max_memory_bytes),
            )
        except OSError as exc:
            raise HarnessError(f"cannot spawn sandbox process: {exc}") from exc
        timed_out = False
        try:
            out_b, err_b = proc.communicate(
                input=test.stdin_payload.encode("utf-8"),
                timeout=timeout_ms / 1000.0,
            )
        except subprocess.TimeoutExpired:
            timed_out = True
            try:
                os.killpg(proc.pid, signal.SIGKILL)
            except (ProcessLookupError, PermissionError):
                proc.kill()
            out_b, err_b = proc.communicate()
        duration_ms = (time.monotonic() - start) * 1000.0

    truncated = len(out_b) > limits.max_output_bytes
    out_b = out_b[: limits.max_output_bytes]
    observed = out_b.decode("utf-8", errors="replace")
    stderr_text = err_b[-65536:].decode("utf-8", errors="replace")
    excerpt = "\n".join(
        line for line in stderr_text.splitlines() if not line.startswith(nonce + "|")
    )[-2000:]

    if timed_out:
        return TestOutcome(test.test_id, TIMEOUT, observed, excerpt, duration_ms)
    trailer = _parse_trailer(stderr_text, nonce)
    if trailer is None or trailer[0] == "crashed" or proc.returncode != 0:
        return TestOutcome(test.test_id, CRASHED, observed, excerpt, duration_ms)
    if truncated:
        return TestOutcome(test.test_id, FAILED, observed,
                           (excerpt + "\n[stdout truncated]").strip(), duration_ms)
    status = PASSED if compare_output(observed, test.expected_stdout) else FAILED
    return TestOutcome(test.test_id, status, observed, excerpt, duration_ms)


def run_unit_tests(candidate: CandidateProgram, task: TaskSpec,
                   limits: ResourceLimits | None = None) -> ExecutionResult:
    """One TestOutcome per UnitTest, in task order. Malformed candidates are
    allowed: a parse failure yields all-crashed outcomes and runnable=False."""
    limits = limits or ResourceLimits()
    parsed = parse(candidate.source)
    if isinstance(parsed, SyntaxFailure):
        note = f"syntax error at {parsed.line}:{parsed.column}: {parsed.message}"
        outcomes = tuple(
            TestOutcome(t.test_id, CRASHED, "", note, 0.0) for t in task.unit_tests
        )
        return ExecutionResult(outcomes=outcomes, runnable=False)

    workers = max(1, min(limits.workers, len(task.unit_tests)))
    if workers == 1:
        outcomes = [
            _run_one_test(candidate.source, task, t, limits) for t in task.unit_tests
        ]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(
                lambda t: _run_one_test(candidate.source, task, t, limits),
                task.unit_tests,
            ))
    runnable = any(o.status in (PASSED, FAILED) for o in outcomes)
    return ExecutionResult(outcomes=tuple(outcomes), runnable=runnable)
