"""Task and candidate data model, plus JSONL corpus ingestion.

Corpora are UTF-8 line-delimited JSON: one record per line, each carrying a
``schema_version`` field. Unknown fields are ignored with a warning so newer
corpora stay loadable. All types are immutable after construction.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

SECURITY = "security"
MAINTAINABILITY = "maintainability"

_CWE_RE = re.compile(r"^CWE-(\d+)$")


class CorpusError(ValueError):
    """Raised when a corpus file violates the record schema."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def parse_cwe_tag(tag: object) -> int:
    """Accept 89 or "CWE-89"; return the numeric id."""
    if isinstance(tag, bool):
        raise ValueError(f"invalid CWE tag: {tag!r}")
    if isinstance(tag, int):
        if tag <= 0:
            raise ValueError(f"invalid CWE tag: {tag!r}")
        return tag
    if isinstance(tag, str):
        m = _CWE_RE.match(tag)
        if m:
            return int(m.group(1))
    raise ValueError(f"invalid CWE tag: {tag!r}")


def format_cwe_tag(cwe: int) -> str:
    return f"CWE-{cwe}"


@dataclass(frozen=True)
class UnitTest:
    test_id: str
    stdin_payload: str = ""
    argv: tuple[str, ...] = ()
    expected_stdout: str = ""
    timeout_ms: int = 2000

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError(f"unit test {self.test_id!r}: timeout_ms must be > 0")


@dataclass(frozen=True)
class Fixture:
    """Per-test environment setup, re-materialized fresh before every test.

    kind="sqlite_script": payload is SQL executed against a fresh database
    file whose path the candidate receives via the TASK_DB_PATH env var.
    kind="file_tree": payload maps relative paths to file contents, created
    in the test's working directory.
    """

    fixture_id: str
    kind: str
    payload: str | tuple[tuple[str, str], ...] = ""

    def __post_init__(self):
        if self.kind not in ("sqlite_script", "file_tree"):
            raise ValueError(f"fixture {self.fixture_id!r}: unknown kind {self.kind!r}")
        if self.kind == "sqlite_script" and not isinstance(self.payload, str):
            raise ValueError(f"fixture {self.fixture_id!r}: sqlite_script payload must be text")

    @property
    def path_map(self) -> dict[str, str]:
        if self.kind != "file_tree":
            raise ValueError("path_map only defined for file_tree fixtures")
        return dict(self.payload)  # type: ignore[arg-type]


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    prompt: str
    mode: str
    cwe_tags: tuple[int, ...] = ()
    unit_tests: tuple[UnitTest, ...] = ()
    fixtures: tuple[Fixture, ...] = ()
    entry_point: str | None = None

    def __post_init__(self):
        if self.mode not in (SECURITY, MAINTAINABILITY):
            raise ValueError(f"task {self.task_id!r}: unknown mode {self.mode!r}")
        if self.mode == SECURITY and not self.cwe_tags:
            raise ValueError(f"task {self.task_id!r}: security mode requires cwe_tags")
        if self.mode == MAINTAINABILITY and self.cwe_tags:
            raise ValueError(f"task {self.task_id!r}: maintainability mode forbids cwe_tags")
        if not self.unit_tests:
            raise ValueError(f"task {self.task_id!r}: unit_tests must be non-empty")
        seen = set()
        for t in self.unit_tests:
            if t.test_id in seen:
                raise ValueError(f"task {self.task_id!r}: duplicate test_id {t.test_id!r}")
            seen.add(t.test_id)


@dataclass(frozen=True)
class CandidateProgram:
    """A program to score. No well-formedness assumed: source may be empty,
    malformed, or adversarial."""

    candidate_id: str
    task_id: str
    source: str = ""


# --- record (de)serialization ------------------------------------------------

_TASK_FIELDS = {"schema_version", "task_id", "prompt", "mode", "cwe_tags",
                "unit_tests", "fixtures", "entry_point"}
_TEST_FIELDS = {"test_id", "stdin_payload", "argv", "expected_stdout", "timeout_ms"}
_FIXTURE_FIELDS = {"fixture_id", "kind", "payload"}
_CANDIDATE_FIELDS = {"schema_version", "candidate_id", "task_id", "source"}


def _warn_unknown(record: dict, known: set, where: str):
    unknown = set(record) - known
    if unknown:
        logger.warning("%s: ignoring unknown fields %s", where, sorted(unknown))


def _require(record: dict, name: str, where: str):
    if name not in record:
        raise ValueError(f"{where}: missing field {name!r}")
    return record[name]


def task_from_record(record: dict) -> TaskSpec:
    if not isinstance(record, dict):
        raise ValueError("record is not an object")
    task_id = _require(record, "task_id", "task record")
    where = f"task {task_id!r}"
    _warn_unknown(record, _TASK_FIELDS, where)
    tests = []
    raw_tests = _require(record, "unit_tests", where)
    if not isinstance(raw_tests, list):
        raise ValueError(f"{where}: unit_tests must be a list")
    for raw in raw_tests:
        _warn_unknown(raw, _TEST_FIELDS, where)
        tests.append(UnitTest(
            test_id=_require(raw, "test_id", where),
            stdin_payload=raw.get("stdin_payload", ""),
            argv=tuple(raw.get("argv", [])),
            expected_stdout=raw.get("expected_stdout", ""),
            timeout_ms=raw.get("timeout_ms", 2000),
        ))
    fixtures = []
    for raw in record.get("fixtures", []):
        _warn_unknown(raw, _FIXTURE_FIELDS, where)
        payload = raw.get("payload", "")
        if isinstance(payload, dict):
            payload = tuple(sorted(payload.items()))
        fixtures.append(Fixture(
            fixture_id=_require(raw, "fixture_id", where),
            kind=_require(raw, "kind", where),
            payload=payload,
        ))
    return TaskSpec(
        task_id=task_id,
        prompt=_require(record, "prompt", where),
        mode=_require(record, "mode", where),
        cwe_tags=tuple(parse_cwe_tag(t) for t in record.get("cwe_tags", [])),
        unit_tests=tuple(tests),
        fixtures=tuple(fixtures),
        entry_point=record.get("entry_point"),
    )


def task_to_record(task: TaskSpec) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "task_id": task.task_id,
        "prompt": task.prompt,
        "mode": task.mode,
        "cwe_tags": [format_cwe_tag(c) for c in task.cwe_tags],
        "unit_tests": [
            {
                "test_id": t.test_id,
                "stdin_payload": t.stdin_payload,
                "argv": list(t.argv),
                "expected_stdout": t.expected_stdout,
                "timeout_ms": t.timeout_ms,
            }
            for t in task.unit_tests
        ],
        "fixtures": [
            {
                "fixture_id": f.fixture_id,
                "kind": f.kind,
                "payload": f.payload if isinstance(f.payload, str) else dict(f.payload),
            }
            for f in task.fixtures
        ],
        "entry_point": task.entry_point,
    }


def candidate_from_record(record: dict) -> CandidateProgram:
    if not isinstance(record, dict):
        raise ValueError("record is not an object")
    candidate_id = _require(record, "candidate_id", "candidate record")
    where = f"candidate {candidate_id!r}"
    _warn_unknown(record, _CANDIDATE_FIELDS, where)
    task_id = _require(record, "task_id", where)
    if not task_id:
        raise ValueError(f"{where}: empty task_id")
    return CandidateProgram(
        candidate_id=candidate_id,
        task_id=task_id,
        source=record.get("source", ""),
    )


def candidate_to_record(candidate: CandidateProgram) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "candidate_id": candidate.candidate_id,
        "task_id": candidate.task_id,
        "source": candidate.source,
    }


def _iter_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"invalid JSON: {exc}", lineno) from exc


def load_task_corpus(path: str | Path) -> list[TaskSpec]:
    """Load a task corpus, validating every TaskSpec invariant.

    Raises CorpusError naming the offending line for malformed records and
    for duplicate task ids.
    """
    path = Path(path)
    tasks: list[TaskSpec] = []
    seen: dict[str, int] = {}
    for lineno, record in _iter_jsonl(path):
        try:
            task = task_from_record(record)
        except ValueError as exc:
            raise CorpusError(str(exc), lineno) from exc
        if task.task_id in seen:
            raise CorpusError(
                f"duplicate task_id {task.task_id!r} (first seen on line {seen[task.task_id]})",
                lineno,
            )
        seen[task.task_id] = lineno
        tasks.append(task)
    return tasks


def load_candidates(path: str | Path) -> list[CandidateProgram]:
    path = Path(path)
    out: list[CandidateProgram] = []
    for lineno, record in _iter_jsonl(path):
        try:
            out.append(candidate_from_record(record))
        except ValueError as exc:
            raise CorpusError(str(exc), lineno) from exc
    return out


def dump_task_corpus(tasks: list[TaskSpec], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for task in tasks:
            fh.write(json.dumps(task_to_record(task)) + "\n")


def dump_candidates(candidates: list[CandidateProgram], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for cand in candidates:
            fh.write(json.dumps(candidate_to_record(cand)) + "\n")
