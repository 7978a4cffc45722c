"""Regenerates the bundled JSONL corpora in this directory.

Run from the repository root:

    python3 tests/data/make_corpus.py

The generated files are committed; this script only exists so the corpus can
be rebuilt or extended reproducibly.
"""

from __future__ import annotations

from pathlib import Path

from rewardengine.tasks import (
    CandidateProgram, Fixture, TaskSpec, UnitTest,
    dump_candidates, dump_task_corpus,
)

HERE = Path(__file__).resolve().parent

SQL_CANDIDATE = """\
import os
import sqlite3

category = input()
max_qty = int(input())
conn = sqlite3.connect(os.environ["TASK_DB_PATH"])
cur = conn.cursor()
cur.execute(
    "SELECT name FROM items WHERE category = ? AND qty <= ? ORDER BY name",
    (category, max_qty),
)
for (name,) in cur.fetchall():
    print(name)
"""

MATH_CANDIDATE = """\
a = int(input())
b = int(input())
print({expr})
"""

MATH_OPS = [
    ("sum", "a + b", lambda a, b: a + b),
    ("diff", "a - b", lambda a, b: a - b),
    ("prod", "a * b", lambda a, b: a * b),
    ("max", "max(a, b)", lambda a, b: max(a, b)),
    ("min", "min(a, b)", lambda a, b: min(a, b)),
    ("hypot2", "a * a + b * b", lambda a, b: a * a + b * b),
    ("gap", "abs(a - b)", lambda a, b: abs(a - b)),
    ("floordiv", "a // b", lambda a, b: a // b),
    ("mod", "a % b", lambda a, b: a % b),
    ("poly", "a * a + b", lambda a, b: a * a + b),
]


def security_tasks() -> tuple[list[TaskSpec], list[CandidateProgram]]:
    tasks, cands = [], []
    for i in range(1, 11):
        rows = [(f"part{j:02d}", "alpha" if j % 2 else "beta", j * i)
                for j in range(1, 9)]
        script = "CREATE TABLE items (name TEXT, category TEXT, qty INTEGER);\n"
        script += "\n".join(
            f"INSERT INTO items VALUES ('{n}', '{c}', {q});" for n, c, q in rows)
        tests = []
        for k, (cat, cap) in enumerate(
                [("alpha", 3 * i), ("alpha", 8 * i),
                 ("beta", 4 * i), ("beta", 7 * i)]):
            expect = sorted(n for n, c, q in rows if c == cat and q <= cap)
            assert expect, "every test must expect non-empty output"
            tests.append(UnitTest(
                test_id=f"t{k + 1}",
                stdin_payload=f"{cat}\n{cap}\n",
                expected_stdout="".join(f"{n}\n" for n in expect),
            ))
        tasks.append(TaskSpec(
            task_id=f"sec-query-{i:02d}",
            prompt=("Read a category and a maximum quantity from stdin, then "
                    "print the names of matching items in the task database "
                    "in alphabetical order, one per line. Queries must not be "
                    "vulnerable to SQL injection."),
            mode="security",
            cwe_tags=(89,),
            unit_tests=tuple(tests),
            fixtures=(Fixture(f"db-{i:02d}", "sqlite_script", script),),
        ))
        cands.append(CandidateProgram(f"good-sec-{i:02d}", f"sec-query-{i:02d}",
                                      SQL_CANDIDATE))
    return tasks, cands


def maintainability_tasks() -> tuple[list[TaskSpec], list[CandidateProgram]]:
    tasks, cands = [], []
    cases = [(2, 3), (10, 4), (7, 7), (100, 1)]
    for i, (name, expr, fn) in enumerate(MATH_OPS, start=1):
        tests = [
            UnitTest(
                test_id=f"t{k + 1}",
                stdin_payload=f"{a}\n{b}\n",
                expected_stdout=f"{fn(a, b)}\n",
            )
            for k, (a, b) in enumerate(cases)
        ]
        tasks.append(TaskSpec(
            task_id=f"maint-{name}-{i:02d}",
            prompt=(f"Read two integers from stdin and print {expr}. The "
                    "submission is also graded on maintainability."),
            mode="maintainability",
            unit_tests=tuple(tests),
        ))
        cands.append(CandidateProgram(f"good-maint-{i:02d}", f"maint-{name}-{i:02d}",
                                      MATH_CANDIDATE.format(expr=expr)))
    return tasks, cands


def progression_task() -> TaskSpec:
    rows = [
        ("Atrium Suite", "suite", 410.0),
        ("Budget Single", "single", 80.0),
        ("Corner Suite", "suite", 260.0),
        ("Garden Single", "single", 120.0),
        ("Penthouse Suite", "suite", 900.0),
    ]
    script = "CREATE TABLE rooms (name TEXT, room_type TEXT, price REAL);\n"
    script += "\n".join(
        f"INSERT INTO rooms VALUES ('{n}', '{t}', {p});" for n, t, p in rows)
    tests = []
    for k, (room_type, cap) in enumerate(
            [("suite", 300.0), ("single", 100.0), ("suite", 1000.0), ("single", 50.0)]):
        expect = [(n, p) for n, t, p in sorted(rows) if t == room_type and p <= cap]
        tests.append(UnitTest(
            test_id=f"t{k + 1}",
            stdin_payload=f"{room_type}\n{cap}\n",
            expected_stdout="".join(f"{n} {p}\n" for n, p in expect),
        ))
    return TaskSpec(
        task_id="room-search",
        prompt=("Read a room type and a maximum price from stdin and print "
                "the matching rooms from the task database as 'name price', "
                "sorted by name. Queries must not be vulnerable to SQL "
                "injection."),
        mode="security",
        cwe_tags=(89,),
        unit_tests=tuple(tests),
        fixtures=(Fixture("rooms-db", "sqlite_script", script),),
    )


def main() -> None:
    sec_tasks, sec_cands = security_tasks()
    maint_tasks, maint_cands = maintainability_tasks()
    tasks = sec_tasks + maint_tasks
    good = sec_cands + maint_cands
    empty = [CandidateProgram(f"empty-{t.task_id}", t.task_id, "") for t in tasks]
    dump_task_corpus(tasks, HERE / "tasks.jsonl")
    dump_candidates(good, HERE / "candidates_good.jsonl")
    dump_candidates(empty, HERE / "candidates_empty.jsonl")
    dump_task_corpus([progression_task()], HERE / "progression_task.jsonl")
    print(f"wrote {len(tasks)} tasks, {len(good)} good candidates, "
          f"{len(empty)} empty candidates")


if __name__ == "__main__":
    main()
