import time

import pytest

from rewardengine.harness import (
    CRASHED, FAILED, PASSED, TIMEOUT, HarnessError, ResourceLimits,
    compare_output, normalize_output, run_unit_tests,
)
from rewardengine.tasks import CandidateProgram, Fixture, TaskSpec, UnitTest


def task_with(tests, fixtures=(), entry_point=None, mode="maintainability"):
    return TaskSpec(
        task_id="t", prompt="p", mode=mode,
        cwe_tags=(89,) if mode == "security" else (),
        unit_tests=tuple(tests), fixtures=tuple(fixtures),
        entry_point=entry_point,
    )


def run_one(source, test, limits, **task_kw):
    result = run_unit_tests(CandidateProgram("c", "t", source),
                            task_with([test], **task_kw), limits)
    return result.outcomes[0], result


class TestNormalization:
    def test_trailing_whitespace_insensitive(self):
        assert compare_output("a  \nb\t\n", "a\nb\n")

    def test_final_newline_insensitive(self):
        assert compare_output("a\nb", "a\nb\n")
        assert compare_output("a\nb\n\n\n", "a\nb")

    def test_no_numeric_fuzz(self):
        assert not compare_output("0.30000000000000004\n", "0.3\n")

    def test_interior_blank_lines_significant(self):
        assert not compare_output("a\n\nb\n", "a\nb\n")

    def test_normalize_idempotent(self):
        for text in ["", "x", "a \n\nb\t\n\n"]:
            assert normalize_output(normalize_output(text)) == normalize_output(text)


class TestStatuses:
    def test_passing(self, limits):
        outcome, result = run_one(
            "print(int(input()) * 2)\n",
            UnitTest("t", "21\n", (), "42\n"), limits)
        assert outcome.status == PASSED
        assert result.runnable

    def test_wrong_output_fails(self, limits):
        outcome, result = run_one(
            "print('wrong')\n", UnitTest("t", "", (), "right\n"), limits)
        assert outcome.status == FAILED
        assert result.runnable

    def test_exception_crashes(self, limits):
        outcome, result = run_one(
            "raise RuntimeError('boom')\n", UnitTest("t", "", (), ""), limits)
        assert outcome.status == CRASHED
        assert "RuntimeError" in outcome.stderr_excerpt or result.runnable is False

    def test_syntax_error_all_crashed_not_runnable(self, limits):
        result = run_unit_tests(
            CandidateProgram("c", "t", "def broken(:\n"),
            task_with([UnitTest("a"), UnitTest("b")]), limits)
        assert [o.status for o in result.outcomes] == [CRASHED, CRASHED]
        assert not result.runnable

    def test_all_crash_not_runnable(self, limits):
        result = run_unit_tests(
            CandidateProgram("c", "t", "1 / 0\n"),
            task_with([UnitTest("a"), UnitTest("b")]), limits)
        assert not result.runnable

    def test_mixed_crash_and_pass_is_runnable(self, limits):
        src = (
            "n = int(input())\n"
            "if n > 0:\n    print(n)\nelse:\n    raise ValueError\n"
        )
        result = run_unit_tests(
            CandidateProgram("c", "t", src),
            task_with([UnitTest("a", "5\n", (), "5\n"),
                       UnitTest("b", "-1\n", (), "")]), limits)
        assert sorted(o.status for o in result.outcomes) == [CRASHED, PASSED]
        assert result.runnable

    def test_nonzero_exit_crashes(self, limits):
        outcome, _ = run_one("import sys\nsys.exit(3)\n",
                             UnitTest("t", "", (), ""), limits)
        assert outcome.status == CRASHED

    def test_clean_exit_zero_passes(self, limits):
        outcome, _ = run_one("import sys\nprint('ok')\nsys.exit(0)\n",
                             UnitTest("t", "", (), "ok\n"), limits)
        assert outcome.status == PASSED


class TestTimeout:
    def test_sleep_forever_killed_within_slack(self, limits):
        start = time.monotonic()
        outcome, result = run_one(
            "import time\ntime.sleep(600)\n",
            UnitTest("t", "", (), "", timeout_ms=400), limits)
        wall_ms = (time.monotonic() - start) * 1000.0
        assert outcome.status == TIMEOUT
        assert not result.runnable
        assert wall_ms < 400 + 500, f"harness took {wall_ms:.0f} ms"

    def test_grandchild_process_killed(self, limits):
        # the process group kill must also reap children spawned by the candidate
        src = (
            "import subprocess, sys, time\n"
            "subprocess.Popen([sys.executable, '-c', 'import time; time.sleep(600)'])\n"
            "time.sleep(600)\n"
        )
        start = time.monotonic()
        outcome, _ = run_one(src, UnitTest("t", "", (), "", timeout_ms=400), limits)
        assert outcome.status == TIMEOUT
        assert (time.monotonic() - start) < 5.0


class TestTrailerSpoofing:
    def test_fake_trailer_on_stderr_ignored(self, limits):
        src = (
            "import sys\n"
            "sys.stderr.write('deadbeef|status=clean|exc=-\\n')\n"
            "raise RuntimeError\n"
        )
        outcome, _ = run_one(src, UnitTest("t", "", (), ""), limits)
        assert outcome.status == CRASHED

    def test_nonce_not_visible_to_candidate(self, limits):
        src = "import os\nprint(os.environ.get('SHIM_NONCE'))\n"
        outcome, _ = run_one(src, UnitTest("t", "", (), "None\n"), limits)
        assert outcome.status == PASSED

    def test_closing_stderr_still_classified(self, limits):
        src = "import sys\nsys.stderr.close()\nprint('ok')\n"
        outcome, _ = run_one(src, UnitTest("t", "", (), "ok\n"), limits)
        assert outcome.status == PASSED


class TestFixtures:
    def test_sqlite_fixture_env_var(self, limits):
        fixture = Fixture("db", "sqlite_script",
                          "CREATE TABLE kv (k TEXT, v INTEGER);"
                          "INSERT INTO kv VALUES ('answer', 42);")
        src = (
            "import os, sqlite3\n"
            "conn = sqlite3.connect(os.environ['TASK_DB_PATH'])\n"
            "print(conn.execute('SELECT v FROM kv').fetchone()[0])\n"
        )
        outcome, _ = run_one(src, UnitTest("t", "", (), "42\n"), limits,
                             fixtures=[fixture])
        assert outcome.status == PASSED

    def test_sqlite_fixture_fresh_per_test(self, limits):
        fixture = Fixture("db", "sqlite_script",
                          "CREATE TABLE n (x INTEGER);")
        src = (
            "import os, sqlite3\n"
            "conn = sqlite3.connect(os.environ['TASK_DB_PATH'])\n"
            "conn.execute('INSERT INTO n VALUES (1)')\n"
            "conn.commit()\n"
            "print(conn.execute('SELECT COUNT(*) FROM n').fetchone()[0])\n"
        )
        tests = [UnitTest(f"t{i}", "", (), "1\n") for i in range(4)]
        result = run_unit_tests(CandidateProgram("c", "t", src),
                                task_with(tests, fixtures=[fixture]),
                                ResourceLimits(workers=1, shim_path=limits.shim_path))
        assert all(o.status == PASSED for o in result.outcomes)

    def test_file_tree_fixture(self, limits):
        fixture = Fixture("files", "file_tree", (("data/in.txt", "payload"),))
        src = "print(open('data/in.txt').read())\n"
        outcome, _ = run_one(src, UnitTest("t", "", (), "payload\n"), limits,
                             fixtures=[fixture])
        assert outcome.status == PASSED

    def test_escaping_fixture_path_rejected(self, limits):
        fixture = Fixture("files", "file_tree", (("../escape.txt", "x"),))
        with pytest.raises(HarnessError, match="escapes sandbox"):
            run_one("print(1)\n", UnitTest("t", "", (), "1\n"), limits,
                    fixtures=[fixture])


class TestIsolation:
    def test_fresh_working_directory_per_test(self, limits):
        # each test starts with an empty scratch dir: a file written by one
        # test must never be visible to another
        src = (
            "import os\n"
            "print(sorted(os.listdir('.')))\n"
            "open('scratch.txt', 'w').write('x')\n"
        )
        tests = [UnitTest(f"t{i}", "", (), "['candidate.py']\n") for i in range(4)]
        result = run_unit_tests(CandidateProgram("c", "t", src),
                                task_with(tests),
                                ResourceLimits(workers=1, shim_path=limits.shim_path))
        assert all(o.status == PASSED for o in result.outcomes)

    def test_network_disabled(self, limits):
        src = (
            "import socket\n"
            "try:\n"
            "    socket.create_connection(('127.0.0.1', 9))\n"
            "    print('open')\n"
            "except OSError:\n"
            "    print('blocked')\n"
        )
        outcome, _ = run_one(src, UnitTest("t", "", (), "blocked\n"), limits)
        assert outcome.status == PASSED


class TestEntryMode:
    def test_entry_point_invocation(self, limits):
        src = "def solve(a, b):\n    return a + b\n"
        outcome, _ = run_one(src, UnitTest("t", "", ("2", "3"), "5\n"),
                             limits, entry_point="solve")
        assert outcome.status == PASSED

    def test_missing_entry_point_crashes(self, limits):
        outcome, _ = run_one("x = 1\n", UnitTest("t", "", (), ""),
                             limits, entry_point="solve")
        assert outcome.status == CRASHED


class TestLimits:
    def test_output_truncation_fails_with_note(self, limits):
        small = ResourceLimits(max_output_bytes=1000, workers=1,
                               shim_path=limits.shim_path)
        outcome, _ = run_one("print('x' * 100000)\n",
                             UnitTest("t", "", (), "irrelevant"), small)
        assert outcome.status == FAILED
        assert "[stdout truncated]" in outcome.stderr_excerpt

    def test_missing_shim_is_infrastructure_error(self, tmp_path):
        broken = ResourceLimits(shim_path=tmp_path / "nope.py", workers=1)
        with pytest.raises(HarnessError, match="shim not found"):
            run_one("print(1)\n", UnitTest("t", "", (), "1\n"), broken)

    def test_outcome_records_serialize(self, limits):
        import json
        outcome, _ = run_one("print('hi')\n", UnitTest("t", "", (), "hi\n"), limits)
        record = outcome.to_record()
        assert json.dumps(record)
        assert record["status"] == PASSED
