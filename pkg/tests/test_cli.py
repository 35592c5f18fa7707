from __future__ import annotations

import json

import pytest

from gradepipe.cli import main

from conftest import STUDENT_FAIL, STUDENT_PASS, drop_email, make_email, write_course


@pytest.fixture
def course_dir(tmp_path):
    write_course(tmp_path)
    return tmp_path


def run(course_dir, *argv, capsys=None):
    rc = main(["--config", str(course_dir / "course.yaml"), *argv])
    return rc


class TestTick:
    def test_empty_system_noop(self, course_dir, capsys):
        assert run(course_dir, "tick", "--json") == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["ingested"] == 0
        assert summary["tested"] == 0
        assert summary["skipped_stages"] == []

    def test_fixture_inbox_flows_through(self, course_dir, capsys):
        drop_email(course_dir / "inbox", "a.eml", make_email(
            "neil@uni.email.address", "lab 4", {"lab4.py": STUDENT_PASS}))
        assert run(course_dir, "tick", "--json") == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["ingested"] == 1
        assert summary["tested"] == 1
        assert summary["delivered"] == 2  # receipt + feedback
        emls = list((course_dir / "outbox").glob("*.eml"))
        assert len(emls) == 2

    def test_lock_held_reports_skip(self, course_dir, capsys):
        from gradepipe.fsqueue import FsQueue

        lock = FsQueue(course_dir, "testing").acquire_lock()
        assert run(course_dir, "tick", "--json") == 0
        summary = json.loads(capsys.readouterr().out)
        assert "testing" in summary["skipped_stages"]
        FsQueue(course_dir, "testing").release_lock(lock)

    def test_tick_is_idempotent_on_empty_system(self, course_dir, capsys):
        run(course_dir, "tick", "--json")
        first = json.loads(capsys.readouterr().out)
        run(course_dir, "tick", "--json")
        second = json.loads(capsys.readouterr().out)
        assert first == second
        assert second["ingested"] == 0 and second["delivered"] == 0

    def test_stale_lock_becomes_admin_alert(self, course_dir, capsys):
        import json as jsonlib
        from datetime import timedelta

        from gradepipe.fsqueue import FsQueue
        from gradepipe.model import parse_instant

        queue = FsQueue(course_dir, "testing")
        queue.acquire_lock()
        meta = jsonlib.loads(queue.lock_path.read_text())
        stale = parse_instant(meta["acquired_at"]) - timedelta(minutes=30)
        meta["acquired_at"] = stale.strftime("%Y-%m-%dT%H:%M:%SZ")
        queue.lock_path.write_text(jsonlib.dumps(meta))

        assert run(course_dir, "tick", "--json") == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["stale_lock_alerts"] == 1
        alerts = [
            item for item in FsQueue(course_dir, "outgoing").list_items()
            if item.payload["category"] == "admin_alert"
        ]
        assert len(alerts) == 1
        assert "stale lock on queue testing" in alerts[0].payload["subject"]


class TestQueueCommands:
    def test_ls_empty(self, course_dir, capsys):
        assert run(course_dir, "queue", "ls") == 0
        out = capsys.readouterr().out
        assert "incoming: 0 queued" in out
        assert "testing: 0 queued" in out
        assert "outgoing: 0 queued" in out

    def test_requeue_flagged_job(self, course_dir, capsys):
        from gradepipe.fsqueue import FsQueue

        queue = FsQueue(course_dir, "testing")
        item_id = queue.enqueue("test_job", {"x": 1})
        for _ in range(3):
            queue.record_failure(item_id, "boom")
        assert run(course_dir, "queue", "requeue", "testing", item_id) == 0
        assert len(queue.list_items()) == 1

    def test_inspect_submission(self, course_dir, capsys):
        drop_email(course_dir / "inbox", "a.eml", make_email(
            "neil@uni.email.address", "lab 4", {"lab4.py": STUDENT_FAIL}))
        run(course_dir, "tick", "--json")
        capsys.readouterr()
        from gradepipe.store import ResultsStore

        store = ResultsStore.open(course_dir / "state" / "journal.ndjson")
        sid = next(iter(store.submissions))
        assert run(course_dir, "queue", "inspect", sid) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["attempts"][0]["percent"] == 67


class TestReportCommands:
    def _graded_course(self, course_dir, capsys):
        drop_email(course_dir / "inbox", "a.eml", make_email(
            "neil@uni.email.address", "lab 4", {"lab4.py": STUDENT_PASS}))
        run(course_dir, "tick", "--json")
        capsys.readouterr()

    def test_export(self, course_dir, capsys, tmp_path):
        self._graded_course(course_dir, capsys)
        out = tmp_path / "marks.csv"
        assert run(course_dir, "report", "export", "--out", str(out)) == 0
        assert out.exists()
        assert "s001" in out.read_text()

    def test_stats(self, course_dir, capsys, tmp_path):
        self._graded_course(course_dir, capsys)
        out = tmp_path / "stats"
        assert run(course_dir, "report", "stats", "--out", str(out)) == 0
        assert (out / "lab_4" / "histogram.csv").exists()

    def test_weekly_enqueues_summaries(self, course_dir, capsys):
        self._graded_course(course_dir, capsys)
        assert run(course_dir, "report", "weekly") == 0
        assert "enqueued 3 weekly summaries" in capsys.readouterr().out

    def test_premark(self, course_dir, capsys, tmp_path):
        batch = tmp_path / "batch" / "s001"
        batch.mkdir(parents=True)
        (batch / "lab4.py").write_bytes(STUDENT_PASS)
        assert run(
            course_dir, "premark", "--assignment", "lab 4",
            "--batch-dir", str(tmp_path / "batch"), "--out", str(tmp_path / "out"),
        ) == 0
        assert (tmp_path / "out" / "marks.csv").exists()


class TestRoster:
    def test_ls(self, course_dir, capsys):
        assert run(course_dir, "roster", "ls") == 0
        out = capsys.readouterr().out
        assert "s001\tNeil O'Brien\tS" in out

    def test_check(self, course_dir, capsys):
        assert run(course_dir, "roster", "check") == 0
        assert "3 students" in capsys.readouterr().out


class TestExitCodes:
    def test_config_error_is_2(self, tmp_path, capsys):
        missing = tmp_path / "nope.yaml"
        assert main(["--config", str(missing), "tick"]) == 2

    def test_operational_error_is_1(self, course_dir, capsys):
        assert run(course_dir, "queue", "requeue", "testing", "no-such-item") == 1
