"""Course configuration: config file, roster, and assignment manifest.

All three files live next to each other and are validated on load;
unknown keys are rejected so typos fail fast instead of silently
falling back to defaults.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from fractions import Fraction
from pathlib import Path
from zoneinfo import ZoneInfo

import yaml

from .model import (
    AssignmentKind,
    AssignmentSpec,
    LatePolicy,
    Question,
    Student,
    StylePolicy,
    to_utc_second,
)

CONFIG_SCHEMA_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1

DEFAULT_ENV_ALLOWLIST = ("PATH", "LANG", "LC_ALL")


class ConfigError(Exception):
    """The configuration is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class SandboxConfig:
    root: Path
    cpu_seconds: int = 10
    address_space_bytes: int = 512 * 1024 * 1024
    file_size_bytes: int = 10 * 1024 * 1024
    open_files: int = 64
    env_allowlist: tuple[str, ...] = DEFAULT_ENV_ALLOWLIST
    runner_user: str | None = None

    def __post_init__(self) -> None:
        for name in ("cpu_seconds", "address_space_bytes", "file_size_bytes", "open_files"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"sandbox limit {name} must be positive")
        if self.runner_user and os.geteuid() != 0:
            raise ConfigError(
                "sandbox runner_user requires the pipeline to run as root"
            )


@dataclass(frozen=True)
class TransportConfig:
    kind: str  # "filedrop" or "smtp"
    directory: Path | None = None
    host: str = "localhost"
    port: int = 25
    username: str | None = None
    password: str | None = None
    starttls: bool = False


@dataclass(frozen=True)
class RunnerConfig:
    identifier: str
    argv: tuple[str, ...]
    report_name: str = "report.json"


@dataclass(frozen=True)
class CourseConfig:
    course_code: str
    year: int
    contact: str
    admin_address: str
    timezone: ZoneInfo
    root: Path
    inbox_dir: Path
    drop_dir: Path | None
    suites_dir: Path
    roster: dict[str, Student]  # by student_id
    manifest: dict[str, AssignmentSpec]  # by normalized subject key
    sandbox: SandboxConfig
    transport: TransportConfig
    runners: dict[str, RunnerConfig]
    tick_interval_s: int = 60
    late_policy: LatePolicy = LatePolicy.RECORD_ZERO
    stale_lock_max_age: timedelta = timedelta(minutes=5)
    address_index: dict[str, str] = field(default_factory=dict)  # email -> id

    def student_by_address(self, address: str) -> Student | None:
        student_id = self.address_index.get(address.strip().lower())
        return self.roster.get(student_id) if student_id else None

    def assignment_for_subject(self, subject: str) -> AssignmentSpec | None:
        return self.manifest.get(normalize_subject(subject))

    def local(self, instant: datetime) -> datetime:
        return instant.astimezone(self.timezone)


def normalize_subject(subject: str) -> str:
    """Case-insensitive matching with collapsed whitespace."""
    return " ".join(subject.split()).lower()


def _require_keys(mapping: dict, allowed: set[str], required: set[str], where: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(mapping)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


def load_roster(path: Path) -> dict[str, Student]:
    """Roster CSV: student_id,name,site,addresses (addresses ;-separated)."""
    if not path.exists():
        raise ConfigError(f"roster file not found: {path}")
    roster: dict[str, Student] = {}
    seen_addresses: dict[str, str] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = {"student_id", "name", "site", "addresses"}
        if set(reader.fieldnames or []) != expected:
            raise ConfigError(
                f"roster {path}: header must be student_id,name,site,addresses"
            )
        for row in reader:
            student_id = row["student_id"].strip()
            if student_id in roster:
                raise ConfigError(f"roster {path}: duplicate student_id {student_id}")
            addresses = tuple(
                dict.fromkeys(
                    a.strip().lower()
                    for a in row["addresses"].split(";")
                    if a.strip()
                )
            )
            for address in addresses:
                if address in seen_addresses:
                    raise ConfigError(
                        f"roster {path}: address {address} listed for both "
                        f"{seen_addresses[address]} and {student_id}"
                    )
                seen_addresses[address] = student_id
            roster[student_id] = Student(
                student_id=student_id,
                display_name=row["name"].strip(),
                email_addresses=addresses,
                site=row["site"].strip(),
            )
    return roster


def _parse_local_instant(text: str, tz: ZoneInfo, where: str) -> datetime:
    try:
        naive = datetime.strptime(text, "%Y-%m-%d %H:%M:%S")
    except ValueError as exc:
        raise ConfigError(f"{where}: bad instant {text!r} (want YYYY-MM-DD HH:MM:SS)") from exc
    return to_utc_second(naive.replace(tzinfo=tz))


def load_manifest(path: Path, tz: ZoneInfo, roster_sites: set[str]) -> dict[str, AssignmentSpec]:
    if not path.exists():
        raise ConfigError(f"assignment manifest not found: {path}")
    doc = yaml.safe_load(path.read_text())
    if not isinstance(doc, dict):
        raise ConfigError(f"manifest {path}: top level must be a mapping")
    _require_keys(doc, {"schema_version", "assignments"},
                  {"schema_version", "assignments"}, f"manifest {path}")
    if doc["schema_version"] != MANIFEST_SCHEMA_VERSION:
        raise ConfigError(f"manifest {path}: unsupported schema_version")
    manifest: dict[str, AssignmentSpec] = {}
    for entry in doc["assignments"]:
        where = f"manifest assignment {entry.get('key', '?')!r}"
        _require_keys(
            entry,
            {"key", "kind", "required_files", "questions", "suite", "deadlines",
             "style", "runner"},
            {"key", "kind", "required_files", "questions"},
            where,
        )
        key = normalize_subject(str(entry["key"]))
        if key in manifest:
            raise ConfigError(f"{where}: duplicate subject key")
        kind = AssignmentKind(entry["kind"])
        questions = tuple(
            Question(name=str(q["name"]), weight=Fraction(str(q.get("weight", 1))))
            for q in entry["questions"]
        )
        deadlines = {
            str(site): _parse_local_instant(str(text), tz, where)
            for site, text in (entry.get("deadlines") or {}).items()
        }
        if kind is AssignmentKind.LABORATORY:
            uncovered = roster_sites - set(deadlines)
            if uncovered:
                raise ConfigError(
                    f"{where}: laboratory needs a deadline for every roster "
                    f"site, missing {sorted(uncovered)}"
                )
        style = entry.get("style") or {}
        _require_keys(style, {"policy", "base"}, set(), f"{where} style")
        manifest[key] = AssignmentSpec(
            subject_key=key,
            kind=kind,
            required_files=tuple(str(f) for f in entry["required_files"]),
            questions=questions,
            suite_id=entry.get("suite"),
            deadlines=deadlines,
            style_policy=StylePolicy(style.get("policy", "off")),
            style_base=int(style.get("base", 2)),
            runner=str(entry.get("runner", "fixture")),
        )
    return manifest


def builtin_runners() -> dict[str, RunnerConfig]:
    import sys

    from . import fixture_runner

    return {
        "fixture": RunnerConfig(
            identifier="fixture",
            argv=(sys.executable, fixture_runner.__file__,
                  "--suite", "{suite_id}", "--dir", "{sandbox}", "--out", "{out}"),
        )
    }


def load_config(path: Path | str) -> CourseConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    doc = yaml.safe_load(path.read_text())
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path}: top level must be a mapping")
    allowed = {
        "schema_version", "course", "year", "contact", "admin_address",
        "timezone", "root", "inbox", "dropbox", "suites", "roster", "manifest",
        "sandbox", "transport", "runners", "tick_interval_s", "policies",
    }
    required = {"schema_version", "course", "year", "contact", "timezone",
                "root", "inbox", "roster", "manifest", "transport"}
    _require_keys(doc, allowed, required, f"config {path}")
    if doc["schema_version"] != CONFIG_SCHEMA_VERSION:
        raise ConfigError(f"config {path}: unsupported schema_version")

    # anchor everything absolutely: child processes run with a different cwd
    base = path.resolve().parent

    def resolve(p) -> Path:
        p = Path(str(p))
        return (p if p.is_absolute() else base / p).resolve()

    try:
        tz = ZoneInfo(str(doc["timezone"]))
    except Exception as exc:
        raise ConfigError(f"config {path}: unknown timezone {doc['timezone']!r}") from exc

    root = resolve(doc["root"])
    roster = load_roster(resolve(doc["roster"]))
    manifest = load_manifest(
        resolve(doc["manifest"]), tz, {s.site for s in roster.values()}
    )

    sandbox_doc = doc.get("sandbox") or {}
    _require_keys(
        sandbox_doc,
        {"cpu_seconds", "address_space_mib", "file_size_mib", "open_files",
         "env_allowlist", "runner_user"},
        set(),
        f"config {path} sandbox",
    )
    sandbox = SandboxConfig(
        root=root / "sandbox",
        cpu_seconds=int(sandbox_doc.get("cpu_seconds", 10)),
        address_space_bytes=int(sandbox_doc.get("address_space_mib", 512)) * 1024 * 1024,
        file_size_bytes=int(sandbox_doc.get("file_size_mib", 10)) * 1024 * 1024,
        open_files=int(sandbox_doc.get("open_files", 64)),
        env_allowlist=tuple(sandbox_doc.get("env_allowlist", DEFAULT_ENV_ALLOWLIST)),
        runner_user=sandbox_doc.get("runner_user"),
    )

    transport_doc = doc["transport"]
    _require_keys(
        transport_doc,
        {"kind", "dir", "host", "port", "username", "password", "starttls"},
        {"kind"},
        f"config {path} transport",
    )
    kind = str(transport_doc["kind"])
    if kind not in ("filedrop", "smtp"):
        raise ConfigError(f"config {path}: unknown transport kind {kind!r}")
    if kind == "filedrop" and "dir" not in transport_doc:
        raise ConfigError(f"config {path}: filedrop transport needs a dir")
    transport = TransportConfig(
        kind=kind,
        directory=resolve(transport_doc["dir"]) if "dir" in transport_doc else None,
        host=str(transport_doc.get("host", "localhost")),
        port=int(transport_doc.get("port", 25)),
        username=transport_doc.get("username"),
        password=transport_doc.get("password"),
        starttls=bool(transport_doc.get("starttls", False)),
    )

    policies = doc.get("policies") or {}
    _require_keys(policies, {"late", "stale_lock_minutes"}, set(), f"config {path} policies")

    runners = builtin_runners()
    for name, spec in (doc.get("runners") or {}).items():
        _require_keys(spec, {"argv", "report"}, {"argv"}, f"config {path} runner {name}")
        runners[str(name)] = RunnerConfig(
            identifier=str(name),
            argv=tuple(str(a) for a in spec["argv"]),
            report_name=str(spec.get("report", "report.json")),
        )
    for spec in manifest.values():
        if spec.runner not in runners:
            raise ConfigError(
                f"assignment {spec.subject_key!r} names unknown runner {spec.runner!r}"
            )

    address_index = {
        address: student.student_id
        for student in roster.values()
        for address in student.email_addresses
    }

    return CourseConfig(
        course_code=str(doc["course"]),
        year=int(doc["year"]),
        contact=str(doc["contact"]),
        admin_address=str(doc.get("admin_address", doc["contact"])),
        timezone=tz,
        root=root,
        inbox_dir=resolve(doc["inbox"]),
        drop_dir=resolve(doc["dropbox"]) if "dropbox" in doc else None,
        suites_dir=resolve(doc.get("suites", "suites")),
        roster=roster,
        manifest=manifest,
        sandbox=sandbox,
        transport=transport,
        runners=runners,
        tick_interval_s=int(doc.get("tick_interval_s", 60)),
        late_policy=LatePolicy(policies.get("late", "record_zero")),
        stale_lock_max_age=timedelta(minutes=int(policies.get("stale_lock_minutes", 5))),
        address_index=address_index,
    )
