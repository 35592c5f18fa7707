"""Replay runner: serves canned test reports instead of running code.

Lets the whole pipeline be exercised without a real test runner. A
fixture suite ships a ``replies/`` directory of report files; a student
file selects one with a ``# reply: <name>`` line, falling back to
``replies/default.json``.

Runs as a child process with the same contract as a real runner:
stdlib only, communicates through the report file and the exit status.
"""

import argparse
import re
import sys
from pathlib import Path

MARKER = re.compile(r"^#\s*reply:\s*(\S+)", re.MULTILINE)


def pick_reply(sandbox: Path) -> Path:
    name = "default"
    for candidate in sorted(sandbox.glob("*.py")):
        match = MARKER.search(candidate.read_text(errors="replace"))
        if match:
            name = match.group(1)
            break
    return sandbox / "replies" / f"{name}.json"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--suite", required=True)
    parser.add_argument("--dir", required=True)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    sandbox = Path(args.dir)
    reply = pick_reply(sandbox)
    if not reply.exists():
        print(f"fixture runner: no reply file {reply}", file=sys.stderr)
        return 3
    out = Path(args.out)
    if not out.is_absolute():
        out = sandbox / out
    out.write_bytes(reply.read_bytes())
    return 0


if __name__ == "__main__":
    sys.exit(main())
