"""mnet-verify: audit a stored submission and optionally record the verdict."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from mnet.server.persistence import SqliteStore
from mnet.server.storage import LocalObjectStore
from mnet.verifier.audit import (
    InconsistentVerdict,
    ManualCheck,
    MissingArtifact,
    PackageUnreadable,
    PrematureDecision,
    record_decision,
    verify_submission,
)

_MANUAL = {"pass": ManualCheck.PASS, "fail": ManualCheck.FAIL}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mnet-verify", description=__doc__)
    parser.add_argument("--db", type=Path, required=True)
    parser.add_argument("--storage-dir", type=Path, required=True)
    parser.add_argument("--trial", required=True, metavar="ID")
    parser.add_argument("--report", choices=["json", "text"], default="text")
    parser.add_argument("--decide", choices=["accept", "reject"])
    parser.add_argument("--judge", metavar="ID")
    parser.add_argument("--reason", default="")
    parser.add_argument("--code-visible", choices=["pass", "fail"])
    parser.add_argument("--content", choices=["pass", "fail"])
    args = parser.parse_args(argv)

    store = SqliteStore(str(args.db))
    objects = LocalObjectStore(args.storage_dir)
    try:
        report = verify_submission(store, objects, args.trial)
    except (MissingArtifact, PackageUnreadable) as exc:
        print(f"cannot verify: {exc}", file=sys.stderr)
        return 2

    if args.code_visible:
        report.code_visibility = _MANUAL[args.code_visible]
    if args.content:
        report.content_alignment = _MANUAL[args.content]

    if args.decide:
        if not args.judge:
            parser.error("--decide requires --judge")
        verdict = "Accepted" if args.decide == "accept" else "Rejected"
        try:
            record_decision(store, report, verdict, args.judge, args.reason,
                            now=int(time.time() * 1e6))
        except (PrematureDecision, InconsistentVerdict) as exc:
            print(f"decision refused: {exc}", file=sys.stderr)
            return 3

    print(report.to_json() if args.report == "json" else report.to_text())
    return 0 if report.automated_pass() else 1


if __name__ == "__main__":
    sys.exit(main())
