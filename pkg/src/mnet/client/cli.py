"""mnet-client: run one benchmark trial session against a server.

Exit codes: 0 submitted, 2 resumable (manifest saved, upload incomplete),
3 protocol error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from mnet.client.eventloop import ClientEventLoop
from mnet.client.session import SessionConfig
from mnet.client.sources import parse_source_spec


def parse_addr(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    return host or "127.0.0.1", int(port)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mnet-client", description=__doc__)
    parser.add_argument("--server", type=parse_addr, required=True, metavar="ADDR:PORT")
    parser.add_argument("--team", required=True, metavar="TOKEN")
    parser.add_argument("--task", required=True,
                        choices=["PegInHole", "CableManagement", "GraspingInClutter",
                                 "TabletopManipulation", "BlockArrangement"])
    parser.add_argument("--source", default="synthetic:0",
                        help="synthetic:<seed> | dir:<path> | camera:<uri>")
    parser.add_argument("--fps", type=int, default=10)
    parser.add_argument("--duration", type=float, default=60.0, metavar="SECONDS",
                        help="capture length; the session finalizes afterwards")
    parser.add_argument("--ring", type=int, default=64, metavar="FRAMES")
    parser.add_argument("--out", type=Path, required=True, metavar="DIR")
    parser.add_argument("--control", type=parse_addr, default=None, metavar="ADDR:PORT",
                        help="local control socket for middleware bridges")
    args = parser.parse_args(argv)

    source = parse_source_spec(args.source)
    config = SessionConfig(team=args.team, task=args.task, out_dir=args.out,
                           fps=args.fps, duration_s=args.duration,
                           ring_capacity=args.ring)
    try:
        loop = ClientEventLoop(args.server, config, source, control_addr=args.control)
    except OSError as exc:
        print(f"cannot reach server: {exc}", file=sys.stderr)
        return 3

    outcome = loop.run()
    print(f"session finished: {outcome.status} {outcome.detail}".strip())
    if outcome.manifest_path:
        print(f"manifest: {outcome.manifest_path}")
    if outcome.status == "submitted":
        print(f"trial {outcome.trial} submitted ({outcome.frame_count} frames)")
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
