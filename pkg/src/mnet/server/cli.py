"""mnet-server: run the coordinator (framed TCP protocol + HTTP upload port)."""

from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from pathlib import Path

from mnet.server.challenges import ChallengeSchedule
from mnet.server.core import QuotaPolicy, ServerCore
from mnet.server.persistence import SqliteStore
from mnet.server.storage import LocalObjectStore
from mnet.server.tcp import MnetTcpServer, _now_us
from mnet.taskpack._seeding import derive_rng
from mnet.taskpack.payloads import instruction_payload


def parse_addr(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    return host or "127.0.0.1", int(port)


def parse_quota(value: str) -> QuotaPolicy:
    m = re.fullmatch(r"(\d+)/(\d+)d", value)
    if not m:
        raise argparse.ArgumentTypeError("quota must look like 3/7d")
    return QuotaPolicy(max_trials=int(m.group(1)), window_s=int(m.group(2)) * 86400)


def load_secret(secret_file: Path | None) -> bytes:
    env = os.environ.get("MNET_SECRET")
    if env:
        return env.encode("utf-8")
    if secret_file and secret_file.is_file():
        return secret_file.read_bytes().strip()
    raise SystemExit("no secret: set MNET_SECRET or pass --secret-file")


def default_instruction_source(task: str, trial: str):
    seed = derive_rng("live-instruction", trial).getrandbits(31)
    return instruction_payload(task, seed)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mnet-server", description=__doc__)
    parser.add_argument("--listen", type=parse_addr, default=("127.0.0.1", 8800),
                        metavar="ADDR:PORT", help="framed TCP protocol listener")
    parser.add_argument("--http-listen", type=parse_addr, default=None,
                        metavar="ADDR:PORT", help="HTTP upload endpoint (default: TCP port + 1)")
    parser.add_argument("--storage-dir", type=Path, required=True)
    parser.add_argument("--db", type=Path, required=True)
    parser.add_argument("--quota", type=parse_quota, default=QuotaPolicy(),
                        help="trials per window, e.g. 3/7d")
    parser.add_argument("--challenge-mean", type=float, default=30.0, metavar="SECONDS")
    parser.add_argument("--secret-file", type=Path, default=None)
    parser.add_argument("--team", action="append", default=[], metavar="TOKEN",
                        help="register a team credential (repeatable)")
    parser.add_argument("--heartbeat-timeout", type=float, default=60.0, metavar="SECONDS")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    secret = load_secret(args.secret_file)
    http_addr = args.http_listen or (args.listen[0], args.listen[1] + 1)

    store = SqliteStore(str(args.db))
    core = ServerCore(
        store,
        LocalObjectStore(args.storage_dir),
        secret=secret,
        url_base=f"http://{http_addr[0]}:{http_addr[1]}",
        quota=args.quota,
        schedule=ChallengeSchedule(mean_interval_s=args.challenge_mean,
                                   first_after_s=min(10.0, args.challenge_mean / 3),
                                   response_deadline_s=args.challenge_mean / 2),
    )
    now = _now_us()
    for team in args.team:
        store.add_team(team, now)
    broken = core.recover_on_startup(now)
    if broken:
        print(f"recovered: {len(broken)} interrupted trial(s) marked Broken")

    server = MnetTcpServer(core, args.listen, http_addr,
                           instruction_source=default_instruction_source,
                           heartbeat_timeout_s=args.heartbeat_timeout)
    print(f"mnet-server listening on {args.listen[0]}:{args.listen[1]} "
          f"(uploads on {http_addr[0]}:{http_addr[1]})")
    server.serve_forever()
    return 0


if __name__ == "__main__":
    sys.exit(main())
