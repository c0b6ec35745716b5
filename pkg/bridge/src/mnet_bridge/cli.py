"""mnet-bridge: attach middleware trigger services to a running client.

With --demo the bridge runs against the loopback middleware stub and fires
one finished trigger, which is handy for checking a client's control socket
without a robot stack installed.
"""

from __future__ import annotations

import argparse
import sys
import time

from mnet_bridge.bridge import BridgeConfig, SessionUnavailable, serve_bridge
from mnet_bridge.middleware import LoopbackMiddleware


def parse_addr(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    return host or "127.0.0.1", int(port)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mnet-bridge", description=__doc__)
    parser.add_argument("--control", type=parse_addr, required=True, metavar="ADDR:PORT")
    parser.add_argument("--finished-service", default="task_finished")
    parser.add_argument("--skipped-service", default="task_skipped")
    parser.add_argument("--instruction-topic", default="task_instruction")
    parser.add_argument("--status-topic", default="bridge_status")
    parser.add_argument("--demo", action="store_true",
                        help="loopback stub: fire one finished trigger and exit")
    args = parser.parse_args(argv)

    config = BridgeConfig(
        control_addr=args.control,
        finished_service=args.finished_service,
        skipped_service=args.skipped_service,
        instruction_topic=args.instruction_topic,
        status_topic=args.status_topic,
    )
    middleware = LoopbackMiddleware()
    try:
        bridge = serve_bridge(config, middleware)
    except SessionUnavailable as exc:
        print(f"cannot attach: {exc}", file=sys.stderr)
        return 1

    if args.demo:
        ok, message = middleware.call_service(config.finished_service)
        print(f"finished trigger -> success={ok} message={message!r}")
        bridge.close()
        return 0 if ok else 1

    print(f"bridge attached to {args.control[0]}:{args.control[1]}; "
          f"services: {config.finished_service}, {config.skipped_service}")
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        bridge.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
