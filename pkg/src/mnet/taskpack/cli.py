"""mnet-taskgen: generate task instruction payloads for offline inspection."""

from __future__ import annotations

import argparse
import base64
import json
import sys
from pathlib import Path

from mnet.taskpack.payloads import instruction_payload

_DIFFICULTY = {"e": "easy", "m": "medium", "h": "hard"}

TASK_CHOICES = (
    "PegInHole",
    "CableManagement",
    "GraspingInClutter",
    "TabletopManipulation",
    "BlockArrangement",
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mnet-taskgen", description=__doc__)
    parser.add_argument("--task", required=True, choices=TASK_CHOICES)
    parser.add_argument("--seed", type=int, required=True)
    parser.add_argument("--difficulty", choices=sorted(_DIFFICULTY), default="e",
                        help="scene difficulty: e(asy), m(edium), h(ard)")
    parser.add_argument("--out", type=Path, help="output JSON file (stdout if omitted)")
    args = parser.parse_args(argv)

    payload = instruction_payload(args.task, args.seed, _DIFFICULTY[args.difficulty])
    text = json.dumps(payload, indent=2, sort_keys=True)

    if args.out:
        args.out.write_text(text + "\n")
        image_b64 = payload.get("image_png_b64")
        if image_b64:
            png_path = args.out.with_suffix(".png")
            png_path.write_bytes(base64.b64decode(image_b64))
            print(f"wrote {args.out} and {png_path}")
        else:
            print(f"wrote {args.out}")
    else:
        sys.stdout.write(text + "\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
