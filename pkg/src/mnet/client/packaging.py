"""Submission packaging: deterministic archive with a self-describing manifest.

Archive layout:

    manifest.json     trial identity, digests, challenge table, inventory
    video.mnv         the recorded container
    events.jsonl      acked events, one canonical JSON object per line
    frames/ch_*.png   one lossless frame per answered challenge

Entries are written in sorted path order with fixed metadata so repackaging
identical inputs reproduces the archive byte for byte.
"""

from __future__ import annotations

import json
import zipfile
from pathlib import Path

from mnet.protocol import sha256_file

_FIXED_DATE = (1980, 1, 1, 0, 0, 0)


class MissingFile(Exception):
    pass


def write_events_jsonl(path: str | Path, events: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ev in events:
            f.write(json.dumps(ev, sort_keys=True, separators=(",", ":")) + "\n")


def build_manifest(*, trial: str, code: str, summary, challenges: list[dict],
                   event_count: int, files: dict[str, Path]) -> dict:
    """Manifest body; ``files`` maps archive path -> source file on disk."""
    inventory = []
    for arcname in sorted(files):
        src = files[arcname]
        if not src.is_file():
            raise MissingFile(f"{arcname} missing at {src}")
        inventory.append({
            "path": arcname,
            "byte_len": src.stat().st_size,
            "digest": sha256_file(src),
        })
    return {
        "trial": trial,
        "code": code,
        "final_video_digest": summary.digest,
        "frame_count": summary.frame_count,
        "video_duration_us": summary.duration_us,
        "fps": summary.fps,
        "challenges": sorted(challenges, key=lambda c: c["challenge_id"]),
        "event_count": event_count,
        "file_inventory": inventory,
    }


def package_submission(out_path: str | Path, manifest: dict, files: dict[str, Path]) -> str:
    """Write the archive; returns its SHA-256. Deterministic for equal inputs."""
    out_path = Path(out_path)
    for arcname, src in files.items():
        if not src.is_file():
            raise MissingFile(f"{arcname} missing at {src}")
    with zipfile.ZipFile(out_path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        info = zipfile.ZipInfo("manifest.json", date_time=_FIXED_DATE)
        zf.writestr(info, json.dumps(manifest, sort_keys=True, indent=1))
        for arcname in sorted(files):
            info = zipfile.ZipInfo(arcname, date_time=_FIXED_DATE)
            info.compress_type = zipfile.ZIP_DEFLATED
            with open(files[arcname], "rb") as f:
                zf.writestr(info, f.read())
    return sha256_file(out_path)
