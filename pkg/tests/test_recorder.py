"""Recorder, container, and packaging."""

import io
import zipfile

import pytest

from mnet.client import MissingFile, Recorder, SyntheticSource, package_submission
from mnet.client.packaging import build_manifest, write_events_jsonl
from mnet.container import CODEC_PNG, scan_mnv_file
from mnet.protocol import (
    CanonicalFrame,
    DimensionMismatch,
    canonical_frame_digest,
    decode_frame_png,
    sha256_file,
)

US = 1_000_000


def _record(tmp_path, n_frames=20, fps=10, ring=8, name="video.mnv"):
    source = SyntheticSource(seed=5, width=16, height=12)
    rec = Recorder(tmp_path / name, fps=fps, width=16, height=12, ring_capacity=ring)
    for k in range(n_frames):
        rec.append(source.next_frame(capture_ts=k * US // fps, frame_index=k))
    return rec


def test_frame_count_and_ring_window(tmp_path):
    rec = _record(tmp_path, n_frames=20, ring=8)
    assert rec.frame_count == 20
    ring = rec.ring.snapshot()
    assert [f.frame_index for f in ring] == list(range(12, 20))
    assert rec.ring.latest().frame_index == 19


def test_running_digest_equals_independent_file_hash(tmp_path):
    rec = _record(tmp_path, n_frames=15)
    summary = rec.close()
    assert summary.digest == sha256_file(summary.path)
    assert summary.frame_count == 15


def test_duration_covers_last_frame_period(tmp_path):
    rec = _record(tmp_path, n_frames=20, fps=10)
    summary = rec.close()
    # Frames at 0..1.9s plus one 100ms period.
    assert summary.duration_us == 2_000_000


def test_dimension_change_rejected(tmp_path):
    rec = _record(tmp_path, n_frames=1)
    with pytest.raises(DimensionMismatch):
        rec.append(CanonicalFrame(width=8, height=8, capture_ts=1, frame_index=1,
                                  pixels=b"\x00" * (3 * 64)))


def test_scan_round_trips_frames(tmp_path):
    rec = _record(tmp_path, n_frames=6)
    summary = rec.close()
    scan = scan_mnv_file(summary.path)
    assert (scan.fps, scan.width, scan.height) == (10, 16, 12)
    assert scan.frame_count == 6
    assert not scan.truncated
    source = SyntheticSource(seed=5, width=16, height=12)
    for k, chunk in enumerate(scan.chunks):
        assert chunk.codec == CODEC_PNG
        assert chunk.frame_index == k
        w, h, pixels = decode_frame_png(chunk.payload)
        expected = source.next_frame(capture_ts=chunk.capture_ts, frame_index=k)
        assert pixels == expected.pixels
        rebuilt = CanonicalFrame(width=w, height=h, capture_ts=chunk.capture_ts,
                                 frame_index=chunk.frame_index, pixels=pixels)
        assert canonical_frame_digest(rebuilt) == canonical_frame_digest(expected)


def test_truncated_container_scan_stops_cleanly(tmp_path):
    rec = _record(tmp_path, n_frames=10)
    summary = rec.close()
    data = summary.path.read_bytes()
    cut = summary.path.with_suffix(".cut")
    cut.write_bytes(data[: int(len(data) * 0.6)])
    scan = scan_mnv_file(cut)
    assert scan.truncated
    assert 0 < scan.frame_count < 10
    assert scan.duration_us < summary.duration_us


# -- packaging -------------------------------------------------------------------


def _packaged(tmp_path):
    rec = _record(tmp_path, n_frames=5)
    summary = rec.close()
    events_path = tmp_path / "events.jsonl"
    write_events_jsonl(events_path, [
        {"seq": 1, "client_ts": 0, "kind": "Status", "payload": {}},
        {"seq": 2, "client_ts": 100, "kind": "TaskFinished", "payload": {"item": "a"}},
    ])
    frame = rec.ring.latest()
    from mnet.protocol import encode_frame_png
    frame_path = tmp_path / "ch_000001.png"
    frame_path.write_bytes(encode_frame_png(frame))
    files = {"video.mnv": summary.path, "events.jsonl": events_path,
             "frames/ch_000001.png": frame_path}
    manifest = build_manifest(
        trial="ab" * 16, code="ABCD2345", summary=summary,
        challenges=[{"challenge_id": 1, "frame_index": frame.frame_index,
                     "capture_ts": frame.capture_ts,
                     "digest": canonical_frame_digest(frame),
                     "frame_file": "frames/ch_000001.png"}],
        event_count=2, files=files)
    return manifest, files


def test_inventory_covers_every_file_with_correct_sizes(tmp_path):
    manifest, files = _packaged(tmp_path)
    inventory = {e["path"]: e for e in manifest["file_inventory"]}
    assert set(inventory) == set(files)
    for arcname, src in files.items():
        assert inventory[arcname]["byte_len"] == src.stat().st_size
        assert inventory[arcname]["digest"] == sha256_file(src)


def test_repackaging_identical_inputs_reproduces_digest(tmp_path):
    manifest, files = _packaged(tmp_path)
    d1 = package_submission(tmp_path / "a.zip", manifest, files)
    d2 = package_submission(tmp_path / "b.zip", manifest, files)
    assert d1 == d2


def test_archive_contains_expected_layout(tmp_path):
    manifest, files = _packaged(tmp_path)
    package_submission(tmp_path / "package.zip", manifest, files)
    with zipfile.ZipFile(tmp_path / "package.zip") as zf:
        names = zf.namelist()
        assert names[0] == "manifest.json"
        assert set(names) == {"manifest.json", "video.mnv", "events.jsonl",
                              "frames/ch_000001.png"}


def test_missing_file_rejected(tmp_path):
    manifest, files = _packaged(tmp_path)
    files["frames/ch_000001.png"].unlink()
    with pytest.raises(MissingFile):
        package_submission(tmp_path / "package.zip", manifest, files)
