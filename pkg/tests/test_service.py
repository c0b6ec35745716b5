"""HTTP surface: upload endpoint auth/expiry semantics and status views."""

import pytest
from fastapi.testclient import TestClient

from mnet.protocol import Event, Finalize, sha256_hex
from mnet.service import create_app

from conftest import T0

US = 1_000_000


@pytest.fixture
def clock():
    return {"now": T0 / 1e6}


@pytest.fixture
def api(core, clock):
    app = create_app(core, now_unix=lambda: clock["now"])
    return TestClient(app)


def _finalized_trial(core):
    row = core.register_trial("team-a", "PegInHole", T0)
    core.begin_session(row.trial, T0 + 1)
    core.record_event(row.trial, Event(seq=1, client_ts=0, kind="Status", payload={}), T0 + 2)
    core.finalize(row.trial, Finalize(final_video_digest="d" * 64, frame_count=1,
                                      video_duration_us=1), T0 + 10 * US)
    return row.trial


def test_health(api):
    resp = api.get("/health")
    assert resp.status_code == 200
    assert resp.json()["status"] == "ok"


def test_trial_status_view(api, core):
    trial = _finalized_trial(core)
    doc = api.get(f"/trials/{trial}").json()
    assert doc["state"] == "Finalized"
    assert doc["code_assigned"] is True
    assert doc["event_count"] == 1
    assert api.get("/trials/feedbeef").status_code == 404


def test_valid_upload_roundtrip(api, core):
    trial = _finalized_trial(core)
    url = core.issue_upload_url(trial, T0 + 11 * US)
    body = b"fake archive " * 1000
    resp = api.put(f"/upload/{trial}/{url.object_name}",
                   params={"expiry": url.expiry_unix, "token": url.token},
                   content=body)
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["byte_len"] == len(body)
    assert doc["sha256"] == sha256_hex(body)
    core.upload_complete(trial, doc["sha256"], T0 + 12 * US)


def test_bad_token_gets_403(api, core):
    trial = _finalized_trial(core)
    url = core.issue_upload_url(trial, T0 + 11 * US)
    resp = api.put(f"/upload/{trial}/{url.object_name}",
                   params={"expiry": url.expiry_unix, "token": "0" * 64},
                   content=b"x")
    assert resp.status_code == 403
    assert resp.json()["code"] == "BadSignature"


def test_expired_url_gets_410(api, core, clock):
    trial = _finalized_trial(core)
    url = core.issue_upload_url(trial, T0 + 11 * US)
    clock["now"] = url.expiry_unix  # exactly at expiry: rejected
    resp = api.put(f"/upload/{trial}/{url.object_name}",
                   params={"expiry": url.expiry_unix, "token": url.token},
                   content=b"x")
    assert resp.status_code == 410
    assert resp.json()["code"] == "ExpiredUrl"


def test_one_second_before_expiry_still_accepted(api, core, clock):
    trial = _finalized_trial(core)
    url = core.issue_upload_url(trial, T0 + 11 * US)
    clock["now"] = url.expiry_unix - 1
    resp = api.put(f"/upload/{trial}/{url.object_name}",
                   params={"expiry": url.expiry_unix, "token": url.token},
                   content=b"x")
    assert resp.status_code == 200


def test_tampered_expiry_param_fails_signature(api, core):
    trial = _finalized_trial(core)
    url = core.issue_upload_url(trial, T0 + 11 * US)
    resp = api.put(f"/upload/{trial}/{url.object_name}",
                   params={"expiry": url.expiry_unix + 9999, "token": url.token},
                   content=b"x")
    assert resp.status_code == 403
