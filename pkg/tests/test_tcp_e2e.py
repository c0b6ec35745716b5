"""Real-socket smoke path: TCP protocol + HTTP upload + verifier."""

import threading

import pytest

from mnet.client.eventloop import ClientEventLoop
from mnet.client.session import SessionConfig
from mnet.client.sources import SyntheticSource
from mnet.protocol import TrialState
from mnet.server import ChallengeSchedule, LocalObjectStore, ServerCore, SqliteStore
from mnet.server.cli import default_instruction_source
from mnet.server.tcp import MnetTcpServer
from mnet.verifier import verify_submission


@pytest.fixture
def live_server(tmp_path):
    store = SqliteStore(str(tmp_path / "server.db"))
    core = ServerCore(
        store, LocalObjectStore(tmp_path / "objects"), secret=b"e2e-secret",
        schedule=ChallengeSchedule(mean_interval_s=3.0, first_after_s=1.0,
                                   response_deadline_s=1.4))
    store.add_team("team-e2e", 0)
    server = MnetTcpServer(core, ("127.0.0.1", 0), ("127.0.0.1", 0),
                           instruction_source=default_instruction_source)
    server.start()
    server.wait_ready()
    yield server, core
    server.stop()
    store.close()


def _run_client(server, tmp_path, duration_s=4.0, fps=5, **kwargs):
    config = SessionConfig(team="team-e2e", task="GraspingInClutter",
                           out_dir=tmp_path / "client-out", fps=fps,
                           duration_s=duration_s)
    loop = ClientEventLoop(("127.0.0.1", server.listen_port), config,
                           SyntheticSource(seed=11, width=32, height=24),
                           quiet=True, **kwargs)
    return loop.run()


def test_session_reaches_submitted_over_real_sockets(live_server, tmp_path):
    server, core = live_server
    outcome = _run_client(server, tmp_path)
    assert outcome.status == "submitted"
    assert outcome.frame_count == 20
    row = core.store.get_trial(outcome.trial)
    assert row.state is TrialState.SUBMITTED

    report = verify_submission(core.store, core.objects, outcome.trial)
    assert report.automated_pass()
    assert len(report.per_challenge) >= 1


def test_instruction_delivered_over_real_sockets(live_server, tmp_path):
    server, core = live_server
    outcome = _run_client(server, tmp_path)
    seqs = core.store.instructions_for(outcome.trial)
    assert len(seqs) == 1
    _, payload, acked = seqs[0]
    assert payload["kind"] == "scene_layout"
    assert acked


def test_upload_resets_recover_with_fresh_urls(live_server, tmp_path):
    server, core = live_server
    outcome = _run_client(server, tmp_path,
                          upload_fault_fractions=[0.1, 0.9])
    assert outcome.status == "submitted"
    stored = core.store.get_submission(outcome.trial, "package.zip")
    assert stored is not None
    byte_len, digest, _ = stored
    assert digest == core.store.get_trial(outcome.trial).archive_digest


def test_unknown_team_is_refused_cleanly(live_server, tmp_path):
    server, core = live_server
    config = SessionConfig(team="not-a-team", task="PegInHole",
                           out_dir=tmp_path / "c2", fps=5, duration_s=2.0)
    loop = ClientEventLoop(("127.0.0.1", server.listen_port), config,
                           SyntheticSource(seed=1, width=16, height=12), quiet=True)
    outcome = loop.run()
    assert outcome.status == "protocol_error"
    assert outcome.exit_code == 3
    assert "UnknownTeam" in outcome.detail


def test_concurrent_clients_interleave(live_server, tmp_path):
    server, core = live_server
    results = {}

    def run(tag):
        config = SessionConfig(team="team-e2e", task="PegInHole",
                               out_dir=tmp_path / f"c-{tag}", fps=5, duration_s=3.0)
        loop = ClientEventLoop(("127.0.0.1", server.listen_port), config,
                               SyntheticSource(seed=tag, width=16, height=12), quiet=True)
        results[tag] = loop.run()

    threads = [threading.Thread(target=run, args=(k,)) for k in (1, 2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout=30)
    assert results[1].status == "submitted"
    assert results[2].status == "submitted"
    assert results[1].trial != results[2].trial
    assert results[1].code != results[2].code
