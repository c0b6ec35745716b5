"""Participant-side session driver and its supporting pieces."""

from mnet.client.packaging import MissingFile, package_submission
from mnet.client.recorder import FrameRing, Recorder, RecorderSummary
from mnet.client.session import (
    ClientIO,
    SessionConfig,
    SessionCore,
    SessionOutcome,
    UploadRejected,
    UploadTransportError,
)
from mnet.client.sources import (
    DirectorySource,
    FrameSource,
    MnvReplaySource,
    SourceExhausted,
    SyntheticSource,
    parse_source_spec,
)
from mnet.client.uploader import put_archive

__all__ = [
    "ClientIO",
    "DirectorySource",
    "FrameRing",
    "FrameSource",
    "MissingFile",
    "MnvReplaySource",
    "Recorder",
    "RecorderSummary",
    "SessionConfig",
    "SessionCore",
    "SessionOutcome",
    "SourceExhausted",
    "SyntheticSource",
    "UploadRejected",
    "UploadTransportError",
    "package_submission",
    "parse_source_spec",
    "put_archive",
]
