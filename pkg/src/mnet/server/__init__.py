"""Centralized coordinator: registration, codes, events, challenges, uploads."""

from mnet.server.challenges import ChallengeSchedule, challenge_times, schedule_challenges
from mnet.server.core import (
    BadSignature,
    DigestMismatch,
    DuplicateResponse,
    ExpiredUrl,
    MissingUpload,
    OutOfOrderSeq,
    QuotaExceeded,
    QuotaPolicy,
    ServerCore,
    ServerError,
    UnknownChallenge,
    UnknownTeam,
)
from mnet.server.persistence import SqliteStore, Store, TrialRow
from mnet.server.signing import UPLOAD_TTL_S, SignedUploadUrl, sign_upload_token, verify_upload_token
from mnet.server.storage import LocalObjectStore, ObjectStore

__all__ = [
    "UPLOAD_TTL_S",
    "BadSignature",
    "ChallengeSchedule",
    "DigestMismatch",
    "DuplicateResponse",
    "ExpiredUrl",
    "LocalObjectStore",
    "MissingUpload",
    "ObjectStore",
    "OutOfOrderSeq",
    "QuotaExceeded",
    "QuotaPolicy",
    "ServerCore",
    "ServerError",
    "SignedUploadUrl",
    "SqliteStore",
    "Store",
    "TrialRow",
    "UnknownChallenge",
    "UnknownTeam",
    "challenge_times",
    "schedule_challenges",
    "sign_upload_token",
    "verify_upload_token",
]
