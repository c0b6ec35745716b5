"""Pre-signed upload URLs: HMAC-SHA-256 over (trial, object, expiry).

The token authorizes exactly one (trial, object_name, expiry) triple; a
holder needs no server credentials, and the server needs no URL state --
recomputing the HMAC at PUT time is the whole check.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass

UPLOAD_TTL_S = 7200  # two hours


def sign_upload_token(secret: bytes, trial: str, object_name: str, expiry_unix: int) -> str:
    msg = f"{trial}\n{object_name}\n{expiry_unix}".encode("utf-8")
    return hmac.new(secret, msg, hashlib.sha256).hexdigest()


def verify_upload_token(secret: bytes, trial: str, object_name: str, expiry_unix: int, token: str) -> bool:
    expected = sign_upload_token(secret, trial, object_name, expiry_unix)
    return hmac.compare_digest(expected, token)


@dataclass(frozen=True)
class SignedUploadUrl:
    base: str  # e.g. "http://127.0.0.1:8800"
    trial: str
    object_name: str
    expiry_unix: int
    token: str

    @property
    def url(self) -> str:
        return (f"{self.base}/upload/{self.trial}/{self.object_name}"
                f"?expiry={self.expiry_unix}&token={self.token}")


def issue_signed_url(secret: bytes, base: str, trial: str, object_name: str, now_unix: int) -> SignedUploadUrl:
    expiry = now_unix + UPLOAD_TTL_S
    return SignedUploadUrl(
        base=base,
        trial=trial,
        object_name=object_name,
        expiry_unix=expiry,
        token=sign_upload_token(secret, trial, object_name, expiry),
    )
