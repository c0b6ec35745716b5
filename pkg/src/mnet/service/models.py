"""Pydantic request/response models for the HTTP surface."""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel


class UploadResponse(BaseModel):
    trial: str
    object_name: str
    byte_len: int
    sha256: str


class TrialStatusResponse(BaseModel):
    trial: str
    team: str
    task: str
    state: str
    registered_at: int
    code_assigned: bool
    final_video_digest: Optional[str] = None
    archive_digest: Optional[str] = None
    event_count: int
    challenge_count: int


class HealthResponse(BaseModel):
    status: str
    time_unix: int


class ErrorResponse(BaseModel):
    code: str
    message: str
