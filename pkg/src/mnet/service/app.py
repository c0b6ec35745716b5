"""FastAPI application wrapping the coordinator core.

The one write endpoint is the pre-signed PUT target: auth is the HMAC token
in the query string, never a server credential. The body streams through a
spool file so multi-GB archives never sit in memory, and a client disconnect
mid-stream leaves no partial object behind (the store finalizes by rename).
"""

from __future__ import annotations

import tempfile
import time
from typing import Callable

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from starlette.requests import ClientDisconnect

from mnet.server.core import BadSignature, ExpiredUrl, ServerCore
from mnet.service.models import HealthResponse, TrialStatusResponse, UploadResponse

_SPOOL_MAX = 8 << 20


def create_app(core: ServerCore, now_unix: Callable[[], float] = time.time) -> FastAPI:
    app = FastAPI(title="mnet storage endpoint", docs_url=None, redoc_url=None)

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", time_unix=int(now_unix()))

    @app.get("/trials/{trial}", response_model=TrialStatusResponse)
    def trial_status(trial: str) -> TrialStatusResponse:
        row = core.store.get_trial(trial)
        if row is None:
            raise HTTPException(status_code=404, detail="unknown trial")
        return TrialStatusResponse(
            trial=row.trial,
            team=row.team,
            task=row.task,
            state=row.state.value,
            registered_at=row.registered_at,
            code_assigned=row.code is not None,
            final_video_digest=row.final_video_digest,
            archive_digest=row.archive_digest,
            event_count=len(core.store.events_for(trial)),
            challenge_count=core.store.challenge_count(trial),
        )

    @app.put("/upload/{trial}/{object_name}", response_model=UploadResponse)
    async def upload(trial: str, object_name: str, expiry: int, token: str,
                     request: Request) -> UploadResponse:
        try:
            core.check_upload_auth(token, trial, object_name, expiry, now_unix())
        except BadSignature as exc:
            return JSONResponse(status_code=403, content={"code": exc.code, "message": str(exc)})
        except ExpiredUrl as exc:
            return JSONResponse(status_code=410, content={"code": exc.code, "message": str(exc)})

        with tempfile.SpooledTemporaryFile(max_size=_SPOOL_MAX) as spool:
            try:
                async for chunk in request.stream():
                    spool.write(chunk)
            except ClientDisconnect:
                # Aborted transfer: spool is discarded, no object is stored.
                raise HTTPException(status_code=499, detail="client disconnected")
            spool.seek(0)

            def chunks():
                while True:
                    piece = spool.read(1 << 16)
                    if not piece:
                        return
                    yield piece

            digest, length = core.store_upload(trial, object_name, chunks(),
                                               int(now_unix() * 1e6))
        return UploadResponse(trial=trial, object_name=object_name,
                              byte_len=length, sha256=digest)

    return app
