"""Object storage behind the pre-signed upload URLs.

The default store is a local directory tree (one subdirectory per trial)
with atomic finalize-by-rename, which is all a desk-scale deployment
needs. Real cloud storage slots in behind the same interface.
"""

from __future__ import annotations

import abc
import hashlib
import os
import tempfile
from pathlib import Path
from typing import BinaryIO, Iterable


class ObjectStore(abc.ABC):
    @abc.abstractmethod
    def put(self, trial: str, object_name: str, chunks: Iterable[bytes]) -> tuple[str, int]:
        """Stream chunks into the object; returns (sha256_hex, byte_len).

        Must be atomic: a failure mid-stream leaves no partial object.
        """

    @abc.abstractmethod
    def open(self, trial: str, object_name: str) -> BinaryIO:
        ...

    @abc.abstractmethod
    def exists(self, trial: str, object_name: str) -> bool:
        ...


class LocalObjectStore(ObjectStore):
    def __init__(self, root: str | os.PathLike) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, trial: str, object_name: str) -> Path:
        if "/" in trial or "\\" in trial or ".." in (trial, object_name):
            raise ValueError("unsafe object path")
        return self.root / trial / object_name

    def put(self, trial: str, object_name: str, chunks: Iterable[bytes]) -> tuple[str, int]:
        final = self._path(trial, object_name)
        final.parent.mkdir(parents=True, exist_ok=True)
        digest = hashlib.sha256()
        length = 0
        fd, tmp = tempfile.mkstemp(dir=final.parent, prefix=".upload-")
        try:
            with os.fdopen(fd, "wb") as f:
                for chunk in chunks:
                    digest.update(chunk)
                    length += len(chunk)
                    f.write(chunk)
            os.replace(tmp, final)
        except BaseException:
            try:
                os.unlink(tmp)
            except FileNotFoundError:
                pass
            raise
        return digest.hexdigest(), length

    def open(self, trial: str, object_name: str) -> BinaryIO:
        return open(self._path(trial, object_name), "rb")

    def exists(self, trial: str, object_name: str) -> bool:
        return self._path(trial, object_name).is_file()


class CloudObjectStoreStub(ObjectStore):
    """Seam for a real pre-signed cloud backend; not used at desk scale."""

    def put(self, trial, object_name, chunks):  # pragma: no cover - stub
        raise NotImplementedError("configure a cloud SDK binding here")

    def open(self, trial, object_name):  # pragma: no cover - stub
        raise NotImplementedError

    def exists(self, trial, object_name):  # pragma: no cover - stub
        raise NotImplementedError
