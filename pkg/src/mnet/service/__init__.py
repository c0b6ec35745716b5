"""HTTP surface: pre-signed uploads and read-only trial status."""

from mnet.service.app import create_app
from mnet.service.models import HealthResponse, TrialStatusResponse, UploadResponse

__all__ = ["HealthResponse", "TrialStatusResponse", "UploadResponse", "create_app"]
