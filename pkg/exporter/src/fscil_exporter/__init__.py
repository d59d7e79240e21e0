"""Feature extraction from image folders to the fscil feature-store format."""

from .errors import (
    CheckpointMismatchError,
    ExporterError,
    MissingDatasetError,
    ModelLoadFailureError,
)
from .export import ExportJob, ExportResult, run_export
from .storefile import write_store_file

__version__ = "0.1.0"

__all__ = [
    "CheckpointMismatchError",
    "ExporterError",
    "ExportJob",
    "ExportResult",
    "MissingDatasetError",
    "ModelLoadFailureError",
    "run_export",
    "write_store_file",
]
