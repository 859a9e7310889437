"""Image-to-OODE extraction bridge for the detection pipeline."""

__version__ = "0.1.0"

from .bridge import (
    CheckpointMissingError,
    DecodeError,
    ExtractionJob,
    ExtractionReport,
    extract,
    list_images,
    load_encoder,
    write_oode,
)

__all__ = [
    "CheckpointMissingError", "DecodeError", "ExtractionJob",
    "ExtractionReport", "extract", "list_images", "load_encoder", "write_oode",
]
