"""Image embedding service: [CLS]-pooled vectors and a masking oracle."""

from .backbone import DEFAULT_MODEL, Backbone, ModelError
from .embv1 import FormatError, write_embv1
from .oracle import MaskedPair, OracleSettings, ProtocolViolation, serve_oracle
from .pipeline import IMAGE_SUFFIXES, DataError, EmbedJob, EmbedReport, embed_images

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MODEL",
    "Backbone",
    "DataError",
    "EmbedJob",
    "EmbedReport",
    "FormatError",
    "IMAGE_SUFFIXES",
    "MaskedPair",
    "ModelError",
    "OracleSettings",
    "ProtocolViolation",
    "embed_images",
    "serve_oracle",
    "write_embv1",
]
