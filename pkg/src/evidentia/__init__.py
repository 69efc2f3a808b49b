"""Forensic media scoring with a content-addressed, tamper-evident
evidence registry and chain-of-custody workflow."""

__version__ = "0.1.0"

from .content_store import BlobStore, Cid, ContentHash, derive_cid, parse_cid, sha256_hex
from .errors import PlatformError

__all__ = [
    "BlobStore",
    "Cid",
    "ContentHash",
    "PlatformError",
    "derive_cid",
    "parse_cid",
    "sha256_hex",
    "__version__",
]
