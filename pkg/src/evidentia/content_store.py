"""Content fingerprinting and a local content-addressed blob store.

Identifiers follow a fixed profile: CIDv1, raw codec (0x55), sha2-256
multihash (0x12, length 0x20), rendered in base32-lowercase multibase
(prefix ``b``). Blobs live on disk under ``<root>/<first-4-of-cid>/<cid>``
and are re-verified against their identifier on every read, so silent
tampering of the stored bytes surfaces as ``IntegrityViolation``.

Blobs above ``RAW_BLOCK_LIMIT`` (1 MiB) keep the same identifier but are
stored in a ``sidecar/`` directory keyed by the plain sha256 hex, since a
single raw block of that size would not be portable to standard tooling.
"""

from __future__ import annotations

import base64
import hashlib
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .errors import IntegrityViolation, InvalidArgument, NotFound, StorageFailure

CID_PREFIX = bytes([0x01, 0x55, 0x12, 0x20])  # cidv1, raw codec, sha2-256, 32 bytes
RAW_BLOCK_LIMIT = 1 << 20


@dataclass(frozen=True)
class ContentHash:
    """A 32-byte SHA-256 digest."""

    raw: bytes

    def __post_init__(self):
        if not isinstance(self.raw, bytes) or len(self.raw) != 32:
            raise InvalidArgument("content hash must be exactly 32 bytes")

    @property
    def hex(self) -> str:
        return self.raw.hex()

    @classmethod
    def from_hex(cls, text: str) -> "ContentHash":
        try:
            raw = bytes.fromhex(text)
        except ValueError as exc:
            raise InvalidArgument(f"not a hex digest: {text!r}") from exc
        return cls(raw)

    def __str__(self) -> str:
        return self.hex


@dataclass(frozen=True)
class Cid:
    """Content identifier binding bytes to their sha2-256 digest."""

    text: str
    digest: ContentHash
    codec: str = "raw"

    def __str__(self) -> str:
        return self.text


def sha256_hex(data: bytes) -> ContentHash:
    """SHA-256 digest of ``data`` (FIPS 180-2)."""
    return ContentHash(hashlib.sha256(data).digest())


def _b32_lower(data: bytes) -> str:
    return base64.b32encode(data).decode("ascii").rstrip("=").lower()


def derive_cid(data: bytes) -> Cid:
    """CIDv1/raw/sha2-256 identifier for ``data``, base32-lower multibase."""
    digest = sha256_hex(data)
    text = "b" + _b32_lower(CID_PREFIX + digest.raw)
    return Cid(text=text, digest=digest)


def parse_cid(text: str) -> Cid:
    """Decode and validate a CID string produced by :func:`derive_cid`.

    Raises ``InvalidArgument`` for anything outside the fixed profile.
    """
    if not isinstance(text, str) or not text.startswith("b"):
        raise InvalidArgument(f"expected base32-lower multibase cid, got {text!r}")
    body = text[1:]
    if body != body.lower():
        raise InvalidArgument("cid body must be lowercase base32")
    pad = "=" * (-len(body) % 8)
    try:
        decoded = base64.b32decode(body.upper() + pad)
    except Exception as exc:
        raise InvalidArgument(f"cid is not valid base32: {text!r}") from exc
    if len(decoded) != len(CID_PREFIX) + 32 or not decoded.startswith(CID_PREFIX):
        raise InvalidArgument("cid prefix must be 0x01 0x55 0x12 0x20 plus 32 digest bytes")
    return Cid(text=text, digest=ContentHash(decoded[len(CID_PREFIX):]))


@dataclass(frozen=True)
class PinReceipt:
    """Acknowledgement returned by a pinning backend."""

    cid: Cid
    size: int
    backend: str


class PinningClient:
    """Interface for remote pinning services. Only the local backend ships."""

    def pin(self, cid: Cid, data: bytes) -> PinReceipt:
        raise NotImplementedError


@dataclass
class BlobStore:
    """Filesystem-backed content-addressed store.

    Safe for concurrent reads; writes are serialized by a store-wide lock.
    """

    root: Path
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        self.root = Path(self.root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path_for(self, cid: Cid, size: int) -> Path:
        if size > RAW_BLOCK_LIMIT:
            return self.root / "sidecar" / cid.digest.hex
        return self.root / cid.text[:4] / cid.text

    def _candidate_paths(self, cid: Cid) -> list[Path]:
        return [self.root / cid.text[:4] / cid.text, self.root / "sidecar" / cid.digest.hex]

    def put(self, data: bytes) -> Cid:
        """Persist ``data`` under its identifier. Idempotent."""
        cid = derive_cid(data)
        path = self._path_for(cid, len(data))
        with self._lock:
            if path.exists() and path.read_bytes() == data:
                return cid
            try:
                path.parent.mkdir(parents=True, exist_ok=True)
                tmp = path.with_suffix(".tmp")
                tmp.write_bytes(data)
                os.replace(tmp, path)
            except OSError as exc:
                raise StorageFailure(f"cannot persist blob {cid.text}: {exc}") from exc
        return cid

    def get(self, cid: Cid) -> bytes:
        """Fetch bytes for ``cid``, re-verifying content integrity."""
        for path in self._candidate_paths(cid):
            if path.exists():
                try:
                    data = path.read_bytes()
                except OSError as exc:
                    raise StorageFailure(f"cannot read blob {cid.text}: {exc}") from exc
                if derive_cid(data).text != cid.text:
                    raise IntegrityViolation(
                        f"stored bytes no longer match {cid.text}", detail=str(path)
                    )
                return data
        raise NotFound(f"no blob stored for {cid.text}")

    def has(self, cid: Cid) -> bool:
        return any(p.exists() for p in self._candidate_paths(cid))


class LocalPinningClient(PinningClient):
    """Pinning backend that targets a local BlobStore."""

    def __init__(self, store: BlobStore):
        self.store = store

    def pin(self, cid: Cid, data: bytes) -> PinReceipt:
        stored = self.store.put(data)
        if stored.text != cid.text:
            raise InvalidArgument(f"data does not match cid {cid.text}")
        return PinReceipt(cid=stored, size=len(data), backend="local")
