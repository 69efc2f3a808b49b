"""Deterministic in-process chain hosting the evidence registry state machine.

The simulator models state transitions and auditability, not consensus:
there is no gas, no signature checking, and sender authenticity is the
caller's responsibility (the identity layer maps principals to addresses).
All hashing is SHA-256 over fixed byte layouts so that two replicas
replaying the same transaction log agree bit-for-bit.

Byte layouts (``lp`` is a big-endian u32 length prefix, ``u64``/``u8``
big-endian fixed-width integers):

- transaction:  u64 nonce || lp(sender, 20 bytes) || lp(method utf-8)
                || lp(args); tx_hash = sha256(transaction)
- args, registerEvidence: lp(content_hash, 32) || lp(cid utf-8) || lp(type utf-8)
- args, verifyEvidence:   lp(content_hash, 32)
- args, grantRole:        lp(grantee, 20) || lp(role utf-8)
- block hash:  sha256(parent_hash || u64 number || u64 timestamp
               || tx_hash_0 || tx_hash_1 || ...)
- record:      lp(content_hash) || lp(cid utf-8) || lp(type utf-8)
               || lp(analyst, 20) || u64 registered_at || u8 verified
               || lp(verifier or empty) || u64 verified_at (0 if absent)
- state root:  sha256(b"evidence:" || lp(record)... sorted by content hash
               || b"roles:" || (lp(address) || lp(comma-joined sorted
               roles))... sorted by address hex)

The clock is logical: genesis at timestamp 0, +1 s per block, one
transaction per block unless a larger batch size is configured. Failed
submissions raise, mutate nothing, and are never recorded, so a recorded
log replays cleanly from genesis.
"""

from __future__ import annotations

import hashlib
import struct
import threading
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .content_store import Cid, ContentHash, parse_cid
from .errors import (
    AlreadyVerified,
    DuplicateEvidence,
    InvalidArgument,
    NotFound,
    Unauthorized,
)

ZERO_HASH = ContentHash(b"\x00" * 32)


class ChainRole(Enum):
    ANALYST_ROLE = "ANALYST_ROLE"
    AUTHORITY_ROLE = "AUTHORITY_ROLE"
    ADMIN_ROLE = "ADMIN_ROLE"


class EvidenceType(Enum):
    IMAGE = "image"
    VIDEO = "video"
    AUDIO = "audio"
    DOCUMENT = "document"


class EventName(Enum):
    EVIDENCE_REGISTERED = "EvidenceRegistered"
    EVIDENCE_VERIFIED = "EvidenceVerified"
    ROLE_GRANTED = "RoleGranted"


@dataclass(frozen=True)
class ChainAddress:
    """20-byte account identifier."""

    raw: bytes

    def __post_init__(self):
        if not isinstance(self.raw, bytes) or len(self.raw) != 20:
            raise InvalidArgument("chain address must be exactly 20 bytes")

    @property
    def hex(self) -> str:
        return "0x" + self.raw.hex()

    @classmethod
    def from_hex(cls, text: str) -> "ChainAddress":
        body = text[2:] if text.startswith("0x") else text
        try:
            raw = bytes.fromhex(body)
        except ValueError as exc:
            raise InvalidArgument(f"bad address hex {text!r}") from exc
        return cls(raw)

    @classmethod
    def derive(cls, seed: str) -> "ChainAddress":
        """Deterministic address: sha256 of the seed, truncated to 20 bytes."""
        return cls(hashlib.sha256(seed.encode("utf-8")).digest()[:20])

    def __str__(self) -> str:
        return self.hex


GENESIS_ADMIN = ChainAddress.derive("evidentia:genesis-admin")


def _lp(data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + data


def _u64(value: int) -> bytes:
    return struct.pack(">Q", value)


@dataclass(frozen=True)
class ChainTransaction:
    nonce: int
    sender: ChainAddress
    method: str
    args: bytes
    tx_hash: ContentHash

    def encode(self) -> bytes:
        return encode_tx(self.nonce, self.sender, self.method, self.args)


def encode_tx(nonce: int, sender: ChainAddress, method: str, args: bytes) -> bytes:
    return _u64(nonce) + _lp(sender.raw) + _lp(method.encode("utf-8")) + _lp(args)


def make_tx(nonce: int, sender: ChainAddress, method: str, args: bytes) -> ChainTransaction:
    payload = encode_tx(nonce, sender, method, args)
    return ChainTransaction(
        nonce=nonce,
        sender=sender,
        method=method,
        args=args,
        tx_hash=ContentHash(hashlib.sha256(payload).digest()),
    )


def decode_tx(payload: bytes) -> ChainTransaction:
    """Parse one canonical transaction encoding (inverse of ``encode_tx``)."""

    def take(buf: bytes, offset: int) -> tuple[bytes, int]:
        if offset + 4 > len(buf):
            raise InvalidArgument("truncated transaction encoding")
        (length,) = struct.unpack(">I", buf[offset : offset + 4])
        end = offset + 4 + length
        if end > len(buf):
            raise InvalidArgument("truncated transaction field")
        return buf[offset + 4 : end], end

    if len(payload) < 8:
        raise InvalidArgument("truncated transaction encoding")
    (nonce,) = struct.unpack(">Q", payload[:8])
    sender_raw, offset = take(payload, 8)
    method_raw, offset = take(payload, offset)
    args, offset = take(payload, offset)
    if offset != len(payload):
        raise InvalidArgument("trailing bytes after transaction encoding")
    try:
        method = method_raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InvalidArgument("transaction method is not utf-8") from exc
    return make_tx(nonce, ChainAddress(sender_raw), method, args)


def encode_register_args(content_hash: ContentHash, cid: Cid, evidence_type: EvidenceType) -> bytes:
    return (
        _lp(content_hash.raw)
        + _lp(cid.text.encode("utf-8"))
        + _lp(evidence_type.value.encode("utf-8"))
    )


def decode_register_args(args: bytes) -> tuple[ContentHash, Cid, EvidenceType]:
    fields = _split_fields(args, 3)
    try:
        cid = parse_cid(fields[1].decode("utf-8"))
        evidence_type = EvidenceType(fields[2].decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise InvalidArgument(f"corrupt register arguments: {exc}") from exc
    return ContentHash(fields[0]), cid, evidence_type


def encode_verify_args(content_hash: ContentHash) -> bytes:
    return _lp(content_hash.raw)


def decode_verify_args(args: bytes) -> ContentHash:
    return ContentHash(_split_fields(args, 1)[0])


def encode_grant_args(grantee: ChainAddress, role: ChainRole) -> bytes:
    return _lp(grantee.raw) + _lp(role.value.encode("utf-8"))


def decode_grant_args(args: bytes) -> tuple[ChainAddress, ChainRole]:
    fields = _split_fields(args, 2)
    try:
        role = ChainRole(fields[1].decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise InvalidArgument(f"corrupt grant arguments: {exc}") from exc
    return ChainAddress(fields[0]), role


def _split_fields(args: bytes, expected: int) -> list[bytes]:
    fields = []
    offset = 0
    for _ in range(expected):
        if offset + 4 > len(args):
            raise InvalidArgument("truncated argument encoding")
        (length,) = struct.unpack(">I", args[offset : offset + 4])
        offset += 4
        if offset + length > len(args):
            raise InvalidArgument("truncated argument field")
        fields.append(args[offset : offset + length])
        offset += length
    if offset != len(args):
        raise InvalidArgument("trailing bytes in argument encoding")
    return fields


@dataclass(frozen=True)
class Block:
    number: int
    timestamp: int
    parent_hash: ContentHash
    tx_hashes: tuple[ContentHash, ...]
    block_hash: ContentHash


def _hash_block(parent_hash: ContentHash, number: int, timestamp: int,
                tx_hashes: tuple[ContentHash, ...]) -> ContentHash:
    payload = parent_hash.raw + _u64(number) + _u64(timestamp)
    payload += b"".join(h.raw for h in tx_hashes)
    return ContentHash(hashlib.sha256(payload).digest())


@dataclass(frozen=True)
class EvidenceRecord:
    content_hash: ContentHash
    cid: Cid
    evidence_type: EvidenceType
    analyst: ChainAddress
    registered_at: int
    verified: bool = False
    verifier: ChainAddress | None = None
    verified_at: int | None = None

    def encode(self) -> bytes:
        return (
            _lp(self.content_hash.raw)
            + _lp(self.cid.text.encode("utf-8"))
            + _lp(self.evidence_type.value.encode("utf-8"))
            + _lp(self.analyst.raw)
            + _u64(self.registered_at)
            + struct.pack(">B", 1 if self.verified else 0)
            + _lp(self.verifier.raw if self.verifier else b"")
            + _u64(self.verified_at if self.verified_at is not None else 0)
        )


@dataclass(frozen=True)
class ChainEvent:
    name: EventName
    content_hash: ContentHash | None
    tx_hash: ContentHash
    block_number: int
    log_index: int


class EvidenceChain:
    """Single linearizable registry: submissions are totally ordered by an
    internal lock; reads return immutable snapshots."""

    def __init__(
        self,
        genesis_admin: ChainAddress = GENESIS_ADMIN,
        genesis_timestamp: int = 0,
        block_interval_s: int = 1,
        txs_per_block: int = 1,
    ):
        if txs_per_block < 1:
            raise InvalidArgument("txs_per_block must be >= 1")
        self.genesis_admin = genesis_admin
        self.block_interval_s = block_interval_s
        self.txs_per_block = txs_per_block
        self._lock = threading.RLock()
        self._records: dict[str, EvidenceRecord] = {}
        self._roles: dict[str, set[ChainRole]] = {genesis_admin.hex: {ChainRole.ADMIN_ROLE}}
        self._addresses: dict[str, ChainAddress] = {genesis_admin.hex: genesis_admin}
        self._nonces: dict[str, int] = {}
        self._events: list[ChainEvent] = []
        self._tx_log: list[ChainTransaction] = []
        genesis = Block(
            number=0,
            timestamp=genesis_timestamp,
            parent_hash=ZERO_HASH,
            tx_hashes=(),
            block_hash=_hash_block(ZERO_HASH, 0, genesis_timestamp, ()),
        )
        self._blocks: list[Block] = [genesis]
        self._pending: list[ChainTransaction] = []
        self._log = None

    @classmethod
    def open(cls, log_path: str | Path, **options) -> "EvidenceChain":
        """Replay an on-disk tx log (if any) and keep appending to it."""
        path = Path(log_path)
        lines = path.read_text(encoding="utf-8").splitlines() if path.exists() else []
        chain = replay(lines, **options)
        path.parent.mkdir(parents=True, exist_ok=True)
        chain._log = path.open("a", encoding="utf-8")
        return chain

    def close(self):
        with self._lock:
            if self._log is not None:
                self._log.close()
                self._log = None

    # --- internal plumbing ---------------------------------------------

    def _next_block_slot(self) -> tuple[int, int]:
        number = len(self._blocks)
        timestamp = self._blocks[0].timestamp + number * self.block_interval_s
        return number, timestamp

    def _include(self, tx: ChainTransaction, events: list[tuple[EventName, ContentHash | None]]):
        """Add an already-validated tx to the pending block and emit its events."""
        number, _ = self._next_block_slot()
        for name, content_hash in events:
            self._events.append(
                ChainEvent(
                    name=name,
                    content_hash=content_hash,
                    tx_hash=tx.tx_hash,
                    block_number=number,
                    log_index=len(self._pending_events_in_block()),
                )
            )
        self._pending.append(tx)
        self._tx_log.append(tx)
        self._nonces[tx.sender.hex] = tx.nonce + 1
        if self._log is not None:
            self._log.write(tx.encode().hex() + "\n")
            self._log.flush()
        if len(self._pending) >= self.txs_per_block:
            self._mine()

    def _pending_events_in_block(self) -> list[ChainEvent]:
        number = len(self._blocks)
        return [e for e in self._events if e.block_number == number]

    def _mine(self):
        if not self._pending:
            return
        number, timestamp = self._next_block_slot()
        parent = self._blocks[-1]
        tx_hashes = tuple(tx.tx_hash for tx in self._pending)
        block = Block(
            number=number,
            timestamp=timestamp,
            parent_hash=parent.block_hash,
            tx_hashes=tx_hashes,
            block_hash=_hash_block(parent.block_hash, number, timestamp, tx_hashes),
        )
        self._blocks.append(block)
        self._pending = []

    def flush(self):
        """Mine any partially filled block (no-op with the default batch of 1)."""
        with self._lock:
            self._mine()

    def _require_role(self, sender: ChainAddress, role: ChainRole):
        if role not in self._roles.get(sender.hex, set()):
            raise Unauthorized(f"{sender.hex} lacks {role.value}")

    def _next_nonce(self, sender: ChainAddress) -> int:
        return self._nonces.get(sender.hex, 0)

    # --- transaction surface -------------------------------------------

    def submit_register(
        self,
        sender: ChainAddress,
        content_hash: ContentHash,
        cid: Cid,
        evidence_type: EvidenceType,
    ) -> tuple[ChainTransaction, EvidenceRecord]:
        if not isinstance(evidence_type, EvidenceType):
            raise InvalidArgument(f"bad evidence type {evidence_type!r}")
        parse_cid(cid.text)  # malformed cid is rejected before any state change
        if cid.digest.hex != content_hash.hex:
            raise InvalidArgument("cid digest does not match content hash")
        with self._lock:
            self._require_role(sender, ChainRole.ANALYST_ROLE)
            if content_hash.hex in self._records:
                raise DuplicateEvidence(f"{content_hash.hex} already registered")
            _, timestamp = self._next_block_slot()
            tx = make_tx(
                self._next_nonce(sender),
                sender,
                "registerEvidence",
                encode_register_args(content_hash, cid, evidence_type),
            )
            record = EvidenceRecord(
                content_hash=content_hash,
                cid=cid,
                evidence_type=evidence_type,
                analyst=sender,
                registered_at=timestamp,
            )
            self._records[content_hash.hex] = record
            self._include(tx, [(EventName.EVIDENCE_REGISTERED, content_hash)])
            return tx, record

    def submit_verify(
        self, sender: ChainAddress, content_hash: ContentHash
    ) -> tuple[ChainTransaction, EvidenceRecord]:
        with self._lock:
            self._require_role(sender, ChainRole.AUTHORITY_ROLE)
            record = self._records.get(content_hash.hex)
            if record is None:
                raise NotFound(f"{content_hash.hex} is not registered")
            if record.verified:
                raise AlreadyVerified(f"{content_hash.hex} already court-verified")
            _, timestamp = self._next_block_slot()
            tx = make_tx(
                self._next_nonce(sender),
                sender,
                "verifyEvidence",
                encode_verify_args(content_hash),
            )
            record = replace(record, verified=True, verifier=sender, verified_at=timestamp)
            self._records[content_hash.hex] = record
            self._include(tx, [(EventName.EVIDENCE_VERIFIED, content_hash)])
            return tx, record

    def grant_role(
        self, sender: ChainAddress, grantee: ChainAddress, role: ChainRole
    ) -> ChainTransaction:
        if not isinstance(role, ChainRole):
            raise InvalidArgument(f"bad role {role!r}")
        with self._lock:
            self._require_role(sender, ChainRole.ADMIN_ROLE)
            tx = make_tx(
                self._next_nonce(sender),
                sender,
                "grantRole",
                encode_grant_args(grantee, role),
            )
            # idempotent on the role set, but the grant is still recorded
            self._roles.setdefault(grantee.hex, set()).add(role)
            self._addresses[grantee.hex] = grantee
            self._include(tx, [(EventName.ROLE_GRANTED, None)])
            return tx

    # --- read surface ----------------------------------------------------

    def get_evidence(self, content_hash: ContentHash) -> EvidenceRecord:
        with self._lock:
            record = self._records.get(content_hash.hex)
        if record is None:
            raise NotFound(f"{content_hash.hex} is not registered")
        return record

    def has_evidence(self, content_hash: ContentHash) -> bool:
        with self._lock:
            return content_hash.hex in self._records

    def all_evidence(self) -> list[EvidenceRecord]:
        with self._lock:
            return [self._records[h] for h in sorted(self._records)]

    def roles_of(self, address: ChainAddress) -> set[ChainRole]:
        with self._lock:
            return set(self._roles.get(address.hex, set()))

    def blocks(self) -> list[Block]:
        with self._lock:
            return list(self._blocks)

    def events(
        self,
        name: EventName | None = None,
        content_hash: ContentHash | None = None,
        from_block: int | None = None,
        to_block: int | None = None,
    ) -> list[ChainEvent]:
        with self._lock:
            found = list(self._events)
        if name is not None:
            found = [e for e in found if e.name == name]
        if content_hash is not None:
            found = [e for e in found if e.content_hash and e.content_hash.hex == content_hash.hex]
        if from_block is not None:
            found = [e for e in found if e.block_number >= from_block]
        if to_block is not None:
            found = [e for e in found if e.block_number <= to_block]
        return found

    def transactions(self) -> list[ChainTransaction]:
        with self._lock:
            return list(self._tx_log)

    def state_root(self) -> ContentHash:
        with self._lock:
            payload = b"evidence:"
            for key in sorted(self._records):
                payload += _lp(self._records[key].encode())
            payload += b"roles:"
            for addr_hex in sorted(self._roles):
                roles = ",".join(sorted(r.value for r in self._roles[addr_hex]))
                payload += _lp(self._addresses[addr_hex].raw) + _lp(roles.encode("utf-8"))
        return ContentHash(hashlib.sha256(payload).digest())

    # --- log persistence and replay --------------------------------------

    def tx_log_lines(self) -> list[str]:
        """Hex-encoded canonical transactions, one per line, append order."""
        with self._lock:
            return [tx.encode().hex() for tx in self._tx_log]

    def apply_tx(self, tx: ChainTransaction):
        """Re-execute a decoded transaction; used by replay."""
        with self._lock:
            expected = self._next_nonce(tx.sender)
            if tx.nonce != expected:
                raise InvalidArgument(
                    f"nonce {tx.nonce} out of order for {tx.sender.hex}, expected {expected}"
                )
            if tx.method == "registerEvidence":
                content_hash, cid, evidence_type = decode_register_args(tx.args)
                self.submit_register(tx.sender, content_hash, cid, evidence_type)
            elif tx.method == "verifyEvidence":
                self.submit_verify(tx.sender, decode_verify_args(tx.args))
            elif tx.method == "grantRole":
                grantee, role = decode_grant_args(tx.args)
                self.grant_role(tx.sender, grantee, role)
            else:
                raise InvalidArgument(f"unknown method {tx.method!r}")


def replay(
    lines: list[str],
    genesis_admin: ChainAddress = GENESIS_ADMIN,
    genesis_timestamp: int = 0,
    block_interval_s: int = 1,
    txs_per_block: int = 1,
) -> EvidenceChain:
    """Rebuild a chain from recorded hex transaction lines.

    Raises if any recorded transaction fails; a faithfully recorded log
    replays cleanly and reproduces every hash bit-for-bit.
    """
    chain = EvidenceChain(
        genesis_admin=genesis_admin,
        genesis_timestamp=genesis_timestamp,
        block_interval_s=block_interval_s,
        txs_per_block=txs_per_block,
    )
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            payload = bytes.fromhex(line)
        except ValueError as exc:
            raise InvalidArgument(f"line {lineno}: not hex") from exc
        chain.apply_tx(decode_tx(payload))
    chain.flush()
    return chain
