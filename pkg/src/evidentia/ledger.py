"""System-of-record for detections, mirrored evidence, cases, and audit.

The ledger is a queryable cache of chain truth, never the other way
around: every evidence row is written by mirroring a successful chain
transaction, and ``reconcile`` compares the full mirror against the chain,
raising ConsistencyError on any divergence (which signals a bug, loudly).

Persistence is an append-only newline-delimited journal of JSON records,
``type`` tag first, with in-memory indexes rebuilt on open. Case status
follows a minimal linear workflow: open -> submitted (all evidence
registered on chain) -> verified (all evidence court-verified) -> closed;
open cases may be closed directly.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Callable

from .chain import (
    ChainAddress,
    ChainTransaction,
    EventName,
    EvidenceChain,
    EvidenceRecord,
    EvidenceType,
)
from .content_store import ContentHash, parse_cid
from .detection import Modality
from .errors import ConsistencyError, InvalidArgument, NotFound, ValidationFailure


class Verdict(Enum):
    REAL = "real"
    FAKE = "fake"


class CaseStatus(Enum):
    OPEN = "open"
    SUBMITTED = "submitted"
    VERIFIED = "verified"
    CLOSED = "closed"


# status -> statuses reachable in one transition
CASE_TRANSITIONS = {
    CaseStatus.OPEN: {CaseStatus.SUBMITTED, CaseStatus.CLOSED},
    CaseStatus.SUBMITTED: {CaseStatus.VERIFIED, CaseStatus.CLOSED},
    CaseStatus.VERIFIED: {CaseStatus.CLOSED},
    CaseStatus.CLOSED: set(),
}


@dataclass(frozen=True)
class DetectionEvent:
    principal_id: str
    modality: Modality
    media_hash: ContentHash
    score: float
    verdict: Verdict
    detector_id: str
    threshold: float
    casework: bool = True
    id: str | None = None
    created_at: int | None = None


@dataclass(frozen=True)
class CaseRecord:
    id: str
    title: str
    owner: str
    evidence: tuple[ContentHash, ...]
    status: CaseStatus
    created_at: int
    updated_at: int


@dataclass(frozen=True)
class AuditEntry:
    seq: int
    actor: str
    action: str
    subject: str
    timestamp: int
    tx_hash: ContentHash | None = None


@dataclass(frozen=True)
class MirroredEvidence:
    record: EvidenceRecord
    tx_hash: ContentHash


def _validate_detection(event: DetectionEvent):
    if not isinstance(event.media_hash, ContentHash):
        raise ValidationFailure("media_hash must be a ContentHash")
    if not isinstance(event.modality, Modality):
        raise ValidationFailure(f"bad modality {event.modality!r}")
    if not isinstance(event.verdict, Verdict):
        raise ValidationFailure(f"bad verdict {event.verdict!r}")
    if not (0.0 <= event.score <= 1.0):
        raise ValidationFailure(f"score {event.score} outside [0, 1]")
    if not (0.0 <= event.threshold <= 1.0):
        raise ValidationFailure(f"threshold {event.threshold} outside [0, 1]")
    if not event.detector_id:
        raise ValidationFailure("detector_id is required")
    expected = Verdict.FAKE if event.score >= event.threshold else Verdict.REAL
    if event.verdict != expected:
        raise ValidationFailure(
            f"verdict {event.verdict.value} inconsistent with score {event.score} "
            f"vs threshold {event.threshold}"
        )


class CaseLedger:
    """Multiple readers, single writer; every write appends journal lines
    under one lock, so a batch is atomic with respect to readers."""

    def __init__(
        self,
        chain: EvidenceChain,
        journal_path: str | Path | None = None,
        clock: Callable[[], int] | None = None,
    ):
        self._chain = chain
        self._clock = clock or (lambda: int(time.time()))
        self._lock = threading.RLock()
        self._detections: dict[str, DetectionEvent] = {}
        self._by_media: dict[str, list[str]] = {}
        self._evidence: dict[str, MirroredEvidence] = {}
        self._cases: dict[str, CaseRecord] = {}
        self._audit: list[AuditEntry] = []
        self._det_seq = 0
        self._case_seq = 0
        self._journal_path = Path(journal_path) if journal_path is not None else None
        self._journal = None
        if self._journal_path is not None:
            if self._journal_path.exists():
                self._replay_journal()
            self._journal_path.parent.mkdir(parents=True, exist_ok=True)
            self._journal = self._journal_path.open("a", encoding="utf-8")

    def close(self):
        with self._lock:
            if self._journal is not None:
                self._journal.close()
                self._journal = None

    # --- journal ----------------------------------------------------------

    def _write_lines(self, rows: list[dict]):
        if self._journal is None:
            return
        for row in rows:
            self._journal.write(json.dumps(row, separators=(",", ":")) + "\n")
        self._journal.flush()

    def _replay_journal(self):
        with self._journal_path.open("r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    row = json.loads(line)
                except ValueError as exc:
                    raise ConsistencyError(f"journal line {lineno} is not json") from exc
                self._apply_row(row, lineno)

    def _apply_row(self, row: dict, lineno: int):
        kind = row.get("type")
        if kind == "detection":
            event = DetectionEvent(
                principal_id=row["principal_id"],
                modality=Modality(row["modality"]),
                media_hash=ContentHash.from_hex(row["media_hash"]),
                score=row["score"],
                verdict=Verdict(row["verdict"]),
                detector_id=row["detector_id"],
                threshold=row["threshold"],
                casework=row["casework"],
                id=row["id"],
                created_at=row["created_at"],
            )
            self._index_detection(event)
        elif kind == "evidence":
            record = EvidenceRecord(
                content_hash=ContentHash.from_hex(row["content_hash"]),
                cid=parse_cid(row["cid"]),
                evidence_type=EvidenceType(row["evidence_type"]),
                analyst=ChainAddress.from_hex(row["analyst"]),
                registered_at=row["registered_at"],
                verified=row["verified"],
                verifier=ChainAddress.from_hex(row["verifier"]) if row["verifier"] else None,
                verified_at=row["verified_at"],
            )
            self._evidence[record.content_hash.hex] = MirroredEvidence(
                record=record, tx_hash=ContentHash.from_hex(row["tx_hash"])
            )
        elif kind == "case":
            case = CaseRecord(
                id=row["id"],
                title=row["title"],
                owner=row["owner"],
                evidence=tuple(ContentHash.from_hex(h) for h in row["evidence"]),
                status=CaseStatus(row["status"]),
                created_at=row["created_at"],
                updated_at=row["updated_at"],
            )
            self._cases[case.id] = case
            tail = case.id.rsplit("-", 1)[-1]
            if tail.isdigit():
                self._case_seq = max(self._case_seq, int(tail))
        elif kind == "audit":
            entry = AuditEntry(
                seq=row["seq"],
                actor=row["actor"],
                action=row["action"],
                subject=row["subject"],
                timestamp=row["timestamp"],
                tx_hash=ContentHash.from_hex(row["tx_hash"]) if row["tx_hash"] else None,
            )
            expected = self._audit[-1].seq + 1 if self._audit else 1
            if entry.seq != expected:
                raise ConsistencyError(
                    f"journal line {lineno}: audit seq {entry.seq}, expected {expected}"
                )
            self._audit.append(entry)
        else:
            raise ConsistencyError(f"journal line {lineno}: unknown type {kind!r}")

    def _index_detection(self, event: DetectionEvent):
        self._detections[event.id] = event
        self._by_media.setdefault(event.media_hash.hex, []).append(event.id)
        # keep the id counter ahead of anything replayed from disk
        tail = event.id.rsplit("-", 1)[-1]
        if tail.isdigit():
            self._det_seq = max(self._det_seq, int(tail))

    def _audit_append(self, actor: str, action: str, subject: str,
                      tx_hash: ContentHash | None = None) -> AuditEntry:
        entry = AuditEntry(
            seq=self._audit[-1].seq + 1 if self._audit else 1,
            actor=actor,
            action=action,
            subject=subject,
            timestamp=self._clock(),
            tx_hash=tx_hash,
        )
        self._audit.append(entry)
        return entry

    @staticmethod
    def _audit_row(entry: AuditEntry) -> dict:
        return {
            "type": "audit",
            "seq": entry.seq,
            "actor": entry.actor,
            "action": entry.action,
            "subject": entry.subject,
            "timestamp": entry.timestamp,
            "tx_hash": entry.tx_hash.hex if entry.tx_hash else None,
        }

    @staticmethod
    def _evidence_row(item: MirroredEvidence) -> dict:
        record = item.record
        return {
            "type": "evidence",
            "content_hash": record.content_hash.hex,
            "cid": record.cid.text,
            "evidence_type": record.evidence_type.value,
            "analyst": record.analyst.hex,
            "registered_at": record.registered_at,
            "verified": record.verified,
            "verifier": record.verifier.hex if record.verifier else None,
            "verified_at": record.verified_at,
            "tx_hash": item.tx_hash.hex,
        }

    @staticmethod
    def _case_row(case: CaseRecord) -> dict:
        return {
            "type": "case",
            "id": case.id,
            "title": case.title,
            "owner": case.owner,
            "evidence": [h.hex for h in case.evidence],
            "status": case.status.value,
            "created_at": case.created_at,
            "updated_at": case.updated_at,
        }

    # --- detections ---------------------------------------------------------

    def record_detection(self, event: DetectionEvent) -> str:
        _validate_detection(event)
        with self._lock:
            self._det_seq += 1
            stored = replace(
                event,
                id=event.id or f"det-{self._det_seq:06d}",
                created_at=event.created_at if event.created_at is not None else self._clock(),
            )
            if stored.id in self._detections:
                raise ValidationFailure(f"detection id {stored.id!r} already exists")
            self._index_detection(stored)
            entry = self._audit_append(stored.principal_id, "record_detection", stored.id)
            self._write_lines([
                {
                    "type": "detection",
                    "id": stored.id,
                    "principal_id": stored.principal_id,
                    "modality": stored.modality.value,
                    "media_hash": stored.media_hash.hex,
                    "score": stored.score,
                    "verdict": stored.verdict.value,
                    "detector_id": stored.detector_id,
                    "threshold": stored.threshold,
                    "casework": stored.casework,
                    "created_at": stored.created_at,
                },
                self._audit_row(entry),
            ])
            return stored.id

    def get_detection(self, detection_id: str) -> DetectionEvent:
        with self._lock:
            event = self._detections.get(detection_id)
        if event is None:
            raise NotFound(f"no detection {detection_id!r}")
        return event

    def detections_for_media(self, media_hash: ContentHash) -> list[DetectionEvent]:
        with self._lock:
            ids = list(self._by_media.get(media_hash.hex, []))
            return [self._detections[i] for i in ids]

    def list_detections(self) -> list[DetectionEvent]:
        with self._lock:
            return [self._detections[i] for i in sorted(self._detections)]

    # --- evidence mirror ------------------------------------------------------

    def mirror_chain(self, tx: ChainTransaction, record: EvidenceRecord):
        key = record.content_hash.hex
        with self._lock:
            existing = self._evidence.get(key)
            if existing is not None:
                old = existing.record
                immutable_same = (
                    old.cid.text == record.cid.text
                    and old.evidence_type == record.evidence_type
                    and old.analyst.hex == record.analyst.hex
                    and old.registered_at == record.registered_at
                )
                if not immutable_same or (old.verified and not record.verified):
                    raise ConsistencyError(
                        f"mirror for {key} diverges from chain update"
                    )
            item = MirroredEvidence(record=record, tx_hash=tx.tx_hash)
            self._evidence[key] = item
            action = "mirror_verify" if record.verified else "mirror_register"
            actor = record.verifier.hex if record.verified else record.analyst.hex
            entry = self._audit_append(actor, action, key, tx.tx_hash)
            self._write_lines([self._evidence_row(item), self._audit_row(entry)])

    def evidence_view(self, content_hash: ContentHash) -> MirroredEvidence:
        with self._lock:
            item = self._evidence.get(content_hash.hex)
        if item is None:
            raise NotFound(f"{content_hash.hex} is not mirrored")
        return item

    def query_evidence(
        self,
        evidence_type: EvidenceType | None = None,
        verified: bool | None = None,
        analyst: ChainAddress | None = None,
        registered_from: int | None = None,
        registered_to: int | None = None,
        offset: int = 0,
        limit: int | None = None,
    ) -> list[EvidenceRecord]:
        if offset < 0 or (limit is not None and limit < 0):
            raise InvalidArgument("offset and limit must be nonnegative")
        with self._lock:
            records = [item.record for item in self._evidence.values()]
        if evidence_type is not None:
            records = [r for r in records if r.evidence_type == evidence_type]
        if verified is not None:
            records = [r for r in records if r.verified == verified]
        if analyst is not None:
            records = [r for r in records if r.analyst.hex == analyst.hex]
        if registered_from is not None:
            records = [r for r in records if r.registered_at >= registered_from]
        if registered_to is not None:
            records = [r for r in records if r.registered_at <= registered_to]
        records.sort(key=lambda r: (r.registered_at, r.content_hash.hex))
        end = None if limit is None else offset + limit
        return records[offset:end]

    def reconcile(self) -> int:
        """Compare the full mirror against the chain; returns rows checked."""
        with self._lock:
            mirrored = dict(self._evidence)
        on_chain = {r.content_hash.hex: r for r in self._chain.all_evidence()}
        missing = sorted(set(on_chain) - set(mirrored))
        if missing:
            raise ConsistencyError(f"chain has {len(missing)} unmirrored rows: {missing[:3]}")
        extra = sorted(set(mirrored) - set(on_chain))
        if extra:
            raise ConsistencyError(f"mirror has {len(extra)} rows unknown to chain: {extra[:3]}")
        for key, item in mirrored.items():
            if item.record != on_chain[key]:
                raise ConsistencyError(f"mirror diverges from chain for {key}")
        return len(mirrored)

    # --- cases -----------------------------------------------------------------

    def create_case(self, owner: str, title: str) -> CaseRecord:
        if not title:
            raise ValidationFailure("case title is required")
        with self._lock:
            self._case_seq += 1
            now = self._clock()
            case = CaseRecord(
                id=f"case-{self._case_seq:06d}",
                title=title,
                owner=owner,
                evidence=(),
                status=CaseStatus.OPEN,
                created_at=now,
                updated_at=now,
            )
            self._cases[case.id] = case
            entry = self._audit_append(owner, "create_case", case.id)
            self._write_lines([self._case_row(case), self._audit_row(entry)])
            return case

    def get_case(self, case_id: str) -> CaseRecord:
        with self._lock:
            case = self._cases.get(case_id)
        if case is None:
            raise NotFound(f"no case {case_id!r}")
        return case

    def list_cases(self, owner: str | None = None) -> list[CaseRecord]:
        with self._lock:
            cases = [self._cases[i] for i in sorted(self._cases)]
        if owner is not None:
            cases = [c for c in cases if c.owner == owner]
        return cases

    def attach_evidence(self, actor: str, case_id: str,
                        content_hash: ContentHash) -> CaseRecord:
        with self._lock:
            case = self._cases.get(case_id)
            if case is None:
                raise NotFound(f"no case {case_id!r}")
            if case.status != CaseStatus.OPEN:
                raise ValidationFailure(f"case {case_id} is {case.status.value}, not open")
            if any(h.hex == content_hash.hex for h in case.evidence):
                return case
            case = replace(
                case,
                evidence=case.evidence + (content_hash,),
                updated_at=self._clock(),
            )
            self._cases[case.id] = case
            entry = self._audit_append(actor, "attach_evidence",
                                       f"{case_id}:{content_hash.hex}")
            self._write_lines([self._case_row(case), self._audit_row(entry)])
            return case

    def set_case_status(self, actor: str, case_id: str,
                        status: CaseStatus) -> CaseRecord:
        if not isinstance(status, CaseStatus):
            raise InvalidArgument(f"bad status {status!r}")
        with self._lock:
            case = self._cases.get(case_id)
            if case is None:
                raise NotFound(f"no case {case_id!r}")
            if status not in CASE_TRANSITIONS[case.status]:
                raise ValidationFailure(
                    f"case {case_id} cannot move {case.status.value} -> {status.value}"
                )
            if status == CaseStatus.SUBMITTED:
                for h in case.evidence:
                    if not self._chain.has_evidence(h):
                        raise ValidationFailure(
                            f"evidence {h.hex} is not registered on chain"
                        )
            if status == CaseStatus.VERIFIED:
                for h in case.evidence:
                    if not self._chain.get_evidence(h).verified:
                        raise ValidationFailure(
                            f"evidence {h.hex} is not court-verified"
                        )
            case = replace(case, status=status, updated_at=self._clock())
            self._cases[case.id] = case
            entry = self._audit_append(actor, "case_status",
                                       f"{case_id}:{status.value}")
            self._write_lines([self._case_row(case), self._audit_row(entry)])
            return case

    # --- audit --------------------------------------------------------------

    def audit_entries(self) -> list[AuditEntry]:
        with self._lock:
            return list(self._audit)

    # --- court bundle ----------------------------------------------------------

    def export_bundle(self, case_id: str) -> dict:
        """Case records plus chain proofs, JSON-serializable."""
        with self._lock:
            case = self._cases.get(case_id)
            if case is None:
                raise NotFound(f"no case {case_id!r}")
            evidence_rows = []
            detection_rows = []
            for h in case.evidence:
                item = self._evidence.get(h.hex)
                if item is None:
                    raise ValidationFailure(
                        f"case evidence {h.hex} is not registered; export after registration"
                    )
                evidence_rows.append(self._evidence_row(item))
                for event in self.detections_for_media(h):
                    detection_rows.append({
                        "id": event.id,
                        "principal_id": event.principal_id,
                        "modality": event.modality.value,
                        "score": event.score,
                        "verdict": event.verdict.value,
                        "detector_id": event.detector_id,
                        "threshold": event.threshold,
                        "created_at": event.created_at,
                    })
        blocks = {b.number: b for b in self._chain.blocks()}
        proofs = []
        for h in case.evidence:
            for event in self._chain.events(content_hash=h):
                block = blocks[event.block_number]
                proofs.append({
                    "event": event.name.value,
                    "content_hash": h.hex,
                    "tx_hash": event.tx_hash.hex,
                    "block_number": event.block_number,
                    "log_index": event.log_index,
                    "block_hash": block.block_hash.hex,
                    "block_timestamp": block.timestamp,
                })
        return {
            "case": self._case_row(case),
            "evidence": evidence_rows,
            "detections": detection_rows,
            "proofs": proofs,
            # full canonical tx log: replaying it on a fresh chain must
            # reproduce state_root, which is the court-side integrity check
            "tx_log": self._chain.tx_log_lines(),
            "state_root": self._chain.state_root().hex,
            "exported_at": self._clock(),
        }
