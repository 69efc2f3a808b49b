"""HTTP gateway wiring detection, content addressing, chain registration,
court verification, and ledger queries into the four-role workflow.

Every route has an explicit allow/deny entry for every role; a policy
table that does not cover every (route, role) pair fails at startup.
Failures surface as structured ``{code, message, detail}`` bodies with
the code taken from the raised platform error verbatim, so clients never
string-match messages.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Header, Request
from fastapi.responses import JSONResponse

from . import errors
from .chain import ChainAddress, EventName, EvidenceChain, EvidenceType
from .content_store import BlobStore, ContentHash, derive_cid, sha256_hex
from .detection import (
    Detector,
    FingerprintCalibration,
    Modality,
    SyntheticCorpusSpec,
    default_registry,
    detector_for,
    fingerprint,
    fingerprint_event_score,
    fit_fingerprint,
    generate_corpus,
    load_registry,
    sample_frames,
    score_audio,
    score_image,
    score_video,
)
from .errors import (
    Forbidden,
    InvalidArgument,
    PayloadTooLarge,
    PlatformError,
    Unauthorized,
    UnsupportedMedia,
)
from .features import ImageGrid, grayscale
from .identity import DEFAULT_TTL_S, IdentityDirectory, Principal, PrincipalRole
from .ledger import CaseLedger, CaseStatus, DetectionEvent, Verdict
from .media import decode_image_grid, decode_video_grid, decode_wav, sniff_media_kind

ROLE_NAMES = tuple(r.value for r in PrincipalRole)

ROUTE_IDS = (
    "auth.login",
    "detect.image",
    "detect.video",
    "detect.audio",
    "fingerprint",
    "gan.reconstruct",
    "evidence.register",
    "evidence.verify",
    "evidence.list",
    "evidence.get",
    "cases.create",
    "cases.list",
    "cases.get",
    "cases.attach",
    "cases.status",
    "cases.bundle",
    "admin.users.create",
    "admin.users.list",
    "admin.users.enable",
    "admin.audit",
)


def _policy(analyst: bool, authority: bool, admin: bool, normal: bool) -> dict[str, bool]:
    return {
        "FORENSIC_ANALYST": analyst,
        "LEGAL_AUTHORITY": authority,
        "ADMIN": admin,
        "NORMAL_USER": normal,
    }


DEFAULT_POLICY: dict[str, dict[str, bool]] = {
    "auth.login": _policy(True, True, True, True),
    "detect.image": _policy(True, True, True, True),
    "detect.video": _policy(True, True, True, True),
    "detect.audio": _policy(True, True, True, True),
    "fingerprint": _policy(True, True, True, True),
    "gan.reconstruct": _policy(True, True, True, True),
    "evidence.register": _policy(True, False, False, False),
    "evidence.verify": _policy(False, True, False, False),
    "evidence.list": _policy(True, True, True, False),
    "evidence.get": _policy(True, True, True, False),
    "cases.create": _policy(True, False, False, False),
    "cases.list": _policy(True, True, True, False),
    "cases.get": _policy(True, True, True, False),
    "cases.attach": _policy(True, False, False, False),
    "cases.status": _policy(True, True, False, False),
    "cases.bundle": _policy(True, True, True, False),
    "admin.users.create": _policy(False, False, True, False),
    "admin.users.list": _policy(False, False, True, False),
    "admin.users.enable": _policy(False, False, True, False),
    "admin.audit": _policy(False, False, True, False),
}

HTTP_STATUS_FOR = {
    errors.InvalidCredentials: 401,
    errors.InvalidSignature: 401,
    errors.Expired: 401,
    errors.Unauthorized: 401,
    errors.AccountDisabled: 403,
    errors.Forbidden: 403,
    errors.NotFound: 404,
    errors.DuplicateEvidence: 409,
    errors.AlreadyVerified: 409,
    errors.DuplicateName: 409,
    errors.PayloadTooLarge: 413,
    errors.UnsupportedMedia: 415,
    errors.ValidationFailure: 422,
    errors.InvalidArgument: 422,
    errors.BadShape: 422,
    errors.BadChannelCount: 422,
    errors.TooShort: 422,
    errors.NonFiniteInput: 422,
    errors.EmptyVideo: 422,
    errors.SingleClass: 422,
    errors.InsufficientData: 422,
    errors.EmptyMatrix: 422,
    errors.StorageFailure: 502,
    errors.IntegrityViolation: 502,
    errors.UncalibratedClassifier: 503,
    errors.ConsistencyError: 500,
}

UPLOAD_LIMIT_DEFAULT = 25 * 1024 * 1024


@dataclass
class ApiConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    data_dir: Path = Path("evidentia-data")
    token_key: str | None = None  # None: EVIDENTIA_TOKEN_KEY env or random
    token_ttl_s: int = DEFAULT_TTL_S
    detector_registry_path: Path | None = None
    policy: dict[str, dict[str, bool]] = field(
        default_factory=lambda: {k: dict(v) for k, v in DEFAULT_POLICY.items()}
    )
    upload_limit_bytes: int = UPLOAD_LIMIT_DEFAULT
    admin_user: str = "admin"
    admin_password: str | None = None  # None: EVIDENTIA_ADMIN_PASSWORD env
    # small seeded corpus fitted at startup so /fingerprint works out of the
    # box; 0 leaves the classifier uncalibrated (stage-2 requests get 503)
    fingerprint_fit_per_class: int = 12
    fingerprint_fit_seed: int = 2026

    @classmethod
    def from_file(cls, path: str | Path) -> "ApiConfig":
        row = json.loads(Path(path).read_text(encoding="utf-8"))
        config = cls()
        for key in ("host", "port", "token_key", "token_ttl_s", "upload_limit_bytes",
                    "admin_user", "admin_password", "fingerprint_fit_per_class",
                    "fingerprint_fit_seed"):
            if key in row:
                setattr(config, key, row[key])
        if "data_dir" in row:
            config.data_dir = Path(row["data_dir"])
        if "detector_registry_path" in row:
            config.detector_registry_path = Path(row["detector_registry_path"])
        if "policy" in row:
            config.policy = {route: dict(roles) for route, roles in row["policy"].items()}
        return config


def validate_policy(policy: dict[str, dict[str, bool]]):
    """Startup gate: every route x role pair must be an explicit bool."""
    for route_id in ROUTE_IDS:
        roles = policy.get(route_id)
        if roles is None:
            raise InvalidArgument(f"policy table missing route {route_id!r}")
        for role in ROLE_NAMES:
            if not isinstance(roles.get(role), bool):
                raise InvalidArgument(
                    f"policy for {route_id!r} missing explicit entry for {role}"
                )
    unknown = set(policy) - set(ROUTE_IDS)
    if unknown:
        raise InvalidArgument(f"policy table names unknown routes: {sorted(unknown)}")


@dataclass
class AppState:
    config: ApiConfig
    chain: EvidenceChain
    store: BlobStore
    identity: IdentityDirectory
    ledger: CaseLedger
    detectors: dict[str, Detector]
    fingerprint_calibration: FingerprintCalibration | None


def build_state(config: ApiConfig, clock=None) -> AppState:
    validate_policy(config.policy)
    data_dir = Path(config.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    chain = EvidenceChain.open(data_dir / "chain.log")
    store = BlobStore(root=data_dir / "blobs")
    key = config.token_key.encode("utf-8") if config.token_key else None
    identity = IdentityDirectory(chain, token_key=key,
                                 ttl_s=config.token_ttl_s, clock=clock)
    ledger = CaseLedger(chain, journal_path=data_dir / "journal.ndjson", clock=clock)

    if config.detector_registry_path is not None:
        detectors = load_registry(config.detector_registry_path)
    else:
        detectors = default_registry()

    calibration = None
    if config.fingerprint_fit_per_class > 0:
        corpus = generate_corpus(SyntheticCorpusSpec(
            per_class_count=config.fingerprint_fit_per_class,
            seed=config.fingerprint_fit_seed,
        ))
        calibration = fit_fingerprint(corpus)

    admin_password = config.admin_password or os.environ.get("EVIDENTIA_ADMIN_PASSWORD")
    if admin_password:
        identity.bootstrap_admin(config.admin_user, admin_password)

    return AppState(
        config=config,
        chain=chain,
        store=store,
        identity=identity,
        ledger=ledger,
        detectors=detectors,
        fingerprint_calibration=calibration,
    )


def _guard(state: AppState, route_id: str, authorization: str | None) -> Principal:
    allowed = {
        PrincipalRole(role)
        for role, ok in state.config.policy[route_id].items()
        if ok
    }
    if not allowed:
        raise Forbidden(f"route {route_id} is disabled by policy")
    if not authorization:
        raise Unauthorized("missing bearer token")
    scheme, _, token = authorization.partition(" ")
    if scheme.lower() != "bearer" or not token.strip():
        raise Unauthorized("expected 'Authorization: Bearer <token>'")
    return state.identity.verify_token(token.strip(), allowed)


async def _read_upload(request: Request, limit: int) -> bytes:
    data = await request.body()
    if len(data) > limit:
        raise PayloadTooLarge(f"upload of {len(data)} bytes exceeds limit {limit}")
    if not data:
        raise InvalidArgument("empty upload body")
    return data


def _detection_summary(event: DetectionEvent) -> dict:
    return {
        "detection_id": event.id,
        "principal_id": event.principal_id,
        "modality": event.modality.value,
        "media_hash": event.media_hash.hex,
        "score": event.score,
        "verdict": event.verdict.value,
        "detector_id": event.detector_id,
        "threshold": event.threshold,
        "casework": event.casework,
        "created_at": event.created_at,
    }


def _evidence_packet(state: AppState, content_hash: ContentHash) -> dict:
    record = state.chain.get_evidence(content_hash)
    events = state.chain.events(content_hash=content_hash)
    registered = next(e for e in events if e.name == EventName.EVIDENCE_REGISTERED)
    verified = next((e for e in events if e.name == EventName.EVIDENCE_VERIFIED), None)
    detections = state.ledger.detections_for_media(content_hash)
    return {
        "content_hash": record.content_hash.hex,
        "cid": record.cid.text,
        "evidence_type": record.evidence_type.value,
        "analyst": record.analyst.hex,
        "tx_hash": registered.tx_hash.hex,
        "block_number": registered.block_number,
        "registered_at": record.registered_at,
        "verified": record.verified,
        "verifier": record.verifier.hex if record.verifier else None,
        "verified_at": record.verified_at,
        "verify_tx_hash": verified.tx_hash.hex if verified else None,
        "verify_block_number": verified.block_number if verified else None,
        "detections": [_detection_summary(d) for d in detections],
    }


def _record_detection(state: AppState, principal: Principal, modality: Modality,
                      media_hash: ContentHash, score: float, threshold: float,
                      detector_id: str) -> DetectionEvent:
    verdict = Verdict.FAKE if score >= threshold else Verdict.REAL
    event = DetectionEvent(
        principal_id=principal.id,
        modality=modality,
        media_hash=media_hash,
        score=score,
        verdict=verdict,
        detector_id=detector_id,
        threshold=threshold,
        casework=principal.role != PrincipalRole.NORMAL_USER,
    )
    detection_id = state.ledger.record_detection(event)
    return state.ledger.get_detection(detection_id)


def _require_kind(data: bytes, expected: str, route: str) -> None:
    kind = sniff_media_kind(data)
    if kind != expected:
        raise UnsupportedMedia(f"{route} expects a {expected} payload, got {kind}")


def _case_row(case) -> dict:
    return {
        "id": case.id,
        "title": case.title,
        "owner": case.owner,
        "evidence": [h.hex for h in case.evidence],
        "status": case.status.value,
        "created_at": case.created_at,
        "updated_at": case.updated_at,
    }


def build_app(state: AppState) -> FastAPI:
    app = FastAPI(title="evidentia", docs_url=None, redoc_url=None)
    app.state.platform = state
    upload_limit = state.config.upload_limit_bytes

    @app.exception_handler(PlatformError)
    async def platform_error_handler(_request: Request, exc: PlatformError):
        status = 500
        for klass, code in HTTP_STATUS_FOR.items():
            if type(exc) is klass:
                status = code
                break
        return JSONResponse(
            status_code=status,
            content={"code": exc.code, "message": exc.message, "detail": exc.detail},
        )

    # --- auth -----------------------------------------------------------

    @app.post("/auth/login")
    async def login(request: Request):
        body = await request.json()
        username = body.get("username", "")
        password = body.get("password", "")
        token = state.identity.authenticate(username, password)
        principal = state.identity.get_principal(username)
        return {
            "token": token,
            "subject": principal.id,
            "role": principal.role.value,
            "expires_in": state.config.token_ttl_s,
        }

    # --- detection ------------------------------------------------------

    @app.post("/detect/image")
    async def detect_image(request: Request, authorization: str | None = Header(None)):
        principal = _guard(state, "detect.image", authorization)
        data = await _read_upload(request, upload_limit)
        _require_kind(data, "grid", "/detect/image")
        detector = detector_for(state.detectors, Modality.IMAGE)
        score = score_image(detector, decode_image_grid(data))
        event = _record_detection(state, principal, Modality.IMAGE, sha256_hex(data),
                                  score, detector.threshold, detector.id)
        return _detection_summary(event)

    @app.post("/detect/video")
    async def detect_video(request: Request, authorization: str | None = Header(None)):
        principal = _guard(state, "detect.video", authorization)
        data = await _read_upload(request, upload_limit)
        _require_kind(data, "grid", "/detect/video")
        values = decode_video_grid(data)
        frames = [ImageGrid(pixels=values[t]) for t in range(values.shape[0])]
        detector = detector_for(state.detectors, Modality.VIDEO)
        score = score_video(detector, sample_frames(frames))
        event = _record_detection(state, principal, Modality.VIDEO, sha256_hex(data),
                                  score, detector.threshold, detector.id)
        return _detection_summary(event)

    @app.post("/detect/audio")
    async def detect_audio(request: Request, authorization: str | None = Header(None)):
        principal = _guard(state, "detect.audio", authorization)
        data = await _read_upload(request, upload_limit)
        _require_kind(data, "wav", "/detect/audio")
        detector = detector_for(state.detectors, Modality.AUDIO)
        score = score_audio(detector, decode_wav(data))
        event = _record_detection(state, principal, Modality.AUDIO, sha256_hex(data),
                                  score, detector.threshold, detector.id)
        return _detection_summary(event)

    @app.post("/fingerprint")
    async def route_fingerprint(request: Request,
                                authorization: str | None = Header(None)):
        principal = _guard(state, "fingerprint", authorization)
        data = await _read_upload(request, upload_limit)
        _require_kind(data, "grid", "/fingerprint")
        img = grayscale(decode_image_grid(data))
        detector = detector_for(state.detectors, Modality.FINGERPRINT)
        calib = state.fingerprint_calibration
        center = detector.calibration.get("stage1_center", 0.86429)
        halfwidth = detector.calibration.get("stage1_halfwidth", 0.05)
        verdict = fingerprint(img, calib, stage1_center=center,
                              stage1_halfwidth=halfwidth)
        score = fingerprint_event_score(verdict, calib, stage1_center=center,
                                        stage1_halfwidth=halfwidth)
        event = _record_detection(state, principal, Modality.FINGERPRINT,
                                  sha256_hex(data), score, detector.threshold,
                                  detector.id)
        return {
            "stage1": {"label": verdict.stage1.label, "score": verdict.stage1.score},
            "stage2": None if verdict.stage2 is None else {
                "label": verdict.stage2.label,
                "class_scores": verdict.stage2.class_scores,
            },
            "detection": _detection_summary(event),
        }

    @app.post("/gan/reconstruct")
    async def gan_reconstruct(authorization: str | None = Header(None)):
        _guard(state, "gan.reconstruct", authorization)
        return JSONResponse(
            status_code=501,
            content={
                "code": "not_implemented",
                "message": "latent reconstruction is not part of this build",
                "detail": {"route": "/gan/reconstruct"},
            },
        )

    # --- evidence -------------------------------------------------------

    @app.post("/evidence/register", status_code=201)
    async def evidence_register(request: Request, evidence_type: str,
                                authorization: str | None = Header(None)):
        principal = _guard(state, "evidence.register", authorization)
        try:
            etype = EvidenceType(evidence_type)
        except ValueError:
            raise InvalidArgument(
                f"evidence_type must be one of "
                f"{[e.value for e in EvidenceType]}, got {evidence_type!r}"
            )
        data = await _read_upload(request, upload_limit)
        content_hash = sha256_hex(data)
        cid = derive_cid(data)
        # blob first: a storage failure must leave no chain state behind
        state.store.put(data)
        tx, record = state.chain.submit_register(
            principal.chain_address, content_hash, cid, etype
        )
        state.ledger.mirror_chain(tx, record)
        return _evidence_packet(state, content_hash)

    @app.post("/evidence/{content_hash}/verify")
    async def evidence_verify(content_hash: str,
                              authorization: str | None = Header(None)):
        principal = _guard(state, "evidence.verify", authorization)
        digest = ContentHash.from_hex(content_hash)
        tx, record = state.chain.submit_verify(principal.chain_address, digest)
        state.ledger.mirror_chain(tx, record)
        return _evidence_packet(state, digest)

    @app.get("/evidence")
    async def evidence_list(
        evidence_type: str | None = None,
        verified: bool | None = None,
        analyst: str | None = None,
        registered_from: int | None = None,
        registered_to: int | None = None,
        offset: int = 0,
        limit: int | None = None,
        authorization: str | None = Header(None),
    ):
        _guard(state, "evidence.list", authorization)
        etype = None
        if evidence_type is not None:
            try:
                etype = EvidenceType(evidence_type)
            except ValueError:
                raise InvalidArgument(f"bad evidence_type {evidence_type!r}")
        addr = ChainAddress.from_hex(analyst) if analyst else None
        records = state.ledger.query_evidence(
            evidence_type=etype,
            verified=verified,
            analyst=addr,
            registered_from=registered_from,
            registered_to=registered_to,
            offset=offset,
            limit=limit,
        )
        packets = [_evidence_packet(state, r.content_hash) for r in records]
        return {"evidence": packets, "count": len(packets)}

    @app.get("/evidence/{content_hash}")
    async def evidence_get(content_hash: str,
                           authorization: str | None = Header(None)):
        _guard(state, "evidence.get", authorization)
        return _evidence_packet(state, ContentHash.from_hex(content_hash))

    # --- cases ----------------------------------------------------------

    @app.post("/cases", status_code=201)
    async def cases_create(request: Request,
                           authorization: str | None = Header(None)):
        principal = _guard(state, "cases.create", authorization)
        body = await request.json()
        case = state.ledger.create_case(principal.id, body.get("title", ""))
        return _case_row(case)

    @app.get("/cases")
    async def cases_list(owner: str | None = None,
                         authorization: str | None = Header(None)):
        _guard(state, "cases.list", authorization)
        return {"cases": [_case_row(c) for c in state.ledger.list_cases(owner)]}

    @app.get("/cases/{case_id}")
    async def cases_get(case_id: str, authorization: str | None = Header(None)):
        _guard(state, "cases.get", authorization)
        return _case_row(state.ledger.get_case(case_id))

    @app.post("/cases/{case_id}/evidence")
    async def cases_attach(case_id: str, request: Request,
                           authorization: str | None = Header(None)):
        principal = _guard(state, "cases.attach", authorization)
        body = await request.json()
        digest = ContentHash.from_hex(body.get("content_hash", ""))
        case = state.ledger.attach_evidence(principal.id, case_id, digest)
        return _case_row(case)

    @app.post("/cases/{case_id}/status")
    async def cases_status(case_id: str, request: Request,
                           authorization: str | None = Header(None)):
        principal = _guard(state, "cases.status", authorization)
        body = await request.json()
        try:
            status = CaseStatus(body.get("status", ""))
        except ValueError:
            raise InvalidArgument(f"bad status {body.get('status')!r}")
        case = state.ledger.set_case_status(principal.id, case_id, status)
        return _case_row(case)

    @app.get("/cases/{case_id}/bundle")
    async def cases_bundle(case_id: str, authorization: str | None = Header(None)):
        _guard(state, "cases.bundle", authorization)
        return state.ledger.export_bundle(case_id)

    # --- admin ----------------------------------------------------------

    def _principal_row(p: Principal) -> dict:
        return {
            "id": p.id,
            "display_name": p.display_name,
            "role": p.role.value,
            "chain_address": p.chain_address.hex if p.chain_address else None,
            "enabled": p.enabled,
        }

    @app.post("/admin/users", status_code=201)
    async def admin_users_create(request: Request,
                                 authorization: str | None = Header(None)):
        admin = _guard(state, "admin.users.create", authorization)
        body = await request.json()
        try:
            role = PrincipalRole(body.get("role", ""))
        except ValueError:
            raise InvalidArgument(f"bad role {body.get('role')!r}")
        principal = state.identity.provision_principal(
            admin,
            username=body.get("username", ""),
            role=role,
            password=body.get("password", ""),
            display_name=body.get("display_name"),
        )
        return _principal_row(principal)

    @app.get("/admin/users")
    async def admin_users_list(authorization: str | None = Header(None)):
        _guard(state, "admin.users.list", authorization)
        return {"users": [_principal_row(p) for p in state.identity.list_principals()]}

    @app.patch("/admin/users/{username}")
    async def admin_users_enable(username: str, request: Request,
                                 authorization: str | None = Header(None)):
        admin = _guard(state, "admin.users.enable", authorization)
        body = await request.json()
        enabled = body.get("enabled")
        if not isinstance(enabled, bool):
            raise InvalidArgument("body must carry boolean 'enabled'")
        principal = state.identity.set_enabled(admin, username, enabled)
        return _principal_row(principal)

    @app.get("/admin/audit")
    async def admin_audit(authorization: str | None = Header(None)):
        _guard(state, "admin.audit", authorization)
        return {
            "entries": [
                {
                    "seq": e.seq,
                    "actor": e.actor,
                    "action": e.action,
                    "subject": e.subject,
                    "timestamp": e.timestamp,
                    "tx_hash": e.tx_hash.hex if e.tx_hash else None,
                }
                for e in state.ledger.audit_entries()
            ]
        }

    return app


def create_app(config: ApiConfig | None = None) -> FastAPI:
    return build_app(build_state(config or ApiConfig()))
