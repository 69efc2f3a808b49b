"""Operator CLI over the same components the HTTP service wires together.

Commands act directly on a workspace directory (chain log, record journal,
blob store, principal table); authority is the operating system user who
owns those files. Role checks still apply where chain semantics demand
them: registration needs an analyst address, verification an authority
address. All command output is JSON on stdout; failures print a
structured ``{code, message, detail}`` object on stderr and exit 1.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import metrics
from .api import ApiConfig, build_app, build_state
from .chain import EvidenceChain, EvidenceType, replay
from .content_store import BlobStore, ContentHash, derive_cid, sha256_hex
from .detection import (
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
from .errors import InvalidArgument, PlatformError
from .features import ImageGrid, grayscale, grid_to_bytes, hpf_laplacian, log_mel
from .identity import IdentityDirectory, PrincipalRole
from .ledger import CaseLedger, CaseStatus, DetectionEvent, Verdict
from .media import decode_image_grid, decode_video_grid, decode_wav, sniff_media_kind

DEFAULT_WORKSPACE = "evidentia-data"
CALIBRATION_FIT_PER_CLASS = 12
CALIBRATION_FIT_SEED = 2026


class Workspace:
    """Lazily opened bundle of platform components rooted at one directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.chain = EvidenceChain.open(self.root / "chain.log")
        self.store = BlobStore(root=self.root / "blobs")
        self.ledger = CaseLedger(self.chain, journal_path=self.root / "journal.ndjson")
        key_path = self.root / "token.key"
        if not key_path.exists():
            key_path.write_bytes(os.urandom(32).hex().encode("ascii"))
        self.identity = IdentityDirectory(self.chain, token_key=key_path.read_bytes())
        self._principals_path = self.root / "principals.json"
        if self._principals_path.exists():
            rows = json.loads(self._principals_path.read_text(encoding="utf-8"))
            self.identity.import_principals(rows)
        registry_path = self.root / "detectors.json"
        self.detectors = (load_registry(registry_path) if registry_path.exists()
                          else default_registry())
        self._calibration_path = self.root / "calibration.json"
        self.calibration = None
        if self._calibration_path.exists():
            self.calibration = FingerprintCalibration.from_json(
                self._calibration_path.read_text(encoding="utf-8")
            )

    def save_principals(self):
        self._principals_path.write_text(
            json.dumps(self.identity.export_principals(), indent=2) + "\n",
            encoding="utf-8",
        )

    def ensure_calibration(self, refit: bool = False) -> FingerprintCalibration:
        if self.calibration is None or refit:
            corpus = generate_corpus(SyntheticCorpusSpec(
                per_class_count=CALIBRATION_FIT_PER_CLASS,
                seed=CALIBRATION_FIT_SEED,
            ))
            self.calibration = fit_fingerprint(corpus)
            self._calibration_path.write_text(self.calibration.to_json() + "\n",
                                              encoding="utf-8")
        return self.calibration

    def principal_with_role(self, username: str, role: PrincipalRole):
        principal = self.identity.get_principal(username)
        if principal.role != role:
            raise InvalidArgument(
                f"{username} has role {principal.role.value}, need {role.value}"
            )
        return principal


def _emit(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def _detection_row(event: DetectionEvent) -> dict:
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
    }


def _record_event(ws: Workspace, actor: str, modality: Modality,
                  media_hash: ContentHash, score: float, detector) -> DetectionEvent:
    verdict = Verdict.FAKE if score >= detector.threshold else Verdict.REAL
    event = DetectionEvent(
        principal_id=actor,
        modality=modality,
        media_hash=media_hash,
        score=score,
        verdict=verdict,
        detector_id=detector.id,
        threshold=detector.threshold,
    )
    detection_id = ws.ledger.record_detection(event)
    return ws.ledger.get_detection(detection_id)


def _evidence_row(ws: Workspace, record) -> dict:
    item = ws.ledger.evidence_view(record.content_hash)
    return {
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


# --- commands ------------------------------------------------------------


def cmd_detect(args) -> dict:
    ws = Workspace(args.workspace)
    data = Path(args.file).read_bytes()
    modality = Modality(args.modality)
    kind = sniff_media_kind(data)
    detector = detector_for(ws.detectors, modality)
    if modality == Modality.AUDIO:
        if kind != "wav":
            raise InvalidArgument("audio detection expects a RIFF/WAVE file")
        score = score_audio(detector, decode_wav(data))
    elif modality == Modality.IMAGE:
        if kind != "grid":
            raise InvalidArgument("image detection expects a grid file")
        score = score_image(detector, decode_image_grid(data))
    elif modality == Modality.VIDEO:
        if kind != "grid":
            raise InvalidArgument("video detection expects a grid file")
        values = decode_video_grid(data)
        frames = [ImageGrid(pixels=values[t]) for t in range(values.shape[0])]
        score = score_video(detector, sample_frames(frames))
    else:
        raise InvalidArgument("use the fingerprint command for fingerprinting")
    event = _record_event(ws, args.actor, modality, sha256_hex(data), score, detector)
    return _detection_row(event)


def cmd_fingerprint(args) -> dict:
    ws = Workspace(args.workspace)
    data = Path(args.file).read_bytes()
    if sniff_media_kind(data) != "grid":
        raise InvalidArgument("fingerprinting expects a grid file")
    img = grayscale(decode_image_grid(data))
    calibration = ws.ensure_calibration(refit=args.refit)
    verdict = fingerprint(img, calibration)
    detector = detector_for(ws.detectors, Modality.FINGERPRINT)
    score = fingerprint_event_score(verdict, calibration)
    event = _record_event(ws, args.actor, Modality.FINGERPRINT,
                          sha256_hex(data), score, detector)
    return {
        "stage1": {"label": verdict.stage1.label, "score": verdict.stage1.score},
        "stage2": None if verdict.stage2 is None else {
            "label": verdict.stage2.label,
            "class_scores": verdict.stage2.class_scores,
        },
        "detection": _detection_row(event),
    }


def cmd_register(args) -> dict:
    ws = Workspace(args.workspace)
    analyst = ws.principal_with_role(args.analyst, PrincipalRole.FORENSIC_ANALYST)
    data = Path(args.file).read_bytes()
    content_hash = sha256_hex(data)
    cid = derive_cid(data)
    ws.store.put(data)
    tx, record = ws.chain.submit_register(
        analyst.chain_address, content_hash, cid, EvidenceType(args.type)
    )
    ws.ledger.mirror_chain(tx, record)
    return _evidence_row(ws, record)


def cmd_verify(args) -> dict:
    ws = Workspace(args.workspace)
    authority = ws.principal_with_role(args.authority, PrincipalRole.LEGAL_AUTHORITY)
    digest = ContentHash.from_hex(args.hash)
    tx, record = ws.chain.submit_verify(authority.chain_address, digest)
    ws.ledger.mirror_chain(tx, record)
    return _evidence_row(ws, record)


def cmd_evidence_list(args) -> dict:
    ws = Workspace(args.workspace)
    etype = EvidenceType(args.type) if args.type else None
    verified = None if args.verified is None else args.verified == "true"
    records = ws.ledger.query_evidence(
        evidence_type=etype, verified=verified,
        offset=args.offset, limit=args.limit,
    )
    return {"evidence": [_evidence_row(ws, r) for r in records],
            "count": len(records)}


def cmd_evidence_get(args) -> dict:
    ws = Workspace(args.workspace)
    record = ws.chain.get_evidence(ContentHash.from_hex(args.hash))
    return _evidence_row(ws, record)


def cmd_case(args) -> dict:
    ws = Workspace(args.workspace)
    if args.case_cmd == "create":
        case = ws.ledger.create_case(args.owner, args.title)
    elif args.case_cmd == "attach":
        case = ws.ledger.attach_evidence(args.actor, args.case_id,
                                         ContentHash.from_hex(args.hash))
    elif args.case_cmd == "status":
        case = ws.ledger.set_case_status(args.actor, args.case_id,
                                         CaseStatus(args.status))
    elif args.case_cmd == "show":
        case = ws.ledger.get_case(args.case_id)
    else:
        return {"cases": [
            {"id": c.id, "title": c.title, "owner": c.owner,
             "status": c.status.value, "evidence": [h.hex for h in c.evidence]}
            for c in ws.ledger.list_cases()
        ]}
    return {
        "id": case.id,
        "title": case.title,
        "owner": case.owner,
        "status": case.status.value,
        "evidence": [h.hex for h in case.evidence],
    }


def cmd_ledger_export(args) -> dict:
    ws = Workspace(args.workspace)
    bundle = ws.ledger.export_bundle(args.case)
    if args.out:
        Path(args.out).write_text(json.dumps(bundle, indent=2) + "\n",
                                  encoding="utf-8")
        return {"written": args.out, "case": args.case,
                "state_root": bundle["state_root"]}
    return bundle


def cmd_chain_replay(args) -> dict:
    lines = Path(args.file).read_text(encoding="utf-8").splitlines()
    chain = replay(lines)
    blocks = chain.blocks()
    return {
        "transactions": len(chain.transactions()),
        "blocks": len(blocks),
        "head_block_hash": blocks[-1].block_hash.hex,
        "state_root": chain.state_root().hex,
    }


def cmd_corpus_generate(args) -> dict:
    spec = SyntheticCorpusSpec(per_class_count=args.per_class, seed=args.seed)
    corpus = generate_corpus(spec)
    out = Path(args.out)
    manifest = []
    counters: dict[str, int] = {}
    for item in corpus:
        label = item.label.value
        index = counters.get(label, 0)
        counters[label] = index + 1
        rel = Path(label) / f"{index:05d}.grd"
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(grid_to_bytes(item.image.pixels))
        manifest.append({"path": str(rel), "label": label})
    (out / "manifest.json").write_text(
        json.dumps({"seed": args.seed, "per_class_count": args.per_class,
                    "items": manifest}, indent=2) + "\n",
        encoding="utf-8",
    )
    return {"written": str(out), "items": len(manifest),
            "classes": sorted(counters)}


def cmd_metrics_eval(args) -> dict:
    text = Path(args.file).read_text(encoding="utf-8")
    score_set = metrics.parse_score_file(text)
    params = metrics.DcfParams(p_target=args.p_target, c_miss=args.c_miss,
                               c_fa=args.c_fa)
    section = metrics.score_set_section("score file", score_set, params)
    rendered = metrics.report([section])
    if args.csv:
        print(rendered["csv"], end="")
    else:
        print(rendered["text"], end="")
    return {}


def cmd_features_extract(args) -> dict:
    data = Path(args.file).read_bytes()
    kind = sniff_media_kind(data)
    if args.kind == "mel":
        if kind != "wav":
            raise InvalidArgument("mel extraction expects a RIFF/WAVE file")
        values = log_mel(decode_wav(data)).values
        suffix = ".mel.grd"
    else:
        if kind != "grid":
            raise InvalidArgument("hpf extraction expects a grid file")
        values = hpf_laplacian(grayscale(decode_image_grid(data))).values
        suffix = ".hpf.grd"
    out = Path(args.out) if args.out else Path(args.file + suffix)
    out.write_bytes(grid_to_bytes(values))
    return {"written": str(out), "shape": list(values.shape),
            "kind": args.kind}


def cmd_users(args) -> dict:
    ws = Workspace(args.workspace)
    if args.users_cmd == "bootstrap":
        principal = ws.identity.bootstrap_admin(args.username, args.password)
        ws.save_principals()
    elif args.users_cmd == "provision":
        admin = ws.principal_with_role(args.admin, PrincipalRole.ADMIN)
        principal = ws.identity.provision_principal(
            admin, username=args.username, role=PrincipalRole(args.role),
            password=args.password, display_name=args.display_name,
        )
        ws.save_principals()
    elif args.users_cmd == "enable":
        admin = ws.principal_with_role(args.admin, PrincipalRole.ADMIN)
        principal = ws.identity.set_enabled(admin, args.username,
                                            args.enabled == "true")
        ws.save_principals()
    else:
        return {"users": [
            {"id": p.id, "role": p.role.value, "enabled": p.enabled,
             "chain_address": p.chain_address.hex if p.chain_address else None}
            for p in ws.identity.list_principals()
        ]}
    return {
        "id": principal.id,
        "role": principal.role.value,
        "enabled": principal.enabled,
        "chain_address": principal.chain_address.hex if principal.chain_address else None,
    }


def cmd_login(args) -> dict:
    ws = Workspace(args.workspace)
    token = ws.identity.authenticate(args.username, args.password)
    principal = ws.identity.get_principal(args.username)
    return {"token": token, "subject": principal.id, "role": principal.role.value}


def cmd_audit(args) -> dict:
    ws = Workspace(args.workspace)
    return {"entries": [
        {"seq": e.seq, "actor": e.actor, "action": e.action,
         "subject": e.subject, "timestamp": e.timestamp,
         "tx_hash": e.tx_hash.hex if e.tx_hash else None}
        for e in ws.ledger.audit_entries()
    ]}


def cmd_serve(args) -> dict:
    import uvicorn

    if args.config:
        config = ApiConfig.from_file(args.config)
    else:
        config = ApiConfig(data_dir=Path(args.workspace))
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port
    app = build_app(build_state(config))
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return {}


def _add_workspace(parser):
    parser.add_argument("--workspace", default=DEFAULT_WORKSPACE,
                        help="platform data directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evidentia",
        description="forensic media scoring with a tamper-evident evidence registry",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("detect", help="score a media file")
    p.add_argument("file")
    p.add_argument("--modality", required=True, choices=["image", "video", "audio"])
    p.add_argument("--actor", default="operator")
    _add_workspace(p)
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("fingerprint", help="two-stage architecture fingerprint")
    p.add_argument("file")
    p.add_argument("--actor", default="operator")
    p.add_argument("--refit", action="store_true",
                   help="refit stage-2 centroids before scoring")
    _add_workspace(p)
    p.set_defaults(fn=cmd_fingerprint)

    p = sub.add_parser("register", help="register evidence on the chain")
    p.add_argument("file")
    p.add_argument("--type", required=True,
                   choices=[e.value for e in EvidenceType])
    p.add_argument("--analyst", required=True)
    _add_workspace(p)
    p.set_defaults(fn=cmd_register)

    p = sub.add_parser("verify", help="court-verify registered evidence")
    p.add_argument("hash")
    p.add_argument("--authority", required=True)
    _add_workspace(p)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("evidence", help="query mirrored evidence")
    esub = p.add_subparsers(dest="evidence_cmd", required=True)
    pl = esub.add_parser("list")
    pl.add_argument("--type", choices=[e.value for e in EvidenceType])
    pl.add_argument("--verified", choices=["true", "false"])
    pl.add_argument("--offset", type=int, default=0)
    pl.add_argument("--limit", type=int, default=None)
    _add_workspace(pl)
    pl.set_defaults(fn=cmd_evidence_list)
    pg = esub.add_parser("get")
    pg.add_argument("hash")
    _add_workspace(pg)
    pg.set_defaults(fn=cmd_evidence_get)

    p = sub.add_parser("case", help="case workflow")
    csub = p.add_subparsers(dest="case_cmd", required=True)
    pc = csub.add_parser("create")
    pc.add_argument("--title", required=True)
    pc.add_argument("--owner", required=True)
    _add_workspace(pc)
    pc.set_defaults(fn=cmd_case)
    pa = csub.add_parser("attach")
    pa.add_argument("case_id")
    pa.add_argument("hash")
    pa.add_argument("--actor", default="operator")
    _add_workspace(pa)
    pa.set_defaults(fn=cmd_case)
    ps = csub.add_parser("status")
    ps.add_argument("case_id")
    ps.add_argument("status", choices=[s.value for s in CaseStatus])
    ps.add_argument("--actor", default="operator")
    _add_workspace(ps)
    ps.set_defaults(fn=cmd_case)
    psh = csub.add_parser("show")
    psh.add_argument("case_id")
    _add_workspace(psh)
    psh.set_defaults(fn=cmd_case)
    pls = csub.add_parser("list")
    _add_workspace(pls)
    pls.set_defaults(fn=cmd_case)

    p = sub.add_parser("ledger", help="ledger utilities")
    lsub = p.add_subparsers(dest="ledger_cmd", required=True)
    pe = lsub.add_parser("export", help="export a court bundle")
    pe.add_argument("--case", required=True)
    pe.add_argument("--out")
    _add_workspace(pe)
    pe.set_defaults(fn=cmd_ledger_export)

    p = sub.add_parser("chain", help="chain utilities")
    chsub = p.add_subparsers(dest="chain_cmd", required=True)
    pr = chsub.add_parser("replay", help="replay a tx log and print the roots")
    pr.add_argument("file")
    pr.set_defaults(fn=cmd_chain_replay)

    p = sub.add_parser("corpus", help="synthetic corpus utilities")
    cosub = p.add_subparsers(dest="corpus_cmd", required=True)
    pg2 = cosub.add_parser("generate")
    pg2.add_argument("--seed", type=int, default=CALIBRATION_FIT_SEED)
    pg2.add_argument("--per-class", type=int, required=True, dest="per_class")
    pg2.add_argument("--out", required=True)
    pg2.set_defaults(fn=cmd_corpus_generate)

    p = sub.add_parser("metrics", help="metric evaluation")
    msub = p.add_subparsers(dest="metrics_cmd", required=True)
    pm = msub.add_parser("eval", help="evaluate a label<TAB>score file")
    pm.add_argument("file")
    pm.add_argument("--p-target", type=float, default=0.01, dest="p_target")
    pm.add_argument("--c-miss", type=float, default=1.0, dest="c_miss")
    pm.add_argument("--c-fa", type=float, default=1.0, dest="c_fa")
    pm.add_argument("--csv", action="store_true")
    pm.set_defaults(fn=cmd_metrics_eval)

    p = sub.add_parser("features", help="feature extraction")
    fsub = p.add_subparsers(dest="features_cmd", required=True)
    pf = fsub.add_parser("extract")
    pf.add_argument("file")
    pf.add_argument("--kind", required=True, choices=["mel", "hpf"])
    pf.add_argument("--out")
    pf.set_defaults(fn=cmd_features_extract)

    p = sub.add_parser("users", help="principal management")
    usub = p.add_subparsers(dest="users_cmd", required=True)
    pb = usub.add_parser("bootstrap")
    pb.add_argument("username")
    pb.add_argument("--password", required=True)
    _add_workspace(pb)
    pb.set_defaults(fn=cmd_users)
    pp = usub.add_parser("provision")
    pp.add_argument("username")
    pp.add_argument("--role", required=True,
                    choices=[r.value for r in PrincipalRole])
    pp.add_argument("--password", required=True)
    pp.add_argument("--admin", required=True)
    pp.add_argument("--display-name", dest="display_name")
    _add_workspace(pp)
    pp.set_defaults(fn=cmd_users)
    pe2 = usub.add_parser("enable")
    pe2.add_argument("username")
    pe2.add_argument("enabled", choices=["true", "false"])
    pe2.add_argument("--admin", required=True)
    _add_workspace(pe2)
    pe2.set_defaults(fn=cmd_users)
    pu = usub.add_parser("list")
    _add_workspace(pu)
    pu.set_defaults(fn=cmd_users)

    p = sub.add_parser("login", help="issue a role token")
    p.add_argument("username")
    p.add_argument("--password", required=True)
    _add_workspace(p)
    p.set_defaults(fn=cmd_login)

    p = sub.add_parser("audit", help="print the audit log")
    _add_workspace(p)
    p.set_defaults(fn=cmd_audit)

    p = sub.add_parser("serve", help="run the http service")
    p.add_argument("--config")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    _add_workspace(p)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = args.fn(args)
    except PlatformError as exc:
        print(json.dumps({"code": exc.code, "message": exc.message,
                          "detail": exc.detail}), file=sys.stderr)
        return 1
    if result:
        _emit(result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
