/**
 * Typed client for the evidentia HTTP API. Every method maps 1:1 onto a
 * documented route; errors carry the server's structured {code, message,
 * detail} body so views never string-match messages.
 */

export interface LoginResponse {
  token: string;
  subject: string;
  role: Role;
  expires_in: number;
}

export type Role = "FORENSIC_ANALYST" | "LEGAL_AUTHORITY" | "ADMIN" | "NORMAL_USER";

export interface DetectionSummary {
  detection_id: string;
  principal_id: string;
  modality: string;
  media_hash: string;
  score: number;
  verdict: "real" | "fake";
  detector_id: string;
  threshold: number;
  casework: boolean;
  created_at: number;
}

export interface FingerprintResponse {
  stage1: { label: "real" | "generated"; score: number };
  stage2: { label: string; class_scores: Record<string, number> } | null;
  detection: DetectionSummary;
}

export interface EvidencePacket {
  content_hash: string;
  cid: string;
  evidence_type: string;
  analyst: string;
  tx_hash: string;
  block_number: number;
  registered_at: number;
  verified: boolean;
  verifier: string | null;
  verified_at: number | null;
  verify_tx_hash: string | null;
  verify_block_number: number | null;
  detections: DetectionSummary[];
}

export interface CaseRow {
  id: string;
  title: string;
  owner: string;
  evidence: string[];
  status: "open" | "submitted" | "verified" | "closed";
  created_at: number;
  updated_at: number;
}

export interface PrincipalRow {
  id: string;
  display_name: string;
  role: Role;
  chain_address: string | null;
  enabled: boolean;
}

export interface AuditEntry {
  seq: number;
  actor: string;
  action: string;
  subject: string;
  timestamp: number;
  tx_hash: string | null;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public detail: unknown = null,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class ApiClient {
  token: string | null = null;

  constructor(
    private baseUrl: string = "/api",
    private fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    options: { json?: unknown; body?: BodyInit; auth?: boolean } = {},
  ): Promise<T> {
    const headers: Record<string, string> = {};
    if (options.auth !== false && this.token) {
      headers["Authorization"] = `Bearer ${this.token}`;
    }
    let body: BodyInit | undefined = options.body;
    if (options.json !== undefined) {
      headers["Content-Type"] = "application/json";
      body = JSON.stringify(options.json);
    }
    const response = await this.fetchImpl(this.baseUrl + path, { method, headers, body });
    const text = await response.text();
    let parsed: any = null;
    try {
      parsed = text ? JSON.parse(text) : null;
    } catch {
      parsed = null;
    }
    if (!response.ok) {
      if (parsed && typeof parsed.code === "string") {
        throw new ApiError(response.status, parsed.code, parsed.message, parsed.detail);
      }
      throw new ApiError(response.status, "http_error", text || response.statusText);
    }
    return parsed as T;
  }

  async login(username: string, password: string): Promise<LoginResponse> {
    const row = await this.request<LoginResponse>("POST", "/auth/login", {
      json: { username, password },
      auth: false,
    });
    this.token = row.token;
    return row;
  }

  detect(modality: "image" | "video" | "audio", data: BodyInit) {
    return this.request<DetectionSummary>("POST", `/detect/${modality}`, { body: data });
  }

  fingerprint(data: BodyInit) {
    return this.request<FingerprintResponse>("POST", "/fingerprint", { body: data });
  }

  ganReconstruct() {
    return this.request<never>("POST", "/gan/reconstruct", {});
  }

  registerEvidence(evidenceType: string, data: BodyInit) {
    return this.request<EvidencePacket>(
      "POST",
      `/evidence/register?evidence_type=${encodeURIComponent(evidenceType)}`,
      { body: data },
    );
  }

  verifyEvidence(contentHash: string) {
    return this.request<EvidencePacket>("POST", `/evidence/${contentHash}/verify`, {});
  }

  listEvidence(filters: Record<string, string> = {}) {
    const qs = new URLSearchParams(filters).toString();
    return this.request<{ evidence: EvidencePacket[]; count: number }>(
      "GET",
      `/evidence${qs ? "?" + qs : ""}`,
    );
  }

  getEvidence(contentHash: string) {
    return this.request<EvidencePacket>("GET", `/evidence/${contentHash}`);
  }

  createCase(title: string) {
    return this.request<CaseRow>("POST", "/cases", { json: { title } });
  }

  listCases(owner?: string) {
    const qs = owner ? `?owner=${encodeURIComponent(owner)}` : "";
    return this.request<{ cases: CaseRow[] }>("GET", `/cases${qs}`);
  }

  getCase(caseId: string) {
    return this.request<CaseRow>("GET", `/cases/${caseId}`);
  }

  attachEvidence(caseId: string, contentHash: string) {
    return this.request<CaseRow>("POST", `/cases/${caseId}/evidence`, {
      json: { content_hash: contentHash },
    });
  }

  setCaseStatus(caseId: string, status: string) {
    return this.request<CaseRow>("POST", `/cases/${caseId}/status`, {
      json: { status },
    });
  }

  caseBundle(caseId: string) {
    return this.request<Record<string, unknown>>("GET", `/cases/${caseId}/bundle`);
  }

  createUser(username: string, role: Role, password: string, displayName?: string) {
    return this.request<PrincipalRow>("POST", "/admin/users", {
      json: { username, role, password, display_name: displayName },
    });
  }

  listUsers() {
    return this.request<{ users: PrincipalRow[] }>("GET", "/admin/users");
  }

  setUserEnabled(username: string, enabled: boolean) {
    return this.request<PrincipalRow>("PATCH", `/admin/users/${username}`, {
      json: { enabled },
    });
  }

  auditLog() {
    return this.request<{ entries: AuditEntry[] }>("GET", "/admin/audit");
  }
}
