import { ApiClient, ApiError, type DetectionSummary, type EvidencePacket } from "./api";
import { sha256Hex } from "./hash";

export const UPLOAD_LIMIT_BYTES = 25 * 1024 * 1024;

export type Modality = "image" | "video" | "audio";

export interface UploadState {
  phase: "empty" | "hashed" | "analyzed" | "registered" | "conflict" | "error";
  clientHash: string | null;
  serverHash: string | null;
  detection: DetectionSummary | null;
  packet: EvidencePacket | null;
  /** populated on 409: who already registered this content, and when */
  conflict: { existing: EvidencePacket; message: string } | null;
  error: { code: string; message: string } | null;
}

/**
 * Drives the analyze-then-register flow for one file. The register action
 * stays disabled until the hash we computed locally matches the hash the
 * server reported for the same bytes; a mismatch means the upload was
 * corrupted or rewritten in transit and must not be registered.
 */
export class UploadFlow {
  state: UploadState = {
    phase: "empty",
    clientHash: null,
    serverHash: null,
    detection: null,
    packet: null,
    conflict: null,
    error: null,
  };
  private data: Uint8Array | null = null;

  constructor(private api: ApiClient) {}

  /**
   * Accept a file's bytes. Oversize payloads are refused here, before any
   * network traffic; the server enforces the same cap with a 413.
   */
  async accept(data: Uint8Array): Promise<UploadState> {
    if (data.byteLength > UPLOAD_LIMIT_BYTES) {
      this.state = {
        ...this.emptyState(),
        phase: "error",
        error: {
          code: "payload_too_large",
          message: `file is ${data.byteLength} bytes; limit is ${UPLOAD_LIMIT_BYTES}`,
        },
      };
      this.data = null;
      return this.state;
    }
    this.data = data;
    this.state = {
      ...this.emptyState(),
      phase: "hashed",
      clientHash: await sha256Hex(data),
    };
    return this.state;
  }

  async analyze(modality: Modality): Promise<UploadState> {
    if (this.data === null || this.state.clientHash === null) {
      throw new Error("no file accepted");
    }
    try {
      const detection = await this.api.detect(modality, toBody(this.data));
      this.state = {
        ...this.state,
        phase: "analyzed",
        serverHash: detection.media_hash,
        detection,
        error: null,
      };
    } catch (err) {
      this.state = { ...this.state, phase: "error", error: asErrorInfo(err) };
    }
    return this.state;
  }

  /** True only when both hashes exist and agree. Gates the register button. */
  get canRegister(): boolean {
    return (
      this.state.clientHash !== null &&
      this.state.serverHash !== null &&
      this.state.clientHash === this.state.serverHash
    );
  }

  async register(evidenceType: string): Promise<UploadState> {
    if (!this.canRegister || this.data === null) {
      throw new Error("register blocked: client and server hashes do not match");
    }
    try {
      const packet = await this.api.registerEvidence(evidenceType, toBody(this.data));
      this.state = { ...this.state, phase: "registered", packet, error: null };
    } catch (err) {
      if (err instanceof ApiError && err.code === "duplicate_evidence") {
        const existing = await this.api.getEvidence(this.state.clientHash!);
        this.state = {
          ...this.state,
          phase: "conflict",
          conflict: {
            existing,
            message:
              `already registered by ${existing.analyst} at ` +
              `${new Date(existing.registered_at * 1000).toISOString()}`,
          },
        };
      } else {
        this.state = { ...this.state, phase: "error", error: asErrorInfo(err) };
      }
    }
    return this.state;
  }

  private emptyState(): UploadState {
    return {
      phase: "empty",
      clientHash: null,
      serverHash: null,
      detection: null,
      packet: null,
      conflict: null,
      error: null,
    };
  }
}

function toBody(data: Uint8Array): BodyInit {
  // copy into a plain ArrayBuffer so fetch accepts it regardless of the
  // underlying buffer being a SharedArrayBuffer or a larger slab
  return data.slice().buffer as ArrayBuffer;
}

function asErrorInfo(err: unknown): { code: string; message: string } {
  if (err instanceof ApiError) {
    return { code: err.code, message: err.message };
  }
  return { code: "client_error", message: String(err) };
}
