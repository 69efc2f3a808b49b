import { beforeEach, describe, expect, it } from "vitest";
import { ApiClient } from "../src/api";
import { sha256Hex } from "../src/hash";
import { UPLOAD_LIMIT_BYTES, UploadFlow } from "../src/upload";
import { jsonResponse } from "./helpers";

interface Recorded {
  url: string;
  method: string;
}

function recordingClient(handler: (url: string, init?: RequestInit) => Response) {
  const calls: Recorded[] = [];
  const client = new ApiClient("http://api", async (input, init) => {
    const url = String(input);
    calls.push({ url, method: init?.method ?? "GET" });
    return handler(url, init);
  });
  client.token = "test-token";
  return { client, calls };
}

function detection(mediaHash: string) {
  return {
    detection_id: "det-000001",
    principal_id: "fiona",
    modality: "image",
    media_hash: mediaHash,
    score: 0.42,
    verdict: "real",
    detector_id: "image-highband-v1",
    threshold: 0.5,
    casework: true,
    created_at: 1000,
  };
}

function packet(contentHash: string, extra: Record<string, unknown> = {}) {
  return {
    content_hash: contentHash,
    cid: "bafk" + contentHash.slice(0, 8),
    evidence_type: "image",
    analyst: "aa".repeat(20),
    tx_hash: "bb".repeat(32),
    block_number: 3,
    registered_at: 1700000000,
    verified: false,
    verifier: null,
    verified_at: null,
    verify_tx_hash: null,
    verify_block_number: null,
    detections: [],
    ...extra,
  };
}

describe("UploadFlow", () => {
  let payload: Uint8Array;
  let payloadHash: string;

  beforeEach(async () => {
    payload = new TextEncoder().encode("fake media payload");
    payloadHash = await sha256Hex(payload);
  });

  it("rejects oversize files before any request is made", async () => {
    const { client, calls } = recordingClient(() => jsonResponse(200, {}));
    const flow = new UploadFlow(client);
    const state = await flow.accept(new Uint8Array(UPLOAD_LIMIT_BYTES + 1));
    expect(state.phase).toBe("error");
    expect(state.error?.code).toBe("payload_too_large");
    expect(calls.length).toBe(0);
    await expect(flow.analyze("image")).rejects.toThrow("no file accepted");
  });

  it("accepts a file exactly at the limit", async () => {
    const { client, calls } = recordingClient(() => jsonResponse(200, {}));
    const flow = new UploadFlow(client);
    const state = await flow.accept(new Uint8Array(UPLOAD_LIMIT_BYTES));
    expect(state.phase).toBe("hashed");
    expect(state.clientHash).toMatch(/^[0-9a-f]{64}$/);
    expect(calls.length).toBe(0);
  });

  it("enables register only when server hash matches the local one", async () => {
    const { client } = recordingClient((url) => {
      if (url.endsWith("/detect/image")) return jsonResponse(200, detection(payloadHash));
      throw new Error(`unexpected ${url}`);
    });
    const flow = new UploadFlow(client);
    await flow.accept(payload);
    expect(flow.canRegister).toBe(false);
    const state = await flow.analyze("image");
    expect(state.phase).toBe("analyzed");
    expect(state.clientHash).toBe(payloadHash);
    expect(state.serverHash).toBe(payloadHash);
    expect(flow.canRegister).toBe(true);
  });

  it("keeps register disabled on a hash mismatch", async () => {
    const { client, calls } = recordingClient((url) => {
      if (url.endsWith("/detect/image")) return jsonResponse(200, detection("00".repeat(32)));
      throw new Error(`unexpected ${url}`);
    });
    const flow = new UploadFlow(client);
    await flow.accept(payload);
    await flow.analyze("image");
    expect(flow.canRegister).toBe(false);
    await expect(flow.register("image")).rejects.toThrow("hashes do not match");
    // only the detect call went out, never a register
    expect(calls.map((c) => c.url)).toEqual(["http://api/detect/image"]);
  });

  it("registers after agreement and reports the packet", async () => {
    const { client } = recordingClient((url) => {
      if (url.endsWith("/detect/image")) return jsonResponse(200, detection(payloadHash));
      if (url.includes("/evidence/register")) return jsonResponse(201, packet(payloadHash));
      throw new Error(`unexpected ${url}`);
    });
    const flow = new UploadFlow(client);
    await flow.accept(payload);
    await flow.analyze("image");
    const state = await flow.register("image");
    expect(state.phase).toBe("registered");
    expect(state.packet?.content_hash).toBe(payloadHash);
  });

  it("maps a duplicate registration onto the conflict view", async () => {
    const existing = packet(payloadHash, { analyst: "cc".repeat(20), registered_at: 1700000123 });
    const { client } = recordingClient((url, init) => {
      if (url.endsWith("/detect/image")) return jsonResponse(200, detection(payloadHash));
      if (url.includes("/evidence/register")) {
        return jsonResponse(409, {
          code: "duplicate_evidence",
          message: "already registered",
          detail: null,
        });
      }
      if (url.endsWith(`/evidence/${payloadHash}`) && (init?.method ?? "GET") === "GET") {
        return jsonResponse(200, existing);
      }
      throw new Error(`unexpected ${url}`);
    });
    const flow = new UploadFlow(client);
    await flow.accept(payload);
    await flow.analyze("image");
    const state = await flow.register("image");
    expect(state.phase).toBe("conflict");
    expect(state.conflict?.existing.registered_at).toBe(1700000123);
    expect(state.conflict?.message).toContain("cc".repeat(20));
    expect(state.conflict?.message).toContain(new Date(1700000123 * 1000).toISOString());
  });

  it("surfaces other server errors without a conflict view", async () => {
    const { client } = recordingClient((url) => {
      if (url.endsWith("/detect/image")) return jsonResponse(200, detection(payloadHash));
      if (url.includes("/evidence/register")) {
        return jsonResponse(422, { code: "invalid_argument", message: "bad type", detail: null });
      }
      throw new Error(`unexpected ${url}`);
    });
    const flow = new UploadFlow(client);
    await flow.accept(payload);
    await flow.analyze("image");
    const state = await flow.register("nonsense");
    expect(state.phase).toBe("error");
    expect(state.error?.code).toBe("invalid_argument");
    expect(state.conflict).toBeNull();
  });
});
