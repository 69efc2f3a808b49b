import { describe, expect, it } from "vitest";
import type { EvidencePacket } from "../src/api";
import { evidenceView, sortListing } from "../src/timeline";

function packet(overrides: Partial<EvidencePacket> = {}): EvidencePacket {
  return {
    content_hash: "ab".repeat(32),
    cid: "bafkexample",
    evidence_type: "image",
    analyst: "11".repeat(20),
    tx_hash: "22".repeat(32),
    block_number: 4,
    registered_at: 1700000000,
    verified: false,
    verifier: null,
    verified_at: null,
    verify_tx_hash: null,
    verify_block_number: null,
    detections: [],
    ...overrides,
  };
}

describe("evidenceView", () => {
  it("shows a single registration row while unverified", () => {
    const view = evidenceView(packet());
    expect(view.badge).toBe("unverified");
    expect(view.timeline.length).toBe(1);
    expect(view.timeline[0]!.kind).toBe("registered");
    expect(view.timeline[0]!.blockNumber).toBe(4);
    expect(view.timeline[0]!.actor).toBe("11".repeat(20));
  });

  it("adds the verification row and flips the badge", () => {
    const view = evidenceView(
      packet({
        verified: true,
        verifier: "33".repeat(20),
        verified_at: 1700000100,
        verify_tx_hash: "44".repeat(32),
        verify_block_number: 9,
      }),
    );
    expect(view.badge).toBe("verified");
    expect(view.timeline.map((r) => r.kind)).toEqual(["registered", "verified"]);
    expect(view.timeline[1]!.actor).toBe("33".repeat(20));
  });

  it("orders rows by block number, not by event kind", () => {
    // replayed histories can present verification first; block order rules
    const view = evidenceView(
      packet({
        block_number: 12,
        verified: true,
        verifier: "33".repeat(20),
        verified_at: 1699999999,
        verify_tx_hash: "44".repeat(32),
        verify_block_number: 5,
      }),
    );
    expect(view.timeline.map((r) => r.blockNumber)).toEqual([5, 12]);
    expect(view.timeline[0]!.kind).toBe("verified");
  });

  it("counts attached detections", () => {
    const withDetections = packet();
    withDetections.detections = [{} as never, {} as never];
    expect(evidenceView(withDetections).detectionCount).toBe(2);
  });
});

describe("sortListing", () => {
  it("puts the newest block first and breaks ties by hash", () => {
    const rows = [
      packet({ content_hash: "cc".repeat(32), block_number: 2 }),
      packet({ content_hash: "aa".repeat(32), block_number: 7 }),
      packet({ content_hash: "bb".repeat(32), block_number: 7 }),
    ];
    const sorted = sortListing(rows);
    expect(sorted.map((p) => p.block_number)).toEqual([7, 7, 2]);
    expect(sorted[0]!.content_hash).toBe("aa".repeat(32));
    // input order untouched
    expect(rows[0]!.block_number).toBe(2);
  });
});
