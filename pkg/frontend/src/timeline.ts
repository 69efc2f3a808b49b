import type { EvidencePacket } from "./api";

export interface TimelineRow {
  blockNumber: number;
  timestamp: number;
  kind: "registered" | "verified";
  actor: string;
  txHash: string;
}

export type Badge = "unverified" | "verified";

export interface EvidenceView {
  contentHash: string;
  cid: string;
  evidenceType: string;
  badge: Badge;
  /** chain events in the order they were sealed, lowest block first */
  timeline: TimelineRow[];
  detectionCount: number;
}

/**
 * Flatten an evidence packet into what the panel renders: a badge and a
 * block-ordered custody timeline. Block number is the ordering authority,
 * not timestamps, because the chain is what a court replays.
 */
export function evidenceView(packet: EvidencePacket): EvidenceView {
  const timeline: TimelineRow[] = [
    {
      blockNumber: packet.block_number,
      timestamp: packet.registered_at,
      kind: "registered",
      actor: packet.analyst,
      txHash: packet.tx_hash,
    },
  ];
  if (packet.verified && packet.verify_block_number !== null) {
    timeline.push({
      blockNumber: packet.verify_block_number,
      timestamp: packet.verified_at ?? 0,
      kind: "verified",
      actor: packet.verifier ?? "",
      txHash: packet.verify_tx_hash ?? "",
    });
  }
  timeline.sort((a, b) => a.blockNumber - b.blockNumber);
  return {
    contentHash: packet.content_hash,
    cid: packet.cid,
    evidenceType: packet.evidence_type,
    badge: packet.verified ? "verified" : "unverified",
    timeline,
    detectionCount: packet.detections.length,
  };
}

/** Sort a listing for the evidence table: newest registration first. */
export function sortListing(packets: EvidencePacket[]): EvidencePacket[] {
  return [...packets].sort(
    (a, b) => b.block_number - a.block_number || a.content_hash.localeCompare(b.content_hash),
  );
}
