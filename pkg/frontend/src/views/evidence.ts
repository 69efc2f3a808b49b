import { ApiError, type EvidencePacket } from "../api";
import { el, clear } from "../dom";
import { allowed } from "../policy";
import type { Session } from "../session";
import { evidenceView, sortListing } from "../timeline";

export function evidencePanel(session: Session): HTMLElement {
  const table = el("tbody", { id: "evidence-rows" });
  const detail = el("div", { id: "evidence-detail" });
  const error = el("p", { class: "error", id: "evidence-error" });
  const canVerify = session.role !== null && allowed("evidence.verify", session.role);

  const showDetail = (packet: EvidencePacket) => {
    clear(detail);
    const view = evidenceView(packet);
    const rows = view.timeline.map((row) =>
      el("li", {}, [
        `block ${row.blockNumber}: ${row.kind} by ${row.actor} (tx ${row.txHash.slice(0, 12)})`,
      ]),
    );
    const badge = el("span", { class: `badge badge-${view.badge}` }, [view.badge]);
    const children: (Node | string)[] = [
      el("h3", {}, [view.contentHash.slice(0, 16), " ", badge]),
      el("p", { class: "hash" }, [`cid ${view.cid}`]),
      el("ul", { class: "timeline" }, rows),
    ];
    if (canVerify) {
      const verify = el(
        "button",
        { id: "evidence-verify", disabled: view.badge === "verified" },
        ["Verify"],
      );
      verify.addEventListener("click", async () => {
        error.textContent = "";
        try {
          const updated = await session.guard(() => session.api.verifyEvidence(packet.content_hash));
          showDetail(updated);
          await refresh();
        } catch (err) {
          error.textContent = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
        }
      });
      children.push(verify);
    }
    detail.append(el("div", { class: "card" }, children));
  };

  const refresh = async () => {
    error.textContent = "";
    try {
      const listing = await session.guard(() => session.api.listEvidence());
      clear(table);
      for (const packet of sortListing(listing.evidence)) {
        const row = el("tr", { class: "evidence-row" }, [
          el("td", {}, [packet.content_hash.slice(0, 16)]),
          el("td", {}, [packet.evidence_type]),
          el("td", {}, [packet.verified ? "verified" : "unverified"]),
          el("td", {}, [String(packet.block_number)]),
        ]);
        row.addEventListener("click", () => showDetail(packet));
        table.append(row);
      }
    } catch (err) {
      error.textContent = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
    }
  };

  const reload = el("button", { id: "evidence-reload" }, ["Reload"]);
  reload.addEventListener("click", refresh);
  void refresh();

  return el("section", { class: "panel", id: "panel-evidence" }, [
    el("h2", {}, ["Evidence"]),
    reload,
    el("table", {}, [
      el("thead", {}, [
        el("tr", {}, [
          el("th", {}, ["hash"]),
          el("th", {}, ["type"]),
          el("th", {}, ["status"]),
          el("th", {}, ["block"]),
        ]),
      ]),
      table,
    ]),
    detail,
    error,
  ]);
}
