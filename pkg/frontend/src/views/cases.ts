import { ApiError, type CaseRow } from "../api";
import { el, clear } from "../dom";
import { allowed } from "../policy";
import type { Session } from "../session";

const NEXT_STATUS: Record<string, string[]> = {
  open: ["submitted", "closed"],
  submitted: ["verified", "closed"],
  verified: ["closed"],
  closed: [],
};

export function casesPanel(session: Session): HTMLElement {
  const role = session.role;
  const list = el("ul", { id: "case-list" });
  const detail = el("div", { id: "case-detail" });
  const error = el("p", { class: "error", id: "case-error" });

  const report = (err: unknown) => {
    error.textContent = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
  };

  const showDetail = (row: CaseRow) => {
    clear(detail);
    const children: (Node | string)[] = [
      el("h3", {}, [`${row.id}: ${row.title}`]),
      el("p", {}, [`status ${row.status}, owner ${row.owner}`]),
      el("ul", {}, row.evidence.map((hash) => el("li", { class: "hash" }, [hash.slice(0, 16)]))),
    ];
    if (role !== null && allowed("cases.status", role)) {
      for (const next of NEXT_STATUS[row.status] ?? []) {
        const move = el("button", { class: "case-status" }, [`mark ${next}`]);
        move.addEventListener("click", async () => {
          error.textContent = "";
          try {
            showDetail(await session.guard(() => session.api.setCaseStatus(row.id, next)));
            await refresh();
          } catch (err) {
            report(err);
          }
        });
        children.push(move);
      }
    }
    if (role !== null && allowed("cases.attach", role) && row.status === "open") {
      const hashInput = el("input", { type: "text", placeholder: "content hash", class: "attach-hash" });
      const attach = el("button", { class: "case-attach" }, ["Attach evidence"]);
      attach.addEventListener("click", async () => {
        error.textContent = "";
        try {
          showDetail(await session.guard(() => session.api.attachEvidence(row.id, hashInput.value)));
        } catch (err) {
          report(err);
        }
      });
      children.push(hashInput, attach);
    }
    detail.append(el("div", { class: "card" }, children));
  };

  const refresh = async () => {
    error.textContent = "";
    try {
      const rows = await session.guard(() => session.api.listCases());
      clear(list);
      for (const row of rows.cases) {
        const item = el("li", { class: "case-row" }, [`${row.id} [${row.status}] ${row.title}`]);
        item.addEventListener("click", () => showDetail(row));
        list.append(item);
      }
    } catch (err) {
      report(err);
    }
  };

  const children: (Node | string)[] = [el("h2", {}, ["Cases"])];
  if (role !== null && allowed("cases.create", role)) {
    const title = el("input", { type: "text", placeholder: "case title", id: "case-title" });
    const create = el("button", { id: "case-create" }, ["Open case"]);
    create.addEventListener("click", async () => {
      error.textContent = "";
      try {
        await session.guard(() => session.api.createCase(title.value));
        title.value = "";
        await refresh();
      } catch (err) {
        report(err);
      }
    });
    children.push(el("div", { class: "controls" }, [title, create]));
  }
  children.push(list, detail, error);
  void refresh();
  return el("section", { class: "panel", id: "panel-cases" }, children);
}
