import { ApiError, type AuditEntry, type Role } from "../api";
import { el, clear } from "../dom";
import type { Session } from "../session";

type AuditColumn = "seq" | "actor" | "action" | "timestamp";

export function compareAudit(column: AuditColumn, a: AuditEntry, b: AuditEntry): number {
  if (column === "seq") return a.seq - b.seq;
  if (column === "timestamp") return a.timestamp - b.timestamp || a.seq - b.seq;
  return a[column].localeCompare(b[column]) || a.seq - b.seq;
}

export function adminPanel(session: Session): HTMLElement {
  const userRows = el("tbody", { id: "user-rows" });
  const auditRows = el("tbody", { id: "audit-rows" });
  const error = el("p", { class: "error", id: "admin-error" });
  let entries: AuditEntry[] = [];
  let sortBy: AuditColumn = "seq";
  let descending = false;

  const report = (err: unknown) => {
    error.textContent = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
  };

  const renderAudit = () => {
    clear(auditRows);
    const sorted = [...entries].sort(compareAudit.bind(null, sortBy));
    if (descending) sorted.reverse();
    for (const entry of sorted) {
      auditRows.append(
        el("tr", {}, [
          el("td", {}, [String(entry.seq)]),
          el("td", {}, [entry.actor]),
          el("td", {}, [entry.action]),
          el("td", {}, [entry.subject]),
          el("td", {}, [new Date(entry.timestamp * 1000).toISOString()]),
        ]),
      );
    }
  };

  const refreshUsers = async () => {
    try {
      const listing = await session.guard(() => session.api.listUsers());
      clear(userRows);
      for (const user of listing.users) {
        const toggle = el("button", { class: "user-toggle" }, [user.enabled ? "Disable" : "Enable"]);
        toggle.addEventListener("click", async () => {
          error.textContent = "";
          try {
            await session.guard(() => session.api.setUserEnabled(user.id, !user.enabled));
            await refreshUsers();
          } catch (err) {
            report(err);
          }
        });
        userRows.append(
          el("tr", {}, [
            el("td", {}, [user.id]),
            el("td", {}, [user.role]),
            el("td", {}, [user.enabled ? "enabled" : "disabled"]),
            el("td", {}, [toggle]),
          ]),
        );
      }
    } catch (err) {
      report(err);
    }
  };

  const refreshAudit = async () => {
    try {
      entries = (await session.guard(() => session.api.auditLog())).entries;
      renderAudit();
    } catch (err) {
      report(err);
    }
  };

  const name = el("input", { type: "text", placeholder: "username", id: "new-user-name" });
  const pass = el("input", { type: "password", placeholder: "password", id: "new-user-pass" });
  const role = el("select", { id: "new-user-role" }, [
    el("option", { value: "FORENSIC_ANALYST" }, ["FORENSIC_ANALYST"]),
    el("option", { value: "LEGAL_AUTHORITY" }, ["LEGAL_AUTHORITY"]),
    el("option", { value: "ADMIN" }, ["ADMIN"]),
    el("option", { value: "NORMAL_USER" }, ["NORMAL_USER"]),
  ]);
  const create = el("button", { id: "user-create" }, ["Create user"]);
  create.addEventListener("click", async () => {
    error.textContent = "";
    try {
      await session.guard(() => session.api.createUser(name.value, role.value as Role, pass.value));
      name.value = "";
      pass.value = "";
      await refreshUsers();
      await refreshAudit();
    } catch (err) {
      report(err);
    }
  });

  const auditHeader = (column: AuditColumn, label: string) => {
    const th = el("th", { class: "sortable" }, [label]);
    th.addEventListener("click", () => {
      descending = sortBy === column ? !descending : false;
      sortBy = column;
      renderAudit();
    });
    return th;
  };

  void refreshUsers();
  void refreshAudit();
  return el("section", { class: "panel", id: "panel-admin" }, [
    el("h2", {}, ["Administration"]),
    el("div", { class: "controls" }, [name, pass, role, create]),
    el("table", {}, [
      el("thead", {}, [
        el("tr", {}, [
          el("th", {}, ["user"]),
          el("th", {}, ["role"]),
          el("th", {}, ["state"]),
          el("th", {}, [""]),
        ]),
      ]),
      userRows,
    ]),
    el("h2", {}, ["Audit log"]),
    el("table", {}, [
      el("thead", {}, [
        el("tr", {}, [
          auditHeader("seq", "seq"),
          auditHeader("actor", "actor"),
          auditHeader("action", "action"),
          el("th", {}, ["subject"]),
          auditHeader("timestamp", "time"),
        ]),
      ]),
      auditRows,
    ]),
    error,
  ]);
}
