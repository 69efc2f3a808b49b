import type { Role } from "./api";

/**
 * Client-side mirror of the server's route x role policy table. This only
 * decides which controls get rendered; the server enforces the same table
 * independently, so a hidden action that somehow fires still gets a 403.
 */

export const ROLES: readonly Role[] = [
  "FORENSIC_ANALYST",
  "LEGAL_AUTHORITY",
  "ADMIN",
  "NORMAL_USER",
];

export const ROUTE_IDS = [
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
] as const;

export type RouteId = (typeof ROUTE_IDS)[number];

function grants(analyst: boolean, authority: boolean, admin: boolean, normal: boolean) {
  return {
    FORENSIC_ANALYST: analyst,
    LEGAL_AUTHORITY: authority,
    ADMIN: admin,
    NORMAL_USER: normal,
  } as const;
}

export const POLICY: Record<RouteId, Record<Role, boolean>> = {
  "auth.login": grants(true, true, true, true),
  "detect.image": grants(true, true, true, true),
  "detect.video": grants(true, true, true, true),
  "detect.audio": grants(true, true, true, true),
  fingerprint: grants(true, true, true, true),
  "gan.reconstruct": grants(true, true, true, true),
  "evidence.register": grants(true, false, false, false),
  "evidence.verify": grants(false, true, false, false),
  "evidence.list": grants(true, true, true, false),
  "evidence.get": grants(true, true, true, false),
  "cases.create": grants(true, false, false, false),
  "cases.list": grants(true, true, true, false),
  "cases.get": grants(true, true, true, false),
  "cases.attach": grants(true, false, false, false),
  "cases.status": grants(true, true, false, false),
  "cases.bundle": grants(true, true, true, false),
  "admin.users.create": grants(false, false, true, false),
  "admin.users.list": grants(false, false, true, false),
  "admin.users.enable": grants(false, false, true, false),
  "admin.audit": grants(false, false, true, false),
};

export function allowed(route: RouteId, role: Role): boolean {
  return POLICY[route][role];
}

export function visibleActions(role: Role): RouteId[] {
  return ROUTE_IDS.filter((route) => POLICY[route][role]);
}

/** Top-level panels shown in the nav, gated on the routes they depend on. */
export const PANELS: readonly { id: string; label: string; requires: RouteId }[] = [
  { id: "detect", label: "Detection", requires: "detect.image" },
  { id: "evidence", label: "Evidence", requires: "evidence.list" },
  { id: "cases", label: "Cases", requires: "cases.list" },
  { id: "admin", label: "Administration", requires: "admin.users.list" },
];

export function visiblePanels(role: Role) {
  return PANELS.filter((panel) => allowed(panel.requires, role));
}
