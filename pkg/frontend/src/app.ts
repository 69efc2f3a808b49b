import { ApiClient } from "./api";
import { el, clear } from "./dom";
import { visiblePanels } from "./policy";
import { Session } from "./session";
import { adminPanel } from "./views/admin";
import { casesPanel } from "./views/cases";
import { detectView } from "./views/detect";
import { evidencePanel } from "./views/evidence";
import { loginView } from "./views/login";

const PANEL_BUILDERS: Record<string, (session: Session) => HTMLElement> = {
  detect: detectView,
  evidence: evidencePanel,
  cases: casesPanel,
  admin: adminPanel,
};

export function createApp(root: HTMLElement, baseUrl = "/api") {
  const api = new ApiClient(baseUrl);
  const session = new Session(api, () => showLogin());

  const showLogin = () => {
    clear(root);
    root.append(loginView(session, showShell));
  };

  const showShell = () => {
    clear(root);
    const role = session.role;
    if (role === null) {
      showLogin();
      return;
    }
    const content = el("main", { id: "content" });
    const panels = visiblePanels(role);
    const nav = el(
      "nav",
      {},
      panels.map((panel) => {
        const link = el("button", { class: "nav-link", "data-panel": panel.id }, [panel.label]);
        link.addEventListener("click", () => {
          clear(content);
          content.append(PANEL_BUILDERS[panel.id]!(session));
        });
        return link;
      }),
    );
    const logout = el("button", { id: "logout" }, [`Sign out (${session.subject})`]);
    logout.addEventListener("click", () => {
      session.logout();
      showLogin();
    });
    root.append(el("header", {}, [el("strong", {}, ["evidentia"]), nav, logout]), content);
    if (panels.length > 0) {
      content.append(PANEL_BUILDERS[panels[0]!.id]!(session));
    }
  };

  showLogin();
  return { session, showLogin, showShell };
}
