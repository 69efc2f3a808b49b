import { ApiError } from "../api";
import { el } from "../dom";
import type { Session } from "../session";

export function loginView(session: Session, onLogin: () => void): HTMLElement {
  const user = el("input", { type: "text", placeholder: "username", id: "login-user" });
  const pass = el("input", { type: "password", placeholder: "password", id: "login-pass" });
  const error = el("p", { class: "error", id: "login-error" });

  const submit = async (ev: Event) => {
    ev.preventDefault();
    error.textContent = "";
    try {
      await session.login(user.value, pass.value);
      onLogin();
    } catch (err) {
      error.textContent = err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
    }
  };

  return el("form", { class: "login", onsubmit: submit }, [
    el("h1", {}, ["Evidence platform"]),
    user,
    pass,
    el("button", { type: "submit" }, ["Sign in"]),
    error,
  ]);
}
