import { el, clear } from "../dom";
import { allowed } from "../policy";
import type { Session } from "../session";
import { UploadFlow, type Modality } from "../upload";

/**
 * Analyze-and-register panel. The register control only exists for roles
 * the policy table grants it to, and even then stays disabled until the
 * client-side digest matches the server's.
 */
export function detectView(session: Session): HTMLElement {
  const flow = new UploadFlow(session.api);
  const file = el("input", { type: "file", id: "detect-file" });
  const modality = el("select", { id: "detect-modality" }, [
    el("option", { value: "image" }, ["image"]),
    el("option", { value: "video" }, ["video"]),
    el("option", { value: "audio" }, ["audio"]),
  ]);
  const analyze = el("button", { id: "detect-analyze", disabled: true }, ["Analyze"]);
  const status = el("div", { id: "detect-status" });
  const canRegister = session.role !== null && allowed("evidence.register", session.role);
  const register = canRegister
    ? el("button", { id: "detect-register", disabled: true }, ["Register as evidence"])
    : null;

  const render = () => {
    clear(status);
    const s = flow.state;
    if (s.clientHash) {
      status.append(el("p", { class: "hash" }, [`local sha256: ${s.clientHash}`]));
    }
    if (s.detection) {
      status.append(
        el("p", {}, [
          `verdict ${s.detection.verdict} (score ${s.detection.score.toFixed(4)}, ` +
            `detector ${s.detection.detector_id})`,
        ]),
        el("p", { class: "hash" }, [`server sha256: ${s.serverHash}`]),
      );
    }
    if (s.phase === "analyzed" && !flow.canRegister) {
      status.append(el("p", { class: "error" }, ["hash mismatch: refusing to register"]));
    }
    if (s.phase === "registered" && s.packet) {
      status.append(el("p", { class: "ok" }, [`registered in block ${s.packet.block_number}`]));
    }
    if (s.phase === "conflict" && s.conflict) {
      status.append(el("p", { class: "error" }, [s.conflict.message]));
    }
    if (s.error) {
      status.append(el("p", { class: "error" }, [`${s.error.code}: ${s.error.message}`]));
    }
    if (register) register.disabled = !flow.canRegister;
  };

  file.addEventListener("change", async () => {
    const chosen = file.files?.[0];
    if (!chosen) return;
    await flow.accept(new Uint8Array(await chosen.arrayBuffer()));
    analyze.disabled = flow.state.phase !== "hashed";
    render();
  });
  analyze.addEventListener("click", async () => {
    await session.guard(() => flow.analyze(modality.value as Modality));
    render();
  });
  register?.addEventListener("click", async () => {
    await session.guard(() => flow.register(modality.value));
    render();
  });

  const controls: HTMLElement[] = [file, modality, analyze];
  if (register) controls.push(register);
  return el("section", { class: "panel", id: "panel-detect" }, [
    el("h2", {}, ["Detection"]),
    el("div", { class: "controls" }, controls),
    status,
  ]);
}
