// Control panel wiring: per-DOF timed moves, speed-limit sliders, mode
// toggle and the inline status/error line.

import { CockpitClient } from "./client.js";
import { ServerMsg } from "./protocol.js";

export function bindPanel(doc: Document, client: CockpitClient): (m: ServerMsg) => void {
  const status = doc.getElementById("status") as HTMLElement;
  const modeBtn = doc.getElementById("mode-toggle") as HTMLButtonElement;
  const dofSel = doc.getElementById("move-dof") as HTMLSelectElement;
  const dxIn = doc.getElementById("move-dx") as HTMLInputElement;
  const dtIn = doc.getElementById("move-dt") as HTMLInputElement;
  const goBtn = doc.getElementById("move-go") as HTMLButtonElement;
  const maxV = doc.getElementById("max-v") as HTMLInputElement;
  const maxW = doc.getElementById("max-w") as HTMLInputElement;
  const maxVLabel = doc.getElementById("max-v-label") as HTMLElement;
  const maxWLabel = doc.getElementById("max-w-label") as HTMLElement;

  let mode: "idle" | "teleop" = "idle";

  const setStatus = (text: string, isError = false) => {
    status.textContent = text;
    status.className = isError ? "error" : "";
  };

  modeBtn.onclick = () => {
    const next = mode === "idle" ? "teleop" : "idle";
    client.send({ type: "mode", value: next });
  };

  goBtn.onclick = () => {
    client.send({
      type: "gui_move",
      dof: dofSel.value,
      dx: parseFloat(dxIn.value) || 0,
      dt: parseFloat(dtIn.value) || 1,
    });
  };

  const sendScale = () => {
    const v = parseFloat(maxV.value);
    const w = parseFloat(maxW.value);
    maxVLabel.textContent = `${v.toFixed(0)} mm/s`;
    maxWLabel.textContent = `${w.toFixed(0)} deg/s`;
    client.send({ type: "set_scale", max_v: v, max_w: w });
  };
  maxV.oninput = sendScale;
  maxW.oninput = sendScale;

  // returned handler surfaces command replies and errors inline
  return (m: ServerMsg) => {
    if (m.type === "error") {
      setStatus(`${m.error}: ${m.detail ?? ""}`, true);
    } else if (m.type === "ok" && "mode" in m) {
      mode = m.mode as "idle" | "teleop";
      modeBtn.textContent = mode === "teleop" ? "stop teleop" : "start teleop";
      setStatus(`mode: ${mode}`);
    } else if (m.type === "event") {
      setStatus(`event: ${m.event}`);
    }
  };
}
