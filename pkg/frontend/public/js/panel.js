// Control panel wiring: per-DOF timed moves, speed-limit sliders, mode
// toggle and the inline status/error line.
export function bindPanel(doc, client) {
    const status = doc.getElementById("status");
    const modeBtn = doc.getElementById("mode-toggle");
    const dofSel = doc.getElementById("move-dof");
    const dxIn = doc.getElementById("move-dx");
    const dtIn = doc.getElementById("move-dt");
    const goBtn = doc.getElementById("move-go");
    const maxV = doc.getElementById("max-v");
    const maxW = doc.getElementById("max-w");
    const maxVLabel = doc.getElementById("max-v-label");
    const maxWLabel = doc.getElementById("max-w-label");
    let mode = "idle";
    const setStatus = (text, isError = false) => {
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
    return (m) => {
        if (m.type === "error") {
            setStatus(`${m.error}: ${m.detail ?? ""}`, true);
        }
        else if (m.type === "ok" && "mode" in m) {
            mode = m.mode;
            modeBtn.textContent = mode === "teleop" ? "stop teleop" : "start teleop";
            setStatus(`mode: ${mode}`);
        }
        else if (m.type === "event") {
            setStatus(`event: ${m.event}`);
        }
    };
}
