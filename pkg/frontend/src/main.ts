// Composition root: WebSocket client, drag capture on the scene canvas,
// render loop for the wireframe and the strip charts.
//
// Drag modes: left-drag moves the leader in x/y, Shift+drag moves z,
// right-drag (or 'r') rotates.  Gains via ?mmpx= & ?degpx= query params.

import { CockpitClient } from "./client.js";
import { DEFAULT_DRAG, DragAccumulator, DragMode } from "./drag.js";
import { bindPanel } from "./panel.js";
import { drawStrip } from "./plots.js";
import { Camera, DEFAULT_GEOMETRY, drawScene } from "./scene.js";
import { ViewModel } from "./viewmodel.js";

const params = new URLSearchParams(location.search);
const wsUrl = params.get("server")
  ?? `ws://${location.host || "127.0.0.1:8700"}/ws`;

const vm = new ViewModel();
const client = new CockpitClient(wsUrl);
const drag = new DragAccumulator({
  ...DEFAULT_DRAG,
  mmPerPx: parseFloat(params.get("mmpx") ?? "") || DEFAULT_DRAG.mmPerPx,
  degPerPx: parseFloat(params.get("degpx") ?? "") || DEFAULT_DRAG.degPerPx,
});

const scene = document.getElementById("scene") as HTMLCanvasElement;
const sceneCtx = scene.getContext("2d")!;
const cam: Camera = {
  azimuthDeg: 30, elevationDeg: 28, scale: 1.25,
  cx: scene.width / 2, cy: scene.height / 2 + 40, czWorld: 284,
};

const strips = ["plot-speed", "plot-force", "plot-margin"].map(
  (id) => (document.getElementById(id) as HTMLCanvasElement).getContext("2d")!);

const panelHandler = bindPanel(document, client);
client.onMessage = panelHandler;
client.onState = (s) => vm.accept(s);
client.onStatus = (s) => { vm.connection = s; };
client.connect();

let rotateHeld = false;
document.addEventListener("keydown", (e) => { if (e.key === "r") rotateHeld = true; });
document.addEventListener("keyup", (e) => { if (e.key === "r") rotateHeld = false; });

let dragging = false;
let lastX = 0;
let lastY = 0;
scene.addEventListener("pointerdown", (e) => {
  dragging = true;
  lastX = e.clientX;
  lastY = e.clientY;
  scene.setPointerCapture(e.pointerId);
});
scene.addEventListener("pointermove", (e) => {
  if (!dragging) return;
  const mode: DragMode = rotateHeld || e.buttons === 2 ? "rotate"
    : e.shiftKey ? "translate-z" : "translate-xy";
  drag.add(e.clientX - lastX, e.clientY - lastY, mode);
  lastX = e.clientX;
  lastY = e.clientY;
});
scene.addEventListener("pointerup", () => { dragging = false; });
scene.addEventListener("contextmenu", (e) => e.preventDefault());

const banner = document.getElementById("conn") as HTMLElement;

function frame() {
  const msg = drag.flush(performance.now(), client.engineTime());
  if (msg !== null) client.send(msg);

  banner.textContent = vm.connection === "open"
    ? `connected - v${vm.latest?.version ?? 0}`
    : vm.connection;
  banner.className = vm.connection === "open" ? "ok" : "error";

  if (vm.latest !== null) {
    drawScene(sceneCtx, vm.latest, cam, DEFAULT_GEOMETRY);
    // screen-edge glow proportional to |F| / 15 N: the visual "feel"
    const f = Math.hypot(vm.latest.wrench[0], vm.latest.wrench[1], vm.latest.wrench[2]);
    scene.style.boxShadow = f > 0.05
      ? `inset 0 0 ${Math.min(f / 15, 1) * 60}px rgba(255, 82, 82, 0.8)`
      : "none";
  }
  drawStrip(strips[0], vm.series.speed,
            { color: "#8fd0ff", yMin: 0, yMax: 120, refLine: 60 }, "speed mm/s");
  drawStrip(strips[1], vm.series.force,
            { color: "#ffb347", yMin: 0, yMax: 16, refLine: 15 }, "|F| N");
  drawStrip(strips[2], vm.series.minMargin,
            { color: "#9fe0a0", yMin: -5, yMax: 70, refLine: 0 }, "min margin");
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
