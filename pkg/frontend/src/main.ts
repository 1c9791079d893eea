/**
 * Wiring: DOM, the 20 Hz command loop, render on animation frames.
 */
import { CanvasRenderer, DEFAULT_ENVIRONMENT, Environment, buildScene } from "./draw.js";
import { KeyboardTracker, combineTwists, twistFromGamepad, twistFromKeys } from "./input.js";
import { Connection } from "./net.js";
import { encodeCmd, encodeEpisode, parseServerFrame } from "./protocol.js";
import { ClientState, applyFrame, clearError, initialState, setStatus, startEpisode } from "./state.js";

const V_MAX = 0.5;          // joystick ceiling, m/s; matches the server config
const CMD_PERIOD_MS = 50;   // 20 Hz

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

async function loadEnvironment(): Promise<Environment> {
  try {
    const res = await fetch("environment.json");
    if (!res.ok) return DEFAULT_ENVIRONMENT;
    const data = await res.json();
    return {
      origin: data.origin ?? DEFAULT_ENVIRONMENT.origin,
      room_width: data.room_width ?? DEFAULT_ENVIRONMENT.room_width,
      room_height: data.room_height ?? DEFAULT_ENVIRONMENT.room_height,
      rectangles: data.rectangles ?? DEFAULT_ENVIRONMENT.rectangles,
    };
  } catch {
    return DEFAULT_ENVIRONMENT;
  }
}

function metricsRow(frame: Record<string, number>, condition: string): HTMLTableRowElement {
  const row = document.createElement("tr");
  const cells = [condition,
                 frame.d_ob?.toFixed(3), frame.t_ob?.toFixed(1),
                 frame.f_ps?.toExponential(2), frame.f_cc?.toFixed(2),
                 frame.f_vs?.toFixed(3), frame.t_C?.toFixed(1),
                 frame.objective?.toFixed(4)];
  for (const text of cells) {
    const td = document.createElement("td");
    td.textContent = text ?? "-";
    row.appendChild(td);
  }
  return row;
}

async function start(): Promise<void> {
  const env = await loadEnvironment();
  const canvas = el<HTMLCanvasElement>("scene");
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");
  const renderer = new CanvasRenderer(ctx, env, canvas.width, canvas.height);
  const statusEl = el<HTMLSpanElement>("status");
  const errorEl = el<HTMLDivElement>("error");
  const historyEl = el<HTMLTableSectionElement>("history");

  let state: ClientState = initialState();
  let lastCondition = "baseline";

  const params = new URLSearchParams(window.location.search);
  const url = params.get("ws") ?? `ws://${window.location.hostname || "127.0.0.1"}:8765`;
  const conn = new Connection(url, {
    onStatus(status) {
      state = setStatus(state, status);
      statusEl.textContent = status;
      statusEl.className = status;
    },
    onMessage(raw) {
      const frame = parseServerFrame(raw);
      const before = state.episodeHistory.length;
      state = applyFrame(state, frame);
      if (state.episodeHistory.length > before) {
        const metrics = state.episodeHistory[state.episodeHistory.length - 1];
        historyEl.appendChild(metricsRow(metrics as unknown as Record<string, number>,
                                         lastCondition));
      }
      errorEl.textContent = state.errorBanner ?? "";
      errorEl.style.display = state.errorBanner ? "block" : "none";
    },
  });
  conn.open();

  const keys = new KeyboardTracker();
  window.addEventListener("keydown", (ev) => {
    if (!ev.repeat) keys.keyDown(ev.key);
  });
  window.addEventListener("keyup", (ev) => keys.keyUp(ev.key));
  window.addEventListener("blur", () => keys.clear());

  el<HTMLButtonElement>("start-baseline").onclick = () => {
    lastCondition = "baseline";
    state = clearError(startEpisode(state, "baseline"));
    conn.send(encodeEpisode("start", "baseline"));
  };
  el<HTMLButtonElement>("start-optimized").onclick = () => {
    lastCondition = "optimized";
    state = clearError(startEpisode(state, "optimized"));
    conn.send(encodeEpisode("start", "optimized"));
  };
  el<HTMLButtonElement>("end-episode").onclick = () => {
    conn.send(encodeEpisode("end"));
  };

  setInterval(() => {
    const pads = typeof navigator !== "undefined" && navigator.getGamepads
      ? Array.from(navigator.getGamepads()).find((p) => p !== null) ?? null
      : null;
    const twist = combineTwists(
      twistFromKeys(keys.held, V_MAX),
      pads ? twistFromGamepad(pads, V_MAX) : null,
    );
    const encoded = encodeCmd(twist.vx, twist.vy, twist.omega);
    if (encoded) conn.send(encoded);
  }, CMD_PERIOD_MS);

  const paint = () => {
    renderer.render(buildScene(state, env));
    requestAnimationFrame(paint);
  };
  requestAnimationFrame(paint);
}

start();
