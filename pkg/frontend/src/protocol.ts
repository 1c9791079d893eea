/**
 * Wire protocol frames and their validation.
 *
 * Every inbound frame is validated before it reaches application state, so a
 * malformed or hostile message can never take the client down; it degrades to
 * an error banner instead.
 */

export interface StateFrame {
  type: "state";
  t: number;
  ee: [number, number, number];
  q: [number, number, number];
  spheres: [number, number][];
  min_sd: number;
  feasible: boolean;
  clamped?: boolean;
}

export interface MetricsFrame {
  type: "metrics";
  d_ob: number;
  t_ob: number;
  f_ps: number;
  f_cc: number;
  f_vs: number;
  t_C: number;
  objective: number;
}

export interface ErrorFrame {
  type: "error";
  msg: string;
}

export type ServerFrame = StateFrame | MetricsFrame | ErrorFrame;

export interface CmdFrame {
  type: "cmd";
  vx: number;
  vy: number;
  omega: number;
}

export interface EpisodeFrame {
  type: "episode";
  action: "start" | "end";
  condition?: "baseline" | "optimized";
}

const METRIC_KEYS = ["d_ob", "t_ob", "f_ps", "f_cc", "f_vs", "t_C", "objective"] as const;

function isNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isVec(v: unknown, n: number): boolean {
  return Array.isArray(v) && v.length === n && v.every(isNumber);
}

/** Parse one raw websocket message; returns null when the frame is invalid. */
export function parseServerFrame(raw: string): ServerFrame | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const obj = data as Record<string, unknown>;
  switch (obj.type) {
    case "state": {
      if (!isNumber(obj.t) || !isVec(obj.ee, 3) || !isVec(obj.q, 3)) return null;
      if (!Array.isArray(obj.spheres) || !obj.spheres.every((s) => isVec(s, 2))) return null;
      if (!isNumber(obj.min_sd) || typeof obj.feasible !== "boolean") return null;
      return obj as unknown as StateFrame;
    }
    case "metrics": {
      if (!METRIC_KEYS.every((k) => isNumber(obj[k]))) return null;
      return obj as unknown as MetricsFrame;
    }
    case "error": {
      if (typeof obj.msg !== "string") return null;
      return obj as unknown as ErrorFrame;
    }
    default:
      return null;
  }
}

/** Validate an outbound command; the UI refuses to send garbage. */
export function validCmd(cmd: CmdFrame): boolean {
  return cmd.type === "cmd" && isNumber(cmd.vx) && isNumber(cmd.vy) && isNumber(cmd.omega);
}

export function encodeCmd(vx: number, vy: number, omega: number): string | null {
  const frame: CmdFrame = { type: "cmd", vx, vy, omega };
  return validCmd(frame) ? JSON.stringify(frame) : null;
}

export function encodeEpisode(action: "start" | "end",
                              condition?: "baseline" | "optimized"): string {
  const frame: EpisodeFrame = { type: "episode", action };
  if (condition) frame.condition = condition;
  return JSON.stringify(frame);
}
