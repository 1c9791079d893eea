/**
 * Scene construction split from canvas I/O: buildScene is a pure function of
 * the client state, so tests (and frame-log replays) can assert on the exact
 * draw list without a DOM.
 */
import { ClientState } from "./state.js";

export interface Environment {
  origin: [number, number];
  room_width: number;
  room_height: number;
  rectangles: [number, number, number, number][];
}

/** Matches the shipped default room; used when no environment file is served. */
export const DEFAULT_ENVIRONMENT: Environment = {
  origin: [-4.0, -3.0],
  room_width: 8.0,
  room_height: 6.0,
  rectangles: [
    [-4.0, -3.0, -3.6, 3.0],
    [3.6, -3.0, 4.0, 3.0],
    [-1.0, -0.3, 1.0, 0.3],
  ],
};

export const SPHERE_RADIUS = 0.4;
export const D_SAFE = 0.4;

export type DrawOp =
  | { kind: "rect"; x: number; y: number; w: number; h: number; color: string }
  | { kind: "circle"; x: number; y: number; r: number; color: string; fill: boolean }
  | { kind: "polyline"; points: [number, number][]; color: string }
  | { kind: "text"; x: number; y: number; text: string; color: string };

export function buildScene(state: ClientState, env: Environment): DrawOp[] {
  const ops: DrawOp[] = [];
  ops.push({ kind: "rect", x: env.origin[0], y: env.origin[1], w: env.room_width,
             h: env.room_height, color: "#f5f5f5" });
  for (const [xmin, ymin, xmax, ymax] of env.rectangles) {
    ops.push({ kind: "rect", x: xmin, y: ymin, w: xmax - xmin, h: ymax - ymin,
               color: "#222" });
  }
  if (state.trail.length > 1) {
    ops.push({ kind: "polyline", points: state.trail, color: "#2b7de9" });
  }
  const frame = state.lastFrame;
  if (frame) {
    const warn = frame.min_sd < D_SAFE;
    for (const [sx, sy] of frame.spheres) {
      ops.push({ kind: "circle", x: sx, y: sy, r: SPHERE_RADIUS,
                 color: warn ? "#d64541cc" : "#6aa84fcc", fill: false });
    }
    ops.push({ kind: "circle", x: frame.ee[0], y: frame.ee[1], r: 0.07,
               color: "#d64541", fill: true });
    ops.push({
      kind: "text", x: env.origin[0] + 0.2, y: env.origin[1] + env.room_height - 0.25,
      text: `t=${frame.t.toFixed(2)}s  min_sd=${frame.min_sd.toFixed(3)}m` +
            (frame.feasible ? "" : "  INFEASIBLE") + (frame.clamped ? "  clamped" : ""),
      color: warn ? "#d64541" : "#333",
    });
  }
  return ops;
}

/** World-to-canvas transform plus the canvas back end for the draw list. */
export class CanvasRenderer {
  private readonly scale: number;
  private readonly ox: number;
  private readonly oy: number;

  constructor(private readonly ctx: CanvasRenderingContext2D,
              private readonly env: Environment,
              width: number, height: number) {
    this.scale = Math.min(width / (env.room_width + 1), height / (env.room_height + 1));
    this.ox = width / 2 - (env.origin[0] + env.room_width / 2) * this.scale;
    this.oy = height / 2 + (env.origin[1] + env.room_height / 2) * this.scale;
  }

  private tx(x: number): number {
    return this.ox + x * this.scale;
  }

  private ty(y: number): number {
    return this.oy - y * this.scale;
  }

  render(ops: DrawOp[]): void {
    const c = this.ctx;
    c.clearRect(0, 0, c.canvas.width, c.canvas.height);
    for (const op of ops) {
      switch (op.kind) {
        case "rect":
          c.fillStyle = op.color;
          c.fillRect(this.tx(op.x), this.ty(op.y + op.h),
                     op.w * this.scale, op.h * this.scale);
          break;
        case "circle":
          c.beginPath();
          c.arc(this.tx(op.x), this.ty(op.y), op.r * this.scale, 0, 2 * Math.PI);
          if (op.fill) {
            c.fillStyle = op.color;
            c.fill();
          } else {
            c.strokeStyle = op.color;
            c.stroke();
          }
          break;
        case "polyline":
          c.beginPath();
          c.moveTo(this.tx(op.points[0][0]), this.ty(op.points[0][1]));
          for (const [px, py] of op.points.slice(1)) {
            c.lineTo(this.tx(px), this.ty(py));
          }
          c.strokeStyle = op.color;
          c.lineWidth = 1.5;
          c.stroke();
          c.lineWidth = 1.0;
          break;
        case "text":
          c.fillStyle = op.color;
          c.font = "14px monospace";
          c.fillText(op.text, this.tx(op.x), this.ty(op.y));
          break;
      }
    }
  }
}
