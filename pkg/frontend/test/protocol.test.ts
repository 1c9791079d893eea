import { describe, expect, it } from "vitest";

import { encodeCmd, parseServerFrame, validCmd } from "../src/protocol.js";

const goodState = {
  type: "state", t: 0.05, ee: [1.0, -2.0, 0.1], q: [0.0, 0.5, -0.2],
  spheres: Array.from({ length: 12 }, (_, i) => [i * 0.1, -2.0]),
  min_sd: 0.8, feasible: true,
};

describe("parseServerFrame", () => {
  it("accepts a well-formed state frame", () => {
    const frame = parseServerFrame(JSON.stringify(goodState));
    expect(frame?.type).toBe("state");
    if (frame?.type === "state") {
      expect(frame.spheres).toHaveLength(12);
      expect(frame.min_sd).toBeCloseTo(0.8);
    }
  });

  it("accepts metrics and error frames", () => {
    const metrics = parseServerFrame(JSON.stringify({
      type: "metrics", d_ob: 0.6, t_ob: 0, f_ps: 1e-5, f_cc: 2.0, f_vs: 0.3,
      t_C: 5.0, objective: 0.12,
    }));
    expect(metrics?.type).toBe("metrics");
    const error = parseServerFrame(JSON.stringify({ type: "error", msg: "nope" }));
    expect(error?.type).toBe("error");
  });

  it("rejects malformed frames without throwing", () => {
    const bad = [
      "not json at all",
      "42",
      JSON.stringify({}),
      JSON.stringify({ type: "state", t: "soon" }),
      JSON.stringify({ ...goodState, ee: [1, 2] }),
      JSON.stringify({ ...goodState, spheres: [[1]] }),
      JSON.stringify({ ...goodState, min_sd: "close" }),
      JSON.stringify({ type: "metrics", d_ob: 0.5 }),
      JSON.stringify({ type: "error" }),
      JSON.stringify({ type: "mystery" }),
      JSON.stringify({ ...goodState, t: Number.NaN }),
    ];
    for (const raw of bad) {
      expect(() => parseServerFrame(raw)).not.toThrow();
      expect(parseServerFrame(raw)).toBeNull();
    }
  });
});

describe("command encoding", () => {
  it("round-trips finite twists", () => {
    const raw = encodeCmd(0.1, -0.2, 0.0);
    expect(raw).not.toBeNull();
    expect(JSON.parse(raw!)).toEqual({ type: "cmd", vx: 0.1, vy: -0.2, omega: 0.0 });
  });

  it("refuses non-finite values", () => {
    expect(encodeCmd(Number.NaN, 0, 0)).toBeNull();
    expect(encodeCmd(0, Number.POSITIVE_INFINITY, 0)).toBeNull();
    expect(validCmd({ type: "cmd", vx: 0, vy: 0, omega: Number.NaN })).toBe(false);
  });
});
