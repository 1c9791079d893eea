import { describe, expect, it } from "vitest";

import { parseServerFrame, ServerFrame, StateFrame } from "../src/protocol.js";
import { applyFrame, initialState, startEpisode } from "../src/state.js";

function stateFrame(t: number, x: number, y: number): StateFrame {
  return {
    type: "state", t, ee: [x, y, 0], q: [0, 0, 0],
    spheres: Array.from({ length: 12 }, () => [x, y] as [number, number]),
    min_sd: 1.0, feasible: true,
  };
}

const metricsFrame: ServerFrame = {
  type: "metrics", d_ob: 0.6, t_ob: 0, f_ps: 1e-5, f_cc: 2.5, f_vs: 0.3,
  t_C: 4.2, objective: 0.11,
};

describe("applyFrame", () => {
  it("keyboard-driven motion is visible within two ticks", () => {
    // two consecutive state frames with the robot moving: position changes
    let s = startEpisode(initialState(), "baseline");
    s = applyFrame(s, stateFrame(0.05, 0.0, -2.0));
    s = applyFrame(s, stateFrame(0.10, 0.012, -2.0));
    expect(s.lastFrame?.ee[0]).toBeCloseTo(0.012);
    expect(s.trail).toHaveLength(2);
    expect(s.trail[0][0]).not.toBe(s.trail[1][0]);
  });

  it("trail grows only during an episode and matches frame count", () => {
    let s = initialState();
    s = applyFrame(s, stateFrame(0.05, 0, 0));
    expect(s.trail).toHaveLength(0);
    s = startEpisode(s, "baseline");
    for (let k = 0; k < 25; k++) {
      s = applyFrame(s, stateFrame(0.05 * (k + 1), 0.01 * k, 0));
    }
    expect(s.trail).toHaveLength(25);
    expect(s.framesReceived).toBe(26);
  });

  it("metrics frame ends the episode and appends history", () => {
    let s = startEpisode(initialState(), "optimized");
    s = applyFrame(s, stateFrame(0.05, 0, 0));
    s = applyFrame(s, metricsFrame);
    expect(s.episodeActive).toBe(false);
    expect(s.episodeHistory).toHaveLength(1);
    expect(s.episodeHistory[0].objective).toBeCloseTo(0.11);
  });

  it("error frames set the banner and keep the session alive", () => {
    let s = applyFrame(initialState(), { type: "error", msg: "bad cmd" });
    expect(s.errorBanner).toBe("bad cmd");
    s = applyFrame(s, stateFrame(0.05, 1, 1));
    expect(s.lastFrame?.t).toBeCloseTo(0.05);
  });

  it("malformed frames never crash, only flag", () => {
    let s = initialState();
    for (const raw of ["garbage", "{}", '{"type":"state"}', '{"type":"metrics"}']) {
      s = applyFrame(s, parseServerFrame(raw));
    }
    expect(s.errorBanner).toBe("received malformed frame");
    expect(s.framesReceived).toBe(0);
  });

  it("replaying a frame log reproduces the identical state", () => {
    const log: ServerFrame[] = [];
    for (let k = 0; k < 40; k++) {
      log.push(stateFrame(0.05 * (k + 1), Math.sin(k * 0.2), Math.cos(k * 0.2)));
    }
    log.push(metricsFrame);
    const run = () => {
      let s = startEpisode(initialState(), "baseline");
      for (const frame of log) s = applyFrame(s, frame);
      return s;
    };
    expect(run()).toEqual(run());
  });
});
