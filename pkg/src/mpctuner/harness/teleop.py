"""WebSocket teleoperation service.

Wire protocol (JSON text frames, one object per frame, no newlines inside):

  client -> server
    {"type": "cmd", "vx": <m/s>, "vy": <m/s>, "omega": <rad/s>}
    {"type": "episode", "action": "start" | "end",
     "condition": "baseline" | "optimized" | "custom",
     ...optional: "joints": [q1, q2, q3], "mode": "lockstep",
                  "params": {...} when condition == "custom"}

  server -> client
    {"type": "state", "t": s, "ee": [x, y, theta], "q": [q1, q2, q3],
     "spheres": [[x, y] x 12], "min_sd": m, "feasible": bool}
       (plus "clamped": true on ticks whose command exceeded v_max)
    {"type": "metrics", "d_ob": .., "t_ob": .., "f_ps": .., "f_cc": ..,
     "f_vs": .., "t_C": .., "objective": J}   on episode end
    {"type": "error", "msg": str}

Default operation ticks the controller at 1/Ts Hz (20 Hz) with
last-writer-wins commands. An episode started with "mode": "lockstep" instead
advances exactly one tick per received command and answers each with one state
frame, which makes scripted replays sample-exact against the batch simulator.
"""
from __future__ import annotations

import asyncio
import json
import threading
import time

import numpy as np
from websockets.asyncio.server import serve

from ..config import ExperimentConfig
from ..controller import MpcController, MpcParams, baseline_params
from ..metrics import compute_metrics, normalized_objective
from ..robot import JointConfig, RobotState, sphere_centers, step_kinematics
from ..sim import TrajectoryRecorder, WallClock
from ..world import build_esdf, builtin_environment

DEFAULT_START_JOINTS = (-1.5, np.pi / 2, 0.0)


class _Session:
    """One connected client: one robot, one controller, episode bookkeeping."""

    def __init__(self, cfg: ExperimentConfig, esdf, params_by_condition, clock):
        self.cfg = cfg
        self.esdf = esdf
        self.params_by_condition = params_by_condition
        self.clock = clock
        self.geom = cfg.controller.geometry
        self.state = RobotState.from_joints(JointConfig(*DEFAULT_START_JOINTS), self.geom)
        self.controller: MpcController | None = None
        self.episode_active = False
        self.lockstep = False
        self.recorder: TrajectoryRecorder | None = None
        self.tick_index = 0
        self.latest_cmd = np.zeros(3)
        self.clamped = False

    def start_episode(self, msg: dict) -> None:
        if self.episode_active:
            raise ValueError("episode already active; end it first")
        condition = msg.get("condition", "baseline")
        if condition == "custom":
            params = MpcParams.from_dict(msg["params"])
        elif condition in self.params_by_condition:
            params = self.params_by_condition[condition]
        else:
            raise ValueError(f"unknown condition {condition!r}")
        joints = msg.get("joints")
        if joints is not None:
            self.state = RobotState.from_joints(JointConfig(*map(float, joints)), self.geom)
        self.controller = MpcController(params, self.cfg.controller, self.esdf)
        self.lockstep = msg.get("mode") == "lockstep"
        self.recorder = TrajectoryRecorder(self.cfg.controller, self.esdf, self.state)
        self.tick_index = 0
        self.latest_cmd = np.zeros(3)
        self.episode_active = True

    def end_episode(self) -> dict:
        if not self.episode_active:
            raise ValueError("no active episode")
        self.episode_active = False
        metrics_frame = {"type": "metrics"}
        if self.tick_index >= 2:
            traj = self.recorder.build(t_F=self.tick_index * self.cfg.controller.Ts)
            m = compute_metrics(traj, d_safe=self.geom.sphere_radius)
            metrics_frame.update(m.to_dict())
            metrics_frame["objective"] = normalized_objective(m, self.cfg.weights,
                                                              self.cfg.norms)
        else:
            metrics_frame["msg"] = "episode too short for metrics"
        self.recorder = None
        self.controller = None
        self.lockstep = False
        self.tick_index = 0
        self.latest_cmd = np.zeros(3)
        return metrics_frame

    def set_cmd(self, msg: dict) -> None:
        vx = float(msg.get("vx", 0.0))
        vy = float(msg.get("vy", 0.0))
        omega = float(msg.get("omega", 0.0))
        v_max = self.cfg.scenario.v_max
        mag = float(np.hypot(vx, vy))
        self.clamped = mag > v_max
        if self.clamped:
            vx *= v_max / mag
            vy *= v_max / mag
        self.latest_cmd = np.array([vx, vy, omega])

    def tick(self) -> dict:
        """Advance one control cycle and return the state frame."""
        feasible = True
        if self.episode_active and self.controller is not None:
            t0 = time.perf_counter()
            result, applied = self.controller.step(self.state, self.latest_cmd)
            secs = self.clock.attribute(result, time.perf_counter() - t0)
            self.state = step_kinematics(self.state, applied, self.cfg.controller.Ts,
                                         self.geom)
            self.recorder.record_tick(self.tick_index, self.state, applied, secs,
                                      result.feasible)
            self.tick_index += 1
            feasible = result.feasible
        return self.state_frame(feasible)

    def state_frame(self, feasible: bool = True) -> dict:
        centers = sphere_centers(self.state.joints, self.geom)
        sd, _, _ = self.esdf.query(centers)
        frame = {
            "type": "state",
            "t": self.tick_index * self.cfg.controller.Ts,
            "ee": [float(v) for v in self.state.ee_pose],
            "q": [float(v) for v in self.state.joints.as_array()],
            "spheres": [[float(x), float(y)] for x, y in centers],
            "min_sd": float(sd.min()),
            "feasible": bool(feasible),
        }
        if self.clamped:
            frame["clamped"] = True
        return frame


class TeleopServer:
    """Runs the service on a background thread; used by tests and the CLI."""

    def __init__(self, cfg: ExperimentConfig, host: str = "127.0.0.1", port: int = 0,
                 params_by_condition: dict | None = None, clock=None):
        self.cfg = cfg
        self.host = host
        self.port = port
        self.params_by_condition = params_by_condition or {
            "baseline": baseline_params(), "optimized": baseline_params()}
        self.clock = clock or WallClock()
        self.esdf = build_esdf(builtin_environment(cfg.environment))
        self._loop: asyncio.AbstractEventLoop | None = None
        self._thread: threading.Thread | None = None
        self._started = threading.Event()
        self._stop: asyncio.Event | None = None

    async def _handler(self, ws):
        session = _Session(self.cfg, self.esdf, self.params_by_condition, self.clock)

        async def send(frame: dict):
            await ws.send(json.dumps(frame))

        async def ticker():
            while True:
                await asyncio.sleep(self.cfg.controller.Ts)
                if not session.lockstep:
                    await send(session.tick())

        tick_task = asyncio.create_task(ticker())
        try:
            async for raw in ws:
                try:
                    msg = json.loads(raw)
                    if not isinstance(msg, dict) or "type" not in msg:
                        raise ValueError("frame must be an object with a 'type'")
                    if msg["type"] == "cmd":
                        session.set_cmd(msg)
                        if session.lockstep and session.episode_active:
                            await send(session.tick())
                    elif msg["type"] == "episode":
                        if msg.get("action") == "start":
                            session.start_episode(msg)
                        elif msg.get("action") == "end":
                            await send(session.end_episode())
                        else:
                            raise ValueError(f"unknown episode action {msg.get('action')!r}")
                    else:
                        raise ValueError(f"unknown frame type {msg['type']!r}")
                except Exception as exc:  # malformed input keeps the session alive
                    await send({"type": "error", "msg": str(exc)})
        finally:
            tick_task.cancel()

    async def _run(self):
        self._stop = asyncio.Event()
        async with serve(self._handler, self.host, self.port) as server:
            self.port = server.sockets[0].getsockname()[1]
            self._started.set()
            await self._stop.wait()

    def start(self) -> tuple[str, int]:
        self._thread = threading.Thread(target=self._thread_main, daemon=True)
        self._thread.start()
        if not self._started.wait(timeout=10.0):
            raise RuntimeError("teleop server failed to start")
        return self.host, self.port

    def _thread_main(self):
        self._loop = asyncio.new_event_loop()
        asyncio.set_event_loop(self._loop)
        self._loop.run_until_complete(self._run())
        self._loop.close()

    def stop(self):
        if self._loop is not None and self._stop is not None:
            self._loop.call_soon_threadsafe(self._stop.set)
        if self._thread is not None:
            self._thread.join(timeout=10.0)

    def serve_forever(self):
        """Blocking entry point for the CLI."""
        self._thread_main()


def serve_teleop(cfg: ExperimentConfig, address: tuple[str, int],
                 params_by_condition: dict | None = None) -> TeleopServer:
    """Create and start the teleop service; returns the running server."""
    server = TeleopServer(cfg, host=address[0], port=address[1],
                          params_by_condition=params_by_condition)
    server.start()
    return server
