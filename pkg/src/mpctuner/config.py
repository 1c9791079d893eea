"""One versioned configuration tree for reproducible experiments.

Defaults live in the dataclasses; a JSON file overrides any subset of fields.
The snapshot written into every run directory is the full resolved tree.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .controller import ControllerConfig, SolverSettings
from .metrics import MetricWeights, NormalizationSpec
from .robot import JointLimits, RobotGeometry
from .world import EnvironmentSpec


@dataclass(frozen=True)
class ScenarioSettings:
    n_mov: int = 40
    n_segments: int = 2
    T: float = 20.0
    v_max: float = 0.5  # joystick magnitude ceiling, m/s


@dataclass(frozen=True)
class BoSettings:
    n_init: int = 8
    n_max: int = 40
    n_candidates: int = 512


@dataclass(frozen=True)
class ExperimentConfig:
    environment: EnvironmentSpec = field(default_factory=EnvironmentSpec)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    weights: MetricWeights = field(default_factory=MetricWeights)
    norms: NormalizationSpec = field(default_factory=NormalizationSpec)
    scenario: ScenarioSettings = field(default_factory=ScenarioSettings)
    bo: BoSettings = field(default_factory=BoSettings)

    def to_json(self) -> str:
        c = self.controller
        g = c.geometry
        return json.dumps({
            "environment": json.loads(self.environment.to_json()),
            "controller": {
                "alpha": c.alpha, "Ts": c.Ts, "c3": c.c3,
                "limits": {
                    "position_min": list(c.limits.position_min),
                    "position_max": list(c.limits.position_max),
                    "velocity_max": list(c.limits.velocity_max),
                    "acceleration_max": list(c.limits.acceleration_max),
                    "jerk_max": list(c.limits.jerk_max),
                    "ee_speed_max": c.limits.ee_speed_max,
                },
                "geometry": {
                    "rail_origin": list(g.rail_origin),
                    "rail_angle": g.rail_angle,
                    "link1_length": g.link1_length,
                    "link2_length": g.link2_length,
                    "spheres": [[link, list(off)] for link, off in g.spheres],
                    "sphere_radius": g.sphere_radius,
                },
                "solver": {
                    "penalty_schedule": list(c.solver.penalty_schedule),
                    "max_iter": list(c.solver.max_iter),
                    "warm_max_iter": c.solver.warm_max_iter,
                    "retry_max_iter": c.solver.retry_max_iter,
                    "bound_tol": c.solver.bound_tol,
                    "residual_tol": c.solver.residual_tol,
                },
            },
            "weights": list(self.weights.w),
            "norms": {
                "d_ref": self.norms.d_ref, "t_ob_ref": self.norms.t_ob_ref,
                "f_ps_ref": self.norms.f_ps_ref, "f_cc_ref": self.norms.f_cc_ref,
                "f_vs_ref": self.norms.f_vs_ref, "t_C_ref": self.norms.t_C_ref,
            },
            "scenario": {
                "n_mov": self.scenario.n_mov, "n_segments": self.scenario.n_segments,
                "T": self.scenario.T, "v_max": self.scenario.v_max,
            },
            "bo": {
                "n_init": self.bo.n_init, "n_max": self.bo.n_max,
                "n_candidates": self.bo.n_candidates,
            },
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        d = json.loads(text)
        cfg = cls()
        if "environment" in d:
            e = d["environment"]
            cfg = replace(cfg, environment=EnvironmentSpec(
                room_width=e.get("room_width", 8.0),
                room_height=e.get("room_height", 6.0),
                resolution=e.get("resolution", 0.05),
                origin=tuple(e.get("origin", (-4.0, -3.0))),
                rectangles=tuple(tuple(r) for r in e["rectangles"]) if "rectangles" in e
                else EnvironmentSpec().rectangles,
            ))
        if "controller" in d:
            c = d["controller"]
            limits = JointLimits(**{k: tuple(v) if isinstance(v, list) else v
                                    for k, v in c.get("limits", {}).items()}) \
                if "limits" in c else JointLimits()
            geometry = RobotGeometry(
                rail_origin=tuple(c["geometry"].get("rail_origin", (0.0, -2.0))),
                rail_angle=c["geometry"].get("rail_angle", 0.0),
                link1_length=c["geometry"].get("link1_length", 1.0),
                link2_length=c["geometry"].get("link2_length", 0.8),
                spheres=tuple((int(link), tuple(off)) for link, off in c["geometry"]["spheres"])
                if "spheres" in c.get("geometry", {}) else RobotGeometry().spheres,
                sphere_radius=c["geometry"].get("sphere_radius", 0.4),
            ) if "geometry" in c else RobotGeometry()
            defaults = SolverSettings()
            solver = SolverSettings(
                penalty_schedule=tuple(c["solver"].get("penalty_schedule",
                                                       defaults.penalty_schedule)),
                max_iter=tuple(c["solver"].get("max_iter", defaults.max_iter)),
                warm_max_iter=c["solver"].get("warm_max_iter", defaults.warm_max_iter),
                retry_max_iter=c["solver"].get("retry_max_iter", defaults.retry_max_iter),
                bound_tol=c["solver"].get("bound_tol", defaults.bound_tol),
                residual_tol=c["solver"].get("residual_tol", defaults.residual_tol),
            ) if "solver" in c else SolverSettings()
            cfg = replace(cfg, controller=ControllerConfig(
                alpha=c.get("alpha", 0.5), Ts=c.get("Ts", 0.05), c3=c.get("c3", 0.4),
                limits=limits, geometry=geometry, solver=solver,
            ))
        if "weights" in d:
            cfg = replace(cfg, weights=MetricWeights(w=tuple(d["weights"])))
        if "norms" in d:
            cfg = replace(cfg, norms=NormalizationSpec(**d["norms"]))
        if "scenario" in d:
            cfg = replace(cfg, scenario=ScenarioSettings(**d["scenario"]))
        if "bo" in d:
            cfg = replace(cfg, bo=BoSettings(**d["bo"]))
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_json(fh.read())
