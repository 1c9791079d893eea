"""Comparison reports and the figures that accompany every run directory.

The report path always writes three artifacts next to each other: a human
readable table, machine readable CSV/JSON, and PNG figures rendered headless.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ..config import ExperimentConfig
from ..controller import MpcParams
from ..metrics import LARGER_IS_BETTER, METRIC_NAMES
from ..scenarios import MovementSet
from ..sim import EvalResult, evaluate_params
from .stats import confidence_half_width, t_test_one_tailed

METRIC_UNITS = {"d_ob": "m", "t_ob": "%", "f_ps": "m", "f_cc": "rad/m",
                "f_vs": "1/sample", "t_C": "ms"}


@dataclass
class ComparisonReport:
    labels: tuple[str, str]
    n_movements: int
    params: dict              # label -> params dict
    means: dict               # label -> {metric: value}
    half_widths: dict         # label -> {metric: 95% CI half-width}
    p_values: dict            # metric -> one-tailed p (second label improving)
    objectives: dict          # label -> objective J
    infeasibility: dict       # label -> mean infeasible fraction
    per_movement: dict        # label -> list of per-movement metric dicts

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, default=str)

    def text_table(self) -> str:
        cols = METRIC_NAMES
        width = 12
        head = "condition".ljust(12) + "".join(
            f"{c} [{METRIC_UNITS[c]}]".rjust(width + 6) for c in cols)
        lines = [head, "-" * len(head)]
        for label in self.labels:
            row = label.ljust(12)
            ci = self.half_widths[label]
            for c in cols:
                row += f"{self.means[label][c]:.4g} ({ci[c]:.2g})".rjust(width + 6)
            lines.append(row)
        prow = "p (1-tail)".ljust(12) + "".join(
            f"{self.p_values[c]:.4f}".rjust(width + 6) for c in cols)
        lines.append(prow)
        lines.append("")
        for label in self.labels:
            lines.append(f"objective J [{label}] = {self.objectives[label]:.6f}   "
                         f"infeasible fraction = {self.infeasibility[label]:.4f}")
        return "\n".join(lines)


def compare(params_a: MpcParams, params_b: MpcParams, mset: MovementSet,
            cfg: ExperimentConfig, esdf, clock=None,
            labels: tuple[str, str] = ("baseline", "optimized"),
            keep_trajectories: bool = False) -> tuple[ComparisonReport, dict]:
    """Evaluate two parameter sets on the identical corpus and test, metric by
    metric, whether the second condition improves on the first."""
    if len(mset) == 0:
        raise ValueError("empty movement set")
    results: dict[str, EvalResult] = {}
    for label, params in zip(labels, (params_a, params_b)):
        results[label] = evaluate_params(
            params, mset, cfg.controller, esdf, cfg.weights, cfg.norms,
            clock=clock, keep_trajectories=keep_trajectories)

    means, half_widths, per_movement = {}, {}, {}
    for label in labels:
        arr = np.array([m.as_array() for m in results[label].metrics])
        means[label] = {c: float(arr[:, i].mean()) for i, c in enumerate(METRIC_NAMES)}
        half_widths[label] = {c: confidence_half_width(arr[:, i])
                              for i, c in enumerate(METRIC_NAMES)}
        per_movement[label] = results[label].records

    a_arr = np.array([m.as_array() for m in results[labels[0]].metrics])
    b_arr = np.array([m.as_array() for m in results[labels[1]].metrics])
    p_values = {}
    for i, c in enumerate(METRIC_NAMES):
        direction = "a>b" if LARGER_IS_BETTER[i] else "a<b"
        p_values[c] = t_test_one_tailed(b_arr[:, i], a_arr[:, i], direction)

    report = ComparisonReport(
        labels=labels,
        n_movements=len(mset),
        params={labels[0]: params_a.to_dict(), labels[1]: params_b.to_dict()},
        means=means,
        half_widths=half_widths,
        p_values=p_values,
        objectives={l: results[l].objective for l in labels},
        infeasibility={l: float(np.mean([r["infeasible_fraction"]
                                         for r in results[l].records])) for l in labels},
        per_movement=per_movement,
    )
    return report, results


def write_metrics_csv(report: ComparisonReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["condition", "movement", *METRIC_NAMES,
                         "objective", "success", "infeasible_fraction", "min_sd"])
        for label in report.labels:
            for rec in report.per_movement[label]:
                writer.writerow([label, rec["movement"],
                                 *[rec["metrics"][c] for c in METRIC_NAMES],
                                 rec["objective"], rec["success"],
                                 rec["infeasible_fraction"], rec["min_sd"]])


def metrics_figure(report: ComparisonReport, path) -> None:
    fig, axes = plt.subplots(2, 3, figsize=(11, 6))
    xs = np.arange(len(report.labels))
    for i, (ax, c) in enumerate(zip(axes.ravel(), METRIC_NAMES)):
        vals = [report.means[l][c] for l in report.labels]
        errs = [report.half_widths[l][c] for l in report.labels]
        ax.bar(xs, vals, yerr=errs, capsize=4, color=["tab:gray", "tab:blue"])
        ax.set_xticks(xs)
        ax.set_xticklabels(report.labels)
        ax.set_title(f"{c} [{METRIC_UNITS[c]}]  p={report.p_values[c]:.3f}")
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _draw_environment(ax, env_spec) -> None:
    for (xmin, ymin, xmax, ymax) in env_spec.rectangles:
        ax.add_patch(plt.Rectangle((xmin, ymin), xmax - xmin, ymax - ymin,
                                   color="black"))
    ox, oy = env_spec.origin
    ax.set_xlim(ox - 0.5, ox + env_spec.room_width + 0.5)
    ax.set_ylim(oy - 0.5, oy + env_spec.room_height + 0.5)
    ax.set_aspect("equal")
    ax.grid(True, alpha=0.2)


def paths_figure(results: dict, env_spec, path) -> None:
    """End-effector path overlay per condition, drawn over the room."""
    labels = list(results.keys())
    fig, axes = plt.subplots(1, len(labels), figsize=(6 * len(labels), 5))
    if len(labels) == 1:
        axes = [axes]
    for ax, label in zip(axes, labels):
        _draw_environment(ax, env_spec)
        outcomes = results[label].outcomes or []
        for outcome in outcomes:
            ee = outcome.trajectory.ee
            ax.plot(ee[:, 0], ee[:, 1], lw=0.8, alpha=0.7)
            ax.plot(ee[0, 0], ee[0, 1], "o", ms=3, color="tab:green")
        ax.set_title(f"{label}: end-effector paths")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def corpus_figure(mset: MovementSet, env_spec, path) -> None:
    """Commanded velocity vectors of every movement over the room map."""
    fig, ax = plt.subplots(figsize=(7, 5.5))
    _draw_environment(ax, env_spec)
    colors = ["tab:red", "tab:orange", "tab:purple", "tab:brown"]
    for m in mset.movements:
        x, y = m.start_pose[0], m.start_pose[1]
        for si, seg in enumerate(m.segments):
            dx = seg.twist[0] * seg.duration
            dy = seg.twist[1] * seg.duration
            ax.annotate("", xy=(x + dx, y + dy), xytext=(x, y),
                        arrowprops=dict(arrowstyle="->", lw=1.0,
                                        color=colors[si % len(colors)]))
            x, y = x + dx, y + dy
    ax.set_title(f"corpus seed={mset.seed}: commanded segment vectors")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def convergence_figure(history: list[dict], path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.2))
    idx = np.arange(len(history))
    obj = np.array([h["objective"] for h in history])
    inc = np.array([h["incumbent"] for h in history])
    ax.plot(idx, obj, "o", ms=4, alpha=0.6, label="evaluation")
    ax.step(idx, inc, where="post", color="tab:red", label="incumbent")
    ax.set_xlabel("evaluation")
    ax.set_ylabel("objective J")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def screening_figure(ranking: list[dict], path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.2))
    names = [r["name"] for r in ranking]
    mu = [r["mu_star"] for r in ranking]
    sig = [r["sigma"] for r in ranking]
    xs = np.arange(len(names))
    ax.bar(xs - 0.2, mu, width=0.4, label="mu*")
    ax.bar(xs + 0.2, sig, width=0.4, label="sigma")
    ax.set_xticks(xs)
    ax.set_xticklabels(names)
    ax.grid(True, alpha=0.3)
    ax.legend()
    ax.set_title("elementary-effects screening")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
