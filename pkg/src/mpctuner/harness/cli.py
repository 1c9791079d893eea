"""Command-line entry point.

Every batch subcommand writes a run directory holding the resolved config
snapshot, the corpus it ran on, JSON-lines evaluation logs, the report in
text/JSON/CSV form and PNG figures. Batch runs default to the deterministic
model clock so results (including the committed golden objective values) are
exactly reproducible; pass --clock wall for real solver timings.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..bayesopt import BoConfig, elementary_effects, mpc_param_space, optimize, repair_horizons
from ..config import ExperimentConfig
from ..controller import MpcParams, baseline_params
from ..scenarios import MovementSet, describe, generate_movements
from ..sim import ModelClock, WallClock, evaluate_params
from ..world import build_esdf, builtin_environment
from . import reporting
from .teleop import TeleopServer


def _load_config(path: str | None) -> ExperimentConfig:
    return ExperimentConfig.load(path) if path else ExperimentConfig()


def _load_params(path: str | None) -> MpcParams:
    if path is None:
        return baseline_params()
    with open(path) as fh:
        return MpcParams.from_dict(json.load(fh))


def _load_corpus(path: str) -> MovementSet:
    with open(path) as fh:
        return MovementSet.from_json(fh.read())


def _make_clock(name: str):
    return ModelClock() if name == "model" else WallClock()


def _prepare_run_dir(out: str, cfg: ExperimentConfig) -> Path:
    run = Path(out)
    (run / "figures").mkdir(parents=True, exist_ok=True)
    (run / "config.json").write_text(cfg.to_json())
    return run


def cmd_scenarios_generate(args) -> int:
    cfg = _load_config(args.config)
    run = _prepare_run_dir(args.out, cfg)
    mset = generate_movements(
        seed=args.seed, n_mov=args.n_mov or cfg.scenario.n_mov,
        n_segments=cfg.scenario.n_segments, T=cfg.scenario.T,
        env=cfg.environment, geom=cfg.controller.geometry,
        v_max=cfg.scenario.v_max, limits=cfg.controller.limits)
    (run / "corpus.json").write_text(mset.to_json())
    (run / "corpus.txt").write_text(describe(mset) + "\n")
    reporting.corpus_figure(mset, cfg.environment, run / "figures" / "corpus.png")
    print(describe(mset))
    print(f"\nwrote {len(mset)} movements to {run / 'corpus.json'}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args.config)
    run = _prepare_run_dir(args.out, cfg)
    params = _load_params(args.params)
    mset = _load_corpus(args.corpus)
    (run / "corpus.json").write_text(mset.to_json())
    esdf = build_esdf(builtin_environment(cfg.environment))
    result = evaluate_params(params, mset, cfg.controller, esdf, cfg.weights, cfg.norms,
                             clock=_make_clock(args.clock),
                             log_path=run / "eval_log.jsonl", keep_trajectories=True)
    reporting.paths_figure({"evaluated": result}, cfg.environment,
                           run / "figures" / "paths.png")
    summary = {"objective": result.objective, "n_succ": result.n_succ,
               "n_mov": len(mset), "bo_feasible": result.bo_feasible,
               "params": params.to_dict()}
    (run / "result.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary, indent=2))
    return 0


def cmd_optimize(args) -> int:
    cfg = _load_config(args.config)
    run = _prepare_run_dir(args.out, cfg)
    mset = _load_corpus(args.corpus)
    (run / "corpus.json").write_text(mset.to_json())
    esdf = build_esdf(builtin_environment(cfg.environment))
    clock = _make_clock(args.clock)
    space = mpc_param_space()
    log_dir = run / "eval_logs"
    log_dir.mkdir(exist_ok=True)
    counter = {"n": 0}

    def evaluator(raw):
        params = MpcParams.from_vector(repair_horizons(raw, space))
        res = evaluate_params(params, mset, cfg.controller, esdf, cfg.weights, cfg.norms,
                              clock=clock,
                              log_path=log_dir / f"eval_{counter['n']:03d}.jsonl")
        counter["n"] += 1
        print(f"  eval {counter['n']:3d}: J={res.objective:.5f} "
              f"feasible={res.bo_feasible} params={params.to_dict()}")
        return res

    bo_cfg = BoConfig(n_init=cfg.bo.n_init, n_max=args.n_max or cfg.bo.n_max,
                      seed=args.seed, n_candidates=cfg.bo.n_candidates)
    opt = optimize(bo_cfg, space, evaluator,
                   seed_point=baseline_params().as_vector(),
                   history_path=run / "history.json")
    best = opt.best_params
    (run / "best_params.json").write_text(json.dumps(best.to_dict(), indent=2))
    reporting.convergence_figure(opt.history, run / "figures" / "convergence.png")
    print(f"\nbest objective {opt.best_objective:.5f} with {best.to_dict()}")
    return 0


def cmd_compare(args) -> int:
    cfg = _load_config(args.config)
    run = _prepare_run_dir(args.out, cfg)
    params_a = _load_params(args.params_a)
    params_b = _load_params(args.params_b)
    mset = _load_corpus(args.corpus)
    (run / "corpus.json").write_text(mset.to_json())
    esdf = build_esdf(builtin_environment(cfg.environment))
    report, results = reporting.compare(params_a, params_b, mset, cfg, esdf,
                                        clock=_make_clock(args.clock),
                                        labels=(args.label_a, args.label_b),
                                        keep_trajectories=True)
    (run / "report.txt").write_text(report.text_table() + "\n")
    (run / "report.json").write_text(report.to_json())
    reporting.write_metrics_csv(report, run / "report.csv")
    reporting.metrics_figure(report, run / "figures" / "metrics.png")
    reporting.paths_figure(results, cfg.environment, run / "figures" / "paths.png")
    print(report.text_table())
    return 0


def cmd_screen(args) -> int:
    cfg = _load_config(args.config)
    run = _prepare_run_dir(args.out, cfg)
    mset = _load_corpus(args.corpus)
    (run / "corpus.json").write_text(mset.to_json())
    esdf = build_esdf(builtin_environment(cfg.environment))
    clock = _make_clock(args.clock)
    space = mpc_param_space()

    def evaluator(raw):
        params = MpcParams.from_vector(repair_horizons(raw, space))
        return evaluate_params(params, mset, cfg.controller, esdf,
                               cfg.weights, cfg.norms, clock=clock)

    ranking = elementary_effects(space, evaluator, r=args.trajectories,
                                 p=args.levels, seed=args.seed)
    (run / "screening.json").write_text(json.dumps(ranking, indent=2))
    reporting.screening_figure(ranking, run / "figures" / "screening.png")
    for rec in ranking:
        print(f"{rec['name']:>8}: mu*={rec['mu_star']:.5f}  sigma={rec['sigma']:.5f}")
    return 0


def _serve_ui(ui_dir: Path, host: str, port: int, cfg: ExperimentConfig):
    """Static file server for the browser client; /environment.json is
    synthesized from the loaded config so the room drawn matches the sim."""
    import http.server
    import threading

    env_json = cfg.environment.to_json().encode()

    class Handler(http.server.SimpleHTTPRequestHandler):
        def __init__(self, *a, **kw):
            super().__init__(*a, directory=str(ui_dir), **kw)

        def do_GET(self):
            if self.path.split("?")[0] == "/environment.json":
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(env_json)))
                self.end_headers()
                self.wfile.write(env_json)
            else:
                super().do_GET()

        def log_message(self, *a):
            pass

    httpd = http.server.ThreadingHTTPServer((host, port), Handler)
    threading.Thread(target=httpd.serve_forever, daemon=True).start()
    return httpd


def cmd_serve(args) -> int:
    cfg = _load_config(args.config)
    params = {"baseline": _load_params(args.baseline_params),
              "optimized": _load_params(args.optimized_params)}
    server = TeleopServer(cfg, host=args.host, port=args.port,
                          params_by_condition=params)
    if args.ui_dir:
        ui = Path(args.ui_dir)
        if not (ui / "index.html").exists():
            print(f"error: no index.html under {ui}", file=sys.stderr)
            return 1
        _serve_ui(ui, args.host, args.ui_port, cfg)
        print(f"browser client on http://{args.host}:{args.ui_port}/")
    print(f"teleop service on ws://{args.host}:{args.port} (ctrl-c to stop)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mpctuner",
                                     description="MPC shared-controller auto-tuning")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, clock_default="model"):
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--out", default="runs/latest", help="run directory")
        p.add_argument("--clock", choices=("model", "wall"), default=clock_default,
                       help="solve timing source (model = deterministic)")

    p_sc = sub.add_parser("scenarios", help="corpus tooling")
    sc_sub = p_sc.add_subparsers(dest="scenarios_command", required=True)
    p_gen = sc_sub.add_parser("generate", help="generate a movement corpus")
    common(p_gen)
    p_gen.add_argument("--n-mov", type=int, help="number of movements")
    p_gen.set_defaults(func=cmd_scenarios_generate)

    p_eval = sub.add_parser("evaluate", help="evaluate one parameter set on a corpus")
    common(p_eval)
    p_eval.add_argument("--params", help="MPC params JSON (default: hand-tuned baseline)")
    p_eval.add_argument("--corpus", required=True)
    p_eval.set_defaults(func=cmd_evaluate)

    p_opt = sub.add_parser("optimize", help="run the surrogate tuning loop")
    common(p_opt)
    p_opt.add_argument("--corpus", required=True)
    p_opt.add_argument("--n-max", type=int, help="tuning iterations")
    p_opt.set_defaults(func=cmd_optimize)

    p_cmp = sub.add_parser("compare", help="compare two parameter sets on one corpus")
    common(p_cmp)
    p_cmp.add_argument("--params-a", help="first condition params JSON")
    p_cmp.add_argument("--params-b", help="second condition params JSON")
    p_cmp.add_argument("--label-a", default="baseline")
    p_cmp.add_argument("--label-b", default="optimized")
    p_cmp.add_argument("--corpus", required=True)
    p_cmp.set_defaults(func=cmd_compare)

    p_scr = sub.add_parser("screen", help="elementary-effects sensitivity screen")
    common(p_scr)
    p_scr.add_argument("--corpus", required=True)
    p_scr.add_argument("--trajectories", type=int, default=4)
    p_scr.add_argument("--levels", type=int, default=4)
    p_scr.set_defaults(func=cmd_screen)

    p_srv = sub.add_parser("serve", help="run the teleoperation service")
    p_srv.add_argument("--config", help="experiment config JSON")
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--port", type=int, default=8765)
    p_srv.add_argument("--baseline-params", help="params JSON for the baseline condition")
    p_srv.add_argument("--optimized-params", help="params JSON for the optimized condition")
    p_srv.add_argument("--ui-dir", help="serve the browser client from this directory")
    p_srv.add_argument("--ui-port", type=int, default=8080)
    p_srv.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
