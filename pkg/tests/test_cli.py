import json

import pytest

from mpctuner.config import ExperimentConfig
from mpctuner.controller import baseline_params
from mpctuner.harness.cli import main
from mpctuner.scenarios import generate_movements


@pytest.fixture(scope="module")
def tiny_corpus(tmp_path_factory):
    """Two short movements so CLI commands run in seconds."""
    cfg = ExperimentConfig()
    mset = generate_movements(seed=1, n_mov=2, n_segments=2, T=2.0,
                              env=cfg.environment, geom=cfg.controller.geometry,
                              v_max=cfg.scenario.v_max, limits=cfg.controller.limits)
    path = tmp_path_factory.mktemp("corpus") / "tiny.json"
    path.write_text(mset.to_json())
    return path


@pytest.fixture(scope="module")
def params_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("params") / "baseline.json"
    path.write_text(json.dumps(baseline_params().to_dict()))
    return path


class TestScenariosGenerate:
    def test_writes_run_directory(self, tmp_path):
        out = tmp_path / "run"
        rc = main(["scenarios", "generate", "--seed", "3", "--n-mov", "3",
                   "--out", str(out)])
        assert rc == 0
        assert (out / "corpus.json").exists()
        assert (out / "corpus.txt").exists()
        assert (out / "config.json").exists()
        assert (out / "figures" / "corpus.png").exists()

    def test_deterministic_for_seed(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["scenarios", "generate", "--seed", "5", "--n-mov", "3", "--out", str(a)])
        main(["scenarios", "generate", "--seed", "5", "--n-mov", "3", "--out", str(b)])
        assert (a / "corpus.json").read_text() == (b / "corpus.json").read_text()


class TestEvaluate:
    def test_writes_result_and_log(self, tmp_path, tiny_corpus, params_file):
        out = tmp_path / "run"
        rc = main(["evaluate", "--corpus", str(tiny_corpus), "--params",
                   str(params_file), "--out", str(out)])
        assert rc == 0
        result = json.loads((out / "result.json").read_text())
        assert {"objective", "n_succ", "n_mov", "bo_feasible"} <= set(result)
        lines = (out / "eval_log.jsonl").read_text().splitlines()
        assert len(lines) == 3  # header + 2 movements
        assert (out / "corpus.json").exists()
        assert (out / "config.json").exists()
        assert (out / "figures" / "paths.png").exists()

    def test_model_clock_reproducible(self, tmp_path, tiny_corpus, params_file):
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            main(["evaluate", "--corpus", str(tiny_corpus), "--params",
                  str(params_file), "--out", str(out)])
            outs.append(json.loads((out / "result.json").read_text()))
        assert outs[0] == outs[1]


class TestCompare:
    def test_identical_params_give_half_p(self, tmp_path, tiny_corpus, params_file):
        out = tmp_path / "cmp"
        rc = main(["compare", "--corpus", str(tiny_corpus),
                   "--params-a", str(params_file), "--params-b", str(params_file),
                   "--out", str(out)])
        assert rc == 0
        report = json.loads((out / "report.json").read_text())
        for metric, p in report["p_values"].items():
            assert p == pytest.approx(0.5), metric
        assert report["objectives"]["baseline"] == report["objectives"]["optimized"]
        assert (out / "report.csv").exists()
        assert (out / "report.txt").exists()
        assert (out / "figures" / "metrics.png").exists()
        assert (out / "figures" / "paths.png").exists()

    def test_empty_corpus_fails_cleanly(self, tmp_path, params_file):
        empty = tmp_path / "empty.json"
        empty.write_text(json.dumps({"seed": 0, "environment": {}, "v_max": 0.5,
                                     "movements": []}))
        rc = main(["compare", "--corpus", str(empty), "--params-a", str(params_file),
                   "--params-b", str(params_file), "--out", str(tmp_path / "x")])
        assert rc == 1


class TestOptimize:
    def test_smoke_run_with_history(self, tmp_path, tiny_corpus):
        out = tmp_path / "opt"
        rc = main(["optimize", "--corpus", str(tiny_corpus), "--n-max", "1",
                   "--seed", "1", "--out", str(out)])
        assert rc == 0
        hist = json.loads((out / "history.json").read_text())
        assert len(hist) == 8 + 1 + 1  # LHS init + baseline seed + 1 BO round
        assert (out / "best_params.json").exists()
        assert (out / "figures" / "convergence.png").exists()
        best = json.loads((out / "best_params.json").read_text())
        assert best["Np"] >= best["Nc"] >= 1


class TestScreen:
    def test_smoke(self, tmp_path, tiny_corpus):
        out = tmp_path / "screen"
        rc = main(["screen", "--corpus", str(tiny_corpus), "--trajectories", "2",
                   "--levels", "4", "--seed", "1", "--out", str(out)])
        assert rc == 0
        ranking = json.loads((out / "screening.json").read_text())
        assert len(ranking) == 7
        assert {"name", "mu_star", "sigma"} <= set(ranking[0])
        assert (out / "figures" / "screening.png").exists()


class TestErrors:
    def test_unknown_flag_exits_nonzero(self):
        with pytest.raises(SystemExit) as exc:
            main(["evaluate", "--corpus", "x.json", "--frobnicate"])
        assert exc.value.code == 2

    def test_missing_corpus_file(self, tmp_path, params_file):
        rc = main(["evaluate", "--corpus", str(tmp_path / "nope.json"),
                   "--params", str(params_file), "--out", str(tmp_path / "o")])
        assert rc == 1

    def test_invalid_config_file(self, tmp_path, tiny_corpus, params_file):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        rc = main(["evaluate", "--corpus", str(tiny_corpus), "--params",
                   str(params_file), "--config", str(bad),
                   "--out", str(tmp_path / "o")])
        assert rc == 1
