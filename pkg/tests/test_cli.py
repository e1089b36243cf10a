import json
from pathlib import Path

import numpy as np
import pytest

from footplan import cli, safenet, sim
from footplan.qpsolver import QpProblem, save_problem


def run_cli(*argv):
    return cli.main(list(argv))


class TestTerrainCommand:
    def test_gen_stairs(self, tmp_path):
        out = tmp_path / "terrain"
        assert run_cli("terrain", "gen", "--kind", "stairs", "--out", str(out)) == 0
        assert (out / "stairs.pgm").exists()
        assert (out / "stairs.json").exists()

    def test_gen_rough_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli("terrain", "gen", "--kind", "rough", "--seed", "3", "--out", str(a))
        run_cli("terrain", "gen", "--kind", "rough", "--seed", "3", "--out", str(b))
        assert (a / "rough.pgm").read_bytes() == (b / "rough.pgm").read_bytes()


class TestEvalAndDecompose:
    @pytest.fixture()
    def terrain_path(self, tmp_path):
        out = tmp_path / "terrain"
        run_cli("terrain", "gen", "--kind", "stairs", "--out", str(out))
        return out / "stairs.pgm"

    def test_eval_writes_mask_and_diagnostics(self, terrain_path, tmp_path):
        out = tmp_path / "eval"
        code = run_cli("eval", "--terrain", str(terrain_path),
                       "--hip", "2.0,0.0,0.85", "--liftoff", "1.8,0.0,0.2",
                       "--out", str(out))
        assert code == 0
        assert (out / "mask.pgm").exists()
        diag = json.loads((out / "diagnostics.json").read_text())
        assert "false_counts" in diag and "eval_time_us" in diag

    def test_eval_missing_terrain_is_io_error(self, tmp_path):
        code = run_cli("eval", "--terrain", str(tmp_path / "nope.pgm"),
                       "--hip", "0,0,0.6", "--liftoff", "0,0,0",
                       "--out", str(tmp_path / "out"))
        assert code == cli.EXIT_IO

    def test_decompose_from_mask(self, terrain_path, tmp_path):
        eval_out = tmp_path / "eval"
        run_cli("eval", "--terrain", str(terrain_path),
                "--hip", "2.0,0.0,0.85", "--liftoff", "1.8,0.0,0.2",
                "--out", str(eval_out))
        dec_out = tmp_path / "dec"
        code = run_cli("decompose", "--mask", str(eval_out / "mask.pgm"),
                       "--nominal", "2.0,0.0", "--out", str(dec_out))
        assert code == 0
        payload = json.loads((dec_out / "regions.json").read_text())
        assert payload["selected_index"] is not None
        assert payload["regions"][payload["selected_index"]]["selected"]

    def test_decompose_empty_mask_is_domain_failure(self, tmp_path):
        from footplan.pgm import write_pgm
        mask_path = tmp_path / "empty.pgm"
        write_pgm(mask_path, np.zeros((32, 32), dtype=np.uint8), 255)
        code = run_cli("decompose", "--mask", str(mask_path),
                       "--nominal", "0,0", "--out", str(tmp_path / "dec"))
        assert code == cli.EXIT_DOMAIN


class TestQpCommand:
    def test_solve(self, tmp_path):
        prob = QpProblem([[2.0]], [-2.0], [[1.0]], [0.0], [0.5])
        path = tmp_path / "p.json"
        save_problem(prob, path)
        assert run_cli("qp", "solve", "--in", str(path)) == 0

    def test_infeasible_domain_exit(self, tmp_path):
        prob = QpProblem([[2.0]], [0.0], [[1.0], [1.0]], [1.0, -np.inf], [np.inf, 0.0])
        path = tmp_path / "p.json"
        save_problem(prob, path)
        assert run_cli("qp", "solve", "--in", str(path)) == cli.EXIT_DOMAIN


class TestUsageErrors:
    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["frobnicate"])
        assert exc.value.code == 2

    def test_missing_required_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["eval", "--hip", "0,0,0.5"])
        assert exc.value.code == 2

    def test_net_predict_missing_weights_is_io_error(self, tmp_path):
        terrain = tmp_path / "t"
        run_cli("terrain", "gen", "--kind", "flat", "--out", str(terrain))
        code = run_cli("net", "predict", "--weights", str(tmp_path / "missing.sfnw"),
                       "--terrain", str(terrain / "flat.pgm"),
                       "--center", "0,0", "--out", str(tmp_path / "out"))
        assert code == cli.EXIT_IO


class TestSimulateAndCompare:
    @pytest.fixture()
    def short_config(self, tmp_path):
        config = sim.SimConfig(terrain_kind="flat", duration=1.0,
                               v_des=np.array([0.25, 0.0]))
        path = tmp_path / "cfg.json"
        sim.save_config(config, path)
        return path

    def test_simulate_writes_outputs(self, short_config, tmp_path):
        out = tmp_path / "run"
        code = run_cli("simulate", "--config", str(short_config),
                       "--mode", "convex", "--out", str(out))
        assert code == 0
        assert (out / "convex_region.csv").exists()
        summary = json.loads((out / "convex_region_summary.json").read_text())
        assert summary["fall"] is False

    def test_compare_outputs(self, short_config, tmp_path):
        out = tmp_path / "cmp"
        code = run_cli("compare", "--config", str(short_config), "--out", str(out))
        assert code in (0, 1)  # ordering not asserted on this tiny flat run
        assert (out / "compare.json").exists()
        assert (out / "convex_region.csv").exists()
        assert (out / "heuristic.csv").exists()


class TestDatasetAndNet:
    def test_dataset_gen(self, tmp_path):
        out = tmp_path / "data.sfds"
        assert run_cli("dataset", "gen", "--count", "3", "--seed", "1",
                       "--out", str(out)) == 0
        samples = safenet.load_dataset(out)
        assert len(samples) == 3

    def test_net_predict(self, tmp_path):
        terrain = tmp_path / "t"
        run_cli("terrain", "gen", "--kind", "flat", "--out", str(terrain))
        weights_path = tmp_path / "w.sfnw"
        safenet.save_weights(safenet.random_weights(0), weights_path)
        out = tmp_path / "pred"
        code = run_cli("net", "predict", "--weights", str(weights_path),
                       "--terrain", str(terrain / "flat.pgm"),
                       "--center", "0.5,0.0", "--out", str(out))
        assert code == 0
        assert (out / "predicted_mask.pgm").exists()
