"""Harness tests: config handling, instance file ingestion, trace round
trips, experiment summaries, determinism of output files, and the CLI."""

import json

import numpy as np
import pytest

from nmfbandit.cli import main as cli_main
from nmfbandit.environment import RegretTrace
from nmfbandit.errors import CapabilityError, ParameterError, ParseError
from nmfbandit.genmodel import generate_simple
from nmfbandit.harness import (
    build_instance,
    check_rip,
    default_config,
    ingest_reward_matrix,
    load_config,
    read_trace,
    run_experiment,
    write_instance,
    write_trace,
)


def _tiny_config(tmp_path, **overrides):
    cfg = load_config(
        None,
        {
            "T": 25,
            "seeds": [1],
            "out_dir": str(tmp_path / "out"),
            "policies": ["ucb1"],
            "instance": {"L": 12, "K": 4, "m": 2, "corrupt_frac": 0.0, "seed": 3},
            "nmf_bandit": {"m": 2, "m_prime": 2, "anchor_method": "spa"},
        },
    )
    for key, value in overrides.items():
        cfg[key] = value
    return cfg


class TestConfig:
    def test_defaults_are_explicit(self):
        cfg = default_config()
        assert cfg["setting"] == "S1"
        assert cfg["instance"]["source"] == "simple"
        assert cfg["nmf_bandit"]["refit"] == "geometric"

    def test_file_overlay_and_overrides(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"T": 77, "instance": {"L": 9}}))
        cfg = load_config(path, {"seeds": [5]})
        assert cfg["T"] == 77
        assert cfg["instance"]["L"] == 9
        assert cfg["instance"]["K"] == 30  # untouched default
        assert cfg["seeds"] == [5]

    def test_invalid_json_is_parse_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ParseError):
            load_config(path)

    def test_validation(self):
        with pytest.raises(ParameterError):
            load_config(None, {"T": 0})
        with pytest.raises(ParameterError):
            load_config(None, {"seeds": []})
        with pytest.raises(ParameterError):
            load_config(None, {"policies": ["bogus"]})


class TestIngest:
    def test_zero_gap_row_warns_and_reports_zero(self, tmp_path):
        path = tmp_path / "U.csv"
        path.write_text("0.1,0.9\n0.5,0.5\n")
        with pytest.warns(RuntimeWarning):
            inst = ingest_reward_matrix(path)
        assert inst.gap == 0.0
        np.testing.assert_allclose(inst.U, [[0.1, 0.9], [0.5, 0.5]])
        np.testing.assert_allclose(inst.beta, 0.5)

    def test_large_dimensions_accepted(self, tmp_path):
        rng = np.random.default_rng(0)
        U = rng.random((1600, 750))
        path = tmp_path / "big.csv"
        with open(path, "w") as fh:
            for row in U:
                fh.write(",".join(f"{v:.6f}" for v in row) + "\n")
        inst = ingest_reward_matrix(path)
        assert inst.U.shape == (1600, 750)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(ParseError):
            ingest_reward_matrix(path)

    def test_ragged_rows_located(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("0.1,0.2\n0.3\n")
        with pytest.raises(ParseError) as exc:
            ingest_reward_matrix(path)
        assert exc.value.row == 2

    def test_non_numeric_cell_located(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("0.1,0.2\n0.3,oops\n")
        with pytest.raises(ParseError) as exc:
            ingest_reward_matrix(path)
        assert (exc.value.row, exc.value.col) == (2, 2)

    def test_header_flag(self, tmp_path):
        path = tmp_path / "with_header.csv"
        path.write_text("a,b\n0.1,0.9\n0.8,0.2\n")
        inst = ingest_reward_matrix(path, has_header=True)
        assert inst.U.shape == (2, 2)

    def test_instance_files_round_trip(self, tmp_path):
        inst = generate_simple(8, 5, 2, 0.0, seed=1)
        csv_path, meta_path = write_instance(inst, tmp_path / "inst.csv")
        assert meta_path.name == "inst.meta.json"
        again = ingest_reward_matrix(csv_path)
        np.testing.assert_array_equal(again.U, inst.U)
        meta = json.loads(meta_path.read_text())
        assert meta["L"] == 8 and meta["K"] == 5


class TestTraceIO:
    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        n = 50
        trace = RegretTrace(
            t=np.arange(1, n + 1, dtype=np.int64),
            context=rng.integers(0, 7, n),
            arm=rng.integers(0, 4, n),
            reward=rng.random(n),  # full-precision doubles
            explore=rng.random(n) < 0.5,
            cum_regret=np.cumsum(rng.random(n)),
        )
        path = write_trace(trace, tmp_path / "trace.csv")
        again = read_trace(path)
        assert np.array_equal(trace.t, again.t)
        assert np.array_equal(trace.context, again.context)
        assert np.array_equal(trace.arm, again.arm)
        assert np.array_equal(trace.reward, again.reward)  # bitwise float equality
        assert np.array_equal(trace.explore, again.explore)
        assert np.array_equal(trace.cum_regret, again.cum_regret)

    def test_header_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("t,context,arm\n1,0,0\n")
        with pytest.raises(ParseError):
            read_trace(path)


class TestRunExperiment:
    def test_tiny_run_produces_trace_and_summary(self, tmp_path):
        cfg = _tiny_config(tmp_path)
        summary = run_experiment(cfg)
        trace_path = tmp_path / "out" / "trace_ucb1_seed1.csv"
        assert trace_path.exists()
        trace = read_trace(trace_path)
        assert len(trace) == 25
        info = summary["policies"]["ucb1"]
        assert info["per_seed"][0]["final_regret"] == pytest.approx(
            trace.cum_regret[-1]
        )
        assert (tmp_path / "out" / "summary.json").exists()

    def test_repeat_runs_are_byte_identical(self, tmp_path):
        cfg_a = _tiny_config(tmp_path, out_dir=str(tmp_path / "a"))
        cfg_b = _tiny_config(tmp_path, out_dir=str(tmp_path / "b"))
        cfg_a["policies"] = cfg_b["policies"] = ["ucb1", "thompson", "nmf_bandit"]
        run_experiment(cfg_a)
        run_experiment(cfg_b)
        for name in ("ucb1", "thompson", "nmf_bandit"):
            fa = (tmp_path / "a" / f"trace_{name}_seed1.csv").read_bytes()
            fb = (tmp_path / "b" / f"trace_{name}_seed1.csv").read_bytes()
            assert fa == fb

    def test_parallel_matches_serial(self, tmp_path):
        cfg_a = _tiny_config(tmp_path, out_dir=str(tmp_path / "ser"))
        cfg_b = _tiny_config(tmp_path, out_dir=str(tmp_path / "par"))
        cfg_a["seeds"] = cfg_b["seeds"] = [1, 2]
        cfg_b["threads"] = 2
        run_experiment(cfg_a)
        run_experiment(cfg_b)
        for seed in (1, 2):
            fa = (tmp_path / "ser" / f"trace_ucb1_seed{seed}.csv").read_bytes()
            fb = (tmp_path / "par" / f"trace_ucb1_seed{seed}.csv").read_bytes()
            assert fa == fb

    def test_plan_failure_surfaces_inequality(self, tmp_path):
        cfg = _tiny_config(tmp_path)
        cfg["policies"] = ["nmf_bandit"]
        cfg["instance"]["L"] = 4  # too small for the block design
        cfg["nmf_bandit"]["m_prime"] = 2
        with pytest.raises(ParameterError, match="m'"):
            run_experiment(cfg)


class TestCheckRip:
    def test_file_instances_lack_factors(self, tmp_path):
        path = tmp_path / "U.csv"
        path.write_text("0.1,0.9\n0.8,0.2\n")
        cfg = _tiny_config(tmp_path)
        cfg["instance"] = {
            "source": "file",
            "path": str(path),
            "reward_model": {"kind": "bernoulli", "width": 0.0},
            "has_header": False,
        }
        with pytest.raises(CapabilityError):
            check_rip(cfg)

    def test_zero_trials_rejected(self, tmp_path):
        cfg = _tiny_config(tmp_path)
        cfg["rip"]["trials"] = 0
        with pytest.raises(ParameterError):
            check_rip(cfg)

    def test_report_structure(self, tmp_path):
        cfg = _tiny_config(tmp_path)
        cfg["instance"] = {
            "source": "simple",
            "L": 40,
            "K": 20,
            "m": 2,
            "corrupt_frac": 0.0,
            "seed": 5,
            "reward_model": {"kind": "bernoulli", "width": 0.0},
        }
        cfg["rip"].update({"m_prime": 4, "trials": 10, "seed": 1})
        report = check_rip(cfg)
        assert set(report) == {"m_prime", "trials", "W", "A"}
        assert 0.0 <= report["W"]["failure_frequency"] <= 1.0
        assert "5" in report["W"]["percentiles"]


class TestCli:
    def test_print_config(self, capsys):
        assert cli_main(["--print-config"]) == 0
        out = capsys.readouterr().out
        assert json.loads(out)["setting"] == "S1"

    def test_run_subcommand(self, tmp_path, capsys):
        cfg = {
            "T": 10,
            "seeds": [2],
            "policies": ["thompson"],
            "out_dir": str(tmp_path / "cli_out"),
            "instance": {"L": 10, "K": 4, "m": 2, "corrupt_frac": 0.0, "seed": 1},
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert cli_main(["run", "--config", str(path)]) == 0
        assert (tmp_path / "cli_out" / "trace_thompson_seed2.csv").exists()
        assert cli_main(["summarize", "--in", str(tmp_path / "cli_out")]) == 0
        out = capsys.readouterr().out
        assert "thompson" in out

    def test_generate_subcommand(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"out_dir": str(tmp_path / "gen"), "instance": {"L": 8, "K": 4, "m": 2}}))
        assert cli_main(["generate", "--config", str(path)]) == 0
        assert (tmp_path / "gen" / "U.csv").exists()
        assert (tmp_path / "gen" / "U.meta.json").exists()

    def test_config_error_exit_code(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"T": 0}))
        assert cli_main(["run", "--config", str(path)]) == 2

    def test_seed_and_t_overrides(self, tmp_path):
        cfg = {
            "seeds": [1, 2, 3],
            "policies": ["ucb1"],
            "out_dir": str(tmp_path / "o"),
            "instance": {"L": 10, "K": 4, "m": 2, "corrupt_frac": 0.0, "seed": 1},
        }
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        assert cli_main(["run", "--config", str(path), "--seed", "9", "--T", "7"]) == 0
        assert (tmp_path / "o" / "trace_ucb1_seed9.csv").exists()
        assert len(read_trace(tmp_path / "o" / "trace_ucb1_seed9.csv")) == 7


class TestBuildInstance:
    def test_sources(self, tmp_path):
        cfg = _tiny_config(tmp_path)
        inst = build_instance(cfg)
        assert inst.U.shape == (12, 4)
        cfg["instance"] = {
            "source": "lower_bound",
            "L": 12,
            "K": 4,
            "m": 2,
            "seed": 0,
            "reward_model": {"kind": "bernoulli", "width": 0.0},
        }
        assert build_instance(cfg).U.shape == (12, 4)

    def test_unknown_source_rejected(self, tmp_path):
        cfg = _tiny_config(tmp_path)
        cfg["instance"]["source"] = "nope"
        with pytest.raises(ParameterError):
            build_instance(cfg)
