import json

import numpy as np
import pytest

from mmvrec.cli import main
from mmvrec.complexmat import ComplexMatrix, save_cmat
from mmvrec.errors import ContractViolation
from mmvrec.harness import (
    CSV_HEADER,
    ExperimentConfig,
    ExperimentRecord,
    ScenarioConfig,
    SolverSpec,
    apply_sweep_value,
    emit_results,
    import_matrix,
    run_sweep,
)
from mmvrec.sampling import IidGroupActivity, IndependentTwoGroup, SingleActiveGroup


def small_config(**kw):
    scenario = ScenarioConfig(
        N=20, M=4, L=8, sigma2=0.1,
        activity=IndependentTwoGroup(N=20, p1=0.1, p2=0.1),
        pilots="gaussian-normalized",
    )
    base = dict(
        scenario=scenario,
        solvers=(
            SolverSpec(id="group-lasso", params={"lam": 0.5}),
            SolverSpec(id="ml", task="support"),
        ),
        sweep_axis="L/N",
        sweep_values=(0.4,),
        trials=3,
        root_seed=7,
        calibration_trials=8,
        record_timing=False,
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestSolverSpec:
    def test_default_tasks(self):
        assert SolverSpec(id="amp").task == "signal"
        assert SolverSpec(id="cov-lasso").task == "support"
        assert SolverSpec(id="map", task="support").label == "map[support]"

    def test_invalid_combinations(self):
        with pytest.raises(ContractViolation):
            SolverSpec(id="omp")
        with pytest.raises(ContractViolation):
            SolverSpec(id="cov-lasso", task="signal")


class TestApplySweep:
    def scenario(self, activity):
        return ScenarioConfig(N=100, M=4, L=12, sigma2=0.1, activity=activity)

    def test_ln_axis_moves_l(self):
        sc = apply_sweep_value(
            self.scenario(IndependentTwoGroup(N=100, p1=0.1, p2=0.1)), "L/N", 0.16
        )
        assert sc.L == 16 and sc.N == 100

    def test_m_axis(self):
        sc = apply_sweep_value(
            self.scenario(IndependentTwoGroup(N=100, p1=0.1, p2=0.1)), "M", 32
        )
        assert sc.M == 32

    def test_p_axis_preserves_ratio(self):
        sc = apply_sweep_value(
            self.scenario(IndependentTwoGroup(N=100, p1=0.15, p2=0.05)), "p", 0.2
        )
        act = sc.activity
        assert act.p1 / act.p2 == pytest.approx(3.0)
        assert 0.5 * (act.p1 + act.p2) == pytest.approx(0.2)

    def test_ratio_axis_preserves_mean(self):
        sc = apply_sweep_value(
            self.scenario(IndependentTwoGroup(N=100, p1=0.1, p2=0.1)), "p1/p2", 3.0
        )
        act = sc.activity
        assert act.p1 / act.p2 == pytest.approx(3.0)
        assert 0.5 * (act.p1 + act.p2) == pytest.approx(0.1)

    def test_g_axis(self):
        sc = apply_sweep_value(
            self.scenario(SingleActiveGroup(N=100, G=10)), "G", 20
        )
        assert sc.activity.G == 20

    def test_invalid_axes(self):
        with pytest.raises(ContractViolation):
            apply_sweep_value(
                self.scenario(SingleActiveGroup(N=100, G=10)), "p", 0.1
            )
        with pytest.raises(ContractViolation):
            apply_sweep_value(
                self.scenario(IidGroupActivity(N=100, G=10, p=0.1)), "p1/p2", 2.0
            )
        with pytest.raises(ContractViolation):
            apply_sweep_value(
                self.scenario(IndependentTwoGroup(N=100, p1=0.1, p2=0.1)), "rho", 1.0
            )


class TestRunSweep:
    def test_record_inventory(self):
        records = run_sweep(small_config())
        labels = {(r.solver, r.metric) for r in records}
        # fixed lambda, so no lambda record for group-lasso
        assert labels == {
            ("group-lasso[signal]", "mse"),
            ("ml[support]", "error_rate"),
            ("ml[support]", "gamma_star"),
        }
        assert all(r.excluded_trials == 0 for r in records)
        assert all(r.ms_per_trial == 0.0 for r in records)

    def test_rerun_is_identical(self, tmp_path):
        cfg = small_config()
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_results(run_sweep(cfg), out1)
        emit_results(run_sweep(cfg), out2)
        assert out1.read_bytes() == out2.read_bytes()

    def test_parallel_matches_serial(self, tmp_path):
        cfg = small_config(trials=6)
        out1, out2 = tmp_path / "serial.csv", tmp_path / "parallel.csv"
        emit_results(run_sweep(cfg, workers=1), out1)
        emit_results(run_sweep(cfg, workers=2), out2)
        assert out1.read_bytes() == out2.read_bytes()

    def test_records_are_sorted(self):
        cfg = small_config(sweep_values=(0.6, 0.4))
        records = run_sweep(cfg)
        keys = [(r.sweep_value, r.solver, r.metric) for r in records]
        assert keys == sorted(keys)

    def test_validation(self):
        with pytest.raises(ContractViolation):
            small_config(trials=0)
        with pytest.raises(ContractViolation):
            small_config(sweep_values=())


class TestEmitResults:
    def record(self, **kw):
        base = dict(
            sweep_axis="M", sweep_value=4.0, solver="amp[signal]", metric="mse",
            value=0.1, trials=10, excluded_trials=0, seed=123,
            pilot_source="gaussian", ms_per_trial=1.5,
        )
        base.update(kw)
        return ExperimentRecord(**base)

    def test_header_and_row_count(self, tmp_path):
        out = tmp_path / "r.csv"
        emit_results([self.record(), self.record(metric="lambda")], out)
        lines = out.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 3

    def test_value_round_trips(self, tmp_path):
        out = tmp_path / "r.csv"
        emit_results([self.record(value=0.1)], out)
        text = out.read_text().splitlines()[1]
        assert float(text.split(",")[4]) == 0.1

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ContractViolation):
            emit_results([], tmp_path / "r.csv")


class TestImportMatrix:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        mat = ComplexMatrix(rng.standard_normal((3, 5)), rng.standard_normal((3, 5)))
        path = tmp_path / "a.cmat"
        save_cmat(mat, path)
        again = import_matrix(path)
        assert np.array_equal(mat.re, again.re) and np.array_equal(mat.im, again.im)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            import_matrix(tmp_path / "nope.cmat")


class TestCli:
    def write_config(self, tmp_path):
        cfg = {
            "scenario": {
                "N": 20, "M": 4, "L": 8, "sigma2": 0.1,
                "activity": {"variant": "independent-two-group",
                             "p1": 0.1, "p2": 0.1},
                "pilots": "gaussian-normalized",
            },
            "solvers": [
                {"id": "group-lasso", "lam": 0.5},
                {"id": "ml", "task": "support"},
            ],
            "sweep": {"axis": "L/N", "values": [0.4]},
            "trials": 3,
            "root_seed": 7,
            "calibration_trials": 8,
            "record_timing": False,
        }
        path = tmp_path / "exp.json"
        path.write_text(json.dumps(cfg))
        return path

    def test_sweep_command(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path)
        out = tmp_path / "results.csv"
        assert main(["sweep", str(cfg), "-o", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) > 1

    def test_sweep_command_matches_library(self, tmp_path):
        cfg_path = self.write_config(tmp_path)
        out = tmp_path / "cli.csv"
        main(["sweep", str(cfg_path), "-o", str(out)])
        lib_out = tmp_path / "lib.csv"
        emit_results(run_sweep(small_config()), lib_out)
        assert out.read_bytes() == lib_out.read_bytes()

    def test_calibrate_command(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path)
        assert main(["calibrate", str(cfg), "ml"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["solver"] == "ml[support]"
        assert np.isfinite(payload["gamma_star"])

    def test_calibrate_unknown_solver(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path)
        assert main(["calibrate", str(cfg), "amp"]) == 2

    def test_coherence_and_roundtrip_commands(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        mat = ComplexMatrix(rng.standard_normal((8, 16)), rng.standard_normal((8, 16)))
        path = tmp_path / "pilots.cmat"
        save_cmat(mat, path)
        assert main(["coherence", str(path), "--group-size", "4"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {"coherence", "block_coherence", "sub_coherence"}
        assert main(["roundtrip-check", str(path)]) == 0
        assert "round-trip ok" in capsys.readouterr().out
