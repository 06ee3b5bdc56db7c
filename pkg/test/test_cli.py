from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any

import numpy as np
import pytest

from opencqed import __version__
from opencqed.cli import EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL, EXIT_OK, MANIFEST, main
from opencqed.common import GHZ, THZ, US
from opencqed.core_model import CoupledSystem, RateSet
from opencqed.fitting import Estimate, pool
from opencqed.scattering import DriveGrid, Geometry
from opencqed.spectra import BroadbandModel, DitModel, broadband_intensity, dit_intensity, sample_counts
from opencqed.writer import write_table

F_CAV = 406.77 * THZ


def run_verb(verb: str, out: Path, config: dict[str, Any] | None = None, *extra: str) -> int:
    argv = [verb, "--out", str(out), *extra]
    if config is not None:
        path = out.parent / f"{verb}-{out.name}.json"
        path.write_text(json.dumps(config), encoding="utf-8")
        argv += ["--config", str(path)]
    return main(argv)


def read_json(path: Path) -> Any:
    return json.loads(path.read_text(encoding="utf-8"))


def read_csv(path: Path) -> list[dict[str, str]]:
    with path.open(newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


class TestBudget:
    def test_report(self, tmp_path: Path) -> None:
        out = tmp_path / "budget"
        assert run_verb("budget", out) == EXIT_OK
        report = read_json(out / "budget_report.json")
        assert report["t_exp"] == pytest.approx(0.62, abs=0.01)
        assert report["r_exp"] == pytest.approx(0.002, abs=3e-4)
        assert report["q"]["c"] == pytest.approx(8960, rel=0.01)
        rows = {row["channel"]: row for row in read_csv(out / "budget.csv")}
        assert set(rows) == {"exp", "sim", "rad", "c", "fab"}
        assert float(rows["exp"]["rate_hz"]) == pytest.approx(115 * GHZ, rel=0.01)

    def test_manifest(self, tmp_path: Path) -> None:
        out = tmp_path / "budget"
        assert run_verb("budget", out, {"q_exp": 3000}, "--seed", "12") == EXIT_OK
        manifest = read_json(out / MANIFEST)
        assert manifest["command"] == "budget"
        assert manifest["seed"] == 12
        assert manifest["version"] == __version__
        assert manifest["config"]["q_exp"] == 3000.0
        assert manifest["outputs"] == ["budget.csv", "budget_report.json"]
        assert "error" not in manifest
        assert "timestamp_utc" in manifest

    def test_infeasible_budget(self, tmp_path: Path) -> None:
        out = tmp_path / "budget"
        assert run_verb("budget", out, {"t_sim": 1.0}) == EXIT_NUMERICAL
        assert "InfeasibleBudgetError" in read_json(out / MANIFEST)["error"]


class TestSpectrum:
    config: dict[str, Any] = {"scan": {"points": 101}, "counts": {"photon_rate_hz": 1e6}}

    def test_sampling_is_seeded(self, tmp_path: Path) -> None:
        outs = [tmp_path / name for name in ("a", "b", "c")]
        assert run_verb("spectrum", outs[0], self.config) == EXIT_OK
        assert run_verb("spectrum", outs[1], self.config) == EXIT_OK
        assert run_verb("spectrum", outs[2], self.config, "--seed", "99") == EXIT_OK
        samples = [(out / "sample_spectrum.csv").read_text(encoding="utf-8") for out in outs]
        assert samples[0] == samples[1]
        assert samples[0] != samples[2]
        model = read_csv(outs[0] / "model_spectrum.csv")
        assert len(model) == 101
        assert float(model[0]["expected_counts"]) > 0

    def test_uncoupled_emitter_leaves_the_bare_cavity(self, tmp_path: Path) -> None:
        out = tmp_path / "bare"
        assert run_verb("spectrum", out, {"system": {"g_hz": 0.0}, "scan": {"points": 101}}) == EXIT_OK
        model = read_csv(out / "model_spectrum.csv")
        centre = min(model, key=lambda row: abs(float(row["detuning_hz"])))
        assert float(centre["intensity"]) == pytest.approx((2 * 45.4 / (24.1 + 2 * 45.4)) ** 2, rel=1e-6)
        assert centre["expected_counts"] == ""
        assert not (out / "sample_spectrum.csv").exists()

    def test_sidecar_stores_the_model(self, tmp_path: Path) -> None:
        out = tmp_path / "sidecar"
        config = {**self.config, "thermal": True, "system": {"g_hz": 1.5 * GHZ}}
        assert run_verb("spectrum", out, config) == EXIT_OK
        sidecar = read_json(out / "spectrum.json")
        assert sidecar["system"]["rates"]["g"] == pytest.approx(1.5 * GHZ)
        assert sidecar["system"]["rates"]["f_cav"] == pytest.approx(406.77 * THZ)
        assert sidecar["system"]["temperature_k"] == 4.0
        assert sidecar["geometry"] == "drop"
        assert sidecar["bright_population"] == pytest.approx(0.646, abs=5e-3)
        assert sidecar["scan"]["points"] == 101
        assert sidecar["counts"]["photon_rate_hz"] == 1e6
        assert sidecar["seed"] == 0
        manifest = read_json(out / MANIFEST)
        assert manifest["outputs"] == ["sample_spectrum.csv", "model_spectrum.csv", "spectrum.json"]


class TestFit:
    @pytest.fixture(name="inputs")
    def inputs_fixture(self, tmp_path: Path) -> Path:
        data = tmp_path / "data"
        truth = BroadbandModel(amplitude_a=2000.0, f0=F_CAV, kappa=114.9 * GHZ, b0=50.0, baseline=590.0)
        freqs = F_CAV + np.linspace(-500, 500, 201) * GHZ
        broadband = sample_counts(broadband_intensity(truth, freqs), seed=1, frequencies=freqs)
        write_table(data / "broadband.csv", ("frequency_hz", "counts"), zip(broadband.frequencies, broadband.counts))

        rates = RateSet.from_detuning(
            F_CAV, 0.523 * GHZ, kappa_i=24.1 * GHZ, kappa_c=45.4 * GHZ, gamma=0.110 * GHZ, g=2.13 * GHZ,
            delta_e=50 * GHZ,
        )  # fmt: skip
        model = DitModel(CoupledSystem(rates), Geometry.DROP, truth.background_ratio(), fp=(3000.0, 0.0, 0.0))
        grid = DriveGrid.linspace(-5 * GHZ, 5 * GHZ, 301)
        for seed in (2, 3):
            scan = sample_counts(dit_intensity(model, grid), seed=seed, frequencies=F_CAV + grid.detunings)
            write_table(data / f"dit{seed}.csv", ("frequency_hz", "counts"), zip(scan.frequencies, scan.counts))

        h = (100 * GHZ) ** 2 / 4
        write_table(
            data / "linewidths.csv",
            ("detuning_hz", "linewidth_hz", "sigma_hz"),
            [[d, 0.1 * GHZ + 0.5 * GHZ * h / (d**2 + h), 0.01 * GHZ] for d in np.linspace(-200, 200, 9) * GHZ],
        )
        return data

    def test_pipeline(self, tmp_path: Path, inputs: Path) -> None:
        config = {
            "broadband": {"input": "broadband.csv", "amplitude": 1500, "f0_hz": F_CAV + 5e9, "kappa_hz": 1e11},
            "dit": {"inputs": ["dit2.csv", "dit3.csv"]},
            "lineshape": {"input": "linewidths.csv", "kappa_fixed_hz": 1e11},
        }
        config_path = inputs / "fit.json"
        config_path.write_text(json.dumps(config), encoding="utf-8")
        out = tmp_path / "out"
        assert main(["fit", "--config", str(config_path), "--out", str(out)]) == EXIT_OK

        report = read_json(out / "fit_report.json")
        assert report["broadband"]["params"]["kappa"] == pytest.approx(114.9 * GHZ, rel=0.05)
        fits = report["dit"]["fits"]
        assert [fit["input"] for fit in fits] == ["dit2.csv", "dit3.csv"]
        g_estimates = [Estimate(f["params"]["g"], f["sigmas"]["g"], f["chi2_reduced"], f["converged"]) for f in fits]
        pooled = report["dit"]["pooled"]["g"]
        expected = pool(g_estimates)
        assert pooled["mean"] == pytest.approx(expected.mean)
        assert pooled["sigma"] == pytest.approx(expected.sigma)
        assert pooled["mean"] == pytest.approx(2.13 * GHZ, rel=0.25)
        assert set(report["dit"]["pooled"]) == {"g", "gamma", "delta", "c"}
        assert report["lineshape"]["derived"]["c"]["value"] == pytest.approx(5.0, rel=1e-3)

    def test_without_config(self, tmp_path: Path) -> None:
        out = tmp_path / "out"
        assert run_verb("fit", out) == EXIT_CONFIG
        assert "nothing to fit" in read_json(out / MANIFEST)["error"]

    def test_empty_input(self, tmp_path: Path) -> None:
        (tmp_path / "empty.csv").write_text("frequency_hz,counts\n", encoding="utf-8")
        config = {"broadband": {"input": str(tmp_path / "empty.csv"), "amplitude": 1, "f0_hz": 1e14, "kappa_hz": 1e9}}
        assert run_verb("fit", tmp_path / "out", config) == EXIT_DATA


def test_readout(tmp_path: Path) -> None:
    out = tmp_path / "readout"
    assert run_verb("readout", out) == EXIT_OK
    report = read_json(out / "readout_report.json")
    assert report["fidelity"]["fidelity"] > 0.9
    assert 28 <= report["fidelity"]["threshold"] <= 33
    assert report["t1"]["params"]["t1"] == pytest.approx(419 * US, rel=0.15)
    assert report["n_bins"] == 20 * 625
    assert report["bin_width_s"] == pytest.approx(80 * US)
    histogram = read_csv(out / "count_histogram.csv")
    assert sum(int(row["bins"]) for row in histogram) == report["n_bins"]
    assert len(read_csv(out / "trace.csv")) == 625


def test_magnet_without_external(tmp_path: Path) -> None:
    out = tmp_path / "magnet"
    assert run_verb("magnet", out, {"external": None}) == EXIT_OK
    report = read_json(out / "magnet_report.json")
    assert "external" not in report
    assert report["mount_alpha_deg"] == pytest.approx(3.0, abs=1.0)
    assert report["mount_b_t"] == pytest.approx(0.26, rel=1e-6)
    assert not (out / "alpha_map.csv").exists()


def test_optimize_with_layout(tmp_path: Path) -> None:
    out = tmp_path / "optimize"
    config = {"dim": 2, "global_budget": 20, "local_budget": 20, "n_clusters": 2, "layout": True}
    assert run_verb("optimize", out, config) == EXIT_OK
    designs = read_json(out / "designs.json")
    assert designs["parameters"] == ["x0", "x1"]
    assert designs["designs"][0]["value"] <= designs["peak_value"] + 1e-12
    evaluations = read_csv(out / "evaluations.csv")
    assert len(evaluations) == designs["evaluations"] <= 40
    assert list(evaluations[0]) == ["eval_index", "phase", "x0", "x1", "score"]
    for name in ("chirp_lattice.csv", "hole_positions.csv", "device_pattern.csv", "dose_size_array.csv"):
        assert (out / name).exists()
    assert len(read_csv(out / "device_pattern.csv")) == 40


@pytest.mark.parametrize(
    ("config", "code"),
    [({"seed": "one"}, EXIT_CONFIG), ({"unknown": 1}, EXIT_CONFIG), ({"q_exp": 5000}, EXIT_NUMERICAL)],
    ids=["wrong-type", "unknown-key", "measured-above-simulated"],
)
def test_failing_configurations(tmp_path: Path, config: dict[str, Any], code: int) -> None:
    out = tmp_path / "out"
    assert run_verb("budget", out, config) == code
    assert "error" in read_json(out / MANIFEST)


def test_invalid_json(tmp_path: Path) -> None:
    path = tmp_path / "broken.json"
    path.write_text('{"seed": 1,,}', encoding="utf-8")
    assert main(["budget", "--config", str(path), "--out", str(tmp_path / "out")]) == EXIT_CONFIG


@pytest.mark.parametrize("seed", ["-1", "abc", str(2**64)], ids=["negative", "text", "too-large"])
def test_seed_argument(tmp_path: Path, seed: str) -> None:
    with pytest.raises(SystemExit) as exc_info:
        main(["budget", "--seed", seed, "--out", str(tmp_path)])
    assert exc_info.value.code == 2


def test_version(capsys: pytest.CaptureFixture[str]) -> None:
    with pytest.raises(SystemExit):
        main(["--version"])
    assert __version__ in capsys.readouterr().out
