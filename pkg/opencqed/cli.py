"""Command-line front end: one verb per analysis, one JSON configuration per run, CSV and JSON artifacts out."""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import numpy as np

from opencqed import __version__
from opencqed.design_opt import (
    EvaluationLog,
    GratingSpec,
    ParamBox,
    SubprocessObjective,
    ToyCavitySurrogate,
    chirp_lattice,
    device_pattern,
    dose_size_array,
    grating_arcs,
    hole_positions,
    interleaved_search,
    multi_bump_landscape,
)
from opencqed.design_opt.geometry import ChirpSpec
from opencqed.exceptions import ConfigError, DataError, NumericalError
from opencqed.fitting import estimates_from_fits, fit_broadband, fit_dit, fit_lineshape_vs_detuning, pool
from opencqed.loss_budget import QBudget, on_resonance_estimates
from opencqed.magnetics import (
    CrystalFrame,
    PlaneGrid,
    calibrate_mount_offset,
    calibrate_remanence,
    external_magnet,
    external_sweep,
    misalignment,
    mount_magnet,
)
from opencqed.parser import (
    CONFIG_TYPES,
    BudgetConfig,
    FitConfig,
    MagnetConfig,
    OptimizeConfig,
    ReadoutConfig,
    SpectrumConfig,
    config_to_dict,
    load_config,
    read_linewidths,
    read_spectrum,
    read_trace,
)
from opencqed.readout import (
    TelegraphConfig,
    classify_and_intervals,
    estimate_t1_from_intervals,
    fidelity_at_threshold,
    fit_bimodal,
    optimal_threshold,
    rebin,
    simulate_telegraph,
)
from opencqed.scattering import DriveGrid, Geometry
from opencqed.spectra import (
    BroadbandModel,
    DitModel,
    SampledSpectrum,
    SystemEfficiency,
    dit_intensity,
    expected_counts,
    sample_counts,
)
from opencqed.writer import write_document, write_table

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
MANIFEST = "run.json"
DIT_POOLED_PARAMETERS = ("g", "gamma", "delta", "c")


@dataclass
class RunContext:
    """Output directory of a run, the directory relative input paths refer to, and the artifacts written so far."""

    out_dir: Path
    base_dir: Path
    outputs: list[str] = field(default_factory=list)

    def input_path(self, name: str) -> Path:
        path = Path(name)
        return path if path.is_absolute() else self.base_dir / path

    def table(self, name: str, header: Sequence[str], rows: Any) -> None:
        write_table(self.out_dir / name, header, rows)
        self.outputs.append(name)

    def document(self, name: str, document: dict[str, Any]) -> None:
        write_document(self.out_dir / name, document)
        self.outputs.append(name)


def cmd_spectrum(config: SpectrumConfig, ctx: RunContext) -> None:
    """Model transmission spectrum, optionally with expected and Poisson-sampled counts."""
    system = config.system.coupled_system()
    grid = DriveGrid.linspace(config.scan.start_hz, config.scan.stop_hz, config.scan.points)
    intensity = system.transmission(grid, Geometry(config.geometry), thermal=config.thermal)
    frequencies = system.rates.f_cav + grid.detunings

    expected: list[float | None] = [None] * len(grid)
    if config.counts is not None:
        efficiency = SystemEfficiency(grating_output=config.counts.grating_efficiency)
        mean = expected_counts(intensity, config.counts.photon_rate_hz, efficiency, config.counts.exposure_s)
        expected = [float(v) for v in mean]
        if config.counts.sample:
            sampled = sample_counts(mean, config.seed, frequencies=frequencies, exposure=config.counts.exposure_s)
            ctx.table(
                "sample_spectrum.csv",
                ("frequency_hz", "counts", "exposure_s"),
                ([f, c, sampled.exposure] for f, c in zip(sampled.frequencies, sampled.counts)),
            )
    ctx.table(
        "model_spectrum.csv",
        ("frequency_hz", "detuning_hz", "intensity", "expected_counts"),
        zip(frequencies, grid.detunings, intensity, expected),
    )
    ctx.document(
        "spectrum.json",
        {
            "system": system.to_dict(),
            "geometry": config.geometry,
            "thermal": config.thermal,
            "bright_population": system.bright_population() if config.thermal else None,
            "scan": asdict(config.scan),
            "counts": None if config.counts is None else asdict(config.counts),
            "seed": config.seed,
        },
    )


def _initial_envelope(
    spec: SampledSpectrum, fixed: tuple[float, float, tuple[float, float, float]], model: DitModel
) -> tuple[float, float, float]:
    """Flat Fabry-Perot envelope that matches the total counts of a scan under the fixed cavity."""
    f0, kappa, bg_ratio = fixed
    rates = model.sys.rates
    kappa_c = kappa * rates.kappa_c / rates.kappa_total
    system = model.sys.with_rates(
        f_cav=f0, f_emitter=f0 + rates.detuning, kappa_c=kappa_c, kappa_i=max(kappa - 2 * kappa_c, 0.0)
    )
    unit_envelope = replace(model, sys=system, bg_ratio=bg_ratio, fp=(1.0, 0.0, 0.0))
    level = dit_intensity(unit_envelope, DriveGrid(spec.frequencies - f0))
    return float(np.sum(spec.counts) / np.sum(level)), 0.0, 0.0


def cmd_fit(config: FitConfig, ctx: RunContext) -> None:
    """Broadband cavity fit, DIT fits of every scan with the cavity held at its broadband values, and pooling."""
    report: dict[str, Any] = {}
    if config.broadband is not None:
        section = config.broadband
        init = BroadbandModel(
            section.amplitude,
            section.f0_hz,
            section.kappa_hz,
            section.b0,
            section.b1_per_hz,
            section.b2_per_hz2,
            section.baseline_counts,
        )
        broadband = fit_broadband(read_spectrum(ctx.input_path(section.input)), init)
        report["broadband"] = {"input": section.input, **broadband.to_dict()}

        if config.dit is not None:
            fitted = BroadbandModel(
                abs(broadband["amplitude_a"]),
                broadband["f0"],
                broadband["kappa"],
                broadband["b0"],
                broadband["b1"],
                broadband["b2"],
                section.baseline_counts,
            )
            fixed = (fitted.f0, fitted.kappa, fitted.background_ratio())
            model = DitModel(
                config.dit.system.coupled_system(),
                Geometry(config.dit.geometry),
                thermal=config.dit.thermal,
            )
            fits = []
            for name in config.dit.inputs:
                spec = read_spectrum(ctx.input_path(name))
                fp = config.dit.fp if config.dit.fp is not None else _initial_envelope(spec, fixed, model)
                fits.append(fit_dit(spec, fixed, replace(model, fp=(fp[0], fp[1], fp[2]))))
            report["dit"] = {
                "fits": [{"input": name, **fit.to_dict()} for name, fit in zip(config.dit.inputs, fits)],
                "pooled": {p: asdict(pool(estimates_from_fits(fits, p))) for p in DIT_POOLED_PARAMETERS},
            }

    if config.lineshape is not None:
        section_ls = config.lineshape
        lineshape = fit_lineshape_vs_detuning(
            read_linewidths(ctx.input_path(section_ls.input)), section_ls.kappa_fixed_hz, section_ls.kappa_init_hz
        )
        report["lineshape"] = {"input": section_ls.input, **lineshape.to_dict()}
    ctx.document("fit_report.json", report)


def cmd_readout(config: ReadoutConfig, ctx: RunContext) -> None:
    """Threshold, single-shot fidelity and jump-interval T1 of simulated or recorded count traces."""
    if config.inputs:
        traces = [read_trace(ctx.input_path(name)) for name in config.inputs]
        if len({t.bin_width for t in traces}) != 1:
            msg = "the input traces differ in bin width"
            raise DataError(msg)
    else:
        sim = config.simulation
        telegraph = TelegraphConfig(
            t1=sim.t1_s,
            pump_rate=sim.pump_rate_hz,
            mu_down=sim.mu_down,
            mu_up=sim.mu_up,
            bin_width=sim.bin_width_s,
            pump_duration=sim.pump_duration_s,
            probe_duration=sim.probe_duration_s,
            seed=config.seed,
        )
        traces = [rebin(trace, sim.rebin) for trace in simulate_telegraph(telegraph, sim.sequences)]
        first = traces[0]
        rows = zip(first.bin_starts(), first.counts, first.true_states())
        ctx.table("trace.csv", ("t_s", "counts", "state_true"), rows)

    counts = np.concatenate([t.counts for t in traces])
    occurrences = np.bincount(counts)
    ctx.table("count_histogram.csv", ("counts", "bins"), enumerate(occurrences))

    bimodal = fit_bimodal(counts, histogram=config.histogram)
    if config.threshold is None:
        fidelity = optimal_threshold(bimodal)
    else:
        fidelity = fidelity_at_threshold(
            bimodal.mu_down, bimodal.mu_up, config.threshold, bimodal.sigma_down, bimodal.sigma_up
        )
    intervals = np.concatenate([classify_and_intervals(t, fidelity.threshold) for t in traces])
    t1 = estimate_t1_from_intervals(
        intervals,
        traces[0].bin_width,
        config.drop_first_bin,
        misclassification=1 - fidelity.fidelity if config.correct_misclassification else 0.0,
        dwell_per_t1=config.dwell_per_t1,
        coarse_grained=config.coarse_grained,
    )
    ctx.document(
        "readout_report.json",
        {
            "bimodal": bimodal.to_dict(),
            "fidelity": fidelity.to_dict(),
            "t1": t1.to_dict(),
            "n_bins": int(counts.size),
            "n_intervals": int(intervals.size),
            "bin_width_s": traces[0].bin_width,
        },
    )


def _write_layout(ctx: RunContext) -> None:
    spec = ChirpSpec()
    ctx.table("chirp_lattice.csv", ("gap_index", "spacing_m"), enumerate(chirp_lattice(spec)))
    ctx.table("hole_positions.csv", ("hole_index", "position_m"), enumerate(hole_positions(spec)))
    ctx.table(
        "device_pattern.csv",
        ("row", "column", "geometry", "n_mir", "coupling_distance_m"),
        (
            [d.row, d.column, d.device.geometry, d.device.n_mir, d.device.coupling_distance]
            for d in device_pattern()
        ),
    )
    ctx.table(
        "dose_size_array.csv",
        ("row", "column", "dose_factor", "hole_scale", "lattice_scale"),
        ([c.row, c.column, c.dose_factor, c.hole_scale, c.lattice_scale] for c in dose_size_array()),
    )
    ctx.table(
        "grating_arcs.csv",
        ("period", "edge", "x_m", "y_m"),
        ([arc.period, arc.edge, x, y] for arc in grating_arcs(GratingSpec()) for x, y in zip(arc.x, arc.y)),
    )


def cmd_optimize(config: OptimizeConfig, ctx: RunContext) -> None:
    """Interleaved global/local design search, with the optional fabrication layout of the nominal design."""
    extra: dict[str, Any] = {}
    if config.objective == "landscape":
        landscape = multi_bump_landscape(config.seed, config.dim)
        box, objective = landscape.box(), landscape.objective()
        extra = {"peak_value": landscape.peak_value, "peak_point": landscape.peak_point}
    elif config.objective == "toy":
        surrogate = ToyCavitySurrogate(q_fab_cap=config.q_fab_cap)
        low, high = config.feasible_window_m
        box, objective = surrogate.box(), surrogate.objective((low, high))
    else:
        box = ParamBox(
            [p.name for p in config.parameters],
            [p.lower for p in config.parameters],
            [p.upper for p in config.parameters],
        )
        objective = SubprocessObjective.from_command(config.command, box.names, config.timeout_s).objective()

    log = EvaluationLog()
    designs = interleaved_search(
        objective,
        box,
        config.global_budget,
        config.local_budget,
        config.n_clusters,
        config.seed,
        schedule=config.schedule,
        log=log,
    )
    ctx.table("evaluations.csv", ("eval_index", "phase", *box.names, "score"), log.rows())
    ctx.document(
        "designs.json",
        {
            "objective": config.objective,
            "parameters": list(box.names),
            "evaluations": len(log),
            "designs": [d.to_dict(box.names) for d in designs],
            **extra,
        },
    )
    if config.layout:
        _write_layout(ctx)


def cmd_magnet(config: MagnetConfig, ctx: RunContext) -> None:
    """Mount-magnet calibration and the misalignment map of the external alignment magnet."""
    mount = calibrate_mount_offset(mount_magnet(config.mount_remanence_t), config.standoff_m)
    if config.target_field_t is not None:
        mount = calibrate_remanence(mount, config.sample_point_m, config.target_field_t)
    axis = CrystalFrame.diamond_001(config.crystal_rotation_deg).coupled_axes()[0]
    b_mount = mount.field(config.sample_point_m)
    report: dict[str, Any] = {
        "mount": {"center_m": mount.center, "axis": mount.axis, "remanence_t": mount.remanence_br},
        "sample_point_m": config.sample_point_m,
        "siv_axis": axis,
        "mount_alpha_deg": misalignment(b_mount, axis),
        "mount_b_t": float(np.linalg.norm(b_mount)),
    }

    if config.external is not None:
        ext = config.external
        alpha_map = external_sweep(
            mount,
            external_magnet(ext.remanence_t, ext.axis),
            PlaneGrid.around(ext.standoff_m, ext.half_width_m, ext.step_m),
            config.sample_point_m,
            axis,
        )
        iy, iz = alpha_map.argmin
        report["external"] = {
            "standoff_m": ext.standoff_m,
            "best_position_m": alpha_map.best_position,
            "min_alpha_deg": alpha_map.min_alpha,
            "b_at_best_t": float(alpha_map.b_tesla[iy, iz]),
            "tolerance_m": ext.tolerance_m,
            "neighbourhood_max_alpha_deg": alpha_map.neighbourhood_max(ext.tolerance_m),
        }
        ctx.table("alpha_map.csv", ("y_m", "z_m", "alpha_deg", "b_tesla"), alpha_map.rows())
    ctx.document("magnet_report.json", report)


def cmd_budget(config: BudgetConfig, ctx: RunContext) -> None:
    """Quality-factor budget of a device from its simulated (Q, T) and its measured Q."""
    budget = QBudget.from_measurement(config.q_sim, config.t_sim, config.q_exp, config.f0_hz)
    r_exp, t_exp = on_resonance_estimates(budget, fold_fabrication=config.fold_fabrication)
    rates = budget.rates()
    q_values = {"exp": budget.q_exp, "sim": budget.q_sim, "rad": budget.q_rad, "c": budget.q_c, "fab": budget.q_fab}
    ctx.table("budget.csv", ("channel", "q", "rate_hz"), ([name, q, rates[name]] for name, q in q_values.items()))
    ctx.document(
        "budget_report.json",
        {"q": q_values, "rates_hz": rates, "t_exp": t_exp, "r_exp": r_exp, "f0_hz": budget.f0},
    )


COMMANDS: dict[str, Callable[[Any, RunContext], None]] = {
    "spectrum": cmd_spectrum,
    "fit": cmd_fit,
    "readout": cmd_readout,
    "optimize": cmd_optimize,
    "magnet": cmd_magnet,
    "budget": cmd_budget,
}


def _seed(text: str) -> int:
    try:
        seed = int(text)
    except ValueError as e:
        msg = f"{text!r} is not an integer"
        raise argparse.ArgumentTypeError(msg) from e
    if not 0 <= seed < 2**64:
        msg = "the seed must be an unsigned 64-bit integer"
        raise argparse.ArgumentTypeError(msg)
    return seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opencqed", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbs = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, command in COMMANDS.items():
        verb = verbs.add_parser(name, help=(command.__doc__ or "").strip())
        verb.add_argument("--config", type=Path, help="JSON run configuration; defaults are used when omitted")
        verb.add_argument("--seed", type=_seed, help="overrides the seed of the configuration")
        verb.add_argument("--out", type=Path, default=Path(), help="output directory (default: current directory)")
        verb.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debugging")
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(level)


def run(args: argparse.Namespace) -> None:
    """Runs one verb; the manifest is written even when the configuration or the run fails."""
    manifest: dict[str, Any] = {"command": args.command, "config": None, "seed": None, "version": __version__}
    ctx = RunContext(args.out, Path.cwd())
    manifest["outputs"] = ctx.outputs
    try:
        config_type = CONFIG_TYPES[args.command]
        if args.config is None:
            config = config_type()
        else:
            config = load_config(args.config, config_type)
            ctx.base_dir = args.config.parent
        if args.seed is not None:
            config = replace(config, seed=args.seed)
        manifest["config"] = config_to_dict(config)
        manifest["seed"] = config.seed
        COMMANDS[args.command](config, ctx)
    except Exception as e:
        manifest["error"] = f"{type(e).__name__}: {e}"
        raise
    finally:
        manifest["timestamp_utc"] = datetime.now(timezone.utc).isoformat()
        write_document(args.out / MANIFEST, manifest)
    logger.info("%s wrote %s to %s", args.command, ", ".join(ctx.outputs), args.out)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        run(args)
    except NumericalError as e:
        logger.error("numerical failure: %s", e)  # noqa: TRY400
        return EXIT_NUMERICAL
    except DataError as e:
        logger.error("data error: %s", e)  # noqa: TRY400
        return EXIT_DATA
    except (ConfigError, ValueError) as e:
        logger.error("configuration error: %s", e)  # noqa: TRY400
        return EXIT_CONFIG
    return EXIT_OK
