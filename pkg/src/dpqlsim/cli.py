"""Command-line workflows tying the simulator modules together.

Subcommands
-----------
thermal    thermal level populations at one or more temperatures
lifetime   ground-level residence lifetime across a temperature range
simulate   labeled Monte Carlo measurement stream
analyze    dataset analysis: bins | runs | hmm
sweep      trap-frequency sweep transfer map and high-fidelity window

Every command writes flat CSV/JSON files into --out plus a manifest.json
recording the command line, the full config snapshot, the seed, the tool
version, and a sha256 digest of every output, so a rerun can be checked
for byte-identical results.  Exit codes: 0 success, 2 usage or config
errors, 3 data-format errors, 4 numerical failures.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .bbr_kinetics import (
    IntegrationError,
    leave_probability_per_cycle,
    lifetime_temperature_sweep,
)
from .dataio import (
    DataFormatError,
    read_dataset_csv,
    read_keyvalues,
    sha256_digest,
    write_table,
)
from .hmm_detector import (
    HmmParams,
    default_params,
    evaluate,
    forward_backward,
    write_decoded_csv,
)
from .run_statistics import (
    NoiseSignalModel,
    bin_value_distribution,
    find_longest_run,
    observed_run_significance,
)
from .spectroscopy import (
    ROT_GROUND,
    MolecularConstants,
    constants_from_config,
    constants_to_config,
    enumerate_levels,
    level_energy,
    thermal_distribution,
    thermal_population,
)
from .sweep_dynamics import SweepConfig, landau_zener_oracle, transfer_window_map
from .trajectory_sim import ExperimentConfig, disjoint_bin_counts, simulate_hours

__all__ = [
    "UsageError",
    "load_config",
    "cmd_thermal",
    "cmd_lifetime",
    "cmd_simulate",
    "cmd_analyze",
    "cmd_sweep",
    "build_parser",
    "main",
]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_TWO_PI = 2.0 * math.pi


class UsageError(ValueError):
    """Bad flags or config content; maps to exit code 2."""


_CONSTANT_KEYS = frozenset(constants_to_config(MolecularConstants()))
_EXPERIMENT_KEYS = frozenset(ExperimentConfig().to_mapping()) | {
    "ramp_fidelity_1",
    "ramp_fidelity_2",
    "shelving_fidelity",
    "trial_duration_cap",
}


def load_config(
    path: str | Path | None, *, paper_defaults: bool = False
) -> tuple[MolecularConstants, ExperimentConfig]:
    """Split one key-value config file into molecular and experiment parts.

    ``paper_defaults`` ignores the file and pins every constant to the
    built-in values in one stroke.
    """
    if paper_defaults or path is None:
        return MolecularConstants(), ExperimentConfig()
    mapping = read_keyvalues(path)
    constant_part = {k: v for k, v in mapping.items() if k in _CONSTANT_KEYS}
    experiment_part = {k: v for k, v in mapping.items() if k in _EXPERIMENT_KEYS}
    unknown = set(mapping) - _CONSTANT_KEYS - _EXPERIMENT_KEYS
    if unknown:
        raise UsageError(
            f"{path}: unknown config keys: {', '.join(sorted(unknown))}"
        )
    try:
        constants = constants_from_config(constants_to_config(MolecularConstants()) | constant_part)
        config = ExperimentConfig.from_mapping(experiment_part)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from exc
    return constants, config


def _ensure_out(out: str | Path) -> Path:
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _write_manifest(
    out_dir: Path,
    argv: Sequence[str],
    constants: MolecularConstants,
    config: ExperimentConfig | None,
    seed: int | None,
    outputs: Mapping[str, Path],
    extra: Mapping[str, object] | None = None,
) -> Path:
    manifest = {
        "command": list(argv),
        "version": __version__,
        "seed": seed,
        "config": {
            "molecular": constants_to_config(constants),
            "experiment": config.to_mapping() if config is not None else None,
        },
        "outputs": {name: sha256_digest(p) for name, p in sorted(outputs.items())},
    }
    if extra:
        manifest.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def cmd_thermal(
    constants: MolecularConstants, temperatures: Sequence[float], out_dir: Path
) -> dict[str, Path]:
    """Thermal population table: one row per level, one column per T."""
    if not temperatures:
        raise UsageError("thermal needs at least one --temperature")
    levels = enumerate_levels(constants)
    dists = [thermal_distribution(constants, T) for T in temperatures]
    header = ["state", "v", "two_omega", "two_J", "energy_percm"] + [
        f"population_{T:g}K" for T in temperatures
    ]
    rows = (
        [s.label(), s.v, s.two_omega, s.two_J, level_energy(s, constants)]
        + [d.probability(s) for d in dists]
        for s in levels
    )
    path = out_dir / "thermal_populations.csv"
    write_table(path, header, rows)
    for T, d in zip(temperatures, dists):
        print(f"T={T:g} K: P(ground rotational) = {d.probability(ROT_GROUND):.6f}")
    return {"thermal_populations.csv": path}


def cmd_lifetime(
    constants: MolecularConstants, temperatures: Sequence[float], out_dir: Path
) -> dict[str, Path]:
    """Residence lifetime and thermal occupancy across temperatures."""
    if len(temperatures) == 0:
        raise UsageError("lifetime needs a nonempty temperature range")
    rows = lifetime_temperature_sweep(constants, temperatures)
    path = out_dir / "lifetime_vs_temperature.csv"
    write_table(
        path,
        ("temperature_K", "residence_lifetime_s", "thermal_ground_population"),
        rows,
    )
    for T, tau, pop in rows:
        print(f"T={T:g} K: lifetime = {tau:.3f} s, thermal ground population = {pop:.6f}")
    return {"lifetime_vs_temperature.csv": path}


def cmd_simulate(
    constants: MolecularConstants,
    config: ExperimentConfig,
    hours: float,
    out_dir: Path,
) -> dict[str, Path]:
    """Labeled Monte Carlo stream covering ``hours`` of wall-clock time."""
    if not hours > 0.0:
        raise UsageError(f"--hours must be positive, got {hours!r}")
    dataset = simulate_hours(config, hours, constants)
    path = out_dir / "dataset.csv"
    dataset.to_csv(path)
    print(
        f"simulated {len(dataset.records)} cycles ({hours:g} h), "
        f"ground occupancy {dataset.ground_occupancy():.6f}"
    )
    return {"dataset.csv": path}


def _detector_rates(
    constants: MolecularConstants, config: ExperimentConfig
) -> tuple[float, float]:
    """Thermal occupancy p_g and per-cycle leave probability p_s."""
    p_g = thermal_population(ROT_GROUND, constants, config.temperature)
    p_s = leave_probability_per_cycle(
        constants,
        config.temperature,
        config.cycle,
        collision_rate=config.collision_rate,
    )
    return p_g, p_s


def cmd_analyze(
    constants: MolecularConstants,
    config: ExperimentConfig,
    dataset_path: str | Path,
    mode: str,
    out_dir: Path,
    *,
    params_path: str | Path | None = None,
    window: int = 20,
) -> dict[str, Path]:
    """Analyze a measurement stream: histogram, run test, or HMM decode."""
    rows = read_dataset_csv(dataset_path)
    outcomes = np.array([r[1] for r in rows], dtype=np.int8)
    indices = [r[0] for r in rows]
    hidden = [r[3] for r in rows]
    labels = (
        np.array(hidden, dtype=np.int8) if all(h is not None for h in hidden) and rows else None
    )
    outputs: dict[str, Path] = {}
    report: dict[str, object] = {
        "mode": mode,
        "dataset": str(dataset_path),
        "n_records": int(outcomes.size),
    }
    if mode == "bins":
        p_g, p_s = _detector_rates(constants, config)
        observed = disjoint_bin_counts(outcomes, window)
        n_bins = outcomes.size // window
        model = NoiseSignalModel(
            p_b=config.p_bright_noise,
            p_d=config.detection_fidelity,
            p_s=p_s,
            p_g=p_g,
            bin=window,
        )
        prediction = bin_value_distribution(n_bins, model)
        noise_only = bin_value_distribution(n_bins, model, p_g=0.0)
        path = out_dir / "bins.csv"
        write_table(
            path,
            (
                "dark_count",
                "observed_bins",
                "predicted_bins",
                "predicted_band_low",
                "predicted_band_high",
                "noise_only_bins",
            ),
            (
                (
                    int(k),
                    float(observed[k]),
                    float(prediction.counts[k]),
                    float(prediction.band_low[k]),
                    float(prediction.band_high[k]),
                    float(noise_only.counts[k]),
                )
                for k in range(window + 1)
            ),
        )
        outputs["bins.csv"] = path
        report.update(
            window=window, n_bins=n_bins, p_ground=p_g, p_leave=p_s,
            observed_mean_darks=float(outcomes.mean() * window),
        )
    elif mode == "runs":
        result = observed_run_significance(outcomes, config.p_bright_noise)
        length, start = find_longest_run(outcomes)
        report.update(result.to_json_dict())
        report.update(longest_run=length, longest_run_start=start)
        print(
            f"longest dark run: {length} (start {start}), "
            f"Z = {result.z:.3f}, p = {result.p_value:.6g}"
        )
    elif mode == "hmm":
        if params_path is not None:
            try:
                params = HmmParams.from_mapping(read_keyvalues(params_path))
            except ValueError as exc:
                raise UsageError(f"{params_path}: {exc}") from exc
        else:
            p_g, p_s = _detector_rates(constants, config)
            params = default_params(
                p_b=config.p_bright_noise,
                p_d=config.detection_fidelity,
                p_s=p_s,
                p_g=p_g,
            )
        decoded = forward_backward(params, outcomes)
        path = out_dir / "decoded.csv"
        write_decoded_csv(path, outcomes, decoded, indices=indices)
        outputs["decoded.csv"] = path
        report.update(
            log_likelihood=decoded.log_likelihood,
            predicted_signal_records=int(decoded.states.sum()),
        )
        if labels is not None:
            metrics = evaluate(decoded.states, labels)
            report["metrics"] = {
                "precision": metrics.precision,
                "recall": metrics.recall,
                "f1": metrics.f1,
                "correct_positive": metrics.correct_positive,
                "incorrect_positive": metrics.incorrect_positive,
                "incorrect_negative": metrics.incorrect_negative,
            }
            print(
                f"precision {metrics.precision:.4f}, recall {metrics.recall:.4f}, "
                f"F1 {metrics.f1:.4f}"
            )
    else:
        raise UsageError(f"unknown analyze mode {mode!r}")
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    outputs["report.json"] = report_path
    return outputs


def cmd_sweep(
    cfg: SweepConfig,
    omega_mol_values: Sequence[float],
    out_dir: Path,
    *,
    threshold: float = 0.99,
) -> dict[str, Path]:
    """Transfer map over molecular frequencies plus the window report."""
    window_map = transfer_window_map(cfg, omega_mol_values, threshold=threshold)
    path = out_dir / "transfer_map.csv"
    write_table(
        path, ("omega_mol_Hz", "g_q_Hz", "transfer_probability"), window_map.rows()
    )
    report = {
        "threshold": threshold,
        "window_Hz": (
            None
            if window_map.window is None
            else [w / _TWO_PI for w in window_map.window]
        ),
        "landau_zener_transfer": landau_zener_oracle(cfg.g_q, cfg.ramp_rate),
    }
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if window_map.window is None:
        print("no grid point clears the transfer threshold")
    else:
        lo, hi = (w / _TWO_PI / 1e3 for w in window_map.window)
        print(f"transfer > {threshold:g} window: [{lo:.1f}, {hi:.1f}] kHz")
    return {"transfer_map.csv": path, "report.json": report_path}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpqlsim",
        description="Dipole-phonon logic desk simulator and analysis toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"dpqlsim {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key-value config file")
    common.add_argument("--seed", type=int, metavar="N", help="RNG seed override")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument(
        "--paper-defaults",
        action="store_true",
        help="ignore --config and pin every constant to the built-in defaults",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_thermal = sub.add_parser(
        "thermal", parents=[common], help="thermal populations per level"
    )
    p_thermal.add_argument(
        "--temperature",
        "-T",
        type=float,
        action="append",
        metavar="K",
        help="temperature in kelvin (repeatable)",
    )

    p_life = sub.add_parser(
        "lifetime", parents=[common], help="residence lifetime vs temperature"
    )
    p_life.add_argument("--t-min", type=float, default=200.0, metavar="K")
    p_life.add_argument("--t-max", type=float, default=600.0, metavar="K")
    p_life.add_argument("--t-points", type=int, default=5, metavar="N")

    p_sim = sub.add_parser(
        "simulate", parents=[common], help="Monte Carlo measurement stream"
    )
    p_sim.add_argument("--hours", type=float, required=True, metavar="H")
    p_sim.add_argument(
        "--temperature", type=float, metavar="K", help="override the BBR temperature"
    )

    p_an = sub.add_parser("analyze", parents=[common], help="analyze a dataset")
    p_an.add_argument("dataset", metavar="DATASET.CSV")
    p_an.add_argument("--mode", choices=("bins", "runs", "hmm"), required=True)
    p_an.add_argument("--params", metavar="PATH", help="HMM parameter file (key-value)")
    p_an.add_argument("--window", type=int, default=20, metavar="N", help="bin size")

    p_sweep = sub.add_parser(
        "sweep", parents=[common], help="trap-frequency sweep transfer map"
    )
    p_sweep.add_argument("--omega-min-khz", type=float, default=400.0, metavar="KHZ")
    p_sweep.add_argument("--omega-max-khz", type=float, default=500.0, metavar="KHZ")
    p_sweep.add_argument("--omega-points", type=int, default=51, metavar="N")
    p_sweep.add_argument("--threshold", type=float, default=0.99, metavar="P")
    return parser


def _run(args: argparse.Namespace, argv: Sequence[str]) -> int:
    constants, config = load_config(args.config, paper_defaults=args.paper_defaults)
    if args.seed is not None:
        config = replace(config, rng_seed=args.seed)
    if getattr(args, "temperature", None) is not None and args.command == "simulate":
        config = replace(config, temperature=args.temperature)
    out_dir = _ensure_out(args.out)

    if args.command == "thermal":
        temperatures = args.temperature or [config.temperature]
        outputs = cmd_thermal(constants, temperatures, out_dir)
    elif args.command == "lifetime":
        if args.t_points < 1 or args.t_min <= 0 or args.t_max < args.t_min:
            raise UsageError("lifetime needs t-min > 0, t-max >= t-min, t-points >= 1")
        temperatures = np.linspace(args.t_min, args.t_max, args.t_points)
        outputs = cmd_lifetime(constants, temperatures, out_dir)
    elif args.command == "simulate":
        outputs = cmd_simulate(constants, config, args.hours, out_dir)
    elif args.command == "analyze":
        outputs = cmd_analyze(
            constants,
            config,
            args.dataset,
            args.mode,
            out_dir,
            params_path=args.params,
            window=args.window,
        )
    elif args.command == "sweep":
        if args.omega_points < 1 or args.omega_max_khz <= args.omega_min_khz:
            raise UsageError("sweep needs omega-max > omega-min and points >= 1")
        grid = _TWO_PI * 1e3 * np.linspace(
            args.omega_min_khz, args.omega_max_khz, args.omega_points
        )
        outputs = cmd_sweep(SweepConfig(), grid, out_dir, threshold=args.threshold)
    else:  # pragma: no cover - argparse enforces the choices
        raise UsageError(f"unknown command {args.command!r}")

    manifest = _write_manifest(
        out_dir, argv, constants, config, args.seed, outputs
    )
    print(f"wrote {len(outputs)} output file(s) + {manifest.name} in {out_dir}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args, argv)
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except IntegrationError as exc:
        print(f"error: integration failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, OSError, ValueError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
