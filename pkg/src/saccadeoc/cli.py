"""Command-line front end: simulate, fit, sweep, verify.

Configuration is a flat key = value text file with dotted keys; every
value has a default so all commands run with no config at all. Outputs are
written atomically (temp file + rename) so interrupted runs never leave
partial files. Exit codes: 0 success, 1 check or pipeline failure,
2 usage/config errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import (
    SweepReport,
    amplitude_sweep,
    direction_sweep,
    main_sequence,
    main_sequence_points,
)
from .controller import CostSpec, backward_pass
from .dynamics import (
    DiscretizationMethod,
    Geometry,
    NoiseModel,
    PlantConfig,
    build_continuous,
    discretize,
)
from .errors import AnalysisError, ConfigurationError, IngestionError, SaccadeError
from .fitting import FitResult, predict_mean, relative_rms_error, two_stage_fit
from .signals import (
    RawRecording,
    Variability,
    analyze_condition,
    build_desired,
    generate_synthetic_subject,
    ingest_recording,
    reference_on_grid,
    target_label,
)
from .simulation import simulate_monte_carlo
from .verification import run_all_checks

SEED_ENV_VAR = "SACCADE_OC_SEED"

_DEFAULTS: dict[str, str] = {
    "plant.tau1": "0.223",
    "plant.tau2": "0.014",
    "plant.dt": "0.004",
    "plant.method": "exact",
    "cost.q": "fit",
    "cost.r_scale": "1.0",
    "noise.alpha": "fit",
    "data.input": "",
    # synthetic default; a 6 deg window at 240 Hz has too few samples for
    # the degree-7 differentiation, so generated subjects sample faster
    "data.sample_rate": "480",
    "data.trials": "30",
    "data.seed": "0",
    "data.duration_sd": "0.08",
    "data.amplitude_sd": "0.04",
    "data.position_noise": "0.05",
    "data.amplitude": "12",
    "data.direction": "180",
    "run.output_dir": ".",
    "run.bins": "50",
    "run.threshold": "0.10",
    "run.degree": "7",
    "run.trials": "0",
    "run.amplitudes": "6,8.5,10.4,12",
    "run.directions": "0,30,45,60,90",
}


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    """Flat dotted-key config: `section.key = value`, `#` comments."""
    mapping: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{line_no}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigurationError(f"{source}:{line_no}: empty key or value")
        if key in mapping:
            raise ConfigurationError(f"{source}:{line_no}: duplicate key {key!r}")
        mapping[key] = value
    return mapping


@dataclass(frozen=True)
class RunConfig:
    tau1: float
    tau2: float
    dt: float
    method: DiscretizationMethod
    q: float | None             # None = fit
    r_scale: float
    alpha: float | None         # None = fit
    input_path: str | None
    sample_rate: float
    trials_per_target: int
    seed: int
    variability: Variability
    fit_amplitude: float
    fit_direction: float
    output_dir: str
    bins: int
    threshold: float
    degree: int
    mc_trials: int
    sweep_amplitudes: tuple[float, ...]
    sweep_directions: tuple[float, ...]

    @staticmethod
    def load(path: str | None) -> "RunConfig":
        mapping = dict(_DEFAULTS)
        if path is not None:
            p = Path(path)
            if not p.is_file():
                raise ConfigurationError(f"config file not found: {path}")
            overrides = parse_config_text(p.read_text(), source=str(path))
            unknown = sorted(set(overrides) - set(_DEFAULTS))
            if unknown:
                raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
            mapping.update(overrides)
        return RunConfig._from_mapping(mapping)

    @staticmethod
    def _from_mapping(m: dict[str, str]) -> "RunConfig":
        def fnum(key: str) -> float:
            try:
                return float(m[key])
            except ValueError:
                raise ConfigurationError(f"{key} must be a number, got {m[key]!r}") from None

        def inum(key: str) -> int:
            try:
                return int(m[key])
            except ValueError:
                raise ConfigurationError(f"{key} must be an integer, got {m[key]!r}") from None

        def fit_or_num(key: str) -> float | None:
            return None if m[key].strip().lower() == "fit" else fnum(key)

        def float_list(key: str) -> tuple[float, ...]:
            try:
                return tuple(float(part) for part in m[key].split(","))
            except ValueError:
                raise ConfigurationError(f"{key} must be a comma-separated list") from None

        try:
            method = DiscretizationMethod(m["plant.method"])
        except ValueError:
            raise ConfigurationError(
                f"plant.method must be 'exact' or 'euler', got {m['plant.method']!r}"
            ) from None
        input_path = m["data.input"].strip() or None
        if input_path is not None and not Path(input_path).exists():
            raise ConfigurationError(f"data.input path not found: {input_path}")
        return RunConfig(
            tau1=fnum("plant.tau1"),
            tau2=fnum("plant.tau2"),
            dt=fnum("plant.dt"),
            method=method,
            q=fit_or_num("cost.q"),
            r_scale=fnum("cost.r_scale"),
            alpha=fit_or_num("noise.alpha"),
            input_path=input_path,
            sample_rate=fnum("data.sample_rate"),
            trials_per_target=inum("data.trials"),
            seed=inum("data.seed"),
            variability=Variability(
                duration_sd=fnum("data.duration_sd"),
                amplitude_sd=fnum("data.amplitude_sd"),
                position_noise_deg=fnum("data.position_noise"),
            ),
            fit_amplitude=fnum("data.amplitude"),
            fit_direction=fnum("data.direction"),
            output_dir=m["run.output_dir"],
            bins=inum("run.bins"),
            threshold=fnum("run.threshold"),
            degree=inum("run.degree"),
            mc_trials=inum("run.trials"),
            sweep_amplitudes=float_list("run.amplitudes"),
            sweep_directions=float_list("run.directions"),
        )


def _effective_seed(cfg: RunConfig, flag_seed: int | None) -> int:
    if flag_seed is not None:
        return flag_seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigurationError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from None
    return cfg.seed


def _system(cfg: RunConfig, geometry: Geometry):
    plant = PlantConfig(tau1=cfg.tau1, tau2=cfg.tau2, dt=cfg.dt, geometry=geometry)
    return discretize(build_continuous(plant), plant.dt, cfg.method)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_json(path: Path, payload) -> None:
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _trajectory_csv(traj) -> str:
    if traj.axes == 1:
        header = "time_s,theta_h_deg,vel_h_degps"
    else:
        header = "time_s,theta_h_deg,vel_h_degps,theta_v_deg,vel_v_degps"
    lines = [header]
    for i in range(traj.n_samples):
        cells = [repr(float(traj.time_s[i]))]
        for ax in range(traj.axes):
            cells.append(repr(float(traj.displacement[i, ax])))
            cells.append(repr(float(traj.velocity[i, ax])))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _load_recording(cfg: RunConfig, seed: int, amplitudes, directions) -> RawRecording:
    """Recorded data when configured, otherwise a seeded synthetic subject.

    A directory input is read as one CSV per condition, named
    `<label>.csv`; a single file is one unlabeled condition.
    """
    if cfg.input_path is None:
        return generate_synthetic_subject(
            amplitudes,
            directions,
            cfg.trials_per_target,
            cfg.variability,
            sample_rate_hz=cfg.sample_rate,
            seed=seed,
        )
    path = Path(cfg.input_path)
    if path.is_dir():
        trials = []
        for f in sorted(path.glob("*.csv")):
            rec = ingest_recording(f, cfg.sample_rate)
            trials.extend(dataclasses.replace(t, target=f.stem) for t in rec.trials)
        if not trials:
            raise IngestionError(f"{path}: no .csv condition files found")
        return RawRecording(sample_rate_hz=cfg.sample_rate, trials=trials)
    return ingest_recording(path, cfg.sample_rate)


def _condition_profile(cfg: RunConfig, recording: RawRecording, label: str):
    target = label if any(t.target for t in recording.trials) else None
    return analyze_condition(
        recording,
        target=target,
        bins=cfg.bins,
        threshold_fraction=cfg.threshold,
        degree=cfg.degree,
    )


def _axes_for_direction(direction_deg: float) -> tuple[int, ...]:
    return (0,) if direction_deg % 180.0 == 0.0 else (0, 1)


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args.config)
    seed = _effective_seed(cfg, args.seed)
    trials = cfg.mc_trials if args.trials is None else args.trials
    if cfg.q is None or cfg.alpha is None:
        raise ConfigurationError(
            "simulate needs fixed parameters: set cost.q and noise.alpha to numbers"
        )
    label = target_label(cfg.fit_amplitude, cfg.fit_direction)
    axes = _axes_for_direction(cfg.fit_direction)
    geometry = Geometry.HORIZONTAL if len(axes) == 1 else Geometry.OBLIQUE
    recording = _load_recording(cfg, seed, [cfg.fit_amplitude], [cfg.fit_direction])
    profile = _condition_profile(cfg, recording, label)
    desired = build_desired(
        profile.velocity[:, list(axes)], profile.duration_s, cfg.dt, cfg.fit_direction, label
    )
    system = _system(cfg, geometry)
    traj = predict_mean(system, desired, cfg.q, cfg.alpha, cfg.r_scale)
    disp_ref, vel_ref = reference_on_grid(profile, cfg.dt, axes=axes)
    out = Path(args.out if args.out is not None else cfg.output_dir)
    _atomic_write(out / "trajectory.csv", _trajectory_csv(traj))
    summary = {
        "label": label,
        "q": cfg.q,
        "alpha": cfg.alpha,
        "seed": seed,
        "dt": cfg.dt,
        "n_steps": desired.n_steps,
        "desired_amplitude_deg": desired.amplitude,
        "velocity_error_pct": relative_rms_error(traj.velocity, vel_ref),
        "displacement_error_pct": relative_rms_error(traj.displacement, disp_ref),
        "monte_carlo": None,
    }
    if trials > 0:
        cost = CostSpec.velocity_tracking(cfg.q, desired.velocity_for_tracking(), cfg.r_scale)
        schedule = backward_pass(system, cost, cfg.alpha)
        stats = simulate_monte_carlo(
            system, schedule, np.zeros(system.n), desired.n_steps,
            trials, NoiseModel(cfg.alpha), seed=seed,
        )
        summary["monte_carlo"] = {
            "trials": trials,
            "final_mean_deg": [float(v) for v in stats.final_mean],
            "final_std_deg": [float(v) for v in stats.final_std],
        }
    _write_json(out / "simulate.json", summary)
    return 0


def _fit_on_reference(cfg: RunConfig, seed: int, fit_noise: bool) -> tuple[FitResult, str]:
    stage = "load-data"
    try:
        recording = _load_recording(cfg, seed, [cfg.fit_amplitude], [cfg.fit_direction])
        stage = "pipeline"
        label = target_label(cfg.fit_amplitude, cfg.fit_direction)
        profile = _condition_profile(cfg, recording, label)
        axes = _axes_for_direction(cfg.fit_direction)
        desired = build_desired(
            profile.velocity[:, list(axes)], profile.duration_s, cfg.dt,
            cfg.fit_direction, label,
        )
        disp_ref, vel_ref = reference_on_grid(profile, cfg.dt, axes=axes)
        stage = "fit"
        system = _system(cfg, Geometry.HORIZONTAL if len(axes) == 1 else Geometry.OBLIQUE)
        result = two_stage_fit(
            system, desired, vel_ref, disp_ref,
            r_scale=cfg.r_scale, fit_noise=fit_noise,
        )
        return result, label
    except SaccadeError as exc:
        raise SaccadeError(f"fit failed during {stage}: {exc}") from exc


def cmd_fit(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args.config)
    seed = _effective_seed(cfg, args.seed)
    if cfg.q is not None:
        raise ConfigurationError("fit expects cost.q = fit")
    fit_noise = args.stage == "two-stage" and cfg.alpha is None
    result, label = _fit_on_reference(cfg, seed, fit_noise)
    payload = result.as_dict()
    payload.update({"condition": label, "seed": seed, "stage": args.stage})
    out = Path(args.out if args.out is not None else cfg.output_dir)
    _write_json(out / "fit.json", payload)
    return 0


def _fit_result_for_sweep(cfg: RunConfig, args: argparse.Namespace, seed: int) -> FitResult:
    if args.fit_json is not None:
        path = Path(args.fit_json)
        if not path.is_file():
            raise ConfigurationError(f"fit result file not found: {path}")
        raw = json.loads(path.read_text())
        return FitResult(
            q=float(raw["q"]),
            alpha=float(raw["alpha"]),
            velocity_error_pct=float(raw["velocity_error_pct"]),
            displacement_error_pct=raw.get("displacement_error_pct"),
            q_evaluations=int(raw.get("q_evaluations", 0)),
            alpha_evaluations=int(raw.get("alpha_evaluations", 0)),
            q_bracket=tuple(raw.get("q_bracket", (0.0, 0.0))),
            alpha_bracket=tuple(raw.get("alpha_bracket", (0.0, 0.0))),
        )
    if cfg.q is not None:
        return FitResult(
            q=cfg.q, alpha=cfg.alpha if cfg.alpha is not None else 0.0,
            velocity_error_pct=0.0, displacement_error_pct=None,
            q_evaluations=0, alpha_evaluations=0,
            q_bracket=(cfg.q, cfg.q), alpha_bracket=(0.0, 0.0),
        )
    return _fit_on_reference(cfg, seed, fit_noise=cfg.alpha is None)[0]


def _sweep_rows(report: SweepReport) -> str:
    lines = ["label,velocity_error_pct,displacement_error_pct,"
             "data_amplitude_deg,model_amplitude_deg,"
             "data_peak_degps,model_peak_degps"]
    for c in report.conditions:
        lines.append(",".join([
            c.label,
            repr(float(c.velocity_error_pct)),
            repr(float(c.displacement_error_pct)),
            repr(float(c.data_amplitude)),
            repr(float(c.model_amplitude)),
            repr(float(c.data_peak_speed)),
            repr(float(c.model_peak_speed)),
        ]))
    return "\n".join(lines) + "\n"


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args.config)
    seed = _effective_seed(cfg, args.seed)
    fit = _fit_result_for_sweep(cfg, args, seed)
    if args.kind == "amplitude":
        recording = _load_recording(cfg, seed, cfg.sweep_amplitudes, [cfg.fit_direction])
        system = _system(cfg, Geometry.HORIZONTAL)
        report = amplitude_sweep(
            recording, system, fit, cfg.sweep_amplitudes,
            direction_deg=cfg.fit_direction, bins=cfg.bins, r_scale=cfg.r_scale,
        )
    else:
        recording = _load_recording(cfg, seed, [cfg.fit_amplitude], cfg.sweep_directions)
        system = _system(cfg, Geometry.OBLIQUE)
        report = direction_sweep(
            recording, system, fit, cfg.sweep_directions,
            amplitude=cfg.fit_amplitude, bins=cfg.bins, r_scale=cfg.r_scale,
        )
    out = Path(args.out if args.out is not None else cfg.output_dir)
    _atomic_write(out / f"sweep_{args.kind}.csv", _sweep_rows(report))
    present = report.present()
    if not present:
        raise AnalysisError(f"{args.kind} sweep: no analyzable conditions")
    vel = [c.velocity_error_pct for c in present]
    disp = [c.displacement_error_pct for c in present]
    summary = {
        "kind": report.kind,
        "q": report.q,
        "alpha": report.alpha,
        "seed": seed,
        "conditions": [c.label for c in report.conditions],
        "absent": [c.label for c in report.conditions if not c.present],
        "velocity_error_pct": {"mean": float(np.mean(vel)), "std": float(np.std(vel))},
        "displacement_error_pct": {"mean": float(np.mean(disp)), "std": float(np.std(disp))},
    }
    if args.kind == "amplitude" and len(present) >= 3:
        ms = main_sequence(main_sequence_points(report))
        summary["main_sequence"] = {
            source: {"slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared}
            for source, f in ms.fits.items()
        }
        summary["peak_velocity_error_pct"] = ms.peak_velocity_error_pct
        summary["amplitude_error_pct"] = ms.amplitude_error_pct
    _write_json(out / f"sweep_{args.kind}.json", summary)
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args.config)
    seed = _effective_seed(cfg, args.seed)
    report = run_all_checks(
        seed=seed,
        oracle_systems=args.systems,
        probes_per_step=args.probes,
        debug_flip_sign=args.debug_flip_sign,
    )
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"check {check.name}: {status} "
              f"(metric={check.metric:.3e}, threshold={check.threshold:.1e}) {check.detail}")
    if args.json:
        out = Path(args.out if args.out is not None else cfg.output_dir)
        payload = {
            "passed": report.passed,
            "seed": seed,
            "checks": [dataclasses.asdict(c) for c in report.checks],
        }
        _write_json(out / "verify.json", payload)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="saccadeoc",
        description="Velocity-tracking stochastic optimal controller for saccades",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=None, help="flat key=value config file")
        p.add_argument("--seed", type=int, default=None,
                       help=f"override config seed (also {SEED_ENV_VAR})")
        p.add_argument("--out", default=None, help="output directory")

    p_sim = sub.add_parser("simulate", help="mean trajectory and optional ensemble")
    common(p_sim)
    p_sim.add_argument("--trials", type=int, default=None,
                       help="Monte-Carlo trials (0 = mean only)")
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="two-stage (q, alpha) estimation")
    common(p_fit)
    p_fit.add_argument("--stage", choices=("two-stage", "q-only"), default="two-stage")
    p_fit.set_defaults(func=cmd_fit)

    p_sweep = sub.add_parser("sweep", help="fixed-parameter generalization tables")
    common(p_sweep)
    p_sweep.add_argument("--kind", choices=("amplitude", "direction"), required=True)
    p_sweep.add_argument("--fit-json", default=None, help="reuse a saved fit result")
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="independent correctness checks")
    common(p_verify)
    p_verify.add_argument("--systems", type=int, default=50,
                          help="randomized systems for the oracle check")
    p_verify.add_argument("--probes", type=int, default=20,
                          help="value-form probes per step")
    p_verify.add_argument("--json", action="store_true", help="also write verify.json")
    p_verify.add_argument("--debug-flip-sign", action="store_true",
                          help="corrupt the recursion input (negative control)")
    p_verify.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, IngestionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SaccadeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
