"""Aggregate analyses: amplitude and direction sweeps, main-sequence fits.

Both sweeps reuse parameters fitted once on a single reference condition
and measure how well the resulting controller generalizes: each condition
gets its own desired signal (from that condition's averaged data) while
q and alpha stay fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dynamics import DiscreteSystem, Geometry
from .errors import AnalysisError, ContractError, DetectionError, MetricError
from .fitting import FitResult, predict_mean, relative_rms_error
from .signals import (
    MeanProfile,
    RawRecording,
    analyze_condition,
    build_desired,
    reference_on_grid,
    target_label,
)

DEFAULT_AMPLITUDES = (6.0, 8.5, 10.4, 12.0)
DEFAULT_DIRECTIONS = (0.0, 30.0, 45.0, 60.0, 90.0)

# An axis whose reference velocity carries less than this fraction of the
# vector RMS is treated as degenerate (pure noise) and excluded.
AXIS_RMS_FLOOR = 0.05


class PointSource(Enum):
    DATA = "data"
    MODEL = "model"


@dataclass(frozen=True)
class ConditionResult:
    label: str
    present: bool
    velocity_error_pct: float
    displacement_error_pct: float
    data_amplitude: float
    model_amplitude: float
    data_peak_speed: float
    model_peak_speed: float

    @staticmethod
    def absent(label: str) -> "ConditionResult":
        nan = float("nan")
        return ConditionResult(label, False, nan, nan, nan, nan, nan, nan)


@dataclass(frozen=True)
class SweepReport:
    kind: str
    conditions: tuple[ConditionResult, ...]
    q: float
    alpha: float

    def __post_init__(self) -> None:
        labels = [c.label for c in self.conditions]
        if len(set(labels)) != len(labels):
            raise ContractError("condition labels must be unique")

    def condition(self, label: str) -> ConditionResult:
        for c in self.conditions:
            if c.label == label:
                return c
        raise AnalysisError(f"no condition labelled {label!r}")

    def present(self) -> tuple[ConditionResult, ...]:
        return tuple(c for c in self.conditions if c.present)


@dataclass(frozen=True)
class SweepSummary:
    """Per-condition mean and sample std across subjects."""

    kind: str
    labels: tuple[str, ...]
    velocity_mean: np.ndarray
    velocity_std: np.ndarray
    displacement_mean: np.ndarray
    displacement_std: np.ndarray
    n_subjects: int


@dataclass(frozen=True)
class MainSequencePoint:
    amplitude: float
    peak_velocity: float
    source: PointSource
    condition: str = ""

    def __post_init__(self) -> None:
        if not (self.amplitude > 0.0 and self.peak_velocity > 0.0):
            raise ContractError("main-sequence points need positive amplitude and velocity")


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    r_squared: float
    residuals: tuple[float, ...]


@dataclass(frozen=True)
class MainSequenceResult:
    fits: dict[str, LineFit]                     # keyed by source value
    peak_velocity_error_pct: dict[str, float]    # keyed by condition label
    amplitude_error_pct: dict[str, float]


def _aggregate_axis_errors(predicted: np.ndarray, reference: np.ndarray) -> float:
    """Per-axis relative RMS errors combined by root mean square.

    Axes whose reference carries almost no signal are excluded; with a
    single live axis this reduces to the plain metric.
    """
    total = float(np.linalg.norm(reference))
    if total == 0.0:
        raise MetricError("reference is identically zero on every axis")
    errors = []
    for ax in range(reference.shape[1]):
        if np.linalg.norm(reference[:, ax]) < AXIS_RMS_FLOOR * total:
            continue
        errors.append(relative_rms_error(predicted[:, ax], reference[:, ax]))
    if not errors:
        raise MetricError("every axis fell below the signal floor")
    return float(math.sqrt(np.mean(np.square(errors))))


def evaluate_condition(
    system: DiscreteSystem,
    profile: MeanProfile,
    q: float,
    alpha: float,
    label: str,
    axes: tuple[int, ...],
    direction_deg: float = 0.0,
    r_scale: float = 1.0,
) -> ConditionResult:
    """Simulate one condition at fixed parameters and score it against its data."""
    desired = build_desired(
        profile.velocity[:, list(axes)], profile.duration_s, system.dt, direction_deg, label
    )
    traj = predict_mean(system, desired, q, alpha, r_scale)
    disp_ref, vel_ref = reference_on_grid(profile, system.dt, axes=axes)
    # Amplitude on both sides is the time integral of the padded velocity;
    # the raw displacement span would lack the on/off ramp area the model
    # necessarily accrues while entering and leaving the movement window.
    data_amp = np.sum(0.5 * (vel_ref[1:] + vel_ref[:-1]) * system.dt, axis=0)
    return ConditionResult(
        label=label,
        present=True,
        velocity_error_pct=_aggregate_axis_errors(traj.velocity, vel_ref),
        displacement_error_pct=_aggregate_axis_errors(traj.displacement, disp_ref),
        data_amplitude=float(np.linalg.norm(data_amp)),
        model_amplitude=float(np.linalg.norm(traj.displacement[-1] - traj.displacement[0])),
        data_peak_speed=float(np.max(np.linalg.norm(vel_ref, axis=1))),
        model_peak_speed=float(np.max(np.linalg.norm(traj.velocity, axis=1))),
    )


def amplitude_sweep(
    recording: RawRecording,
    system: DiscreteSystem,
    fit: FitResult,
    amplitudes: tuple[float, ...] = DEFAULT_AMPLITUDES,
    direction_deg: float = 180.0,
    bins: int = 50,
    r_scale: float = 1.0,
) -> SweepReport:
    """Fixed-parameter generalization across amplitudes along one axis."""
    if system.geometry is not Geometry.HORIZONTAL:
        raise ContractError("amplitude sweep runs on the single-axis system")
    conditions = []
    for amp in amplitudes:
        label = target_label(amp, direction_deg)
        try:
            profile = analyze_condition(recording, target=label, bins=bins)
        except (AnalysisError, DetectionError, ContractError):
            # a condition that cannot be analyzed (missing target, window too
            # short for the differentiator, no detectable movement) is
            # reported absent instead of sinking the whole sweep
            conditions.append(ConditionResult.absent(label))
            continue
        conditions.append(
            evaluate_condition(system, profile, fit.q, fit.alpha, label,
                               axes=(0,), direction_deg=direction_deg, r_scale=r_scale)
        )
    return SweepReport("amplitude", tuple(conditions), fit.q, fit.alpha)


def direction_sweep(
    recording: RawRecording,
    system: DiscreteSystem,
    fit: FitResult,
    directions: tuple[float, ...] = DEFAULT_DIRECTIONS,
    amplitude: float = 12.0,
    bins: int = 50,
    r_scale: float = 1.0,
) -> SweepReport:
    """Fixed-parameter generalization across directions at one eccentricity."""
    if system.geometry is not Geometry.OBLIQUE:
        raise ContractError("direction sweep needs the two-axis system")
    conditions = []
    for direction in directions:
        label = target_label(amplitude, direction)
        try:
            profile = analyze_condition(recording, target=label, bins=bins)
        except (AnalysisError, DetectionError, ContractError):
            # a condition that cannot be analyzed (missing target, window too
            # short for the differentiator, no detectable movement) is
            # reported absent instead of sinking the whole sweep
            conditions.append(ConditionResult.absent(label))
            continue
        conditions.append(
            evaluate_condition(system, profile, fit.q, fit.alpha, label,
                               axes=(0, 1), direction_deg=direction, r_scale=r_scale)
        )
    return SweepReport("direction", tuple(conditions), fit.q, fit.alpha)


def summarize_sweeps(reports: list[SweepReport]) -> SweepSummary:
    """Condition-wise mean and std across subjects, ignoring absent conditions."""
    if not reports:
        raise ContractError("no sweep reports to summarize")
    kind = reports[0].kind
    labels = tuple(c.label for c in reports[0].conditions)
    for r in reports:
        if r.kind != kind or tuple(c.label for c in r.conditions) != labels:
            raise ContractError("sweep reports disagree on kind or condition set")
    vel = np.array([[c.velocity_error_pct for c in r.conditions] for r in reports])
    disp = np.array([[c.displacement_error_pct for c in r.conditions] for r in reports])
    ddof = 1 if len(reports) > 1 else 0
    return SweepSummary(
        kind=kind,
        labels=labels,
        velocity_mean=np.nanmean(vel, axis=0),
        velocity_std=np.nanstd(vel, axis=0, ddof=ddof),
        displacement_mean=np.nanmean(disp, axis=0),
        displacement_std=np.nanstd(disp, axis=0, ddof=ddof),
        n_subjects=len(reports),
    )


def main_sequence_points(report: SweepReport) -> list[MainSequencePoint]:
    """Paired data/model amplitude-velocity points from a sweep."""
    points = []
    for c in report.present():
        points.append(MainSequencePoint(c.data_amplitude, c.data_peak_speed,
                                        PointSource.DATA, c.label))
        points.append(MainSequencePoint(c.model_amplitude, c.model_peak_speed,
                                        PointSource.MODEL, c.label))
    return points


def _line_fit(amplitudes: np.ndarray, velocities: np.ndarray) -> LineFit:
    coeffs = np.polynomial.polynomial.polyfit(amplitudes, velocities, 1)
    predicted = coeffs[0] + coeffs[1] * amplitudes
    residuals = velocities - predicted
    ss_res = float(np.sum(residuals**2))
    ss_tot = float(np.sum((velocities - velocities.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 and ss_res == 0.0 else 1.0 - ss_res / ss_tot
    return LineFit(float(coeffs[1]), float(coeffs[0]), r_squared, tuple(residuals))


def main_sequence(points: list[MainSequencePoint]) -> MainSequenceResult:
    """Linear peak-velocity-vs-amplitude fits per source, plus paired errors.

    Every source present must contribute at least 3 distinct amplitudes.
    Conditions carrying both a data and a model point also get relative
    model-vs-data errors for peak velocity and amplitude.
    """
    if not points:
        raise ContractError("no main-sequence points")
    fits: dict[str, LineFit] = {}
    for source in PointSource:
        group = [p for p in points if p.source is source]
        if not group:
            continue
        amps = np.array([p.amplitude for p in group])
        vels = np.array([p.peak_velocity for p in group])
        if np.unique(amps).size < 3:
            raise ContractError(
                f"{source.value} points span fewer than 3 distinct amplitudes"
            )
        fits[source.value] = _line_fit(amps, vels)
    vel_err: dict[str, float] = {}
    amp_err: dict[str, float] = {}
    by_condition: dict[str, dict[PointSource, MainSequencePoint]] = {}
    for p in points:
        if p.condition:
            by_condition.setdefault(p.condition, {})[p.source] = p
    for label, pair in by_condition.items():
        if PointSource.DATA in pair and PointSource.MODEL in pair:
            data, model = pair[PointSource.DATA], pair[PointSource.MODEL]
            vel_err[label] = 100.0 * abs(model.peak_velocity - data.peak_velocity) / data.peak_velocity
            amp_err[label] = 100.0 * abs(model.amplitude - data.amplitude) / data.amplitude
    return MainSequenceResult(fits=fits, peak_velocity_error_pct=vel_err,
                              amplitude_error_pct=amp_err)
