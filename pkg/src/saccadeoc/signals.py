"""Behavioral data pipeline: recordings, smoothing, detection, averaging.

Recordings hold eye position sampled at a fixed rate, two columns per trial
(horizontal and vertical, degrees). Each trial is smoothed with a single
least-squares polynomial over the whole trial window and differentiated
analytically; the movement is isolated with a relative speed threshold;
detected segments are rescaled to a common normalized time base and
averaged bin by bin. The averaged velocity becomes the tracking target for
the controller after resampling onto its grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import AnalysisError, ConfigurationError, ContractError, DetectionError, IngestionError

CSV_HEADER = ["trial", "time_s", "theta_h_deg", "theta_v_deg"]
DEFAULT_BINS = 50
DEFAULT_THRESHOLD = 0.10
DEFAULT_DEGREE = 7
DEFAULT_SAMPLE_RATE = 240.0

# Peak velocity grows linearly with amplitude: v_p = PEAK_RULE[0] + PEAK_RULE[1] * A.
# Durations follow from the closed-form peak of the smooth template.
DEFAULT_PEAK_RULE = (150.0, 22.0)
DEFAULT_LEAD_S = 0.008


@dataclass(frozen=True)
class TrialRecording:
    """One trial: times (s) and positions (deg), columns (horizontal, vertical)."""

    time_s: np.ndarray
    position: np.ndarray
    target: str = ""

    def __post_init__(self) -> None:
        if self.time_s.ndim != 1 or self.position.shape != (self.time_s.size, 2):
            raise ContractError("trial needs times (L,) and positions (L, 2)")
        if self.time_s.size >= 2 and np.any(np.diff(self.time_s) <= 0.0):
            raise ContractError("trial times must be strictly increasing")


@dataclass(frozen=True)
class RawRecording:
    """A set of trials sampled at one rate, optionally labelled by subject."""

    sample_rate_hz: float
    trials: list[TrialRecording]
    subject: str = ""

    def __post_init__(self) -> None:
        if self.sample_rate_hz <= 0.0:
            raise ConfigurationError("sample rate must be positive")
        if not self.trials:
            raise ContractError("recording holds no trials")

    def for_target(self, target: str) -> list[TrialRecording]:
        picked = [t for t in self.trials if t.target == target]
        if not picked:
            raise AnalysisError(f"no trials labelled {target!r}")
        return picked


@dataclass(frozen=True)
class SaccadeSegment:
    """Detected movement span, bounded by the outer threshold samples."""

    onset: int
    offset: int
    peak_index: int
    duration_s: float
    amplitude: float            # euclidean norm of the displacement change
    delta: np.ndarray           # signed per-axis displacement change
    peak_speed: float

    def __post_init__(self) -> None:
        if not self.onset < self.peak_index < self.offset:
            raise ContractError("segment must order onset < peak < offset")


@dataclass(frozen=True)
class MeanProfile:
    """Trial-averaged movement on normalized time."""

    bins: int
    duration_s: float
    displacement: np.ndarray    # (bins, axes)
    velocity: np.ndarray        # (bins, axes)
    n_trials: int
    amplitudes: np.ndarray      # per-trial detected amplitude norms
    peak_speeds: np.ndarray     # per-trial peak speeds

    @property
    def axes(self) -> int:
        return self.displacement.shape[1]

    @property
    def peak_mean_speed(self) -> float:
        return float(np.max(np.linalg.norm(self.velocity, axis=1)))

    @property
    def mean_amplitude(self) -> float:
        return float(np.linalg.norm(self.displacement[-1] - self.displacement[0]))


@dataclass(frozen=True)
class DesiredSignal:
    """Tracking target on the controller grid, zero velocity at both ends."""

    dt: float
    velocity: np.ndarray        # (N, axes)
    displacement: np.ndarray    # running integral of velocity, for reporting
    amplitude: float            # norm of the integrated displacement change
    direction_deg: float = 0.0
    label: str = ""

    @property
    def n_steps(self) -> int:
        return self.velocity.shape[0]

    @property
    def axes(self) -> int:
        return self.velocity.shape[1]

    def velocity_for_tracking(self) -> np.ndarray:
        """Velocity shaped for CostSpec: 1-D for a single axis."""
        return self.velocity[:, 0] if self.axes == 1 else self.velocity


@dataclass(frozen=True)
class Variability:
    """Trial-to-trial jitter of the synthetic generator."""

    duration_sd: float = 0.08       # lognormal sigma on duration
    amplitude_sd: float = 0.04      # relative normal sigma on amplitude
    position_noise_deg: float = 0.05

    def __post_init__(self) -> None:
        for name in ("duration_sd", "amplitude_sd", "position_noise_deg"):
            v = getattr(self, name)
            if v < 0.0 or not math.isfinite(v):
                raise ConfigurationError(f"{name} must be non-negative and finite")
        if self.duration_sd > 0.5 or self.amplitude_sd > 0.5:
            raise ConfigurationError("jitter above 50% is not a plausible subject")


def minimum_jerk_displacement(tau: np.ndarray) -> np.ndarray:
    """Normalized smooth reach: 0 at tau=0, 1 at tau=1, zero end velocities."""
    tau = np.clip(tau, 0.0, 1.0)
    return 10.0 * tau**3 - 15.0 * tau**4 + 6.0 * tau**5


def minimum_jerk_velocity(tau: np.ndarray) -> np.ndarray:
    """Derivative of the normalized template; peaks at 1.875 at tau = 1/2."""
    tau = np.clip(tau, 0.0, 1.0)
    return 30.0 * tau**2 - 60.0 * tau**3 + 30.0 * tau**4


def target_label(amplitude: float, direction: float) -> str:
    return f"a{amplitude:g}_d{direction:g}"


def ingest_recording(path, sample_rate_hz: float = DEFAULT_SAMPLE_RATE) -> RawRecording:
    """Parse a recording CSV (columns: trial,time_s,theta_h_deg,theta_v_deg).

    Trials must be contiguous blocks with strictly increasing times; any
    missing or unparsable field is rejected naming the file line.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise IngestionError(f"{path}: empty file") from None
            if [h.strip() for h in header] != CSV_HEADER:
                raise IngestionError(
                    f"{path}: header must be {','.join(CSV_HEADER)!r}, got {','.join(header)!r}"
                )
            rows: list[tuple[int, float, float, float]] = []
            for line_no, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 4 or any(not f.strip() for f in row):
                    raise IngestionError(f"{path}:{line_no}: expected 4 non-empty fields")
                try:
                    parsed = (int(row[0]), float(row[1]), float(row[2]), float(row[3]))
                except ValueError:
                    raise IngestionError(f"{path}:{line_no}: unparsable field") from None
                if not all(math.isfinite(v) for v in parsed[1:]):
                    raise IngestionError(f"{path}:{line_no}: non-finite sample")
                if rows and rows[-1][0] == parsed[0] and parsed[1] <= rows[-1][1]:
                    raise IngestionError(f"{path}:{line_no}: non-increasing time within trial")
                rows.append(parsed)
    except OSError as exc:
        raise IngestionError(f"{path}: {exc}") from exc
    if not rows:
        raise IngestionError(f"{path}: no data rows")

    trials: list[TrialRecording] = []
    seen: set[int] = set()
    start = 0
    for i in range(1, len(rows) + 1):
        if i < len(rows) and rows[i][0] == rows[start][0]:
            continue
        trial_id = rows[start][0]
        if trial_id in seen:
            raise IngestionError(f"{path}: trial {trial_id} split into non-contiguous blocks")
        seen.add(trial_id)
        block = rows[start:i]
        t = np.array([r[1] for r in block])
        pos = np.array([[r[2], r[3]] for r in block])
        trials.append(TrialRecording(time_s=t, position=pos))
        start = i
    return RawRecording(sample_rate_hz=sample_rate_hz, trials=trials)


def export_recording(recording: RawRecording, path) -> None:
    """Write the CSV counterpart of `ingest_recording`; exact float round trip."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for idx, trial in enumerate(recording.trials):
            for t, (h, v) in zip(trial.time_s, trial.position):
                writer.writerow([idx, repr(float(t)), repr(float(h)), repr(float(v))])


def smooth_differentiate(
    time_s: np.ndarray,
    position: np.ndarray,
    degree: int = DEFAULT_DEGREE,
) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares polynomial smoothing with an analytic derivative.

    One polynomial per axis over the whole window, fitted on the time grid
    rescaled to [-1, 1]. Returns (smoothed position, velocity) with the
    input shape. Requires at least 2 (degree + 1) samples.
    """
    time_s = np.asarray(time_s, dtype=float)
    position = np.asarray(position, dtype=float)
    squeeze = position.ndim == 1
    if squeeze:
        position = position[:, None]
    if position.shape[0] != time_s.size:
        raise ContractError("time and position lengths differ")
    if degree < 1:
        raise ContractError("degree must be at least 1")
    if time_s.size < 2 * (degree + 1):
        raise ContractError(
            f"need at least {2 * (degree + 1)} samples for degree {degree}, got {time_s.size}"
        )
    if np.unique(time_s).size <= degree:
        raise AnalysisError("degenerate time grid: too few distinct times for the fit")
    smoothed = np.empty_like(position)
    velocity = np.empty_like(position)
    for ax in range(position.shape[1]):
        poly = Polynomial.fit(time_s, position[:, ax], degree)
        smoothed[:, ax] = poly(time_s)
        velocity[:, ax] = poly.deriv()(time_s)
    if squeeze:
        return smoothed[:, 0], velocity[:, 0]
    return smoothed, velocity


def detect_saccade(
    time_s: np.ndarray,
    displacement: np.ndarray,
    velocity: np.ndarray,
    threshold_fraction: float = DEFAULT_THRESHOLD,
) -> SaccadeSegment:
    """Isolate the movement with a relative speed threshold.

    The speed (vector magnitude across axes) must peak strictly inside the
    window. The segment runs between the outer samples adjacent to the
    contiguous run of speed > threshold_fraction * peak around the peak;
    a run touching either window edge means no crossing was found.
    """
    time_s = np.asarray(time_s, dtype=float)
    displacement = np.asarray(displacement, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    if displacement.ndim == 1:
        displacement = displacement[:, None]
    if velocity.ndim == 1:
        velocity = velocity[:, None]
    if not 0.0 < threshold_fraction < 1.0:
        raise ContractError("threshold fraction must lie in (0, 1)")
    speed = np.linalg.norm(velocity, axis=1)
    peak = int(np.argmax(speed))
    if speed[peak] <= 0.0:
        raise DetectionError("no movement: speed is identically zero")
    if peak in (0, speed.size - 1):
        raise DetectionError("speed peaks at the window edge")
    threshold = threshold_fraction * speed[peak]
    onset = peak
    while onset > 0 and speed[onset] > threshold:
        onset -= 1
    if speed[onset] > threshold:
        raise DetectionError("speed never drops below threshold before the peak")
    offset = peak
    while offset < speed.size - 1 and speed[offset] > threshold:
        offset += 1
    if speed[offset] > threshold:
        raise DetectionError("speed never drops below threshold after the peak")
    delta = displacement[offset] - displacement[onset]
    return SaccadeSegment(
        onset=onset,
        offset=offset,
        peak_index=peak,
        duration_s=float(time_s[offset] - time_s[onset]),
        amplitude=float(np.linalg.norm(delta)),
        delta=delta,
        peak_speed=float(speed[peak]),
    )


def extract_trace(
    time_s: np.ndarray,
    displacement: np.ndarray,
    velocity: np.ndarray,
    segment: SaccadeSegment,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Slice the detected span out of a smoothed trial."""
    sl = slice(segment.onset, segment.offset + 1)
    displacement = np.asarray(displacement, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    if displacement.ndim == 1:
        displacement = displacement[:, None]
    if velocity.ndim == 1:
        velocity = velocity[:, None]
    return np.asarray(time_s, dtype=float)[sl], displacement[sl], velocity[sl]


def normalize_average(
    traces: Sequence[tuple[np.ndarray, np.ndarray, np.ndarray]],
    bins: int = DEFAULT_BINS,
) -> MeanProfile:
    """Average detected segments on a common normalized time base.

    Each trace (time, displacement, velocity) is mapped onto `bins` equally
    spaced fractions of its own duration by linear interpolation, then
    averaged arithmetically bin by bin. The reported duration is the mean
    segment duration.
    """
    if bins < 2:
        raise ContractError("need at least 2 bins")
    if not traces:
        raise AnalysisError("no detected segments to average")
    axes = np.asarray(traces[0][1]).shape[1] if np.asarray(traces[0][1]).ndim > 1 else 1
    grid = np.linspace(0.0, 1.0, bins)
    disp = np.zeros((len(traces), bins, axes))
    vel = np.zeros((len(traces), bins, axes))
    durations = np.zeros(len(traces))
    amplitudes = np.zeros(len(traces))
    peaks = np.zeros(len(traces))
    for i, (t, d, v) in enumerate(traces):
        t = np.asarray(t, dtype=float)
        d = np.asarray(d, dtype=float).reshape(t.size, -1)
        v = np.asarray(v, dtype=float).reshape(t.size, -1)
        if d.shape[1] != axes:
            raise ContractError("segments carry inconsistent axis counts")
        if t.size < 2:
            raise ContractError("segment needs at least 2 samples")
        duration = t[-1] - t[0]
        if duration <= 0.0:
            raise ContractError("segment duration must be positive")
        durations[i] = duration
        frac = (t - t[0]) / duration
        for ax in range(axes):
            disp[i, :, ax] = np.interp(grid, frac, d[:, ax])
            vel[i, :, ax] = np.interp(grid, frac, v[:, ax])
        amplitudes[i] = np.linalg.norm(d[-1] - d[0])
        peaks[i] = np.max(np.linalg.norm(v, axis=1))
    return MeanProfile(
        bins=bins,
        duration_s=float(durations.mean()),
        displacement=disp.mean(axis=0),
        velocity=vel.mean(axis=0),
        n_trials=len(traces),
        amplitudes=amplitudes,
        peak_speeds=peaks,
    )


def analyze_condition(
    recording: RawRecording,
    target: str | None = None,
    bins: int = DEFAULT_BINS,
    threshold_fraction: float = DEFAULT_THRESHOLD,
    degree: int = DEFAULT_DEGREE,
) -> MeanProfile:
    """Full per-condition pipeline: smooth, detect, slice, average."""
    trials = recording.for_target(target) if target is not None else recording.trials
    traces = []
    for i, trial in enumerate(trials):
        smoothed, velocity = smooth_differentiate(trial.time_s, trial.position, degree)
        try:
            segment = detect_saccade(trial.time_s, smoothed, velocity, threshold_fraction)
        except DetectionError as exc:
            raise AnalysisError(f"trial {i}: {exc}") from exc
        traces.append(extract_trace(trial.time_s, smoothed, velocity, segment))
    return normalize_average(traces, bins)


def _grid_times(duration_s: float, dt: float) -> np.ndarray:
    return np.arange(int(np.floor(duration_s / dt)) + 1) * dt


def build_desired(
    mean_velocity: np.ndarray,
    duration_s: float,
    dt: float,
    direction_deg: float = 0.0,
    label: str = "",
) -> DesiredSignal:
    """Resample an averaged velocity onto the controller grid.

    The normalized-time profile is mapped to seconds through the mean
    duration, linearly interpolated at multiples of dt, and padded with one
    zero-velocity sample at each end. The trapezoidal integral of the
    result is recorded as the nominal amplitude.
    """
    if dt <= 0.0:
        raise ContractError("dt must be positive")
    if duration_s <= dt:
        raise ContractError("duration must exceed the controller step")
    v = np.asarray(mean_velocity, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    if v.shape[0] < 2:
        raise ContractError("mean velocity needs at least 2 bins")
    interior = _grid_times(duration_s, dt)
    frac = np.linspace(0.0, 1.0, v.shape[0])
    resampled = np.stack(
        [np.interp(interior / duration_s, frac, v[:, ax]) for ax in range(v.shape[1])],
        axis=1,
    )
    velocity = np.concatenate(
        [np.zeros((1, v.shape[1])), resampled, np.zeros((1, v.shape[1]))], axis=0
    )
    displacement = np.concatenate(
        [np.zeros((1, v.shape[1])),
         np.cumsum(0.5 * (velocity[1:] + velocity[:-1]) * dt, axis=0)],
        axis=0,
    )
    amplitude = float(np.linalg.norm(displacement[-1]))
    return DesiredSignal(
        dt=dt,
        velocity=velocity,
        displacement=displacement,
        amplitude=amplitude,
        direction_deg=direction_deg,
        label=label,
    )


def reference_on_grid(
    profile: MeanProfile,
    dt: float,
    axes: Sequence[int] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Measured mean displacement and velocity on the controller grid.

    Aligned with `build_desired`: one padding sample at each end, the
    displacement shifted to start at zero and held at its final value over
    the trailing pad. Used as the comparison reference for model output.
    """
    cols = list(range(profile.axes)) if axes is None else list(axes)
    interior = _grid_times(profile.duration_s, dt)
    frac = np.linspace(0.0, 1.0, profile.bins)
    tau = interior / profile.duration_s
    disp = np.stack(
        [np.interp(tau, frac, profile.displacement[:, ax]) for ax in cols], axis=1
    )
    vel = np.stack([np.interp(tau, frac, profile.velocity[:, ax]) for ax in cols], axis=1)
    disp = disp - disp[0]
    disp_ref = np.concatenate([np.zeros((1, len(cols))), disp, disp[-1:, :]], axis=0)
    vel_ref = np.concatenate(
        [np.zeros((1, len(cols))), vel, np.zeros((1, len(cols)))], axis=0
    )
    return disp_ref, vel_ref


def generate_synthetic_subject(
    amplitudes: Iterable[float],
    directions: Iterable[float],
    trials_per_target: int,
    variability: Variability = Variability(),
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE,
    seed: int | Sequence[int] = 0,
    lead_s: float = DEFAULT_LEAD_S,
    peak_velocity_rule: tuple[float, float] = DEFAULT_PEAK_RULE,
    subject: str = "synthetic",
) -> RawRecording:
    """Synthesize a subject's recording for every (amplitude, direction) pair.

    Trials are smooth templates along the target direction with lognormal
    duration jitter, relative amplitude jitter and additive position noise.
    The nominal duration realizes the linear peak-velocity rule
    v_p = rule[0] + rule[1] * A, so peak velocity grows with amplitude.
    With zero variability all trials of a target are identical.
    """
    amplitudes = list(amplitudes)
    directions = list(directions)
    if not amplitudes or not directions:
        raise ConfigurationError("need at least one amplitude and one direction")
    if any(a <= 0.0 for a in amplitudes):
        raise ConfigurationError("amplitudes must be positive")
    if trials_per_target < 1:
        raise ConfigurationError("trials_per_target must be positive")
    if sample_rate_hz <= 0.0 or lead_s < 0.0:
        raise ConfigurationError("invalid sampling parameters")
    eta0, eta1 = peak_velocity_rule
    rng = np.random.default_rng(seed)
    step = 1.0 / sample_rate_hz
    trials: list[TrialRecording] = []
    for amp in amplitudes:
        peak = eta0 + eta1 * amp
        if peak <= 0.0:
            raise ConfigurationError("peak-velocity rule must stay positive")
        nominal_T = 1.875 * amp / peak
        for direction in directions:
            unit = np.array(
                [math.cos(math.radians(direction)), math.sin(math.radians(direction))]
            )
            label = target_label(amp, direction)
            for _ in range(trials_per_target):
                T = nominal_T * math.exp(variability.duration_sd * rng.standard_normal())
                a = amp * (1.0 + variability.amplitude_sd * rng.standard_normal())
                t = np.arange(0.0, lead_s + T + lead_s, step)
                tau = (t - lead_s) / T
                pos = np.outer(a * minimum_jerk_displacement(tau), unit)
                pos += variability.position_noise_deg * rng.standard_normal(pos.shape)
                trials.append(TrialRecording(time_s=t, position=pos, target=label))
    return RawRecording(sample_rate_hz=sample_rate_hz, trials=trials, subject=subject)
