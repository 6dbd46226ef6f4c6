"""Behavioral pipeline: smoothing, detection, normalization, synthesis, IO."""

import numpy as np
import pytest

from saccadeoc.errors import (
    AnalysisError,
    ConfigurationError,
    ContractError,
    DetectionError,
    IngestionError,
)
from saccadeoc.signals import (
    Variability,
    analyze_condition,
    build_desired,
    detect_saccade,
    extract_trace,
    generate_synthetic_subject,
    ingest_recording,
    minimum_jerk_displacement,
    minimum_jerk_velocity,
    normalize_average,
    reference_on_grid,
    smooth_differentiate,
    target_label,
)

FROZEN = Variability(duration_sd=0.0, amplitude_sd=0.0, position_noise_deg=0.0)


def test_minimum_jerk_template_shape():
    tau = np.linspace(0.0, 1.0, 101)
    pos = minimum_jerk_displacement(tau)
    vel = minimum_jerk_velocity(tau)
    assert pos[0] == 0.0 and pos[-1] == 1.0
    assert vel[0] == 0.0 and vel[-1] == 0.0
    assert vel[50] == pytest.approx(1.875)  # midpoint peak of the quintic
    np.testing.assert_array_equal(np.argmax(vel), 50)
    # velocity is the derivative of displacement
    np.testing.assert_allclose(np.gradient(pos, tau), vel, atol=2e-3)


def test_smoothing_is_exact_on_polynomials_up_to_degree_seven():
    rng = np.random.default_rng(12)
    t = np.linspace(0.0, 0.12, 30)
    for _ in range(10):
        coeffs = rng.uniform(-1.0, 1.0, 8) * 10.0 ** rng.integers(0, 4, 8)
        pos = np.polynomial.polynomial.polyval(t, coeffs)
        deriv = np.polynomial.polynomial.polyval(
            t, np.polynomial.polynomial.polyder(coeffs)
        )
        sm, vel = smooth_differentiate(t, pos, degree=7)
        scale = max(1.0, np.abs(pos).max())
        dscale = max(1.0, np.abs(deriv).max())
        assert np.abs(sm - pos).max() / scale < 1e-8
        assert np.abs(vel - deriv).max() / dscale < 1e-8


def test_smoothing_sample_count_guard():
    t = np.linspace(0.0, 0.06, 15)
    with pytest.raises(ContractError):
        smooth_differentiate(t, np.sin(t), degree=7)
    t = np.linspace(0.0, 0.06, 16)
    smooth_differentiate(t, np.sin(t), degree=7)


def test_smoothing_rejects_degenerate_time_grid():
    t = np.repeat(np.linspace(0.0, 0.02, 4), 5)
    with pytest.raises(AnalysisError):
        smooth_differentiate(t, np.zeros(20), degree=7)


def test_smoothing_shapes_follow_input():
    t = np.linspace(0.0, 0.1, 25)
    one = smooth_differentiate(t, t**2)
    assert one[0].shape == (25,) and one[1].shape == (25,)
    two = smooth_differentiate(t, np.stack([t**2, t**3], axis=1))
    assert two[0].shape == (25, 2) and two[1].shape == (25, 2)


def test_detection_lands_on_outermost_at_threshold_samples():
    """Symmetric triangular speed: 10% of the 300 peak is hit exactly at 30."""
    v = 7.5 * np.minimum(np.arange(81), 80 - np.arange(81))
    t = np.arange(81) * 0.004
    d = np.cumsum(v) * 0.004
    seg = detect_saccade(t, d[:, None], v[:, None])
    assert seg.peak_index == 40
    assert seg.onset == 4
    assert seg.offset == 76
    assert seg.duration_s == pytest.approx(t[76] - t[4])
    assert seg.peak_speed == pytest.approx(300.0)


def test_detection_threshold_fraction_is_respected():
    v = 7.5 * np.minimum(np.arange(81), 80 - np.arange(81))
    t = np.arange(81) * 0.004
    d = np.cumsum(v) * 0.004
    wide = detect_saccade(t, d[:, None], v[:, None], threshold_fraction=0.10)
    narrow = detect_saccade(t, d[:, None], v[:, None], threshold_fraction=0.30)
    assert narrow.onset > wide.onset
    assert narrow.offset < wide.offset


def test_detection_failure_modes():
    t = np.arange(10) * 0.004
    zero = np.zeros((10, 1))
    with pytest.raises(DetectionError):
        detect_saccade(t, zero, zero)
    ramp = np.arange(10.0)[:, None] * 10.0
    with pytest.raises(DetectionError):
        detect_saccade(t, ramp, ramp)  # peak at the window edge
    before = np.array([50.0, 60.0, 100.0, 60.0, 1.0])[:, None]
    with pytest.raises(DetectionError):
        detect_saccade(t[:5], before, before)
    after = np.array([1.0, 60.0, 100.0, 60.0, 50.0])[:, None]
    with pytest.raises(DetectionError):
        detect_saccade(t[:5], after, after)


def test_detected_span_keeps_most_of_the_template_amplitude():
    rec = generate_synthetic_subject((12.0,), (0.0,), 2, variability=FROZEN,
                                     sample_rate_hz=480.0, seed=0)
    trial = rec.trials[0]
    sm, vel = smooth_differentiate(trial.time_s, trial.position)
    seg = detect_saccade(trial.time_s, sm, vel)
    assert seg.amplitude / 12.0 >= 0.97
    assert 0 < seg.onset < seg.peak_index < seg.offset < trial.time_s.size - 1


def test_extract_trace_slices_the_detected_span():
    v = 7.5 * np.minimum(np.arange(81), 80 - np.arange(81))
    t = np.arange(81) * 0.004
    d = np.cumsum(v) * 0.004
    seg = detect_saccade(t, d[:, None], v[:, None])
    ts, ds, vs = extract_trace(t, d[:, None], v[:, None], seg)
    assert ts.shape == (seg.offset - seg.onset + 1,)
    np.testing.assert_array_equal(vs[:, 0], v[seg.onset:seg.offset + 1])
    np.testing.assert_array_equal(ds[:, 0], d[seg.onset:seg.offset + 1])


def test_normalization_is_duration_invariant():
    """Stretching a trace in time only rescales its velocity by the factor."""
    tau = np.linspace(0.0, 1.0, 37)
    base_t = 0.06 * tau
    disp = 10.0 * minimum_jerk_displacement(tau)[:, None]
    vel = (10.0 / 0.06) * minimum_jerk_velocity(tau)[:, None]
    scale = 1.7
    a = normalize_average([(base_t, disp, vel)], bins=50)
    b = normalize_average([(scale * base_t, disp, vel / scale)], bins=50)
    np.testing.assert_allclose(b.displacement, a.displacement, rtol=1e-9)
    np.testing.assert_allclose(b.velocity, a.velocity / scale, rtol=1e-9)
    assert b.duration_s == pytest.approx(scale * a.duration_s, rel=1e-12)


def test_normalization_averages_across_trials():
    tau = np.linspace(0.0, 1.0, 25)
    t = 0.05 * tau
    d1 = 8.0 * minimum_jerk_displacement(tau)[:, None]
    v1 = (8.0 / 0.05) * minimum_jerk_velocity(tau)[:, None]
    prof = normalize_average([(t, d1, v1), (t, 2 * d1, 2 * v1)], bins=20)
    assert prof.bins == 20 and prof.n_trials == 2
    assert prof.amplitudes.shape == (2,) and prof.peak_speeds.shape == (2,)
    single = normalize_average([(t, 1.5 * d1, 1.5 * v1)], bins=20)
    np.testing.assert_allclose(prof.velocity, single.velocity, rtol=1e-9)


def test_build_desired_grid_and_amplitude_fidelity():
    T, dt, amp = 0.0543478, 0.004, 12.0
    tau = np.linspace(0.0, 1.0, 50)
    vel = (amp / T) * minimum_jerk_velocity(tau)
    desired = build_desired(vel, T, dt, direction_deg=0.0, label="a12")
    assert desired.label == "a12"
    assert desired.axes == 1
    np.testing.assert_array_equal(desired.velocity[0], 0.0)
    np.testing.assert_array_equal(desired.velocity[-1], 0.0)
    assert abs(desired.amplitude - amp) / amp < 1e-3
    assert desired.velocity_for_tracking().ndim == 1


def test_build_desired_guards():
    vel = np.linspace(0.0, 1.0, 10)
    with pytest.raises(ContractError):
        build_desired(vel, 0.05, -0.004)
    with pytest.raises(ContractError):
        build_desired(vel, 0.002, 0.004)
    with pytest.raises(ContractError):
        build_desired(vel[:1], 0.05, 0.004)


def test_reference_grid_aligns_with_desired(plant_h):
    rec = generate_synthetic_subject((12.0,), (0.0,), 3, variability=FROZEN,
                                     sample_rate_hz=480.0, seed=2)
    prof = analyze_condition(rec, target=target_label(12.0, 0.0))
    desired = build_desired(prof.velocity[:, [0]], prof.duration_s, plant_h.dt)
    disp_ref, vel_ref = reference_on_grid(prof, plant_h.dt, axes=(0,))
    assert vel_ref.shape == desired.velocity.shape
    assert disp_ref.shape == desired.velocity.shape
    np.testing.assert_array_equal(vel_ref[0], 0.0)
    np.testing.assert_array_equal(vel_ref[-1], 0.0)
    np.testing.assert_array_equal(disp_ref[0], 0.0)
    np.testing.assert_array_equal(disp_ref[-1], disp_ref[-2])
    np.testing.assert_allclose(vel_ref[1:-1, 0], desired.velocity[1:-1, 0], rtol=1e-12)


def test_synthetic_subject_structure():
    rec = generate_synthetic_subject((6.0, 12.0), (0.0, 90.0), 4,
                                     variability=FROZEN, sample_rate_hz=480.0, seed=1,
                                     subject="s")
    assert rec.subject == "s"
    assert rec.sample_rate_hz == 480.0
    labels = {t.target for t in rec.trials}
    assert labels == {"a6_d0", "a12_d0", "a6_d90", "a12_d90"}
    assert len(rec.trials) == 16
    up = rec.for_target("a12_d90")
    assert len(up) == 4
    trial = up[0]
    # vertical target moves the second axis and leaves the first flat
    assert np.abs(trial.position[:, 0]).max() < 1e-9
    assert trial.position[-1, 1] == pytest.approx(12.0, rel=0.01)
    # flat fixation leads on both ends
    assert np.abs(trial.position[0, 1]) < 1e-9


def test_synthetic_subject_is_seeded():
    a = generate_synthetic_subject((8.5,), (0.0,), 3, sample_rate_hz=480.0, seed=5)
    b = generate_synthetic_subject((8.5,), (0.0,), 3, sample_rate_hz=480.0, seed=5)
    c = generate_synthetic_subject((8.5,), (0.0,), 3, sample_rate_hz=480.0, seed=6)
    for ta, tb in zip(a.trials, b.trials):
        np.testing.assert_array_equal(ta.position, tb.position)
    assert any(
        not np.array_equal(ta.position, tc.position)
        for ta, tc in zip(a.trials, c.trials)
    )


def test_variability_guards():
    with pytest.raises(ConfigurationError):
        Variability(duration_sd=-0.1)
    with pytest.raises(ConfigurationError):
        Variability(amplitude_sd=0.9)


def test_analyze_condition_selects_target():
    rec = generate_synthetic_subject((6.0, 12.0), (0.0,), 3, variability=FROZEN,
                                     sample_rate_hz=480.0, seed=4)
    prof = analyze_condition(rec, target=target_label(6.0, 0.0))
    assert prof.n_trials == 3
    assert prof.velocity.shape == (50, 2)
    assert float(np.mean(prof.amplitudes)) == pytest.approx(6.0, rel=0.03)
    with pytest.raises(AnalysisError):
        analyze_condition(rec, target="a99_d0")


def test_target_label_format():
    assert target_label(12.0, 0.0) == "a12_d0"
    assert target_label(8.5, 180.0) == "a8.5_d180"
    assert target_label(10.4, 45.0) == "a10.4_d45"


def write_recording_csv(path, recording):
    lines = ["trial,time_s,theta_h_deg,theta_v_deg"]
    for i, trial in enumerate(recording.trials):
        for k in range(trial.time_s.size):
            lines.append(
                f"{i},{float(trial.time_s[k])!r},"
                f"{float(trial.position[k, 0])!r},{float(trial.position[k, 1])!r}"
            )
    path.write_text("\n".join(lines) + "\n")


def test_recording_round_trips_through_csv(tmp_path):
    rec = generate_synthetic_subject((12.0,), (0.0,), 3, sample_rate_hz=480.0, seed=9)
    f = tmp_path / "a12_d0.csv"
    write_recording_csv(f, rec)
    back = ingest_recording(f, 480.0)
    assert len(back.trials) == 3
    for orig, parsed in zip(rec.trials, back.trials):
        np.testing.assert_array_equal(parsed.time_s, orig.time_s)
        np.testing.assert_array_equal(parsed.position, orig.position)


@pytest.mark.parametrize(
    "body",
    [
        "",
        "wrong,header,row,here\n0,0.0,0.0,0.0\n",
        "trial,time_s,theta_h_deg,theta_v_deg\n0,0.0,0.0\n",
        "trial,time_s,theta_h_deg,theta_v_deg\n0,0.0,nan,0.0\n",
        "trial,time_s,theta_h_deg,theta_v_deg\n0,0.0,x,0.0\n",
        "trial,time_s,theta_h_deg,theta_v_deg\n0,0.1,0.0,0.0\n0,0.1,0.0,0.0\n",
        "trial,time_s,theta_h_deg,theta_v_deg\n"
        "0,0.0,0.0,0.0\n1,0.0,0.0,0.0\n0,0.1,0.0,0.0\n",
    ],
    ids=["empty", "bad-header", "short-row", "non-finite", "unparsable",
         "non-increasing-time", "split-trial"],
)
def test_ingest_rejects_malformed_files(tmp_path, body):
    f = tmp_path / "bad.csv"
    f.write_text(body)
    with pytest.raises(IngestionError):
        ingest_recording(f, 240.0)


def test_ingest_missing_file(tmp_path):
    with pytest.raises(IngestionError):
        ingest_recording(tmp_path / "nope.csv", 240.0)
