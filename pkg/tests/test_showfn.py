import math

import numpy as np
import pytest

from animech import showfn


def test_linear_eye_fit_exact():
    mech = showfn.EyeMechanism()
    samples = showfn.sample_mechanism(
        mech, (mech.pitch_range, mech.lid_range), per_axis=8
    )
    poly, residual = showfn.fit_poly_map(samples, degree=1)
    assert residual < 1e-9
    rng = np.random.default_rng(0)
    for _ in range(50):
        c = (
            rng.uniform(*mech.pitch_range),
            rng.uniform(*mech.lid_range),
        )
        assert np.allclose(poly(c), mech(c), atol=1e-9)


def test_cubic_arm_needs_degree_three():
    mech = showfn.ArmLinkage()
    samples = showfn.sample_mechanism(
        mech, (mech.swing_range, mech.pitch_range), per_axis=12
    )
    _, res1 = showfn.fit_poly_map(samples, degree=1)
    poly3, res3 = showfn.fit_poly_map(samples, degree=3)
    assert res1 > 0.01
    assert res3 < 1e-6
    # identity channel: actuator 1 == swing
    assert np.allclose(poly3((0.37, 0.1))[0], 0.37, atol=1e-9)


def test_constant_samples_rank_error():
    f = np.zeros((200, 2))
    a = np.ones((200, 2))
    samples = showfn.LinkageSampleSet(f, a, ((-1, 1), (-1, 1)))
    with pytest.raises(showfn.FitError):
        showfn.fit_poly_map(samples, degree=1)


def test_too_few_samples_rejected():
    rng = np.random.default_rng(1)
    f = rng.uniform(-1, 1, (20, 2))
    a = f.copy()
    samples = showfn.LinkageSampleSet(f, a, ((-1, 1), (-1, 1)))
    with pytest.raises(showfn.FitError):
        showfn.fit_poly_map(samples, degree=3)


def test_fit_invariant_to_sample_order():
    mech = showfn.ArmLinkage()
    samples = showfn.sample_mechanism(
        mech, (mech.swing_range, mech.pitch_range), per_axis=11
    )
    perm = np.random.default_rng(2).permutation(len(samples.functional))
    shuffled = showfn.LinkageSampleSet(
        samples.functional[perm], samples.actuator[perm], samples.bounds
    )
    p1, _ = showfn.fit_poly_map(samples, degree=3)
    p2, _ = showfn.fit_poly_map(shuffled, degree=3)
    assert np.allclose(p1.coefficients, p2.coefficients, atol=1e-9)


def test_four_bar_symmetric_closed_form():
    fb = showfn.FourBarLinkage(crank=0.03, coupler=0.05, rocker=0.03, ground=0.07)
    theta = fb.symmetric_input()
    # mirror symmetry: output angle is pi - input at the symmetric point
    out = fb.output_angle(theta)
    assert out == pytest.approx(math.pi - theta, abs=1e-9)


def test_four_bar_out_of_range():
    fb = showfn.FourBarLinkage(crank=0.03, coupler=0.02, rocker=0.02, ground=0.09)
    with pytest.raises(showfn.AssemblyError):
        fb.output_angle(math.pi)


def test_mechanism_range_errors():
    mech = showfn.EyeMechanism()
    with pytest.raises(showfn.AssemblyError):
        mech((2.0, 0.5))
    arm = showfn.ArmLinkage()
    with pytest.raises(showfn.AssemblyError):
        arm((0.0, 2.0))


def test_jaw_feedforward_direct():
    assert showfn.jaw_feedforward(0.0, (0.1, 0.05, 0.3)) == pytest.approx(0.4)
    # zero cosine coefficient -> affine in q
    c = (0.2, 0.5, 0.0)
    q = np.linspace(-0.5, 0.5, 7)
    vals = [showfn.jaw_feedforward(x, c) for x in q]
    assert np.allclose(np.diff(vals, 2), 0.0, atol=1e-12)


def test_fit_jaw_exact_recovery():
    true = (0.12, -0.08, 0.35)
    q = np.linspace(-0.4, 0.6, 25)
    tau = np.array([showfn.jaw_feedforward(x, true) for x in q])
    fit = showfn.fit_jaw(q, tau)
    assert np.allclose(fit, true, atol=1e-9)


def test_fit_jaw_noisy_recovery_within_5pct():
    # 200 samples across the jaw range keep the (1, q, cos q) basis
    # conditioned well enough for 5% recovery under 1% noise
    true = (0.1, 0.05, 0.3)
    rng = np.random.default_rng(3)
    q = np.linspace(-0.6, 0.9, 200)
    tau = np.array([showfn.jaw_feedforward(x, true) for x in q])
    tau_noisy = tau * (1.0 + rng.uniform(-0.01, 0.01, len(tau)))
    fit = showfn.fit_jaw(q, tau_noisy)
    for got, want in zip(fit, true):
        assert abs(got - want) <= 0.05 * abs(want)


def test_fit_jaw_two_angles_rejected():
    q = np.array([0.0, 0.0, 0.5, 0.5])
    tau = np.array([0.1, 0.1, 0.2, 0.2])
    with pytest.raises(showfn.FitError):
        showfn.fit_jaw(q, tau)


def test_fit_jaw_residual_refit_near_zero():
    # refitting on the residuals returns near-zero coefficients
    true = (0.1, 0.2, 0.25)
    q = np.linspace(-0.3, 0.8, 40)
    tau = np.array([showfn.jaw_feedforward(x, true) for x in q])
    fit = showfn.fit_jaw(q, tau)
    resid = tau - np.array([showfn.jaw_feedforward(x, fit) for x in q])
    refit = showfn.fit_jaw(q, resid)
    assert np.allclose(refit, 0.0, atol=1e-9)


def test_samples_csv_round_trip(tmp_path):
    mech = showfn.EyeMechanism()
    samples = showfn.sample_mechanism(
        mech, (mech.pitch_range, mech.lid_range), per_axis=7
    )
    path = tmp_path / "eye.csv"
    showfn.write_samples_csv(path, samples)
    loaded = showfn.read_samples_csv(path, n_functional=2)
    assert np.allclose(loaded.functional, samples.functional)
    assert np.allclose(loaded.actuator, samples.actuator)
    poly, residual = showfn.fit_poly_map(loaded, degree=1)
    assert residual < 1e-9
