"""Acceptance suite: one test per criterion, printing PASS/FAIL lines.

The ablation-trend tests train policies and take tens of minutes on a small
machine; everything else completes in seconds. Seeds for the trend tests can
be overridden with ANIMECH_ABLATION_SEEDS (comma separated) without changing
the default three-seed majority protocol.
"""

import copy
import dataclasses
import os

import numpy as np
import pytest

from animech import rewards, thermal
from animech.core.character import default_character
from animech.core.rotations import boxminus, quat_from_pitch
from animech.optim import ablate, es
from animech.optim.teacher import ReferenceController
from animech.refgen import STANDING, WALKING, ControlInput, KinematicTarget
from animech.runtime.filters import first_order_hold, lowpass_alpha
from animech.sim import kernel
from animech.sim import model as pm
from animech.sim.env import EnvConfig, PlanarEnv

TABLE_PARAMS = thermal.ThermalParams(alpha=0.038, beta=0.377, t_ambient=43.94)


def report(name: str, ok: bool, detail: str = ""):
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------


def test_gamma_t_reproduction():
    g = thermal.feasible_gamma(TABLE_PARAMS, t_max=80.0, t_clip_max=85.0)
    report("gamma_T reproduction", abs(g - 0.312) <= 1e-3, f"gamma={g:.6f}")


def test_thermal_identification_quantized():
    rng = np.random.default_rng(2)
    dt = 0.02
    n_train = int(20 * 60 / dt)
    n_test = int(10 * 60 / dt)
    torques = np.zeros(n_train + n_test)
    k = 0
    while k < len(torques):
        hold = int(rng.uniform(5.0, 30.0) / dt)
        torques[k : k + hold] = rng.uniform(0.0, 3.0)
        k += hold
    temps = thermal.simulate_temperature(
        55.0, torques[:-1], TABLE_PARAMS, dt
    )
    quantized = np.round(temps)
    fit = thermal.fit_thermal(quantized[:n_train], torques[:n_train], dt)
    rollout = thermal.simulate_temperature(
        quantized[n_train], torques[n_train:-1], fit.params, dt
    )
    mae = float(np.mean(np.abs(rollout - quantized[n_train:])))
    report("thermal identification", mae <= 2.0, f"held-out MAE {mae:.3f} C")


def test_cbf_forward_invariance():
    rng = np.random.default_rng(4)
    dt = 0.02
    gamma = 0.312
    n_traj, n_steps = 1000, 500
    t = rng.uniform(70.0, 80.0, n_traj)
    worst = -np.inf
    for _ in range(n_steps):
        tau = rng.uniform(0.0, 3.0, n_traj)
        bound = (
            gamma * (80.0 - t) + TABLE_PARAMS.alpha * (t - TABLE_PARAMS.t_ambient)
        ) / TABLE_PARAMS.beta
        tau = np.minimum(tau, np.sqrt(np.maximum(bound, 0.0)))
        t = t + dt * (
            -TABLE_PARAMS.alpha * (t - TABLE_PARAMS.t_ambient)
            + TABLE_PARAMS.beta * tau**2
        )
        worst = max(worst, float(np.max(t)))
    limit = 80.0 + gamma * dt * 5.0
    report("CBF forward invariance", worst <= limit, f"max T {worst:.4f} C <= {limit:.4f}")


EXPECTED_WEIGHT_TABLE = """\
term                        standing    walking
torso_position_xy                   1          4
torso_orientation                   2        1.5
linear_vel_xy                     1.5        2.5
linear_vel_z                        1          1
angular_vel_xy                      0          0
angular_vel_z                     1.5        1.5
leg_joint_pos                      15         15
neck_joint_pos                     40         40
leg_joint_vel                   0.001      0.001
neck_joint_vel                    0.5        0.5
contact                             2          1
survival                           20         20
joint_torques                   0.001      0.001
joint_acc                     2.5e-06    2.5e-06
leg_action_rate                     2          5
neck_action_rate                    5         10
leg_action_acc                    0.5          1
neck_action_acc                    15         10
neck_temperature                    2          2
joint_limits                      0.5        0.2
foot_collision                     10         10
impact_reduction               0.0025     0.0025"""


def test_reward_formula_oracle_suite():
    # straight-line re-implementation of every term, compared on random states
    rng = np.random.default_rng(11)
    cfg = thermal.ThermalCbfConfig()
    leg = np.arange(6)
    neck = np.array([6])
    worst = 0.0
    for _ in range(1000):
        pos = rng.normal(scale=0.3, size=3)
        pitch = rng.uniform(-2, 2)
        tpos = rng.normal(scale=0.3, size=3)
        tpitch = rng.uniform(-2, 2)
        linvel = rng.normal(scale=1.0, size=3)
        tlinvel = rng.normal(scale=1.0, size=3)
        angvel = rng.normal(scale=2.0, size=3)
        tangvel = rng.normal(scale=2.0, size=3)
        q = rng.normal(scale=0.6, size=7)
        tq = rng.normal(scale=0.6, size=7)
        qd = rng.normal(scale=2.0, size=7)
        tqd = rng.normal(scale=2.0, size=7)
        cl, cr = bool(rng.integers(2)), bool(rng.integers(2))
        tcl, tcr = bool(rng.integers(2)), bool(rng.integers(2))
        a = rng.normal(size=7)
        a1 = rng.normal(size=7)
        a2 = rng.normal(size=7)
        tau = rng.normal(scale=5.0, size=7)
        qdd = rng.normal(scale=20.0, size=7)
        temps = rng.uniform(70.0, 85.0, 1)
        tdots = rng.normal(scale=1.0, size=1)
        colliding = bool(rng.integers(2))
        dvl, dvr = rng.uniform(0, 2), rng.uniform(0, 2)

        target = KinematicTarget(
            pos=tpos, pitch=tpitch, linvel=tlinvel, angvel=tangvel,
            q=tq, qd=tqd, contact_left=tcl, contact_right=tcr,
        )
        got = {}
        got.update(
            rewards.imitation_terms(
                pos, quat_from_pitch(pitch), linvel, angvel, q, qd, cl, cr,
                target, leg, neck,
            ).terms
        )
        got.update(rewards.regularization_terms(a, a1, a2, tau, qdd, leg, neck).terms)
        got.update(
            rewards.limit_terms(
                q, qd, np.full(7, -1.5), np.full(7, 1.5), temps, tdots, cfg,
                colliding,
            ).terms
        )
        got.update(rewards.impact_term(dvl, dvr, 1.0).terms)

        # --- independent straight-line formulas (Table I rows) ---
        exp = {}
        exp["torso_position_xy"] = np.exp(-200.0 * np.sum((pos[:2] - tpos[:2]) ** 2))
        r = boxminus(quat_from_pitch(pitch), quat_from_pitch(tpitch))
        exp["torso_orientation"] = np.exp(-20.0 * np.sum(r**2))
        exp["linear_vel_xy"] = np.exp(-8.0 * np.sum((linvel[:2] - tlinvel[:2]) ** 2))
        exp["linear_vel_z"] = np.exp(-8.0 * (linvel[2] - tlinvel[2]) ** 2)
        exp["angular_vel_xy"] = np.exp(-2.0 * np.sum((angvel[:2] - tangvel[:2]) ** 2))
        exp["angular_vel_z"] = np.exp(-2.0 * (angvel[2] - tangvel[2]) ** 2)
        exp["leg_joint_pos"] = -np.sum((q[:6] - tq[:6]) ** 2)
        exp["neck_joint_pos"] = -((q[6] - tq[6]) ** 2)
        exp["leg_joint_vel"] = -np.sum((qd[:6] - tqd[:6]) ** 2)
        exp["neck_joint_vel"] = -((qd[6] - tqd[6]) ** 2)
        exp["contact"] = float(int(cl == tcl) + int(cr == tcr))
        exp["survival"] = 1.0
        exp["joint_torques"] = -np.sum(tau**2)
        exp["joint_acc"] = -np.sum(qdd**2)
        exp["leg_action_rate"] = -np.sum((a[:6] - a1[:6]) ** 2)
        exp["neck_action_rate"] = -((a[6] - a1[6]) ** 2)
        exp["leg_action_acc"] = -np.sum((a[:6] - 2 * a1[:6] + a2[:6]) ** 2)
        exp["neck_action_acc"] = -((a[6] - 2 * a1[6] + a2[6]) ** 2)
        exp["neck_temperature"] = -np.sum(
            np.abs(np.minimum(-tdots + 0.312 * (80.0 - temps), 0.0))
        )
        lower = qd + 20.0 * (q - (-1.5 + 0.1))
        upper = -qd + 20.0 * ((1.5 - 0.1) - q)
        exp["joint_limits"] = -(
            np.sum(np.abs(np.minimum(lower, 0.0)))
            + np.sum(np.abs(np.minimum(upper, 0.0)))
        )
        exp["foot_collision"] = -1.0 if colliding else 0.0
        exp["impact_reduction"] = -(min(dvl**2, 1.0) + min(dvr**2, 1.0))

        for name, want in exp.items():
            worst = max(worst, abs(got[name] - want))
    table_ok = rewards.format_weight_table() == EXPECTED_WEIGHT_TABLE
    report(
        "reward formula oracle",
        worst < 1e-9 and table_ok,
        f"max term deviation {worst:.2e}, table byte-identical: {table_ok}",
    )


def test_joint_limit_cbf_filter():
    # single PD joint commanded past its limit; a torque-level filter enforces
    # the barrier condition on the next state
    dt = 1.0 / 600.0
    inertia = 0.05
    kp, kd = 60.0, 2.0
    q_max, q_m, gamma = 1.5, 0.1, 20.0
    q_lim = q_max - q_m
    target = q_max + 0.3
    q, qd = 0.0, 0.0
    worst_q = -np.inf
    mismatch = 0
    rng = np.random.default_rng(0)
    for _ in range(6000):
        tau = kp * (target - q) - kd * qd
        # filter: require -qd' + gamma (q_lim - q') >= 0 after the step
        qd_next = qd + dt * tau / inertia
        q_next = q + dt * qd_next
        cond = -qd_next + gamma * (q_lim - q_next)
        if cond < 0.0:
            # solve for tau on the boundary (linear in tau)
            c0 = -(qd) + gamma * (q_lim - (q + dt * qd))
            c1 = -(dt / inertia) * (1.0 + gamma * dt)
            tau = (0.0 - c0) / c1
            qd_next = qd + dt * tau / inertia
            q_next = q + dt * qd_next
        q, qd = q_next, qd_next
        worst_q = max(worst_q, q)
        # penalty is zero exactly when the condition holds
        cond_now = -qd + gamma * (q_lim - q)
        pen = rewards.joint_limit_violation(
            np.array([q]), np.array([qd]), np.array([-10.0]), np.array([q_max]),
            margin=q_m, gamma=gamma,
        )
        if cond_now >= 0.0 and pen != 0.0:
            mismatch += 1
        if cond_now < 0.0 and abs(pen - cond_now) > 1e-12:
            mismatch += 1
    slack = gamma * dt * q_m
    ok = worst_q <= q_lim + slack and mismatch == 0
    report(
        "joint-limit CBF",
        ok,
        f"max q {worst_q:.5f} <= {q_lim + slack:.5f}, penalty/condition mismatches {mismatch}",
    )


def test_physics_energy_and_statics():
    desc = default_character()
    env = PlanarEnv(desc, EnvConfig(reset_joint_noise=0.0, reset_height_noise=0.0))
    m = copy.deepcopy(env.model)
    m.kp[:] = 0.0
    m.kd[:] = 0.0
    rng = np.random.default_rng(3)
    n = m.n_joints
    x = np.zeros(3 + n)
    x[3:] = (m.q_lo + m.q_hi) / 2
    v = np.zeros(3 + n)
    v[0], v[1], v[2] = 0.3, 1.0, 1.5
    v[3:] = rng.uniform(-2.0, 2.0, n)
    temps = m.th_tamb.copy()
    filt = x[3:].copy()
    anchor = np.zeros(4)
    active = np.zeros(4, np.uint8)
    mt, mts = np.zeros(n), np.zeros(n)
    e0 = pm.mechanical_energy(m, x, v, 0.0)
    drift = 0.0
    for _ in range(600):
        kernel.run_substeps(
            m, x, v, temps, filt, anchor, active, x[3:].copy(), x[3:].copy(),
            1, 1.0 / 600.0, 0.3, 0.0, 0, 0, 0, 0, 0, mt, mts,
        )
        drift = max(drift, abs(pm.mechanical_energy(m, x, v, 0.0) - e0))
    energy_ok = drift / e0 < 0.005

    ctl = ReferenceController(env)
    s = env.reset(np.random.default_rng(0))
    for _ in range(150):
        r = env.step(s, ctl(s))
        s = r.state
    x2, v2 = env._planar_vectors(s)
    mt2, mts2 = np.zeros(env.n), np.zeros(env.n)
    _, _, _, _, _, _, fzt = kernel.run_substeps(
        env.model, x2, v2, s.temps.copy(), s.filt_action.copy(),
        s.contact_anchor.copy(), s.anchor_active.copy(), ctl(s), ctl(s),
        env.cfg.n_substeps, env.cfg.physics_dt, env.filter_alpha,
        env.cfg.gravity, env.cfg.contact_stiffness, env.cfg.contact_damping,
        env.cfg.friction, env.cfg.tangent_stiffness, env.cfg.tangent_damping,
        mt2, mts2,
    )
    weight = env.model.total_mass * env.cfg.gravity
    statics_ok = abs(fzt - weight) <= 0.01 * weight
    report(
        "physics sanity",
        energy_ok and statics_ok,
        f"energy drift {100 * drift / e0:.3f}% (<0.5), contact force "
        f"{fzt:.1f} N vs weight {weight:.1f} N",
    )


def test_runtime_pipeline_bit_exactness(tmp_path):
    foh_ok = (
        first_order_hold(0.0, 1.2, 0, 12) == 0.0
        and first_order_hold(0.0, 1.2, 12, 12) == 1.2
        and abs(first_order_hold(0.0, 1.2, 6, 12) - 0.6) < 1e-15
    )
    alpha = lowpass_alpha(1.0 / 600.0, 37.5)
    alpha_ok = abs(alpha - 0.2820) <= 1e-4

    from animech.runtime.session import (
        RuntimeSession,
        SessionConfig,
        replay_command_log,
        save_command_log,
    )

    desc = default_character()
    env = es.build_env(desc, es.TrainConfig(mode=STANDING))
    teacher = es.teacher_act_fn(ReferenceController(env))
    actors = {STANDING: teacher, WALKING: teacher}
    session = RuntimeSession(
        env, actors, seed=3, cfg=SessionConfig(record_commands=True)
    )
    session.apply_joystick({"neck": [0.15], "torso_pitch": 0.02})
    for _ in range(100):
        session.tick()
    live = np.stack(session.trace)
    log_path = tmp_path / "cmd.json"
    save_command_log(log_path, session)
    env2 = es.build_env(desc, es.TrainConfig(mode=STANDING))
    teacher2 = es.teacher_act_fn(ReferenceController(env2))
    replay = np.stack(
        replay_command_log(log_path, env2, {STANDING: teacher2, WALKING: teacher2})
    )
    replay_ok = live.shape == replay.shape and np.array_equal(live, replay)
    report(
        "runtime pipeline bit-exactness",
        foh_ok and alpha_ok and replay_ok,
        f"alpha={alpha:.5f}, replay bitwise: {replay_ok}",
    )


def test_heel_toe_ablation():
    rep = ablate.heel_toe_comparison(default_character())
    report(
        "heel-toe ablation",
        rep["meets_1p5_amplitude"],
        f"styled swing {rep['stance_ankle_swing_styled']:.3f} rad vs flat "
        f"{rep['stance_ankle_swing_flat']:.3f} rad (amplitude {rep['amplitude']:.2f})",
    )


def test_show_function_fits():
    import animech.showfn as showfn

    eye = showfn.EyeMechanism()
    eye_samples = showfn.sample_mechanism(
        eye, (eye.pitch_range, eye.lid_range), per_axis=8
    )
    _, eye_res = showfn.fit_poly_map(eye_samples, degree=1)

    arm = showfn.ArmLinkage()
    arm_samples = showfn.sample_mechanism(
        arm, (arm.swing_range, arm.pitch_range), per_axis=12
    )
    _, arm_res = showfn.fit_poly_map(arm_samples, degree=3)

    true = (0.1, 0.05, 0.3)
    rng = np.random.default_rng(3)
    qs = np.linspace(-0.6, 0.9, 200)
    taus = np.array([showfn.jaw_feedforward(x, true) for x in qs])
    fit = showfn.fit_jaw(qs, taus * (1 + rng.uniform(-0.01, 0.01, len(taus))))
    jaw_ok = all(abs(g - w) <= 0.05 * abs(w) for g, w in zip(fit, true))
    ok = eye_res < 1e-9 and arm_res < 1e-6 and jaw_ok
    report(
        "show-function fits",
        ok,
        f"eye residual {eye_res:.1e}, arm residual {arm_res:.1e}, jaw 5%: {jaw_ok}",
    )


# ---------------------------------------------------------------------------
# trend ablations (the slow part)


def _seeds():
    raw = os.environ.get("ANIMECH_ABLATION_SEEDS", "0,1,2")
    return tuple(int(s) for s in raw.split(","))


@pytest.mark.slow
def test_thermal_ablation_trend():
    desc = default_character()
    base = es.TrainConfig(
        mode=STANDING, iterations=30, population=24, episode_s=5.0,
        workers=2, warm_start_episodes=12,
    )
    rep = ablate.run_thermal_ablation(desc, base, seeds=_seeds(), log=print)
    detail = "; ".join(
        f"seed {r['seed']}: on {r['peak_on']:.1f} C vs off {r['peak_off']:.1f} C"
        for r in rep["per_seed"]
    )
    report("thermal ablation trend", rep["majority"], detail)


@pytest.mark.slow
def test_impact_ablation_trend():
    desc = default_character()
    base = es.TrainConfig(
        mode=WALKING, iterations=30, population=24, episode_s=5.0,
        workers=2, warm_start_episodes=12,
    )
    rep = ablate.run_impact_ablation(desc, base, seeds=_seeds(), log=print)
    detail = "; ".join(
        f"seed {r['seed']}: on {r['dv_on']:.3f} vs off {r['dv_off']:.3f} m/s"
        for r in rep["per_seed"]
    )
    report("impact ablation trend", rep["majority"], detail)
