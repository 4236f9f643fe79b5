import copy
import dataclasses

import numpy as np
import pytest

from animech.core.character import default_character
from animech.pathframe import PathFrameState
from animech.refgen import STANDING, WALKING, ControlInput
from animech.sim import KERNEL_NAME, kernel, kernel_py
from animech.sim import model as pm
from animech.sim.env import EnvConfig, PlanarEnv


@pytest.fixture(scope="module")
def desc():
    return default_character()


@pytest.fixture()
def env(desc):
    return PlanarEnv(desc, EnvConfig(reset_joint_noise=0.0, reset_height_noise=0.0))


def free_model(env):
    m = copy.deepcopy(env.model)
    m.kp[:] = 0.0
    m.kd[:] = 0.0
    return m


def run_kernel(k, m, x, v, steps, dt, gravity, contact=(0, 0, 0, 0, 0)):
    temps = m.th_tamb.copy()
    filt = x[3:].copy()
    anchor = np.zeros(4)
    active = np.zeros(4, np.uint8)
    mt = np.zeros(m.n_joints)
    mts = np.zeros(m.n_joints)
    out = None
    for _ in range(steps):
        out = k.run_substeps(
            m, x, v, temps, filt, anchor, active, x[3:].copy(), x[3:].copy(),
            1, dt, 0.3, gravity, *contact, mt, mts,
        )
    return out


def test_free_chain_energy_drift(env):
    # no gravity, no actuation, no damping, no contact: pure multibody terms
    m = free_model(env)
    rng = np.random.default_rng(3)
    n = m.n_joints
    x = np.zeros(3 + n)
    x[3:] = (m.q_lo + m.q_hi) / 2
    v = np.zeros(3 + n)
    v[0], v[1], v[2] = 0.3, 1.0, 1.5
    v[3:] = rng.uniform(-2.0, 2.0, n)
    e0 = pm.mechanical_energy(m, x, v, 0.0)
    drift = 0.0
    for _ in range(600):
        run_kernel(kernel, m, x, v, 1, 1.0 / 600.0, 0.0)
        drift = max(drift, abs(pm.mechanical_energy(m, x, v, 0.0) - e0))
    assert drift / e0 < 0.005


def test_kernel_parity(env):
    if KERNEL_NAME != "cython":
        pytest.skip("compiled kernel not built")
    m = env.model
    rng = np.random.default_rng(5)
    n = m.n_joints
    for trial in range(3):
        x1 = np.zeros(3 + n)
        x1[1] = 0.33
        x1[3:] = rng.uniform(m.q_lo + 0.1, m.q_hi - 0.1)
        v1 = rng.normal(scale=0.4, size=3 + n)
        x2, v2 = x1.copy(), v1.copy()
        state = dict(
            temps1=m.th_tamb + 10.0, temps2=m.th_tamb + 10.0,
            filt1=x1[3:].copy(), filt2=x1[3:].copy(),
            anchor1=np.zeros(4), anchor2=np.zeros(4),
            act1=np.zeros(4, np.uint8), act2=np.zeros(4, np.uint8),
        )
        target = x1[3:] + 0.05
        mt = np.zeros(n)
        mts = np.zeros(n)
        args = (12, 1.0 / 600.0, 0.282, 9.81, 1.2e4, 100.0, 0.8, 6e3, 100.0)
        for _ in range(50):
            kernel.run_substeps(
                m, x1, v1, state["temps1"], state["filt1"], state["anchor1"],
                state["act1"], target, target, *args, mt, mts,
            )
            kernel_py.run_substeps(
                m, x2, v2, state["temps2"], state["filt2"], state["anchor2"],
                state["act2"], target, target, *args, mt.copy(), mts.copy(),
            )
        assert np.allclose(x1, x2, atol=1e-8)
        assert np.allclose(v1, v2, atol=1e-7)
        assert np.allclose(state["temps1"], state["temps2"], atol=1e-9)


def test_dynamics_against_lagrangian_oracle(env):
    # finite-difference Christoffel/gravity oracle on random states
    m = copy.deepcopy(env.model)
    n = m.n_joints
    N = m.n_dof
    rng = np.random.default_rng(7)

    def potential(x, g):
        _, _, coms = pm.forward_kinematics(m, x)
        return float(np.sum(m.mass * g * coms[:, 1]))

    def oracle_qdd(x, v, tau, g):
        M = pm.mass_matrix(m, x)
        h = 1e-6
        G = np.zeros(N)
        dM = np.zeros((N, N, N))
        for k in range(N):
            xp, xm = x.copy(), x.copy()
            xp[k] += h
            xm[k] -= h
            G[k] = -(potential(xp, g) - potential(xm, g)) / (2 * h)
            dM[k] = (pm.mass_matrix(m, xp) - pm.mass_matrix(m, xm)) / (2 * h)
        C = np.einsum("ikj,i,j->k", dM, v, v) - 0.5 * np.einsum(
            "kij,i,j->k", dM, v, v
        )
        Q = np.zeros(N)
        Q[3:] = tau
        return np.linalg.solve(M, Q + G - C)

    m2 = copy.deepcopy(m)
    m2.kp[:] = 1.0
    m2.kd[:] = 0.0
    m2.tau_max[:] = 1e9
    for _ in range(3):
        x = rng.uniform(-0.5, 0.5, N)
        x[1] += 2.0
        v = rng.uniform(-1, 1, N)
        tau = rng.uniform(-5, 5, n)
        x2, v2 = x.copy(), v.copy()
        temps = m.th_tamb.copy()
        filt = x[3:] + tau  # kp=1 injects tau exactly
        dt = 1e-7
        kernel_py.run_substeps(
            m2, x2, v2, temps, filt.copy(), np.zeros(4), np.zeros(4, np.uint8),
            filt, filt, 1, dt, 1.0, 9.81, 0, 0, 0, 0, 0,
            np.zeros(n), np.zeros(n),
        )
        got = (v2 - v) / dt
        want = oracle_qdd(x, v, tau, 9.81)
        assert np.allclose(got, want, rtol=1e-6, atol=1e-4)


def test_pd_equilibrium_zero_gravity(desc):
    cfg = EnvConfig(gravity=0.0, reset_joint_noise=0.0, reset_height_noise=0.0)
    env = PlanarEnv(desc, cfg)
    s = env.reset(np.random.default_rng(0))
    s = dataclasses.replace(s, pos=np.array([0.0, 0.0, 5.0]))
    hold = s.q.copy()
    r = env.step(s, hold)
    assert np.allclose(r.state.q, hold, atol=1e-9)
    assert np.allclose(r.state.qd, 0.0, atol=1e-9)


def test_static_standing_weight(desc, env):
    # PD-held standing settles with total normal force = m g within 1%
    from animech.optim.teacher import ReferenceController

    ctl = ReferenceController(env)
    s = env.reset(np.random.default_rng(0))
    for _ in range(150):  # 3 s settle
        r = env.step(s, ctl(s))
        s = r.state
        assert not r.terminated
    m = env.model
    x, v = env._planar_vectors(s)
    temps = s.temps.copy()
    filt = s.filt_action.copy()
    anchor = s.contact_anchor.copy()
    active = s.anchor_active.copy()
    mt = np.zeros(env.n)
    mts = np.zeros(env.n)
    ok, _, _, fnl, fnr, fxt, fzt = kernel.run_substeps(
        m, x, v, temps, filt, anchor, active, ctl(s), ctl(s),
        env.cfg.n_substeps, env.cfg.physics_dt, env.filter_alpha,
        env.cfg.gravity, env.cfg.contact_stiffness, env.cfg.contact_damping,
        env.cfg.friction, env.cfg.tangent_stiffness, env.cfg.tangent_damping,
        mt, mts,
    )
    weight = m.total_mass * env.cfg.gravity
    assert fzt == pytest.approx(weight, rel=0.01)
    assert fnl > 1.0 and fnr > 1.0


def test_normal_forces_nonnegative(env):
    # drop from a height and scan reported foot forces through the bounce
    s = env.reset(np.random.default_rng(1))
    s = dataclasses.replace(s, pos=s.pos + np.array([0.0, 0.0, 0.05]))
    hold = s.q.copy()
    for _ in range(100):
        r = env.step(s, hold)
        s = r.state
        assert min(r.dv) >= 0.0
        if r.terminated:
            break


def test_termination_body_contact(desc):
    env = PlanarEnv(desc, EnvConfig(reset_joint_noise=0.0, reset_height_noise=0.0))
    s = env.reset(np.random.default_rng(0))
    # push the torso far below the ground: immediate body contact
    s = dataclasses.replace(s, pos=np.array([0.0, 0.0, 0.02]))
    r = env.step(s, s.q)
    assert r.terminated
    assert r.reason == "body-contact"


def test_nan_action_rejected(env):
    s = env.reset(np.random.default_rng(0))
    bad = s.q.copy()
    bad[0] = np.nan
    with pytest.raises(ValueError):
        env.step(s, bad)


def test_impulse_momentum(desc):
    # in free space, the applied horizontal impulse equals the change in
    # total linear momentum
    cfg = EnvConfig(gravity=0.0, reset_joint_noise=0.0, reset_height_noise=0.0)
    env = PlanarEnv(desc, cfg)
    s = env.reset(np.random.default_rng(0))
    s = dataclasses.replace(s, pos=np.array([0.0, 0.0, 10.0]))
    m = env.model
    x, v = env._planar_vectors(s)
    p_before = np.sum(pm.com_velocities(m, x, v) * m.mass[:, None], axis=0)
    force = 120.0
    s2 = env.apply_disturbance(np.random.default_rng(0), s, force=force)
    x2, v2 = env._planar_vectors(s2)
    p_after = np.sum(pm.com_velocities(m, x2, v2) * m.mass[:, None], axis=0)
    impulse = force * env.cfg.control_dt
    assert p_after[0] - p_before[0] == pytest.approx(impulse, abs=1e-6)
    assert p_after[1] - p_before[1] == pytest.approx(0.0, abs=1e-9)


def test_disturbance_zero_range_noop(desc):
    cfg = EnvConfig(disturbance_force=(0.0, 0.0))
    env = PlanarEnv(desc, cfg)
    s = env.reset(np.random.default_rng(0))
    s2 = env.apply_disturbance(np.random.default_rng(1), s)
    assert np.array_equal(s.qd, s2.qd)


def test_reset_determinism(env):
    a = env.reset(np.random.default_rng(42))
    b = env.reset(np.random.default_rng(42))
    assert np.array_equal(a.q, b.q)
    assert np.array_equal(a.pos, b.pos)
    assert np.array_equal(a.temps, b.temps)


def test_reset_zero_noise_is_reference(desc):
    env = PlanarEnv(desc, EnvConfig(reset_joint_noise=0.0, reset_height_noise=0.0))
    ref = env.refgen.generate_standing(PathFrameState(), ControlInput(mode=STANDING))
    s = env.reset(np.random.default_rng(0))
    assert np.allclose(s.q, ref.q, atol=1e-12)
    assert s.pos[2] == pytest.approx(ref.pos[2], abs=1e-9)


def test_reset_temperature_interval(desc):
    env = PlanarEnv(desc)
    lo, hi = np.inf, -np.inf
    for seed in range(300):
        s = env.reset(np.random.default_rng(seed))
        t = s.temps[env.thermal_idx][0]
        lo, hi = min(lo, t), max(hi, t)
    assert lo >= env.thermal_cfg.t_clip_min
    assert hi <= env.thermal_cfg.t_max


def test_step_determinism_bitwise(desc):
    def run():
        env = PlanarEnv(desc)
        env.training = True
        s = env.reset(np.random.default_rng(9))
        env.set_control(ControlInput(mode=STANDING, neck=(0.1,)))
        out = []
        for k in range(50):
            r = env.step(s, s.q * 0.95)
            s = r.state
            out.append(r.observation.copy())
            if r.terminated:
                break
        return np.concatenate(out)

    a, b = run(), run()
    assert np.array_equal(a, b)


def test_observation_layout_and_size(desc):
    env = PlanarEnv(desc, mode=WALKING)
    s = env.reset(np.random.default_rng(0))
    obs = env.observe(s)
    n = desc.joint_count
    expected = 3 + 3 + 3 + 3 + 4 * n + 1 + 1  # one thermal joint + phase
    assert len(obs) == expected == env.observation_size()
    env.set_mode(STANDING)
    assert env.observation_size() == expected - 1


def test_observation_pose_block_zero_at_frame_origin(desc):
    env = PlanarEnv(desc, EnvConfig(reset_joint_noise=0.0, reset_height_noise=0.0))
    s = env.reset(np.random.default_rng(0))
    s = dataclasses.replace(
        s,
        path_frame=PathFrameState(x=s.pos[0], y=0.0, yaw=0.0),
        pos=np.array([s.pos[0], 0.0, s.pos[2]]),
    )
    obs = env.observe(s)
    assert np.allclose(obs[:2], 0.0, atol=1e-12)  # in-frame planar position
    assert np.allclose(obs[3:6], 0.0, atol=1e-9)  # identity orientation log
    assert np.allclose(obs[6:12], 0.0, atol=1e-12)  # velocities


def test_observed_temperatures_clipped(desc):
    env = PlanarEnv(desc)
    s = env.reset(np.random.default_rng(0))
    temps = s.temps.copy()
    temps[env.thermal_idx] = 150.0
    s = dataclasses.replace(s, temps=temps)
    obs = env.observe(s)
    t_obs = obs[12 + 4 * desc.joint_count]
    assert t_obs == env.thermal_cfg.t_clip_max


def test_dv_consistency_with_reward(desc):
    env = PlanarEnv(desc)
    env.weights = env.weights.override({"impact_reduction": 1.0})
    s = env.reset(np.random.default_rng(3))
    s = dataclasses.replace(s, pos=s.pos + np.array([0.0, 0.0, 0.03]))
    hold = s.q.copy()
    for _ in range(30):
        r = env.step(s, hold)
        s = r.state
        expected = -(min(r.dv[0] ** 2, 1.0) + min(r.dv[1] ** 2, 1.0))
        assert r.reward.terms["impact_reduction"] == pytest.approx(expected, abs=1e-12)
        if r.terminated:
            break
