import numpy as np
import pytest

from animech import rewards
from animech.core.rotations import boxminus, quat_from_pitch
from animech.refgen import KinematicTarget
from animech.thermal import ThermalCbfConfig

CFG = ThermalCbfConfig()
LEG = np.arange(6)
NECK = np.array([6])


def make_target(n=7, **kw):
    defaults = dict(
        pos=np.zeros(3),
        pitch=0.0,
        linvel=np.zeros(3),
        angvel=np.zeros(3),
        q=np.zeros(n),
        qd=np.zeros(n),
        contact_left=True,
        contact_right=True,
    )
    defaults.update(kw)
    return KinematicTarget(**defaults)


def perfect_inputs(n=7):
    return dict(
        pos=np.zeros(3),
        quat=np.array([1.0, 0, 0, 0]),
        linvel=np.zeros(3),
        angvel=np.zeros(3),
        q=np.zeros(n),
        qd=np.zeros(n),
        contact_left=True,
        contact_right=True,
        target=make_target(n),
        leg_idx=LEG,
        neck_idx=NECK,
    )


def test_perfect_tracking_terms():
    b = rewards.imitation_terms(**perfect_inputs())
    for name in (
        "torso_position_xy",
        "torso_orientation",
        "linear_vel_xy",
        "linear_vel_z",
        "angular_vel_xy",
        "angular_vel_z",
    ):
        assert b.terms[name] == pytest.approx(1.0)
    assert b.terms["leg_joint_pos"] == 0.0
    assert b.terms["neck_joint_pos"] == 0.0
    assert b.terms["contact"] == 2.0
    assert b.terms["survival"] == 1.0


def test_position_kernel_value():
    inp = perfect_inputs()
    inp["pos"] = np.array([0.03, 0.04, 0.0])  # error norm 0.05
    b = rewards.imitation_terms(**inp)
    assert b.terms["torso_position_xy"] == pytest.approx(np.exp(-0.5), abs=1e-12)


def test_orientation_kernel_value():
    inp = perfect_inputs()
    inp["quat"] = quat_from_pitch(0.1)
    b = rewards.imitation_terms(**inp)
    assert b.terms["torso_orientation"] == pytest.approx(np.exp(-0.2), abs=1e-12)


def test_contact_mismatch():
    inp = perfect_inputs()
    inp["contact_left"] = False
    b = rewards.imitation_terms(**inp)
    assert b.terms["contact"] == 1.0


def test_regularization_constant_history_zero():
    a = np.ones(7)
    b = rewards.regularization_terms(a, a, a, np.zeros(7), np.zeros(7), LEG, NECK)
    assert b.terms["leg_action_rate"] == 0.0
    assert b.terms["neck_action_acc"] == 0.0


def test_regularization_single_joint_values():
    # one neck joint: a=1, prev=0, prev2=0 -> rate -1, acc -1
    a = np.zeros(7)
    a[6] = 1.0
    z = np.zeros(7)
    b = rewards.regularization_terms(a, z, z, z, z, LEG, NECK)
    assert b.terms["neck_action_rate"] == pytest.approx(-1.0)
    assert b.terms["neck_action_acc"] == pytest.approx(-1.0)


def test_torque_term():
    tau = np.zeros(7)
    tau[0], tau[1] = 2.0, -2.0
    b = rewards.regularization_terms(
        np.zeros(7), np.zeros(7), np.zeros(7), tau, np.zeros(7), LEG, NECK
    )
    assert b.terms["joint_torques"] == pytest.approx(-8.0)


def test_limits_all_safe():
    b = rewards.limit_terms(
        q=np.zeros(7),
        qd=np.zeros(7),
        q_lo=np.full(7, -1.5),
        q_hi=np.full(7, 1.5),
        temps_clipped=np.array([70.0]),
        t_dots=np.array([0.0]),
        thermal_cfg=CFG,
        foot_contact_pair=False,
    )
    assert b.terms["neck_temperature"] == 0.0
    assert b.terms["joint_limits"] == 0.0
    assert b.terms["foot_collision"] == 0.0


def test_joint_limit_upper_violation_value():
    # q_max=1.5, q=1.45, qd=0.2: -0.2 + 20*(1.4-1.45) = -1.2 -> penalty 1.2
    q = np.zeros(7)
    qd = np.zeros(7)
    q[0], qd[0] = 1.45, 0.2
    v = rewards.joint_limit_violation(
        q, qd, np.full(7, -1.5), np.full(7, 1.5), margin=0.1, gamma=20.0
    )
    assert v == pytest.approx(-1.2)


def test_foot_collision_indicator():
    assert rewards.feet_collide(
        np.array([0.0, 0.05, 0.0]), np.array([0.0, -0.05, 0.0]), 0.075, 0.075
    )
    assert not rewards.feet_collide(
        np.array([0.0, 0.2, 0.0]), np.array([0.0, -0.2, 0.0]), 0.075, 0.075
    )


def test_impact_term_values():
    assert rewards.impact_term(0.0, 0.0).terms["impact_reduction"] == 0.0
    assert rewards.impact_term(0.3, 0.0, 1.0).terms[
        "impact_reduction"
    ] == pytest.approx(-0.09)
    assert rewards.impact_term(2.0, 0.0, 1.0).terms[
        "impact_reduction"
    ] == pytest.approx(-1.0)


def test_impact_term_bounded():
    b = rewards.impact_term(50.0, 50.0, 1.0)
    assert b.terms["impact_reduction"] >= -2.0


def test_total_standing_perfect_is_31():
    # sum of the standing kernel weights at their maxima, contact 2*2.0,
    # survival 20; hand-recomputed from the weight table
    w = rewards.RewardWeights()
    imit = rewards.imitation_terms(**perfect_inputs())
    reg = rewards.regularization_terms(
        np.zeros(7), np.zeros(7), np.zeros(7), np.zeros(7), np.zeros(7), LEG, NECK
    )
    lim = rewards.limit_terms(
        np.zeros(7), np.zeros(7), np.full(7, -1.5), np.full(7, 1.5),
        np.array([70.0]), np.array([0.0]), CFG, False,
    )
    imp = rewards.impact_term(0.0, 0.0)
    total = rewards.total_reward([imit, reg, lim, imp], w, "standing")
    ws = w.for_mode("standing")
    expected = (
        ws["torso_position_xy"] + ws["torso_orientation"] + ws["linear_vel_xy"]
        + ws["linear_vel_z"] + ws["angular_vel_z"] + ws["angular_vel_xy"]
        + 2 * ws["contact"] + ws["survival"]
    )
    assert expected == pytest.approx(31.0)
    assert total.total == pytest.approx(31.0)


def test_total_linearity_in_single_term():
    w = rewards.RewardWeights()
    imit = rewards.imitation_terms(**perfect_inputs())
    reg = rewards.regularization_terms(
        np.zeros(7), np.zeros(7), np.zeros(7), np.zeros(7), np.zeros(7), LEG, NECK
    )
    lim = rewards.limit_terms(
        np.zeros(7), np.zeros(7), np.full(7, -1.5), np.full(7, 1.5),
        np.array([70.0]), np.array([0.0]), CFG, False,
    )
    base = rewards.total_reward(
        [imit, reg, lim, rewards.impact_term(0.0, 0.0)], w, "walking"
    )
    bumped = rewards.total_reward(
        [imit, reg, lim, rewards.impact_term(0.5, 0.0)], w, "walking"
    )
    dv_term = -0.25
    expected_delta = w.for_mode("walking")["impact_reduction"] * dv_term
    assert bumped.total - base.total == pytest.approx(expected_delta, abs=1e-12)


def test_zero_weights_zero_total():
    zeros = {name: 0.0 for name in rewards.ALL_TERMS}
    w = rewards.RewardWeights().override(zeros)
    imit = rewards.imitation_terms(**perfect_inputs())
    total = rewards.total_reward([imit], w, "standing")
    assert total.total == 0.0


def test_grand_total_equals_sum_of_weighted():
    rng = np.random.default_rng(0)
    w = rewards.RewardWeights()
    for _ in range(20):
        inp = perfect_inputs()
        inp["pos"] = rng.normal(scale=0.1, size=3)
        inp["q"] = rng.normal(scale=0.3, size=7)
        imit = rewards.imitation_terms(**inp)
        total = rewards.total_reward([imit], w, "walking")
        assert total.total == pytest.approx(sum(total.weighted.values()), abs=1e-9)


def test_kernel_terms_in_unit_interval():
    rng = np.random.default_rng(1)
    for _ in range(100):
        inp = perfect_inputs()
        inp["pos"] = rng.normal(scale=0.5, size=3)
        inp["quat"] = quat_from_pitch(rng.uniform(-3, 3))
        inp["linvel"] = rng.normal(scale=2.0, size=3)
        inp["angvel"] = rng.normal(scale=3.0, size=3)
        b = rewards.imitation_terms(**inp)
        for name in (
            "torso_position_xy", "torso_orientation", "linear_vel_xy",
            "linear_vel_z", "angular_vel_xy", "angular_vel_z",
        ):
            assert 0.0 < b.terms[name] <= 1.0


def test_weight_table_defaults():
    w = rewards.RewardWeights()
    assert w.torso_position_xy == (1.0, 4.0)
    assert w.neck_joint_pos == (40.0, 40.0)
    assert w.leg_joint_vel == (1.0e-3, 1.0e-3)
    assert w.survival == (20.0, 20.0)
    assert w.neck_temperature == (2.0, 2.0)
    assert w.joint_limits == (0.5, 0.2)
    assert w.foot_collision == (10.0, 10.0)
    assert w.impact_reduction == (2.5e-3, 2.5e-3)
    assert w.angular_vel_xy == (0.0, 0.0)


def test_override_rejects_unknown():
    with pytest.raises(KeyError):
        rewards.RewardWeights().override({"bogus_term": 1.0})
