"""Numeric planar-chain model compiled from a CharacterDescription.

The character is reduced to a floating planar base (x, z, pitch) plus one
revolute joint per non-root link, all rotating about the lateral axis.
Generalized coordinates are [base_x, base_z, base_pitch, q_0 .. q_{n-1}] with
joints in description order; links are stored parent-before-child so forward
passes are a single sweep.

Angles are CCW in the x-z plane. rot(t) maps a link-frame (x, z) offset to
world; perp(u) = d/dt rot(t) u is the 90-degree CCW turn (-u_z, u_x).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from animech.core.character import CharacterDescription

ATHERMAL_AMBIENT = 25.0  # C, reported temperature of joints with no thermal model


@dataclass
class PlanarModel:
    desc: CharacterDescription
    # links, topologically ordered (root first)
    link_names: list[str]
    parent: np.ndarray  # (L,) int32, -1 for root
    joint_of_link: np.ndarray  # (L,) int32 joint index in description order
    attach: np.ndarray  # (L, 2) joint attachment point in parent frame
    mass: np.ndarray  # (L,)
    com: np.ndarray  # (L, 2)
    inertia: np.ndarray  # (L,)
    # joints, description order
    kp: np.ndarray
    kd: np.ndarray
    tau_max: np.ndarray
    q_lo: np.ndarray
    q_hi: np.ndarray
    is_thermal: np.ndarray  # (n,) uint8
    th_alpha: np.ndarray
    th_beta: np.ndarray
    th_tamb: np.ndarray
    # contact points: heel/toe per foot
    cp_link: np.ndarray  # (C,) int32 link index
    cp_point: np.ndarray  # (C, 2) link frame
    cp_foot: np.ndarray  # (C,) int32: 0 left, 1 right
    foot_link: np.ndarray  # (2,) int32 link index (left, right)
    foot_radius: np.ndarray  # (2,)
    foot_y: np.ndarray  # (2,) fixed lateral offsets
    # termination probes
    probe_link: np.ndarray  # (P,) int32
    probe_point: np.ndarray  # (P, 2)

    @property
    def n_links(self) -> int:
        return len(self.mass)

    @property
    def n_joints(self) -> int:
        return len(self.kp)

    @property
    def n_dof(self) -> int:
        return 3 + self.n_joints

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.mass))


def rot(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def build_model(
    desc: CharacterDescription, termination_links: tuple[str, ...] = ()
) -> PlanarModel:
    by_name = {l.name: l for l in desc.links}
    # topological link order: root, then repeatedly append joints whose parent
    # link is already placed
    order = [desc.root]
    placed = {desc.root}
    pending = list(desc.joints)
    while pending:
        progressed = False
        for j in list(pending):
            if j.parent in placed:
                order.append(j.child)
                placed.add(j.child)
                pending.remove(j)
                progressed = True
        if not progressed:
            raise ValueError("joint graph is not a tree rooted at the base link")

    link_index = {name: i for i, name in enumerate(order)}
    L = len(order)
    parent = np.full(L, -1, dtype=np.int32)
    joint_of_link = np.full(L, -1, dtype=np.int32)
    attach = np.zeros((L, 2))
    for jidx, j in enumerate(desc.joints):
        i = link_index[j.child]
        parent[i] = link_index[j.parent]
        joint_of_link[i] = jidx
        attach[i] = j.attach

    mass = np.array([by_name[n].mass for n in order])
    com = np.array([by_name[n].com for n in order])
    inertia = np.array([by_name[n].inertia for n in order])

    n = desc.joint_count
    kp = np.array([j.kp for j in desc.joints])
    kd = np.array([j.kd for j in desc.joints])
    tau_max = np.array([j.torque_limit for j in desc.joints])
    q_lo, q_hi = desc.q_limits()
    is_thermal = np.array(
        [1 if j.thermal is not None else 0 for j in desc.joints], dtype=np.uint8
    )
    th_alpha = np.array([j.thermal.alpha if j.thermal else 0.0 for j in desc.joints])
    th_beta = np.array([j.thermal.beta if j.thermal else 0.0 for j in desc.joints])
    # athermal joints report a fixed room-temperature reading
    th_tamb = np.array(
        [j.thermal.t_ambient if j.thermal else ATHERMAL_AMBIENT for j in desc.joints]
    )

    left, right = desc.foot_links()
    foot_link = np.array(
        [link_index[left.name], link_index[right.name]], dtype=np.int32
    )
    foot_radius = np.array([left.foot.radius, right.foot.radius])
    foot_y = np.array([left.foot.lateral_offset_y, right.foot.lateral_offset_y])
    cp_link, cp_point, cp_foot = [], [], []
    for f, link in enumerate((left, right)):
        rho = link.foot.radius
        for px in (-rho, rho):  # heel, toe
            cp_link.append(link_index[link.name])
            cp_point.append((px, 0.0))
            cp_foot.append(f)

    probe_link, probe_point = [], []
    for name in termination_links:
        i = link_index[name]
        pts = [(0.0, 0.0), tuple(by_name[name].com)]
        for j in desc.joints:
            if j.parent == name:
                pts.append(j.attach)
        for p in pts:
            probe_link.append(i)
            probe_point.append(p)

    return PlanarModel(
        desc=desc,
        link_names=order,
        parent=parent,
        joint_of_link=joint_of_link,
        attach=attach,
        mass=mass,
        com=com,
        inertia=inertia,
        kp=kp,
        kd=kd,
        tau_max=tau_max,
        q_lo=q_lo,
        q_hi=q_hi,
        is_thermal=is_thermal,
        th_alpha=th_alpha,
        th_beta=th_beta,
        th_tamb=th_tamb,
        cp_link=np.array(cp_link, dtype=np.int32),
        cp_point=np.array(cp_point),
        cp_foot=np.array(cp_foot, dtype=np.int32),
        foot_link=foot_link,
        foot_radius=foot_radius,
        foot_y=foot_y,
        probe_link=np.array(probe_link, dtype=np.int32),
        probe_point=(
            np.array(probe_point) if probe_point else np.zeros((0, 2))
        ),
    )


# ---------------------------------------------------------------------------
# reference kinematics/dynamics used by tests, diagnostics, and the env


def forward_kinematics(model: PlanarModel, x: np.ndarray):
    """World link origins (L,2), angles (L,), and COM positions (L,2)."""
    L = model.n_links
    origins = np.zeros((L, 2))
    angles = np.zeros(L)
    coms = np.zeros((L, 2))
    origins[0] = x[:2]
    angles[0] = x[2]
    for i in range(1, L):
        p = model.parent[i]
        u = rot(angles[p]) @ model.attach[i]
        origins[i] = origins[p] + u
        angles[i] = angles[p] + x[3 + model.joint_of_link[i]]
    for i in range(L):
        coms[i] = origins[i] + rot(angles[i]) @ model.com[i]
    return origins, angles, coms


def _link_jacobians(model: PlanarModel, x: np.ndarray):
    """COM Jacobians (L,2,N), angle Jacobians (L,N), velocity-bias COM accels."""
    L, N = model.n_links, model.n_dof
    Jo = np.zeros((L, 2, N))
    Ja = np.zeros((L, N))
    origins, angles, _ = forward_kinematics(model, x)
    Jo[0, 0, 0] = 1.0
    Jo[0, 1, 1] = 1.0
    Ja[0, 2] = 1.0
    for i in range(1, L):
        p = model.parent[i]
        u = rot(angles[p]) @ model.attach[i]
        perp = np.array([-u[1], u[0]])
        Jo[i] = Jo[p] + np.outer(perp, Ja[p])
        Ja[i] = Ja[p].copy()
        Ja[i, 3 + model.joint_of_link[i]] += 1.0
    Jc = np.zeros((L, 2, N))
    for i in range(L):
        uc = rot(angles[i]) @ model.com[i]
        perp = np.array([-uc[1], uc[0]])
        Jc[i] = Jo[i] + np.outer(perp, Ja[i])
    return Jc, Ja


def mass_matrix(model: PlanarModel, x: np.ndarray) -> np.ndarray:
    Jc, Ja = _link_jacobians(model, x)
    N = model.n_dof
    M = np.zeros((N, N))
    for i in range(model.n_links):
        M += model.mass[i] * Jc[i].T @ Jc[i]
        M += model.inertia[i] * np.outer(Ja[i], Ja[i])
    return M


def mechanical_energy(
    model: PlanarModel, x: np.ndarray, v: np.ndarray, gravity: float
) -> float:
    """Kinetic plus gravitational potential energy (zero level at z = 0)."""
    M = mass_matrix(model, x)
    kinetic = 0.5 * float(v @ M @ v)
    _, _, coms = forward_kinematics(model, x)
    potential = float(np.sum(model.mass * gravity * coms[:, 1]))
    return kinetic + potential


def com_velocities(model: PlanarModel, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    Jc, _ = _link_jacobians(model, x)
    return np.einsum("lij,j->li", Jc, v)


def apply_impulse(
    model: PlanarModel, x: np.ndarray, v: np.ndarray, impulse_x: float
) -> np.ndarray:
    """Velocity change from a horizontal impulse at the torso COM."""
    Jc, _ = _link_jacobians(model, x)
    M = mass_matrix(model, x)
    gen_impulse = Jc[0].T @ np.array([impulse_x, 0.0])
    return v + np.linalg.solve(M, gen_impulse)


def static_joint_compensation(
    model: PlanarModel,
    x: np.ndarray,
    gravity: float,
    contact_mask: np.ndarray | None = None,
) -> np.ndarray:
    """PD target offsets cancelling gravity sag in a grounded pose.

    Solves the static equilibrium 0 = Q_grav + J_p^T f + S tau for forces at
    the active heel/toe points and joint torques, least-norm with contact
    forces cheap and torques expensive, then converts the torques to target
    offsets tau / kp. Holding q_target = q_ref + offset makes the reference
    pose itself the closed-loop equilibrium; `contact_mask` selects which of
    the heel/toe points may carry load (all, if omitted).
    """
    n = model.n_joints
    N = model.n_dof
    C = len(model.cp_link)
    if contact_mask is None:
        contact_mask = np.ones(C, dtype=bool)
    origins, angles, _ = forward_kinematics(model, x)
    _, Ja = _link_jacobians(model, x)
    # origin Jacobians per link, rebuilt here for the contact points
    Jo = np.zeros((model.n_links, 2, N))
    Jo[0, 0, 0] = 1.0
    Jo[0, 1, 1] = 1.0
    for i in range(1, model.n_links):
        p = model.parent[i]
        u = rot(angles[p]) @ model.attach[i]
        Jo[i] = Jo[p] + np.outer(np.array([-u[1], u[0]]), Ja[p])

    cols = []
    for cidx in range(C):
        if not contact_mask[cidx]:
            continue
        i = model.cp_link[cidx]
        u = rot(angles[i]) @ model.cp_point[cidx]
        jx = Jo[i, 0] - u[1] * Ja[i]
        jz = Jo[i, 1] + u[0] * Ja[i]
        cols.append(jx)
        cols.append(jz)
    nf = len(cols)
    A = np.zeros((N, nf + n))
    for k, col in enumerate(cols):
        A[:, k] = col
    A[3:, nf:] = np.eye(n)
    Jc, _ = _link_jacobians(model, x)
    b = np.zeros(N)
    for i in range(model.n_links):
        b -= model.mass[i] * Jc[i].T @ np.array([0.0, -gravity])
    scale = np.concatenate([np.full(nf, 500.0), np.ones(n)])
    sol, *_ = np.linalg.lstsq(A * scale, b, rcond=None)
    tau = (sol * scale)[nf:]
    with np.errstate(divide="ignore", invalid="ignore"):
        dq = np.where(model.kp > 0.0, tau / model.kp, 0.0)
    return dq
