"""Pure-numpy physics kernel: the 600 Hz substep loop for one control step.

Reference implementation of the hot loop; `animech.sim._kernel` is the
compiled twin with identical semantics, selected at import when available.

Per substep: first-order-hold action interpolation, low-pass filtering, PD
torques with limits, Jacobian-assembled planar multibody dynamics (mass
matrix + velocity bias per link), compliant heel/toe ground contact with
stick-slip friction anchors, semi-implicit Euler integration, and explicit
Euler temperature propagation for thermal joints.
"""

from __future__ import annotations

import numpy as np

from animech.sim.model import PlanarModel

GRAVITY_DEFAULT = 9.81


def run_substeps(
    model: PlanarModel,
    x: np.ndarray,
    v: np.ndarray,
    temps: np.ndarray,
    filt: np.ndarray,
    anchor: np.ndarray,
    anchor_active: np.ndarray,
    a_prev: np.ndarray,
    a_next: np.ndarray,
    n_substeps: int,
    dt: float,
    filter_alpha: float,
    gravity: float,
    k_normal: float,
    d_normal: float,
    friction: float,
    k_tangent: float,
    d_tangent: float,
    mean_tau_out: np.ndarray,
    mean_tausq_out: np.ndarray,
):
    """Advance the state by n_substeps; arrays are mutated in place.

    Returns (ok, dv_left, dv_right, fn_left, fn_right, fx_total, fz_total):
    per-foot max |vertical COM velocity change| across substeps, per-foot
    normal force sums and total contact force at the last substep.
    """
    L = model.n_links
    N = model.n_dof
    n = model.n_joints
    C = len(model.cp_link)

    parent = model.parent
    jol = model.joint_of_link
    attach = model.attach
    mass = model.mass
    com = model.com
    inertia = model.inertia
    gvec = np.array([0.0, -gravity])

    mean_tau_out[:] = 0.0
    mean_tausq_out[:] = 0.0
    dv_max = np.zeros(2)
    fn_foot = np.zeros(2)
    fx_total = 0.0
    fz_total = 0.0

    origins = np.zeros((L, 2))
    angles = np.zeros(L)
    w = np.zeros(L)
    vo = np.zeros((L, 2))
    Jo = np.zeros((L, 2, N))
    Ja = np.zeros((L, N))
    ao = np.zeros((L, 2))

    def kinematics():
        origins[0] = x[:2]
        angles[0] = x[2]
        vo[0] = v[:2]
        w[0] = v[2]
        Jo[:] = 0.0
        Ja[:] = 0.0
        ao[:] = 0.0
        Jo[0, 0, 0] = 1.0
        Jo[0, 1, 1] = 1.0
        Ja[0, 2] = 1.0
        for i in range(1, L):
            p = parent[i]
            j = jol[i]
            c, s = np.cos(angles[p]), np.sin(angles[p])
            ux = c * attach[i, 0] - s * attach[i, 1]
            uz = s * attach[i, 0] + c * attach[i, 1]
            origins[i, 0] = origins[p, 0] + ux
            origins[i, 1] = origins[p, 1] + uz
            angles[i] = angles[p] + x[3 + j]
            vo[i, 0] = vo[p, 0] - w[p] * uz
            vo[i, 1] = vo[p, 1] + w[p] * ux
            w[i] = w[p] + v[3 + j]
            Jo[i, 0] = Jo[p, 0] - uz * Ja[p]
            Jo[i, 1] = Jo[p, 1] + ux * Ja[p]
            Ja[i] = Ja[p]
            Ja[i, 3 + j] += 1.0
            ao[i, 0] = ao[p, 0] - w[p] * w[p] * ux
            ao[i, 1] = ao[p, 1] - w[p] * w[p] * uz

    def foot_com_vz():
        out = np.zeros(2)
        for f in range(2):
            i = model.foot_link[f]
            c, s = np.cos(angles[i]), np.sin(angles[i])
            ucx = c * com[i, 0] - s * com[i, 1]
            out[f] = vo[i, 1] + w[i] * ucx
        return out

    kinematics()
    vz_prev = foot_com_vz()

    ok = True
    for k in range(1, n_substeps + 1):
        frac = k / n_substeps
        q = x[3:]
        qd = v[3:]
        a_foh = a_prev + frac * (a_next - a_prev)
        filt += filter_alpha * (a_foh - filt)
        tau = model.kp * (filt - q) - model.kd * qd
        np.clip(tau, -model.tau_max, model.tau_max, out=tau)
        mean_tau_out += tau
        mean_tausq_out += tau * tau

        # COM Jacobians and bias accelerations
        Jc = np.empty((L, 2, N))
        ac = np.empty((L, 2))
        for i in range(L):
            c, s = np.cos(angles[i]), np.sin(angles[i])
            ucx = c * com[i, 0] - s * com[i, 1]
            ucz = s * com[i, 0] + c * com[i, 1]
            Jc[i, 0] = Jo[i, 0] - ucz * Ja[i]
            Jc[i, 1] = Jo[i, 1] + ucx * Ja[i]
            ac[i, 0] = ao[i, 0] - w[i] * w[i] * ucx
            ac[i, 1] = ao[i, 1] - w[i] * w[i] * ucz

        M = np.einsum("l,lan,lam->nm", mass, Jc, Jc) + np.einsum(
            "l,ln,lm->nm", inertia, Ja, Ja
        )
        rhs = np.einsum("l,lan,la->n", mass, Jc, gvec - ac)
        rhs[3:] += tau

        # ground contact at the heel/toe points
        last = k == n_substeps
        if last:
            fn_foot[:] = 0.0
            fx_total = 0.0
            fz_total = 0.0
        for cidx in range(C):
            i = model.cp_link[cidx]
            c, s = np.cos(angles[i]), np.sin(angles[i])
            px_l, pz_l = model.cp_point[cidx]
            ux = c * px_l - s * pz_l
            uz = s * px_l + c * pz_l
            px = origins[i, 0] + ux
            pz = origins[i, 1] + uz
            if pz < 0.0:
                vpx = vo[i, 0] - w[i] * uz
                vpz = vo[i, 1] + w[i] * ux
                fz = -k_normal * pz - d_normal * vpz
                if fz < 0.0:
                    fz = 0.0
                if not anchor_active[cidx]:
                    anchor[cidx] = px
                    anchor_active[cidx] = 1
                fx = -k_tangent * (px - anchor[cidx]) - d_tangent * vpx
                cap = friction * fz
                if fx > cap:
                    fx = cap
                    anchor[cidx] = px + (fx + d_tangent * vpx) / k_tangent
                elif fx < -cap:
                    fx = -cap
                    anchor[cidx] = px + (fx + d_tangent * vpx) / k_tangent
                rhs += fx * (Jo[i, 0] - uz * Ja[i]) + fz * (Jo[i, 1] + ux * Ja[i])
                if last:
                    fn_foot[model.cp_foot[cidx]] += fz
                    fx_total += fx
                    fz_total += fz
            else:
                anchor_active[cidx] = 0

        qdd = np.linalg.solve(M, rhs)
        v += dt * qdd
        x += dt * v

        for j in range(n):
            if model.is_thermal[j]:
                temps[j] += dt * (
                    -model.th_alpha[j] * (temps[j] - model.th_tamb[j])
                    + model.th_beta[j] * tau[j] * tau[j]
                )

        kinematics()
        vz_now = foot_com_vz()
        dv = np.abs(vz_now - vz_prev)
        np.maximum(dv_max, dv, out=dv_max)
        vz_prev = vz_now

    mean_tau_out /= n_substeps
    mean_tausq_out /= n_substeps
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        ok = False
    return (
        ok,
        float(dv_max[0]),
        float(dv_max[1]),
        float(fn_foot[0]),
        float(fn_foot[1]),
        float(fx_total),
        float(fz_total),
    )
