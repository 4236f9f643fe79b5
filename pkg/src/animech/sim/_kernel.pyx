# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled physics kernel: the 600 Hz substep loop for one control step.

Mirrors animech.sim.kernel_py.run_substeps operation-for-operation; see that
module for the algorithm description. Selected automatically at import by
animech.sim when the extension is built.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, fabs, isfinite

DEF MAX_L = 24
DEF MAX_N = 32
DEF MAX_C = 8


def run_substeps(
    model,
    cnp.float64_t[::1] x,
    cnp.float64_t[::1] v,
    cnp.float64_t[::1] temps,
    cnp.float64_t[::1] filt,
    cnp.float64_t[::1] anchor,
    cnp.uint8_t[::1] anchor_active,
    cnp.float64_t[::1] a_prev,
    cnp.float64_t[::1] a_next,
    int n_substeps,
    double dt,
    double filter_alpha,
    double gravity,
    double k_normal,
    double d_normal,
    double friction,
    double k_tangent,
    double d_tangent,
    cnp.float64_t[::1] mean_tau_out,
    cnp.float64_t[::1] mean_tausq_out,
):
    cdef cnp.int32_t[::1] parent = model.parent
    cdef cnp.int32_t[::1] jol = model.joint_of_link
    cdef cnp.float64_t[:, ::1] attach = model.attach
    cdef cnp.float64_t[::1] mass = model.mass
    cdef cnp.float64_t[:, ::1] com = model.com
    cdef cnp.float64_t[::1] inertia = model.inertia
    cdef cnp.float64_t[::1] kp = model.kp
    cdef cnp.float64_t[::1] kd = model.kd
    cdef cnp.float64_t[::1] tau_max = model.tau_max
    cdef cnp.uint8_t[::1] is_thermal = model.is_thermal
    cdef cnp.float64_t[::1] th_alpha = model.th_alpha
    cdef cnp.float64_t[::1] th_beta = model.th_beta
    cdef cnp.float64_t[::1] th_tamb = model.th_tamb
    cdef cnp.int32_t[::1] cp_link = model.cp_link
    cdef cnp.float64_t[:, ::1] cp_point = model.cp_point
    cdef cnp.int32_t[::1] cp_foot = model.cp_foot
    cdef cnp.int32_t[::1] foot_link = model.foot_link

    cdef int L = mass.shape[0]
    cdef int N = x.shape[0]
    cdef int n = kp.shape[0]
    cdef int C = cp_link.shape[0]
    if L > MAX_L or N > MAX_N or C > MAX_C:
        raise ValueError("model exceeds compiled kernel size limits")

    cdef double origins[MAX_L][2]
    cdef double angles[MAX_L]
    cdef double w[MAX_L]
    cdef double vo[MAX_L][2]
    cdef double Jo[MAX_L][2][MAX_N]
    cdef double Ja[MAX_L][MAX_N]
    cdef double ao[MAX_L][2]
    cdef double Jc0[MAX_N]
    cdef double Jc1[MAX_N]
    cdef double M[MAX_N][MAX_N]
    cdef double rhs[MAX_N]
    cdef double qdd[MAX_N]
    cdef double tau[MAX_N]
    cdef double chol[MAX_N][MAX_N]
    cdef double vz_prev[2]
    cdef double vz_now[2]
    cdef double dv_max[2]
    cdef double fn_foot[2]

    cdef int i, j, k, p, cidx, a, b, f
    cdef double c_, s_, ux, uz, frac, a_foh, t, acx, acz, ucx, ucz
    cdef double px, pz, vpx, vpz, fx, fz, cap, wp2, mi, ii
    cdef double fx_total = 0.0, fz_total = 0.0
    cdef double gz = -gravity
    cdef double tmp, diag
    cdef bint ok = True, last

    for j in range(n):
        mean_tau_out[j] = 0.0
        mean_tausq_out[j] = 0.0
    dv_max[0] = 0.0
    dv_max[1] = 0.0
    fn_foot[0] = 0.0
    fn_foot[1] = 0.0

    # -- kinematics sweep (inline twice below via goto-less duplication) -----
    # implemented as a closure-free block: recompute after integration too
    _kinematics(L, N, parent, jol, attach, x, v, origins, angles, w, vo, Jo, Ja, ao)
    for f in range(2):
        i = foot_link[f]
        c_ = cos(angles[i]); s_ = sin(angles[i])
        ucx = c_ * com[i, 0] - s_ * com[i, 1]
        vz_prev[f] = vo[i][1] + w[i] * ucx

    for k in range(1, n_substeps + 1):
        frac = (<double> k) / n_substeps
        last = k == n_substeps
        for j in range(n):
            a_foh = a_prev[j] + frac * (a_next[j] - a_prev[j])
            filt[j] = filt[j] + filter_alpha * (a_foh - filt[j])
            t = kp[j] * (filt[j] - x[3 + j]) - kd[j] * v[3 + j]
            if t > tau_max[j]:
                t = tau_max[j]
            elif t < -tau_max[j]:
                t = -tau_max[j]
            tau[j] = t
            mean_tau_out[j] += t
            mean_tausq_out[j] += t * t

        for a in range(N):
            rhs[a] = 0.0
            for b in range(N):
                M[a][b] = 0.0
        for j in range(n):
            rhs[3 + j] = tau[j]

        for i in range(L):
            c_ = cos(angles[i]); s_ = sin(angles[i])
            ucx = c_ * com[i, 0] - s_ * com[i, 1]
            ucz = s_ * com[i, 0] + c_ * com[i, 1]
            for a in range(N):
                Jc0[a] = Jo[i][0][a] - ucz * Ja[i][a]
                Jc1[a] = Jo[i][1][a] + ucx * Ja[i][a]
            wp2 = w[i] * w[i]
            acx = ao[i][0] - wp2 * ucx
            acz = ao[i][1] - wp2 * ucz
            mi = mass[i]
            ii = inertia[i]
            for a in range(N):
                for b in range(a, N):
                    M[a][b] += mi * (Jc0[a] * Jc0[b] + Jc1[a] * Jc1[b]) \
                        + ii * Ja[i][a] * Ja[i][b]
                rhs[a] += mi * (Jc0[a] * (0.0 - acx) + Jc1[a] * (gz - acz))

        if last:
            fn_foot[0] = 0.0
            fn_foot[1] = 0.0
            fx_total = 0.0
            fz_total = 0.0
        for cidx in range(C):
            i = cp_link[cidx]
            c_ = cos(angles[i]); s_ = sin(angles[i])
            ux = c_ * cp_point[cidx, 0] - s_ * cp_point[cidx, 1]
            uz = s_ * cp_point[cidx, 0] + c_ * cp_point[cidx, 1]
            px = origins[i][0] + ux
            pz = origins[i][1] + uz
            if pz < 0.0:
                vpx = vo[i][0] - w[i] * uz
                vpz = vo[i][1] + w[i] * ux
                fz = -k_normal * pz - d_normal * vpz
                if fz < 0.0:
                    fz = 0.0
                if anchor_active[cidx] == 0:
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
                for a in range(N):
                    rhs[a] += fx * (Jo[i][0][a] - uz * Ja[i][a]) \
                        + fz * (Jo[i][1][a] + ux * Ja[i][a])
                if last:
                    fn_foot[cp_foot[cidx]] += fz
                    fx_total += fx
                    fz_total += fz
            else:
                anchor_active[cidx] = 0

        # mirror the upper triangle, then Cholesky-solve M qdd = rhs
        for a in range(N):
            for b in range(a):
                M[a][b] = M[b][a]
        for a in range(N):
            for b in range(a, N):
                tmp = M[a][b]
                for j in range(a):
                    tmp -= chol[a][j] * chol[b][j]
                if a == b:
                    if tmp <= 0.0:
                        ok = False
                        tmp = 1e-12
                    diag = tmp ** 0.5
                    chol[a][a] = diag
                else:
                    chol[b][a] = tmp / chol[a][a]
        for a in range(N):
            tmp = rhs[a]
            for j in range(a):
                tmp -= chol[a][j] * qdd[j]
            qdd[a] = tmp / chol[a][a]
        for a in range(N - 1, -1, -1):
            tmp = qdd[a]
            for j in range(a + 1, N):
                tmp -= chol[j][a] * qdd[j]
            qdd[a] = tmp / chol[a][a]

        for a in range(N):
            v[a] = v[a] + dt * qdd[a]
            x[a] = x[a] + dt * v[a]

        for j in range(n):
            if is_thermal[j]:
                temps[j] = temps[j] + dt * (
                    -th_alpha[j] * (temps[j] - th_tamb[j])
                    + th_beta[j] * tau[j] * tau[j]
                )

        _kinematics(L, N, parent, jol, attach, x, v, origins, angles, w, vo, Jo, Ja, ao)
        for f in range(2):
            i = foot_link[f]
            c_ = cos(angles[i]); s_ = sin(angles[i])
            ucx = c_ * com[i, 0] - s_ * com[i, 1]
            vz_now[f] = vo[i][1] + w[i] * ucx
            tmp = fabs(vz_now[f] - vz_prev[f])
            if tmp > dv_max[f]:
                dv_max[f] = tmp
            vz_prev[f] = vz_now[f]

    for j in range(n):
        mean_tau_out[j] /= n_substeps
        mean_tausq_out[j] /= n_substeps
    for a in range(N):
        if not (isfinite(x[a]) and isfinite(v[a])):
            ok = False
    return (
        bool(ok),
        dv_max[0],
        dv_max[1],
        fn_foot[0],
        fn_foot[1],
        fx_total,
        fz_total,
    )


cdef inline void _kinematics(
    int L,
    int N,
    cnp.int32_t[::1] parent,
    cnp.int32_t[::1] jol,
    cnp.float64_t[:, ::1] attach,
    cnp.float64_t[::1] x,
    cnp.float64_t[::1] v,
    double origins[MAX_L][2],
    double angles[MAX_L],
    double w[MAX_L],
    double vo[MAX_L][2],
    double Jo[MAX_L][2][MAX_N],
    double Ja[MAX_L][MAX_N],
    double ao[MAX_L][2],
) noexcept nogil:
    cdef int i, p, j, a
    cdef double c_, s_, ux, uz, wp2
    origins[0][0] = x[0]
    origins[0][1] = x[1]
    angles[0] = x[2]
    vo[0][0] = v[0]
    vo[0][1] = v[1]
    w[0] = v[2]
    for a in range(N):
        Jo[0][0][a] = 0.0
        Jo[0][1][a] = 0.0
        Ja[0][a] = 0.0
    Jo[0][0][0] = 1.0
    Jo[0][1][1] = 1.0
    Ja[0][2] = 1.0
    ao[0][0] = 0.0
    ao[0][1] = 0.0
    for i in range(1, L):
        p = parent[i]
        j = jol[i]
        c_ = cos(angles[p]); s_ = sin(angles[p])
        ux = c_ * attach[i, 0] - s_ * attach[i, 1]
        uz = s_ * attach[i, 0] + c_ * attach[i, 1]
        origins[i][0] = origins[p][0] + ux
        origins[i][1] = origins[p][1] + uz
        angles[i] = angles[p] + x[3 + j]
        vo[i][0] = vo[p][0] - w[p] * uz
        vo[i][1] = vo[p][1] + w[p] * ux
        w[i] = w[p] + v[3 + j]
        for a in range(N):
            Jo[i][0][a] = Jo[p][0][a] - uz * Ja[p][a]
            Jo[i][1][a] = Jo[p][1][a] + ux * Ja[p][a]
            Ja[i][a] = Ja[p][a]
        Ja[i][3 + j] += 1.0
        wp2 = w[p] * w[p]
        ao[i][0] = ao[p][0] - wp2 * ux
        ao[i][1] = ao[p][1] - wp2 * uz
