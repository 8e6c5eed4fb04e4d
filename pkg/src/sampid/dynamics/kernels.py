"""Compiled physics kernels.

State vectors are flat: ``[p(3), quat(4, scalar first), v(3), omega(3), q(n), dq(n)]``.
Every batched entry point loops over independent rollouts with ``prange``;
entries never share writable memory, so results do not depend on the number
of threads.

Division follows IEEE semantics (``error_model="numpy"``): a degenerate
parameter vector yields inf/nan, which the callers report as divergence.

Integration uses a velocity-Verlet scheme that reuses the end-of-substep
acceleration for the next substep (one force evaluation per substep).  It is
exact for constant acceleration and second order in general.
"""
import math

import numpy as np
from numba import njit, prange

KIND_PLANAR_QUADRUPED = 0
KIND_DOUBLE_PENDULUM = 1
KIND_LINEAR_1D = 2

# consts layout shared by all models
C_DT, C_NSUB, C_G, C_TLIM, C_MOTOR = 0, 1, 2, 3, 4
# planar quadruped
C_K, C_C, C_MU, C_CT, C_L1, C_L2, C_HIPF, C_HIPR, C_ARM, C_JDAMP = 5, 6, 7, 8, 9, 10, 11, 12, 13, 14
# double pendulum
C_PL1, C_PM1, C_PR1X, C_PR1Z, C_PI1, C_PJDAMP = 5, 6, 7, 8, 9, 10
N_CONSTS = 15

# phys layout: m, r(3), I(9 row-major, about link origin)
P_M, P_RX, P_RY, P_RZ, P_IYY = 0, 1, 2, 3, 8
N_PHYS = 13

N_COST_TERMS = 7  # p, v, quat, omega, q, dq, tau


@njit(cache=True, nogil=True, error_model="numpy", inline="always")
def _motor(tau_pd, code, kap):
    if code == 0:
        return tau_pd
    if code == 1:
        return kap * tau_pd
    return kap * math.tanh(tau_pd / kap)


@njit(cache=True, nogil=True, error_model="numpy", inline="always")
def _joint_torque(qt, q, dq, kp, kd, code, kap, limit):
    tau = _motor(kp * (qt - q) - kd * dq, code, kap)
    if tau > limit:
        return limit
    if tau < -limit:
        return -limit
    return tau


# ---------------------------------------------------------------- quadruped


@njit(cache=True, nogil=True, error_model="numpy")
def _quad_accel(Q, V, qt, phys, kap, kp, kd, consts, acc, tau, fz_out):
    """Accelerations in CoM coordinates ``Q = (cx, cz, pitch, q0..q3)``.

    Contact damping (normal and tangential) enters implicitly: the system
    ``(M + dt J^T C J) a = f + J^T F`` is solved through a Schur complement
    on the 3-dof base block, which keeps stiff friction stable at 1 ms.
    """
    m = phys[P_M]
    rx = phys[P_RX]
    rz = phys[P_RZ]
    icyy = phys[P_IYY] - m * (rx * rx + rz * rz)
    beta = Q[2]
    w = V[2]
    cb = math.cos(beta)
    sb = math.sin(beta)
    # world offset CoM -> origin
    Rrx = cb * rx + sb * rz
    Rrz = -sb * rx + cb * rz
    pox = Q[0] - Rrx
    poz = Q[1] - Rrz

    k = consts[C_K]
    c = consts[C_C]
    mu = consts[C_MU]
    ct = consts[C_CT]
    l1 = consts[C_L1]
    l2 = consts[C_L2]
    arm = consts[C_ARM]
    jdamp = consts[C_JDAMP]
    code = int(consts[C_MOTOR])
    limit = consts[C_TLIM]
    dt = consts[C_DT]

    # Schur-reduced base system S a_b = rb
    s00 = m
    s01 = 0.0
    s02 = 0.0
    s11 = m
    s12 = 0.0
    s22 = icyy
    rb0 = 0.0
    rb1 = -m * consts[C_G]
    rb2 = 0.0
    # per-leg quantities kept for back substitution
    leg_dat = np.zeros((2, 16))
    for leg in range(2):
        hx = consts[C_HIPF] if leg == 0 else consts[C_HIPR]
        j0 = 2 * leg
        q1 = Q[3 + j0]
        q2 = Q[4 + j0]
        dq1 = V[3 + j0]
        dq2 = V[4 + j0]
        s1 = math.sin(q1)
        c1 = math.cos(q1)
        s12_ = math.sin(q1 + q2)
        c12 = math.cos(q1 + q2)
        fbx = hx - l1 * s1 - l2 * s12_
        fbz = -l1 * c1 - l2 * c12
        j00 = -l1 * c1 - l2 * c12
        j01 = -l2 * c12
        j10 = l1 * s1 + l2 * s12_
        j11 = l2 * s12_
        # world-frame foot Jacobian wrt the leg joints
        w00 = cb * j00 + sb * j10
        w01 = cb * j01 + sb * j11
        w10 = -sb * j00 + cb * j10
        w11 = -sb * j01 + cb * j11
        fwx_rel = cb * fbx + sb * fbz
        fwz_rel = -sb * fbx + cb * fbz
        fz_w = poz + fwz_rel
        # foot relative to CoM
        ax = pox + fwx_rel - Q[0]
        az = fz_w - Q[1]
        tq1 = _joint_torque(qt[j0], q1, dq1, kp[j0], kd[j0], code, kap[j0], limit)
        tq2 = _joint_torque(qt[j0 + 1], q2, dq2, kp[j0 + 1], kd[j0 + 1], code, kap[j0 + 1], limit)
        tau[j0] = tq1
        tau[j0 + 1] = tq2
        gx = 0.0
        gz = 0.0
        ctx = 0.0
        cn = 0.0
        if fz_w < 0.0:
            vfx = V[0] + w * az + w00 * dq1 + w01 * dq2
            vfz = V[1] - w * ax + w10 * dq1 + w11 * dq2
            fn = -k * fz_w - c * vfz
            cn = c
            if fn < 0.0:
                fn = 0.0
                cn = 0.0
            ft = -ct * vfx
            ctx = ct
            fmax = mu * fn
            if ft > fmax:
                ft = fmax
                ctx = 0.0
            elif ft < -fmax:
                ft = -fmax
                ctx = 0.0
            gx = ft
            gz = fn
        # base part of the contact Jacobian: rows (x, z), cols (vx, vz, w)
        # Bx = (1, 0, az), Bz = (0, 1, -ax)
        ctd = ctx * dt
        cnd = cn * dt
        # A_ll = arm I + dt L^T C L
        l00 = arm + ctd * w00 * w00 + cnd * w10 * w10
        l01 = ctd * w00 * w01 + cnd * w10 * w11
        l11 = arm + ctd * w01 * w01 + cnd * w11 * w11
        det = l00 * l11 - l01 * l01
        i00 = l11 / det
        i01 = -l01 / det
        i11 = l00 / det
        # A_bl = dt B^T C L  (3x2)
        b00 = ctd * w00
        b01 = ctd * w01
        b10 = cnd * w10
        b11 = cnd * w11
        b20 = ctd * az * w00 - cnd * ax * w10
        b21 = ctd * az * w01 - cnd * ax * w11
        rl1 = tq1 - jdamp * dq1 + w00 * gx + w10 * gz
        rl2 = tq2 - jdamp * dq2 + w01 * gx + w11 * gz
        # base block contributions dt B^T C B and B^T F
        s00 += ctd
        s11 += cnd
        s02 += ctd * az
        s12 += -cnd * ax
        s22 += ctd * az * az + cnd * ax * ax
        rb0 += gx
        rb1 += gz
        rb2 += az * gx - ax * gz
        # Schur complement: subtract A_bl A_ll^-1 A_bl^T and A_bl A_ll^-1 r_l
        p00 = b00 * i00 + b01 * i01
        p01 = b00 * i01 + b01 * i11
        p10 = b10 * i00 + b11 * i01
        p11 = b10 * i01 + b11 * i11
        p20 = b20 * i00 + b21 * i01
        p21 = b20 * i01 + b21 * i11
        s00 -= p00 * b00 + p01 * b01
        s01 -= p00 * b10 + p01 * b11
        s02 -= p00 * b20 + p01 * b21
        s11 -= p10 * b10 + p11 * b11
        s12 -= p10 * b20 + p11 * b21
        s22 -= p20 * b20 + p21 * b21
        rb0 -= p00 * rl1 + p01 * rl2
        rb1 -= p10 * rl1 + p11 * rl2
        rb2 -= p20 * rl1 + p21 * rl2
        d = leg_dat[leg]
        d[0] = i00
        d[1] = i01
        d[2] = i11
        d[3] = b00
        d[4] = b01
        d[5] = b10
        d[6] = b11
        d[7] = b20
        d[8] = b21
        d[9] = rl1
        d[10] = rl2
        d[11] = gz
        d[12] = cnd
        d[13] = w10
        d[14] = w11
        d[15] = -ax
    # symmetric 3x3 solve (Cramer)
    c00 = s11 * s22 - s12 * s12
    c01 = s02 * s12 - s01 * s22
    c02 = s01 * s12 - s02 * s11
    c11 = s00 * s22 - s02 * s02
    c12 = s01 * s02 - s00 * s12
    c22 = s00 * s11 - s01 * s01
    det = s00 * c00 + s01 * c01 + s02 * c02
    a0 = (c00 * rb0 + c01 * rb1 + c02 * rb2) / det
    a1 = (c01 * rb0 + c11 * rb1 + c12 * rb2) / det
    a2 = (c02 * rb0 + c12 * rb1 + c22 * rb2) / det
    acc[0] = a0
    acc[1] = a1
    acc[2] = a2
    for leg in range(2):
        d = leg_dat[leg]
        j0 = 2 * leg
        t1 = d[9] - (d[3] * a0 + d[5] * a1 + d[7] * a2)
        t2 = d[10] - (d[4] * a0 + d[6] * a1 + d[8] * a2)
        qa1 = d[0] * t1 + d[1] * t2
        qa2 = d[1] * t1 + d[2] * t2
        acc[3 + j0] = qa1
        acc[4 + j0] = qa2
        # vertical force after the implicit damping correction
        fzc = d[11] - d[12] * (a1 + d[15] * a2 + d[13] * qa1 + d[14] * qa2)
        fz_out[leg] = fzc if fzc > 0.0 else 0.0


@njit(cache=True, nogil=True, error_model="numpy")
def _quad_step(x, qt, phys, kap, kp, kd, consts, xo, tau_mean, fz_mean):
    m = phys[P_M]
    rx = phys[P_RX]
    rz = phys[P_RZ]
    qw = x[3]
    qy = x[5]
    beta = 2.0 * math.atan2(qy, qw)
    cb = math.cos(beta)
    sb = math.sin(beta)
    Rrx = cb * rx + sb * rz
    Rrz = -sb * rx + cb * rz
    w = x[11]
    Q = np.empty(7)
    V = np.empty(7)
    Q[0] = x[0] + Rrx
    Q[1] = x[2] + Rrz
    Q[2] = beta
    V[0] = x[7] + w * Rrz
    V[1] = x[9] - w * Rrx
    V[2] = w
    for j in range(4):
        Q[3 + j] = x[13 + j]
        V[3 + j] = x[17 + j]
    acc = np.empty(7)
    tau = np.empty(4)
    fz = np.empty(2)
    for j in range(4):
        tau_mean[j] = 0.0
    fz_mean[0] = 0.0
    fz_mean[1] = 0.0
    dt = consts[C_DT]
    nsub = int(consts[C_NSUB])
    _quad_accel(Q, V, qt, phys, kap, kp, kd, consts, acc, tau, fz)
    Vh = np.empty(7)
    for _ in range(nsub):
        for j in range(4):
            tau_mean[j] += tau[j]
        fz_mean[0] += fz[0]
        fz_mean[1] += fz[1]
        for i in range(7):
            Vh[i] = V[i] + 0.5 * dt * acc[i]
            Q[i] += dt * Vh[i]
            V[i] = Vh[i] + 0.5 * dt * acc[i]
        _quad_accel(Q, V, qt, phys, kap, kp, kd, consts, acc, tau, fz)
        for i in range(7):
            V[i] = Vh[i] + 0.5 * dt * acc[i]
    for j in range(4):
        tau_mean[j] /= nsub
    fz_mean[0] /= nsub
    fz_mean[1] /= nsub
    beta = Q[2]
    w = V[2]
    cb = math.cos(beta)
    sb = math.sin(beta)
    Rrx = cb * rx + sb * rz
    Rrz = -sb * rx + cb * rz
    xo[0] = Q[0] - Rrx
    xo[1] = x[1]
    xo[2] = Q[1] - Rrz
    xo[3] = math.cos(0.5 * beta)
    xo[4] = 0.0
    xo[5] = math.sin(0.5 * beta)
    xo[6] = 0.0
    xo[7] = V[0] - w * Rrz
    xo[8] = x[8]
    xo[9] = V[1] + w * Rrx
    xo[10] = x[10]
    xo[11] = w
    xo[12] = x[12]
    for j in range(4):
        xo[13 + j] = Q[3 + j]
        xo[17 + j] = V[3 + j]


# ---------------------------------------------------------- double pendulum


@njit(cache=True, nogil=True, error_model="numpy")
def _pend_accel(q, dq, qt, phys, kap, kp, kd, consts, acc, tau):
    g = consts[C_G]
    l1 = consts[C_PL1]
    m1 = consts[C_PM1]
    r1x = consts[C_PR1X]
    r1z = consts[C_PR1Z]
    i1 = consts[C_PI1]
    jd = consts[C_PJDAMP]
    m2 = phys[P_M]
    rx = phys[P_RX]
    rz = phys[P_RZ]
    i2 = phys[P_IYY]
    code = int(consts[C_MOTOR])
    limit = consts[C_TLIM]
    q1 = q[0]
    q2 = q[1]
    s2 = math.sin(q2)
    c2 = math.cos(q2)
    gq = rx * s2 - rz * c2
    gp = rx * c2 + rz * s2
    m11 = i1 + m2 * l1 * l1 + 2.0 * m2 * l1 * gq + i2
    m12 = m2 * l1 * gq + i2
    m22 = i2
    phi = q1 + q2
    sphi = math.sin(phi)
    cphi = math.cos(phi)
    dv1 = g * (m1 * (-math.cos(q1) * r1x - math.sin(q1) * r1z)
               + m2 * (l1 * math.sin(q1) - cphi * rx - sphi * rz))
    dv2 = g * m2 * (-cphi * rx - sphi * rz)
    h1 = m2 * l1 * gp * (2.0 * dq[0] * dq[1] + dq[1] * dq[1]) + dv1
    h2 = -m2 * l1 * gp * dq[0] * dq[0] + dv2
    t1 = _joint_torque(qt[0], q1, dq[0], kp[0], kd[0], code, kap[0], limit)
    t2 = _joint_torque(qt[1], q2, dq[1], kp[1], kd[1], code, kap[1], limit)
    tau[0] = t1
    tau[1] = t2
    b1 = t1 - jd * dq[0] - h1
    b2 = t2 - jd * dq[1] - h2
    det = m11 * m22 - m12 * m12
    acc[0] = (m22 * b1 - m12 * b2) / det
    acc[1] = (m11 * b2 - m12 * b1) / det


@njit(cache=True, nogil=True, error_model="numpy")
def _pend_step(x, qt, phys, kap, kp, kd, consts, xo, tau_mean):
    q = np.empty(2)
    dq = np.empty(2)
    q[0] = x[13]
    q[1] = x[14]
    dq[0] = x[15]
    dq[1] = x[16]
    acc = np.empty(2)
    tau = np.empty(2)
    vh = np.empty(2)
    tau_mean[0] = 0.0
    tau_mean[1] = 0.0
    dt = consts[C_DT]
    nsub = int(consts[C_NSUB])
    _pend_accel(q, dq, qt, phys, kap, kp, kd, consts, acc, tau)
    for _ in range(nsub):
        tau_mean[0] += tau[0]
        tau_mean[1] += tau[1]
        for i in range(2):
            vh[i] = dq[i] + 0.5 * dt * acc[i]
            q[i] += dt * vh[i]
            dq[i] = vh[i] + 0.5 * dt * acc[i]
        _pend_accel(q, dq, qt, phys, kap, kp, kd, consts, acc, tau)
        for i in range(2):
            dq[i] = vh[i] + 0.5 * dt * acc[i]
    tau_mean[0] /= nsub
    tau_mean[1] /= nsub
    for i in range(13):
        xo[i] = x[i]
    xo[13] = q[0]
    xo[14] = q[1]
    xo[15] = dq[0]
    xo[16] = dq[1]


# ----------------------------------------------------------------- dispatch


@njit(cache=True, nogil=True, error_model="numpy")
def step_one(kind, x, qt, phys, kap, kp, kd, consts, xo, tau, fz):
    if kind == KIND_PLANAR_QUADRUPED:
        _quad_step(x, qt, phys, kap, kp, kd, consts, xo, tau, fz)
    elif kind == KIND_DOUBLE_PENDULUM:
        _pend_step(x, qt, phys, kap, kp, kd, consts, xo, tau)
    else:
        for i in range(x.shape[0]):
            xo[i] = x[i]
        # x+ = theta * x + u, state carried in the single joint slot
        xo[13] = phys[0] * x[13] + qt[0]
        xo[14] = (xo[13] - x[13]) / consts[C_DT]
        tau[0] = 0.0


@njit(cache=True, nogil=True, error_model="numpy", parallel=True)
def step_batch(kind, X, U, PH, KAP, kp, kd, consts, XO, TAU, FZ):
    for b in prange(X.shape[0]):
        step_one(kind, X[b], U[b], PH[b], KAP[b], kp, kd, consts, XO[b], TAU[b], FZ[b])


# states beyond this magnitude count as a numerical blow-up
DIVERGENCE_BOUND = 1.0e6


@njit(cache=True, nogil=True, error_model="numpy")
def _all_finite(x):
    for i in range(x.shape[0]):
        if not math.isfinite(x[i]) or abs(x[i]) > DIVERGENCE_BOUND:
            return False
    return True


@njit(cache=True, nogil=True, error_model="numpy", parallel=True)
def rollout_batch(kind, X0, USEQ, lengths, src, par, PH, KAP, kp, kd, consts, XS, TAUS, FZS, fail):
    """Open-loop replay: entry ``b`` starts at ``X0[src[b]]``, replays
    ``USEQ[src[b], :lengths[src[b]]]`` under parameters ``PH[par[b]]``.

    ``fail[b]`` is the first step index producing a non-finite (or blown-up)
    state, or -1.
    """
    for b in prange(src.shape[0]):
        s = src[b]
        p = par[b]
        XS[b, 0, :] = X0[s]
        fail[b] = -1
        for t in range(lengths[s]):
            step_one(kind, XS[b, t], USEQ[s, t], PH[p], KAP[p], kp, kd, consts,
                     XS[b, t + 1], TAUS[b, t], FZS[b, t])
            if not _all_finite(XS[b, t + 1]):
                fail[b] = t
                break


@njit(cache=True, nogil=True, error_model="numpy", parallel=True)
def clip_cost_batch(kind, X0, USEQ, REF, TREF, lengths, src, par, PH, KAP, kp, kd, consts,
                    nj, terms, metrics, fail):
    """Per-entry raw cost terms and prediction-metric sums for clip replays.

    ``terms[b]`` accumulates, over ticks 1..H: |dp|^2, |dv|^2, 1-<q,q_r>^2,
    |dw|^2, |dq_jnt|^2, |ddq_jnt|^2 and, over ticks 0..H-1, |dtau|^2.
    ``metrics[b]`` holds sums of |dp|, mean_j |dq_j| and |dv|.
    """
    S = X0.shape[1]
    for b in prange(src.shape[0]):
        s = src[b]
        p = par[b]
        x = X0[s].copy()
        xn = np.empty(S)
        tau = np.empty(nj)
        fz = np.empty(2)
        for i in range(N_COST_TERMS):
            terms[b, i] = 0.0
        for i in range(3):
            metrics[b, i] = 0.0
        fail[b] = -1
        for t in range(lengths[s]):
            step_one(kind, x, USEQ[s, t], PH[p], KAP[p], kp, kd, consts, xn, tau, fz)
            if not _all_finite(xn):
                fail[b] = t
                break
            r = REF[s, t + 1]
            dp = 0.0
            for i in range(3):
                d = xn[i] - r[i]
                dp += d * d
            dot = 0.0
            for i in range(3, 7):
                dot += xn[i] * r[i]
            dv = 0.0
            for i in range(7, 10):
                d = xn[i] - r[i]
                dv += d * d
            dw = 0.0
            for i in range(10, 13):
                d = xn[i] - r[i]
                dw += d * d
            dqj = 0.0
            aqj = 0.0
            for i in range(13, 13 + nj):
                d = xn[i] - r[i]
                dqj += d * d
                aqj += abs(d)
            ddqj = 0.0
            for i in range(13 + nj, 13 + 2 * nj):
                d = xn[i] - r[i]
                ddqj += d * d
            dt_ = 0.0
            for i in range(nj):
                d = tau[i] - TREF[s, t, i]
                dt_ += d * d
            terms[b, 0] += dp
            terms[b, 1] += dv
            dq_ = 1.0 - dot * dot
            terms[b, 2] += dq_ if dq_ > 0.0 else 0.0
            terms[b, 3] += dw
            terms[b, 4] += dqj
            terms[b, 5] += ddqj
            terms[b, 6] += dt_
            metrics[b, 0] += math.sqrt(dp)
            metrics[b, 1] += aqj / nj
            metrics[b, 2] += math.sqrt(dv)
            for i in range(S):
                x[i] = xn[i]
