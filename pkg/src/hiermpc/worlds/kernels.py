"""Compiled dynamics, reference policy and rollout loop.

Everything here works on flat float64 vectors (see ``layout``) so a rollout can
run without touching the interpreter. Functions are pure: inputs are never
mutated, which keeps rollouts independent of batching and thread scheduling.
"""

import math

import numpy as np
from numba import njit

from .layout import (
    ARM_Q, ARM_QD, FALLEN, GRIP, HEIGHT, HEIGHT_RATE, HINGE, K_ARM_D, K_ARM_P,
    K_GRIP, K_HEIGHT_D, K_HEIGHT_P, K_LEG_NULL, K_TILT_D, K_TILT_P, K_VEL, K_YAW,
    MODE_PASSTHROUGH, MODE_POLICY, OMEGA, OVX, OVY, OWZ, OX, OY, OYAW, P_ARM_ACC,
    P_ARM_DAMP, P_ARM_LIMIT, P_BALANCE, P_BASE_ACC, P_BASE_DRAG, P_BASE_RADIUS,
    P_CONTACT_B, P_CONTACT_K, P_CONTACT_MU, P_EFF_RADIUS, P_EFF_Z, P_FALL_TILT,
    P_G, P_GRIP_MAX, P_GRIP_MIN, P_GRIP_RATE, P_GROUND_MU, P_HEIGHT_ACC,
    P_HEIGHT_DAMP, P_HEIGHT_MAX, P_HEIGHT_MIN, P_HINGE_DAMP, P_L1, P_L2,
    P_NOM_HEIGHT, P_OBJ_MASS, P_OBJ_RADIUS, P_PIVOT_X, P_PIVOT_Y, P_PLATE_LEN,
    P_PLATE_RADIUS, P_PLATE_WIDTH, P_SHOULDER_X, P_SHOULDER_Z, P_TANGENT_B,
    P_TILT_ACC, P_YAW_ACC, P_YAW_DRAG, PITCH, PITCH_RATE, ROLL, ROLL_RATE,
    THETA, U_ARM, U_GRIP, U_LEG, VX, VY, WZ, X, Y, YAW,
)


def _leg_mixing() -> np.ndarray:
    # rows: forward accel, lateral accel, yaw accel, height accel, pitch accel, roll accel
    # columns: FL, FR, HL, HR legs x (hip_x, hip_y, knee)
    m = np.zeros((6, 12))
    front = np.array([1.0, 1.0, -1.0, -1.0])
    left = np.array([1.0, -1.0, 1.0, -1.0])
    for leg in range(4):
        hx, hy, kn = 3 * leg, 3 * leg + 1, 3 * leg + 2
        m[0, hy] = 0.25
        m[1, hx] = 0.25
        m[2, hx] = 0.25 * front[leg]
        m[3, kn] = 0.25
        m[4, kn] = 0.25 * front[leg]
        m[5, kn] = 0.25 * left[leg]
    return m


LEG_MIX = _leg_mixing()
# rows of LEG_MIX are orthogonal with squared norm 1/4
LEG_MIX_PINV = 4.0 * LEG_MIX.T
LEG_NULL = np.eye(12) - LEG_MIX_PINV @ LEG_MIX


@njit(cache=True)
def _clip(v, lo, hi):
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


@njit(cache=True)
def channel_limits(params):
    out = np.empty(6)
    out[0] = params[P_BASE_ACC]
    out[1] = params[P_BASE_ACC]
    out[2] = params[P_YAW_ACC]
    out[3] = params[P_HEIGHT_ACC]
    out[4] = params[P_TILT_ACC]
    out[5] = params[P_TILT_ACC]
    return out


@njit(cache=True)
def policy_kernel(x, cmd, params, gains, mix_pinv, null_proj):
    """PD velocity-tracking whole-body controller: 25-dim command to 19-dim controls."""
    u = np.zeros(19)
    lim = channel_limits(params)
    g_over_h = params[P_G] / params[P_NOM_HEIGHT]
    h0 = params[P_NOM_HEIGHT]
    c = math.cos(x[YAW])
    s = math.sin(x[YAW])
    vbx = c * x[VX] + s * x[VY]
    vby = -s * x[VX] + c * x[VY]
    ch = np.empty(6)
    ch[0] = _clip(gains[K_VEL] * (cmd[0] - vbx), -lim[0], lim[0])
    ch[1] = _clip(gains[K_VEL] * (cmd[1] - vby), -lim[1], lim[1])
    ch[2] = gains[K_YAW] * (cmd[2] - x[WZ])
    ch[3] = gains[K_HEIGHT_P] * (cmd[24] - x[HEIGHT]) - gains[K_HEIGHT_D] * x[HEIGHT_RATE]
    # cancel the pendulum and the base-acceleration coupling, then PD to the torso targets
    ch[4] = (-g_over_h * x[PITCH] + ch[0] / h0
             - gains[K_TILT_P] * (x[PITCH] - cmd[22]) - gains[K_TILT_D] * x[PITCH_RATE])
    ch[5] = (-g_over_h * x[ROLL] - ch[1] / h0
             - gains[K_TILT_P] * (x[ROLL] - cmd[23]) - gains[K_TILT_D] * x[ROLL_RATE])
    for i in range(6):
        ch[i] = ch[i] / lim[i]
    for j in range(12):
        acc = 0.0
        for i in range(6):
            acc += mix_pinv[j, i] * ch[i]
        for k in range(12):
            acc += gains[K_LEG_NULL] * null_proj[j, k] * cmd[10 + k]
        u[U_LEG + j] = _clip(acc, -1.0, 1.0)
    for j in range(6):
        acc = gains[K_ARM_P] * (cmd[3 + j] - x[ARM_Q + j]) - gains[K_ARM_D] * x[ARM_QD + j]
        u[U_ARM + j] = _clip(acc / params[P_ARM_ACC], -1.0, 1.0)
    u[U_GRIP] = _clip(gains[K_GRIP] * (cmd[9] - x[GRIP]), -1.0, 1.0)
    return u


@njit(cache=True)
def passthrough_kernel(cmd):
    """Reinterpret command entries as joint controls without any feedback."""
    u = np.zeros(19)
    for j in range(12):
        u[U_LEG + j] = _clip(cmd[10 + j], -1.0, 1.0)
    for j in range(6):
        u[U_ARM + j] = _clip(cmd[3 + j], -1.0, 1.0)
    u[U_GRIP] = _clip(cmd[9], -1.0, 1.0)
    return u


@njit(cache=True)
def _effector_push6(x, params):
    c = math.cos(x[YAW])
    s = math.sin(x[YAW])
    q0 = x[ARM_Q]
    q01 = x[ARM_Q] + x[ARM_Q + 1]
    l1 = params[P_L1]
    l2 = params[P_L2]
    lx = params[P_SHOULDER_X] + l1 * math.cos(q0) + l2 * math.cos(q01)
    ly = l1 * math.sin(q0) + l2 * math.sin(q01)
    dq0 = x[ARM_QD]
    dq01 = x[ARM_QD] + x[ARM_QD + 1]
    dlx = -l1 * math.sin(q0) * dq0 - l2 * math.sin(q01) * dq01
    dly = l1 * math.cos(q0) * dq0 + l2 * math.cos(q01) * dq01
    rx = c * lx - s * ly
    ry = s * lx + c * ly
    return (x[X] + rx, x[Y] + ry, params[P_EFF_Z],
            x[VX] - x[WZ] * ry + c * dlx - s * dly, x[VY] + x[WZ] * rx + s * dlx + c * dly, 0.0)


@njit(cache=True)
def _effector_hinge6(x, params):
    c = math.cos(x[YAW])
    s = math.sin(x[YAW])
    q0 = x[ARM_Q]
    q01 = x[ARM_Q] + x[ARM_Q + 1]
    l1 = params[P_L1]
    l2 = params[P_L2]
    reach = params[P_SHOULDER_X] + l1 * math.cos(q0) + l2 * math.cos(q01)
    lift = l1 * math.sin(q0) + l2 * math.sin(q01)
    dq0 = x[ARM_QD]
    dq01 = x[ARM_QD] + x[ARM_QD + 1]
    dreach = -l1 * math.sin(q0) * dq0 - l2 * math.sin(q01) * dq01
    dlift = l1 * math.cos(q0) * dq0 + l2 * math.cos(q01) * dq01
    rx = c * reach
    ry = s * reach
    return (x[X] + rx, x[Y] + ry, x[HEIGHT] + params[P_SHOULDER_Z] + lift,
            x[VX] - x[WZ] * ry + c * dreach, x[VY] + x[WZ] * rx + s * dreach, x[HEIGHT_RATE] + dlift)


@njit(cache=True)
def effector_push(x, params):
    """Planar two-link effector: position (x, y, z) and velocity (vx, vy, vz)."""
    px, py, pz, vx, vy, vz = _effector_push6(x, params)
    pos = np.empty(3)
    vel = np.empty(3)
    pos[0], pos[1], pos[2] = px, py, pz
    vel[0], vel[1], vel[2] = vx, vy, vz
    return pos, vel


@njit(cache=True)
def effector_hinge(x, params):
    """Two-link effector pitching in the vertical plane of the base heading."""
    px, py, pz, vx, vy, vz = _effector_hinge6(x, params)
    pos = np.empty(3)
    vel = np.empty(3)
    pos[0], pos[1], pos[2] = px, py, pz
    vel[0], vel[1], vel[2] = vx, vy, vz
    return pos, vel


@njit(cache=True)
def robot_substep(x, u, params, h, mix):
    """Advance the robot block of ``x`` in place by one substep."""
    fallen = x[FALLEN] > 0.5
    ch0 = 0.0
    ch1 = 0.0
    ch2 = 0.0
    ch3 = 0.0
    ch4 = 0.0
    ch5 = 0.0
    if not fallen:
        for j in range(12):
            uj = u[U_LEG + j]
            ch0 += mix[0, j] * uj
            ch1 += mix[1, j] * uj
            ch2 += mix[2, j] * uj
            ch3 += mix[3, j] * uj
            ch4 += mix[4, j] * uj
            ch5 += mix[5, j] * uj
        ch0 *= params[P_BASE_ACC]
        ch1 *= params[P_BASE_ACC]
        ch2 *= params[P_YAW_ACC]
        ch3 *= params[P_HEIGHT_ACC]
        ch4 *= params[P_TILT_ACC]
        ch5 *= params[P_TILT_ACC]
    c = math.cos(x[YAW])
    s = math.sin(x[YAW])
    h0 = params[P_NOM_HEIGHT]
    g_over_h = params[P_G] / h0
    if fallen:
        decay = max(0.0, 1.0 - 10.0 * h)
        x[VX] *= decay
        x[VY] *= decay
        x[WZ] *= decay
        x[PITCH_RATE] = 0.0
        x[ROLL_RATE] = 0.0
    else:
        ax = c * ch0 - s * ch1
        ay = s * ch0 + c * ch1
        x[VX] += h * (ax - params[P_BASE_DRAG] * x[VX])
        x[VY] += h * (ay - params[P_BASE_DRAG] * x[VY])
        x[WZ] += h * (ch2 - params[P_YAW_DRAG] * x[WZ])
        x[PITCH_RATE] += h * (g_over_h * x[PITCH] - ch0 / h0 + ch4)
        x[ROLL_RATE] += h * (g_over_h * x[ROLL] + ch1 / h0 + ch5)
    x[HEIGHT_RATE] += h * (ch3 - params[P_HEIGHT_DAMP] * x[HEIGHT_RATE])
    x[X] += h * x[VX]
    x[Y] += h * x[VY]
    x[YAW] += h * x[WZ]
    x[PITCH] += h * x[PITCH_RATE]
    x[ROLL] += h * x[ROLL_RATE]
    x[HEIGHT] += h * x[HEIGHT_RATE]
    if x[HEIGHT] < params[P_HEIGHT_MIN]:
        x[HEIGHT] = params[P_HEIGHT_MIN]
        x[HEIGHT_RATE] = 0.0
    elif x[HEIGHT] > params[P_HEIGHT_MAX]:
        x[HEIGHT] = params[P_HEIGHT_MAX]
        x[HEIGHT_RATE] = 0.0
    if abs(x[PITCH]) > params[P_FALL_TILT] or abs(x[ROLL]) > params[P_FALL_TILT]:
        x[FALLEN] = 1.0
    lim_q = params[P_ARM_LIMIT]
    for j in range(6):
        qd = x[ARM_QD + j] + h * (params[P_ARM_ACC] * u[U_ARM + j] - params[P_ARM_DAMP] * x[ARM_QD + j])
        q = x[ARM_Q + j] + h * qd
        if q > lim_q:
            q = lim_q
            qd = 0.0
        elif q < -lim_q:
            q = -lim_q
            qd = 0.0
        x[ARM_Q + j] = q
        x[ARM_QD + j] = qd
    x[GRIP] = _clip(x[GRIP] + h * params[P_GRIP_RATE] * u[U_GRIP], params[P_GRIP_MIN], params[P_GRIP_MAX])


@njit(cache=True)
def _disk_contact(px, py, vx, vy, radius, x, params):
    """Penalty contact of a moving disk against the pushed object: (fx, fy, torque)."""
    ro = params[P_OBJ_RADIUS]
    dx = x[OX] - px
    dy = x[OY] - py
    dist = math.sqrt(dx * dx + dy * dy)
    pen = ro + radius - dist
    if pen <= 0.0 or dist < 1e-12:
        return 0.0, 0.0, 0.0
    nx = dx / dist
    ny = dy / dist
    rcx = -ro * nx
    rcy = -ro * ny
    # velocity of the object's material point at the contact, relative to the pusher
    wx = x[OVX] - x[OWZ] * rcy - vx
    wy = x[OVY] + x[OWZ] * rcx - vy
    vn = wx * nx + wy * ny
    fn = params[P_CONTACT_K] * pen - params[P_CONTACT_B] * vn
    if fn <= 0.0:
        return 0.0, 0.0, 0.0
    tx = -ny
    ty = nx
    vt = wx * tx + wy * ty
    cap = params[P_CONTACT_MU] * fn
    ft = _clip(-params[P_TANGENT_B] * vt, -cap, cap)
    fx = fn * nx + ft * tx
    fy = fn * ny + ft * ty
    return fx, fy, rcx * fy - rcy * fx


@njit(cache=True)
def push_object_substep(x, params, h, ex, ey, evx, evy):
    m = params[P_OBJ_MASS]
    ro = params[P_OBJ_RADIUS]
    inertia = 0.5 * m * ro * ro
    fx1, fy1, t1 = _disk_contact(ex, ey, evx, evy, params[P_EFF_RADIUS], x, params)
    fx2, fy2, t2 = _disk_contact(x[X], x[Y], x[VX], x[VY], params[P_BASE_RADIUS], x, params)
    vx = x[OVX] + h * (fx1 + fx2) / m
    vy = x[OVY] + h * (fy1 + fy2) / m
    w = x[OWZ] + h * (t1 + t2) / inertia
    # Coulomb ground friction as a velocity projection: never reverses, static when it can hold
    dv = params[P_GROUND_MU] * params[P_G] * h
    speed = math.sqrt(vx * vx + vy * vy)
    if speed <= dv:
        vx = 0.0
        vy = 0.0
    else:
        scale = 1.0 - dv / speed
        vx *= scale
        vy *= scale
    dw = h * params[P_GROUND_MU] * m * params[P_G] * (2.0 / 3.0) * ro / inertia
    if abs(w) <= dw:
        w = 0.0
    elif w > 0:
        w -= dw
    else:
        w += dw
    x[OVX] = vx
    x[OVY] = vy
    x[OWZ] = w
    x[OX] += h * vx
    x[OY] += h * vy
    x[OYAW] += h * w


@njit(cache=True)
def plate_inertia(params):
    return params[P_OBJ_MASS] * params[P_PLATE_LEN] ** 2 / 3.0


@njit(cache=True)
def _plate_contact_torque(x, params, epx, epy, epz, evx, evz):
    if abs(epy - params[P_PIVOT_Y]) > 0.5 * params[P_PLATE_WIDTH]:
        return 0.0
    th = x[THETA]
    dx = -math.cos(th)
    dz = math.sin(th)
    px = params[P_PIVOT_X]
    pz = params[P_PLATE_RADIUS]
    ex = epx - px
    ez = epz - pz
    s = _clip(ex * dx + ez * dz, 0.0, params[P_PLATE_LEN])
    cx = s * dx
    cz = s * dz
    gx = cx - ex
    gz = cz - ez
    dist = math.sqrt(gx * gx + gz * gz)
    pen = params[P_PLATE_RADIUS] + params[P_EFF_RADIUS] - dist
    if pen <= 0.0:
        return 0.0
    if dist < 1e-12:
        nx = math.sin(th)
        nz = math.cos(th)
    else:
        nx = gx / dist
        nz = gz / dist
    # d(point)/d(theta) along the plate
    jx = s * math.sin(th)
    jz = s * math.cos(th)
    wx = x[OMEGA] * jx - evx
    wz = x[OMEGA] * jz - evz
    vn = wx * nx + wz * nz
    fn = params[P_CONTACT_K] * pen - params[P_CONTACT_B] * vn
    if fn <= 0.0:
        return 0.0
    tx = -nz
    tz = nx
    vt = wx * tx + wz * tz
    cap = params[P_CONTACT_MU] * fn
    ft = _clip(-params[P_TANGENT_B] * vt, -cap, cap)
    fx = fn * nx + ft * tx
    fz = fn * nz + ft * tz
    return fx * jx + fz * jz


@njit(cache=True)
def hinge_object_substep(x, params, h, epx, epy, epz, evx, evz):
    m = params[P_OBJ_MASS]
    r_com = 0.5 * params[P_PLATE_LEN]
    tau = m * params[P_G] * r_com * math.sin(x[THETA] - params[P_BALANCE])
    tau += _plate_contact_torque(x, params, epx, epy, epz, evx, evz)
    tau -= params[P_HINGE_DAMP] * x[OMEGA]
    w = x[OMEGA] + h * tau / plate_inertia(params)
    th = x[THETA] + h * w
    # inelastic stops at lying flat and upright
    if th <= 0.0:
        th = 0.0
        if w < 0.0:
            w = 0.0
    elif th >= 0.5 * math.pi:
        th = 0.5 * math.pi
        if w > 0.0:
            w = 0.0
    x[THETA] = th
    x[OMEGA] = w


@njit(cache=True)
def _step_inplace(world, x, u, params, dt, substeps, mix):
    h = dt / substeps
    for _ in range(substeps):
        # contact uses the effector state at the start of the substep
        if world == HINGE:
            px, py, pz, vx, vy, vz = _effector_hinge6(x, params)
        else:
            px, py, pz, vx, vy, vz = _effector_push6(x, params)
        robot_substep(x, u, params, h, mix)
        if world == HINGE:
            hinge_object_substep(x, params, h, px, py, pz, vx, vz)
        else:
            push_object_substep(x, params, h, px, py, vx, vy)


@njit(cache=True)
def world_step_kernel(world, x0, u, params, dt, substeps, mix):
    x = x0.copy()
    _step_inplace(world, x, u, params, dt, substeps, mix)
    return x


@njit(cache=True, nogil=True)
def simulate(world, x0, inputs, mode, params, gains, dt, substeps, mix, mix_pinv, null_proj):
    """Roll the world forward through ``len(inputs)`` control steps.

    ``inputs`` are 25-dim commands (policy and passthrough modes) or 19-dim raw
    joint controls. Returns states (T+1, n), controls (T, 19) and a failure flag.
    """
    steps = inputs.shape[0]
    n = x0.shape[0]
    states = np.empty((steps + 1, n))
    controls = np.zeros((steps, 19))
    states[0] = x0
    x = x0.copy()
    failed = False
    raw = np.empty(19)
    for t in range(steps):
        if mode == MODE_POLICY:
            u = policy_kernel(x, inputs[t], params, gains, mix_pinv, null_proj)
        elif mode == MODE_PASSTHROUGH:
            u = passthrough_kernel(inputs[t])
        else:
            for j in range(19):
                raw[j] = _clip(inputs[t, j], -1.0, 1.0)
            u = raw
        controls[t] = u
        _step_inplace(world, x, u, params, dt, substeps, mix)
        for j in range(n):
            if not math.isfinite(x[j]):
                failed = True
        states[t + 1] = x
        if failed:
            for k in range(t + 2, steps + 1):
                states[k] = x
            break
    return states, controls, failed
