"""Hot physics kernel for the rink simulation.

The single-step update is written once as plain scalar numpy code and JIT
compiled with numba unless the HOCKEYDDA_DISABLE_NUMBA environment flag is
set, in which case the pure-python path is used.  Both paths run the same
source, so behaviour differences can only come from the compiler.

State vector layout (float64, length 12):
    0 puck x, 1 puck y, 2 puck vx, 3 puck vy,
    4 striker A x, 5 y, 6 vx, 7 vy,
    8 striker B x, 9 y, 10 vx, 11 vy

Config vector layout (float64, length 11):
    0 width, 1 length, 2 goal_width, 3 puck_radius, 4 striker_radius,
    5 dt, 6 wall_restitution, 7 friction_damping, 8 v_max_puck,
    9 v_max_striker, 10 striker_accel_gain
"""

import math
import os

import numpy as np

GOAL_NONE = 0
GOAL_FOR_A = 1  # puck entered B's goal (y = length)
GOAL_FOR_B = 2  # puck entered A's goal (y = 0)


def _step_impl(state, ax_a, ay_a, ax_b, ay_b, cfg):
    width = cfg[0]
    length = cfg[1]
    goal_w = cfg[2]
    pr = cfg[3]
    sr = cfg[4]
    dt = cfg[5]
    rest = cfg[6]
    mu = cfg[7]
    vmax_p = cfg[8]
    vmax_s = cfg[9]
    gain = cfg[10]
    mid = 0.5 * length

    out = state.copy()
    wall_bounces = 0
    striker_hits = 0
    goal = GOAL_NONE

    # 1) strikers accelerate toward target velocity, clamp, integrate,
    #    confine each to its own half.  Actions are egocentric: side B's
    #    frame is rotated 180 degrees, so its action flips sign here.
    blend = gain * dt
    if blend > 1.0:
        blend = 1.0
    for s in range(2):
        base = 4 + 4 * s
        if s == 0:
            tx = ax_a * vmax_s
            ty = ay_a * vmax_s
        else:
            tx = -ax_b * vmax_s
            ty = -ay_b * vmax_s
        vx = out[base + 2] + (tx - out[base + 2]) * blend
        vy = out[base + 3] + (ty - out[base + 3]) * blend
        speed = math.sqrt(vx * vx + vy * vy)
        if speed > vmax_s:
            scale = vmax_s / speed
            vx *= scale
            vy *= scale
        x = out[base] + vx * dt
        y = out[base + 1] + vy * dt
        if x < sr:
            x = sr
        elif x > width - sr:
            x = width - sr
        if s == 0:
            ylo = sr
            yhi = mid - sr
        else:
            ylo = mid + sr
            yhi = length - sr
        if y < ylo:
            y = ylo
        elif y > yhi:
            y = yhi
        out[base] = x
        out[base + 1] = y
        out[base + 2] = vx
        out[base + 3] = vy

    # 2) puck: friction damping, then integrate
    damp = 1.0 - mu * dt
    if damp < 0.0:
        damp = 0.0
    pvx = out[2] * damp
    pvy = out[3] * damp
    px = out[0] + pvx * dt
    py = out[1] + pvy * dt

    # 3) striker/puck circle collisions, striker treated as infinite mass.
    # The nearer striker is resolved last so its contact wins a pinch;
    # ordering by geometry instead of side index keeps the table symmetric.
    rsum = pr + sr
    da0 = px - out[4]
    da1 = py - out[5]
    db0 = px - out[8]
    db1 = py - out[9]
    a_nearer = da0 * da0 + da1 * da1 <= db0 * db0 + db1 * db1
    for k in range(2):
        if a_nearer:
            s = 1 - k
        else:
            s = k
        base = 4 + 4 * s
        dx = px - out[base]
        dy = py - out[base + 1]
        dist = math.sqrt(dx * dx + dy * dy)
        if dist < rsum:
            if dist > 1e-12:
                nx = dx / dist
                ny = dy / dist
            else:
                nx = 0.0
                ny = 1.0 if s == 0 else -1.0
            # push puck out of overlap
            px = out[base] + nx * rsum
            py = out[base + 1] + ny * rsum
            rvn = (pvx - out[base + 2]) * nx + (pvy - out[base + 3]) * ny
            if rvn < 0.0:
                pvx -= (1.0 + rest) * rvn * nx
                pvy -= (1.0 + rest) * rvn * ny
                striker_hits += 1

    pspeed = math.sqrt(pvx * pvx + pvy * pvy)
    if pspeed > vmax_p:
        scale = vmax_p / pspeed
        pvx *= scale
        pvy *= scale

    # 4) wall reflection (restitution), goal mouths pass through
    if px < pr:
        px = 2.0 * pr - px
        pvx = abs(pvx) * rest
        wall_bounces += 1
    elif px > width - pr:
        px = 2.0 * (width - pr) - px
        pvx = -abs(pvx) * rest
        wall_bounces += 1

    half_mouth = 0.5 * goal_w
    in_mouth = abs(px - 0.5 * width) < half_mouth
    if py < pr:
        if in_mouth:
            goal = GOAL_FOR_B
        else:
            py = 2.0 * pr - py
            pvy = abs(pvy) * rest
            wall_bounces += 1
    elif py > length - pr:
        if in_mouth:
            goal = GOAL_FOR_A
        else:
            py = 2.0 * (length - pr) - py
            pvy = -abs(pvy) * rest
            wall_bounces += 1

    # 5) goal: puck re-centers at rest
    if goal != GOAL_NONE:
        px = 0.5 * width
        py = 0.5 * length
        pvx = 0.0
        pvy = 0.0

    out[0] = px
    out[1] = py
    out[2] = pvx
    out[3] = pvy
    return out, goal, wall_bounces, striker_hits


def _want_numba() -> bool:
    return os.environ.get("HOCKEYDDA_DISABLE_NUMBA", "").lower() not in ("1", "true", "yes")


step_kernel_numpy = _step_impl

if _want_numba():
    try:
        from numba import njit

        step_kernel = njit(cache=True)(_step_impl)
        NUMBA_ACTIVE = True
    except ImportError:  # pragma: no cover
        step_kernel = _step_impl
        NUMBA_ACTIVE = False
else:
    step_kernel = _step_impl
    NUMBA_ACTIVE = False


def get_numba_kernel():
    """Return the njit-compiled kernel regardless of the env flag (benchmark use)."""
    from numba import njit

    return njit(cache=True)(_step_impl)


def make_config_vector(width, length, goal_width, puck_radius, striker_radius,
                       dt, wall_restitution, friction_damping, v_max_puck,
                       v_max_striker, striker_accel_gain):
    return np.array([width, length, goal_width, puck_radius, striker_radius,
                     dt, wall_restitution, friction_damping, v_max_puck,
                     v_max_striker, striker_accel_gain], dtype=np.float64)
