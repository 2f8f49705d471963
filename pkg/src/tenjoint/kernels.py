"""Inner simulation loop, compiled with numba when available.

The kernel advances rigid-rod states under gravity plus tension-only
spring-damper cable forces using semi-implicit Euler (velocities first).
It is written as plain scalar loops over flat float64 arrays so the same
source runs either as pure Python/numpy or jitted via ``numba.njit``.

Damping is impulse-limited: per cable and step, the damping coefficient is
capped so the damping impulse cannot reverse the anchors' relative velocity
within one step (cap ``DAMPING_IMPULSE_BETA / (dt * w)`` for constraint-
space inverse mass ``w``).  Explicit damping overshoot otherwise pumps
energy into light rods at practical timesteps; the cap engages only in
that regime and leaves the spring-damper law exact elsewhere.

Backend selection: the ``TENJOINT_NUMBA`` environment variable.  ``0`` /
``false`` / ``off`` forces the pure-numpy path; anything else (or unset)
uses numba when importable.  ``tenjoint.kernels.BACKEND`` reports the
active backend; ``benchmarks/bench_step.py`` compares the two.

Status codes returned by :func:`advance`:
  0  ran all requested steps
  1  early exit, max endpoint speed stayed below ``speed_tol`` for
     ``settle_hold`` consecutive steps
  2  divergence, non-finite state (``bad_index`` names the rod)
  3  degenerate cable, anchor separation below 1e-12 m (``bad_index`` names
     the cable)
"""

from __future__ import annotations

import math
import os

import numpy as np

STATUS_OK = 0
STATUS_SETTLED = 1
STATUS_DIVERGED = 2
STATUS_DEGENERATE = 3

MIN_CABLE_LENGTH = 1e-12
DAMPING_IMPULSE_BETA = 0.5


def _numba_requested() -> bool:
    flag = os.environ.get("TENJOINT_NUMBA", "auto").strip().lower()
    return flag not in ("0", "false", "off", "no", "numpy")


def _rot(qw, qx, qy, qz, vx, vy, vz):
    # v' = v + 2 q_vec x (q_vec x v + w v)
    tx = 2.0 * (qy * vz - qz * vy)
    ty = 2.0 * (qz * vx - qx * vz)
    tz = 2.0 * (qx * vy - qy * vx)
    return (
        vx + qw * tx + (qy * tz - qz * ty),
        vy + qw * ty + (qz * tx - qx * tz),
        vz + qw * tz + (qx * ty - qy * tx),
    )


def _rot_inv(qw, qx, qy, qz, vx, vy, vz):
    return _rot(qw, -qx, -qy, -qz, vx, vy, vz)


def _advance_impl(
    pos,
    quat,
    vel,
    omg,
    rest,
    free,
    inv_mass,
    half,
    i_trans,
    i_axial,
    ca_rod,
    ca_sgn,
    cb_rod,
    cb_sgn,
    kk,
    bb,
    gravity,
    dt,
    n_steps,
    probe_rod,
    probe_sgn,
    probe_force,
    speed_tol,
    settle_hold,
):
    n = pos.shape[0]
    nc = ca_rod.shape[0]
    force = np.zeros((n, 3))
    torque = np.zeros((n, 3))
    gx, gy, gz = gravity[0], gravity[1], gravity[2]
    quiet_streak = 0

    for step in range(n_steps):
        for i in range(n):
            force[i, 0] = 0.0
            force[i, 1] = 0.0
            force[i, 2] = 0.0
            torque[i, 0] = 0.0
            torque[i, 1] = 0.0
            torque[i, 2] = 0.0

        if probe_rod >= 0:
            i = probe_rod
            ax, ay, az = _rot(
                quat[i, 0], quat[i, 1], quat[i, 2], quat[i, 3], 0.0, 0.0, 1.0
            )
            rx = probe_sgn * half[i] * ax
            ry = probe_sgn * half[i] * ay
            rz = probe_sgn * half[i] * az
            fx, fy, fz = probe_force[0], probe_force[1], probe_force[2]
            force[i, 0] += fx
            force[i, 1] += fy
            force[i, 2] += fz
            torque[i, 0] += ry * fz - rz * fy
            torque[i, 1] += rz * fx - rx * fz
            torque[i, 2] += rx * fy - ry * fx

        for j in range(nc):
            ia = ca_rod[j]
            ib = cb_rod[j]
            aax, aay, aaz = _rot(
                quat[ia, 0], quat[ia, 1], quat[ia, 2], quat[ia, 3], 0.0, 0.0, 1.0
            )
            bax, bay, baz = _rot(
                quat[ib, 0], quat[ib, 1], quat[ib, 2], quat[ib, 3], 0.0, 0.0, 1.0
            )
            # anchor offsets from the rod centers and world anchor points
            rax = ca_sgn[j] * half[ia] * aax
            ray = ca_sgn[j] * half[ia] * aay
            raz = ca_sgn[j] * half[ia] * aaz
            rbx = cb_sgn[j] * half[ib] * bax
            rby = cb_sgn[j] * half[ib] * bay
            rbz = cb_sgn[j] * half[ib] * baz
            pax = pos[ia, 0] + rax
            pay = pos[ia, 1] + ray
            paz = pos[ia, 2] + raz
            pbx = pos[ib, 0] + rbx
            pby = pos[ib, 1] + rby
            pbz = pos[ib, 2] + rbz
            dx = pbx - pax
            dy = pby - pay
            dz = pbz - paz
            length = math.sqrt(dx * dx + dy * dy + dz * dz)
            if length < MIN_CABLE_LENGTH:
                return step, STATUS_DEGENERATE, j
            ux = dx / length
            uy = dy / length
            uz = dz / length
            ext = length - rest[j]
            if ext <= 0.0:
                continue
            # anchor velocities: v + w x r
            vax = vel[ia, 0] + omg[ia, 1] * raz - omg[ia, 2] * ray
            vay = vel[ia, 1] + omg[ia, 2] * rax - omg[ia, 0] * raz
            vaz = vel[ia, 2] + omg[ia, 0] * ray - omg[ia, 1] * rax
            vbx = vel[ib, 0] + omg[ib, 1] * rbz - omg[ib, 2] * rby
            vby = vel[ib, 1] + omg[ib, 2] * rbx - omg[ib, 0] * rbz
            vbz = vel[ib, 2] + omg[ib, 0] * rby - omg[ib, 1] * rbx
            rate = (vbx - vax) * ux + (vby - vay) * uy + (vbz - vaz) * uz
            # constraint-space inverse mass of the two anchors along the cable
            w_sum = 0.0
            if free[ia] != 0:
                cx = ray * uz - raz * uy
                cy = raz * ux - rax * uz
                cz = rax * uy - ray * ux
                cbx, cby, cbz = _rot_inv(
                    quat[ia, 0], quat[ia, 1], quat[ia, 2], quat[ia, 3], cx, cy, cz
                )
                w_sum += inv_mass[ia] + (cbx * cbx + cby * cby) / i_trans[ia] + (
                    cbz * cbz
                ) / i_axial[ia]
            if free[ib] != 0:
                cx = rby * uz - rbz * uy
                cy = rbz * ux - rbx * uz
                cz = rbx * uy - rby * ux
                cbx, cby, cbz = _rot_inv(
                    quat[ib, 0], quat[ib, 1], quat[ib, 2], quat[ib, 3], cx, cy, cz
                )
                w_sum += inv_mass[ib] + (cbx * cbx + cby * cby) / i_trans[ib] + (
                    cbz * cbz
                ) / i_axial[ib]
            b_eff = bb[j]
            if w_sum > 0.0:
                b_cap = DAMPING_IMPULSE_BETA / (dt * w_sum)
                if b_eff > b_cap:
                    b_eff = b_cap
            tension = kk[j] * ext + b_eff * rate
            if tension <= 0.0:
                continue
            fx = tension * ux
            fy = tension * uy
            fz = tension * uz
            force[ia, 0] += fx
            force[ia, 1] += fy
            force[ia, 2] += fz
            torque[ia, 0] += ray * fz - raz * fy
            torque[ia, 1] += raz * fx - rax * fz
            torque[ia, 2] += rax * fy - ray * fx
            force[ib, 0] -= fx
            force[ib, 1] -= fy
            force[ib, 2] -= fz
            torque[ib, 0] -= rby * fz - rbz * fy
            torque[ib, 1] -= rbz * fx - rbx * fz
            torque[ib, 2] -= rbx * fy - rby * fx

        for i in range(n):
            if free[i] == 0:
                continue
            im = inv_mass[i]
            vel[i, 0] += dt * (force[i, 0] * im + gx)
            vel[i, 1] += dt * (force[i, 1] * im + gy)
            vel[i, 2] += dt * (force[i, 2] * im + gz)

            qw, qx, qy, qz = quat[i, 0], quat[i, 1], quat[i, 2], quat[i, 3]
            wx, wy, wz = omg[i, 0], omg[i, 1], omg[i, 2]
            it = i_trans[i]
            iax = i_axial[i]
            # Euler equation in the body frame: I dw/dt = tau - w x (I w)
            wbx, wby, wbz = _rot_inv(qw, qx, qy, qz, wx, wy, wz)
            lbx = it * wbx
            lby = it * wby
            lbz = iax * wbz
            lwx, lwy, lwz = _rot(qw, qx, qy, qz, lbx, lby, lbz)
            sx = torque[i, 0] - (wy * lwz - wz * lwy)
            sy = torque[i, 1] - (wz * lwx - wx * lwz)
            sz = torque[i, 2] - (wx * lwy - wy * lwx)
            sbx, sby, sbz = _rot_inv(qw, qx, qy, qz, sx, sy, sz)
            dwx, dwy, dwz = _rot(qw, qx, qy, qz, sbx / it, sby / it, sbz / iax)
            wx += dt * dwx
            wy += dt * dwy
            wz += dt * dwz
            omg[i, 0] = wx
            omg[i, 1] = wy
            omg[i, 2] = wz

            pos[i, 0] += dt * vel[i, 0]
            pos[i, 1] += dt * vel[i, 1]
            pos[i, 2] += dt * vel[i, 2]

            # dq/dt = 0.5 * (0, w) * q, then renormalize
            hw = -0.5 * (wx * qx + wy * qy + wz * qz)
            hx = 0.5 * (wx * qw + wy * qz - wz * qy)
            hy = 0.5 * (wy * qw + wz * qx - wx * qz)
            hz = 0.5 * (wz * qw + wx * qy - wy * qx)
            qw += dt * hw
            qx += dt * hx
            qy += dt * hy
            qz += dt * hz
            qn = math.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
            quat[i, 0] = qw / qn
            quat[i, 1] = qx / qn
            quat[i, 2] = qy / qn
            quat[i, 3] = qz / qn

        for i in range(n):
            if free[i] == 0:
                continue
            bad = False
            for c in range(3):
                if not (math.isfinite(pos[i, c]) and math.isfinite(vel[i, c])):
                    bad = True
                if not math.isfinite(omg[i, c]):
                    bad = True
            if bad:
                return step + 1, STATUS_DIVERGED, i

        if speed_tol > 0.0:
            top = 0.0
            for i in range(n):
                if free[i] == 0:
                    continue
                ax, ay, az = _rot(
                    quat[i, 0], quat[i, 1], quat[i, 2], quat[i, 3], 0.0, 0.0, 1.0
                )
                hx2 = half[i] * ax
                hy2 = half[i] * ay
                hz2 = half[i] * az
                wx, wy, wz = omg[i, 0], omg[i, 1], omg[i, 2]
                cx = wy * hz2 - wz * hy2
                cy = wz * hx2 - wx * hz2
                cz = wx * hy2 - wy * hx2
                for sgn in (-1.0, 1.0):
                    ex = vel[i, 0] + sgn * cx
                    ey = vel[i, 1] + sgn * cy
                    ez = vel[i, 2] + sgn * cz
                    sp = math.sqrt(ex * ex + ey * ey + ez * ez)
                    if sp > top:
                        top = sp
            if top < speed_tol:
                quiet_streak += 1
                if quiet_streak >= settle_hold:
                    return step + 1, STATUS_SETTLED, -1
            else:
                quiet_streak = 0

    return n_steps, STATUS_OK, -1


NUMBA_ENABLED = False
if _numba_requested():
    try:
        from numba import njit
    except ImportError:
        njit = None
    if njit is not None:
        _rot = njit(cache=True, inline="always")(_rot)
        _rot_inv = njit(cache=True, inline="always")(_rot_inv)
        advance = njit(cache=True)(_advance_impl)
        NUMBA_ENABLED = True

if not NUMBA_ENABLED:
    advance = _advance_impl

BACKEND = "numba" if NUMBA_ENABLED else "numpy"
