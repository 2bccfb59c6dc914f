"""Compiled batch stepper: the same physics as dynamics.py in loop form.

One JIT kernel advances the whole batch a physics step: forward kinematics,
velocity propagation, a composite-rigid-body mass matrix, recursive
Newton-Euler bias forces, penalty foot contacts, and the semi-implicit
update. The pure-numpy implementation in dynamics.py is the reference; the
two paths are cross-checked to float precision in the test suite, and setting
the environment variable TAILQUAD_PURE_NUMPY=1 disables this path.

Only floating-base trees run here; fixed-base test rigs take the numpy path.
Kernels cache to disk, so the compile cost is paid once per machine.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _cholesky_solve(m, rhs, x):
    """In-place SPD solve: x = m^-1 rhs via Cholesky."""
    n = m.shape[0]
    L = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            s = m[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if s <= 0.0:
                    return False
                L[i, i] = np.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    for i in range(n):
        s = rhs[i]
        for k in range(i):
            s -= L[i, k] * x[k]
        x[i] = s / L[i, i]
    for i in range(n - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, n):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]
    return True


@njit(cache=True)
def step_batch(parent, joint_offset, joint_rot, joint_axis, mass, com_local,
               inertia_local, foot_links, foot_offsets,
               base_pos, base_quat, base_vel, base_ang_vel, joint_pos, joint_vel,
               tau, external, dt, gravity,
               contacts_on, k_n, d_n, mu, v_reg,
               out_pos, out_quat, out_vel, out_ang_vel, out_jpos, out_jvel):
    """Semi-implicit Euler step for every batch row; returns False on a singular solve."""
    n_batch = base_pos.shape[0]
    nl = parent.shape[0]
    nj = nl - 1
    dof = 6 + nj
    n_feet = foot_links.shape[0]
    ok = True

    R = np.zeros((nl, 3, 3))
    p = np.zeros((nl, 3))
    axw = np.zeros((nl, 3))
    com = np.zeros((nl, 3))
    omega = np.zeros((nl, 3))
    v_o = np.zeros((nl, 3))
    alpha = np.zeros((nl, 3))
    a_o = np.zeros((nl, 3))
    iw = np.zeros((nl, 3, 3))
    facc = np.zeros((nl, 3))
    nacc = np.zeros((nl, 3))
    mc = np.zeros(nl)
    cc = np.zeros((nl, 3))
    ic = np.zeros((nl, 3, 3))
    mmat = np.zeros((dof, dof))
    rhs = np.zeros(dof)
    udot = np.zeros(dof)
    tmp = np.zeros((3, 3))

    for b in range(n_batch):
        # ---- forward kinematics ------------------------------------------
        qw, qx, qy, qz = base_quat[b, 0], base_quat[b, 1], base_quat[b, 2], base_quat[b, 3]
        R[0, 0, 0] = 1.0 - 2.0 * (qy * qy + qz * qz)
        R[0, 0, 1] = 2.0 * (qx * qy - qw * qz)
        R[0, 0, 2] = 2.0 * (qx * qz + qw * qy)
        R[0, 1, 0] = 2.0 * (qx * qy + qw * qz)
        R[0, 1, 1] = 1.0 - 2.0 * (qx * qx + qz * qz)
        R[0, 1, 2] = 2.0 * (qy * qz - qw * qx)
        R[0, 2, 0] = 2.0 * (qx * qz - qw * qy)
        R[0, 2, 1] = 2.0 * (qy * qz + qw * qx)
        R[0, 2, 2] = 1.0 - 2.0 * (qx * qx + qy * qy)
        for k in range(3):
            p[0, k] = base_pos[b, k]
        for i in range(1, nl):
            par = parent[i]
            for r in range(3):
                p[i, r] = (p[par, r] + R[par, r, 0] * joint_offset[i, 0]
                           + R[par, r, 1] * joint_offset[i, 1]
                           + R[par, r, 2] * joint_offset[i, 2])
            for r in range(3):
                for c in range(3):
                    tmp[r, c] = (R[par, r, 0] * joint_rot[i, 0, c]
                                 + R[par, r, 1] * joint_rot[i, 1, c]
                                 + R[par, r, 2] * joint_rot[i, 2, c])
            ax, ay, az = joint_axis[i, 0], joint_axis[i, 1], joint_axis[i, 2]
            th = joint_pos[b, i - 1]
            ct, st = np.cos(th), np.sin(th)
            oc = 1.0 - ct
            rj = ((ct + ax * ax * oc, ax * ay * oc - az * st, ax * az * oc + ay * st),
                  (ay * ax * oc + az * st, ct + ay * ay * oc, ay * az * oc - ax * st),
                  (az * ax * oc - ay * st, az * ay * oc + ax * st, ct + az * az * oc))
            for r in range(3):
                axw[i, r] = tmp[r, 0] * ax + tmp[r, 1] * ay + tmp[r, 2] * az
                for c in range(3):
                    R[i, r, c] = tmp[r, 0] * rj[0][c] + tmp[r, 1] * rj[1][c] + tmp[r, 2] * rj[2][c]
        for i in range(nl):
            for r in range(3):
                com[i, r] = (p[i, r] + R[i, r, 0] * com_local[i, 0]
                             + R[i, r, 1] * com_local[i, 1]
                             + R[i, r, 2] * com_local[i, 2])

        # ---- velocities and velocity-product accelerations ---------------
        for r in range(3):
            omega[0, r] = (R[0, r, 0] * base_ang_vel[b, 0]
                           + R[0, r, 1] * base_ang_vel[b, 1]
                           + R[0, r, 2] * base_ang_vel[b, 2])
            v_o[0, r] = base_vel[b, r]
            alpha[0, r] = 0.0
            a_o[0, r] = 0.0
        for i in range(1, nl):
            par = parent[i]
            dx = p[i, 0] - p[par, 0]
            dy = p[i, 1] - p[par, 1]
            dz = p[i, 2] - p[par, 2]
            wx, wy, wz = omega[par, 0], omega[par, 1], omega[par, 2]
            # w_par x d
            c1x = wy * dz - wz * dy
            c1y = wz * dx - wx * dz
            c1z = wx * dy - wy * dx
            v_o[i, 0] = v_o[par, 0] + c1x
            v_o[i, 1] = v_o[par, 1] + c1y
            v_o[i, 2] = v_o[par, 2] + c1z
            qd = joint_vel[b, i - 1]
            sx, sy, sz = axw[i, 0], axw[i, 1], axw[i, 2]
            omega[i, 0] = wx + sx * qd
            omega[i, 1] = wy + sy * qd
            omega[i, 2] = wz + sz * qd
            # a_o = a_o_par + alpha_par x d + w_par x (w_par x d)
            a_o[i, 0] = a_o[par, 0] + alpha[par, 1] * dz - alpha[par, 2] * dy + wy * c1z - wz * c1y
            a_o[i, 1] = a_o[par, 1] + alpha[par, 2] * dx - alpha[par, 0] * dz + wz * c1x - wx * c1z
            a_o[i, 2] = a_o[par, 2] + alpha[par, 0] * dy - alpha[par, 1] * dx + wx * c1y - wy * c1x
            # alpha = alpha_par + (w_par x s) qd
            alpha[i, 0] = alpha[par, 0] + (wy * sz - wz * sy) * qd
            alpha[i, 1] = alpha[par, 1] + (wz * sx - wx * sz) * qd
            alpha[i, 2] = alpha[par, 2] + (wx * sy - wy * sx) * qd

        # ---- world inertias (R I R^T) and Newton-Euler link loads --------
        for i in range(nl):
            for r in range(3):
                for c in range(3):
                    tmp[r, c] = (R[i, r, 0] * inertia_local[i, 0, c]
                                 + R[i, r, 1] * inertia_local[i, 1, c]
                                 + R[i, r, 2] * inertia_local[i, 2, c])
            for r in range(3):
                for c in range(3):
                    iw[i, r, c] = tmp[r, 0] * R[i, c, 0] + tmp[r, 1] * R[i, c, 1] + tmp[r, 2] * R[i, c, 2]
        for i in range(nl):
            ex = com[i, 0] - p[i, 0]
            ey = com[i, 1] - p[i, 1]
            ez = com[i, 2] - p[i, 2]
            wx, wy, wz = omega[i, 0], omega[i, 1], omega[i, 2]
            # a_com = a_o + alpha x e + w x (w x e)
            cwx = wy * ez - wz * ey
            cwy = wz * ex - wx * ez
            cwz = wx * ey - wy * ex
            acx = a_o[i, 0] + alpha[i, 1] * ez - alpha[i, 2] * ey + wy * cwz - wz * cwy
            acy = a_o[i, 1] + alpha[i, 2] * ex - alpha[i, 0] * ez + wz * cwx - wx * cwz
            acz = a_o[i, 2] + alpha[i, 0] * ey - alpha[i, 1] * ex + wx * cwy - wy * cwx
            fx = mass[i] * acx
            fy = mass[i] * acy
            fz = mass[i] * (acz + gravity)
            facc[i, 0] = fx
            facc[i, 1] = fy
            facc[i, 2] = fz
            # torque: Iw alpha + w x (Iw w), plus moment of f about the frame origin
            iwx = iw[i, 0, 0] * wx + iw[i, 0, 1] * wy + iw[i, 0, 2] * wz
            iwy = iw[i, 1, 0] * wx + iw[i, 1, 1] * wy + iw[i, 1, 2] * wz
            iwz = iw[i, 2, 0] * wx + iw[i, 2, 1] * wy + iw[i, 2, 2] * wz
            tx = (iw[i, 0, 0] * alpha[i, 0] + iw[i, 0, 1] * alpha[i, 1] + iw[i, 0, 2] * alpha[i, 2]
                  + wy * iwz - wz * iwy)
            ty = (iw[i, 1, 0] * alpha[i, 0] + iw[i, 1, 1] * alpha[i, 1] + iw[i, 1, 2] * alpha[i, 2]
                  + wz * iwx - wx * iwz)
            tz = (iw[i, 2, 0] * alpha[i, 0] + iw[i, 2, 1] * alpha[i, 1] + iw[i, 2, 2] * alpha[i, 2]
                  + wx * iwy - wy * iwx)
            nacc[i, 0] = tx + ey * fz - ez * fy
            nacc[i, 1] = ty + ez * fx - ex * fz
            nacc[i, 2] = tz + ex * fy - ey * fx

        # ---- RNEA backward pass: bias forces ------------------------------
        for r in range(dof):
            rhs[r] = 0.0
        for i in range(nl - 1, 0, -1):
            par = parent[i]
            rhs[6 + i - 1] -= (axw[i, 0] * nacc[i, 0] + axw[i, 1] * nacc[i, 1]
                               + axw[i, 2] * nacc[i, 2])
            dx = p[i, 0] - p[par, 0]
            dy = p[i, 1] - p[par, 1]
            dz = p[i, 2] - p[par, 2]
            facc[par, 0] += facc[i, 0]
            facc[par, 1] += facc[i, 1]
            facc[par, 2] += facc[i, 2]
            nacc[par, 0] += nacc[i, 0] + dy * facc[i, 2] - dz * facc[i, 1]
            nacc[par, 1] += nacc[i, 1] + dz * facc[i, 0] - dx * facc[i, 2]
            nacc[par, 2] += nacc[i, 2] + dx * facc[i, 1] - dy * facc[i, 0]
        for r in range(3):
            rhs[r] -= facc[0, r]
            rhs[3 + r] -= nacc[0, r]

        # ---- CRBA: composite inertias and mass matrix --------------------
        for i in range(nl):
            mc[i] = mass[i]
            for r in range(3):
                cc[i, r] = com[i, r]
                for c in range(3):
                    ic[i, r, c] = iw[i, r, c]
        for r in range(dof):
            for c in range(dof):
                mmat[r, c] = 0.0
        for i in range(nl - 1, 0, -1):
            # subtree composite at i is complete; form its unit-acceleration load
            dx = cc[i, 0] - p[i, 0]
            dy = cc[i, 1] - p[i, 1]
            dz = cc[i, 2] - p[i, 2]
            sx, sy, sz = axw[i, 0], axw[i, 1], axw[i, 2]
            fux = mc[i] * (sy * dz - sz * dy)
            fuy = mc[i] * (sz * dx - sx * dz)
            fuz = mc[i] * (sx * dy - sy * dx)
            # inertia of composite about its com contributes Ic s; moment arm adds d x F
            nux = ic[i, 0, 0] * sx + ic[i, 0, 1] * sy + ic[i, 0, 2] * sz + dy * fuz - dz * fuy
            nuy = ic[i, 1, 0] * sx + ic[i, 1, 1] * sy + ic[i, 1, 2] * sz + dz * fux - dx * fuz
            nuz = ic[i, 2, 0] * sx + ic[i, 2, 1] * sy + ic[i, 2, 2] * sz + dx * fuy - dy * fux
            col = 6 + i - 1
            # base coupling rows
            mmat[0, col] = fux
            mmat[1, col] = fuy
            mmat[2, col] = fuz
            rx = p[i, 0] - p[0, 0]
            ry = p[i, 1] - p[0, 1]
            rz = p[i, 2] - p[0, 2]
            mmat[3, col] = nux + ry * fuz - rz * fuy
            mmat[4, col] = nuy + rz * fux - rx * fuz
            mmat[5, col] = nuz + rx * fuy - ry * fux
            # joint rows: i itself and every ancestor joint
            a = i
            while a != 0:
                gx = p[i, 0] - p[a, 0]
                gy = p[i, 1] - p[a, 1]
                gz = p[i, 2] - p[a, 2]
                mx = nux + gy * fuz - gz * fuy
                my = nuy + gz * fux - gx * fuz
                mz = nuz + gx * fuy - gy * fux
                mmat[6 + a - 1, col] = axw[a, 0] * mx + axw[a, 1] * my + axw[a, 2] * mz
                a = parent[a]
            # merge composite i into its parent
            par = parent[i]
            mtot = mc[par] + mc[i]
            nx = (mc[par] * cc[par, 0] + mc[i] * cc[i, 0]) / mtot
            ny = (mc[par] * cc[par, 1] + mc[i] * cc[i, 1]) / mtot
            nz = (mc[par] * cc[par, 2] + mc[i] * cc[i, 2]) / mtot
            for src in range(2):
                if src == 0:
                    mm = mc[par]
                    ox = cc[par, 0] - nx
                    oy = cc[par, 1] - ny
                    oz = cc[par, 2] - nz
                else:
                    mm = mc[i]
                    ox = cc[i, 0] - nx
                    oy = cc[i, 1] - ny
                    oz = cc[i, 2] - nz
                    for r in range(3):
                        for c in range(3):
                            ic[par, r, c] += ic[i, r, c]
                d2 = ox * ox + oy * oy + oz * oz
                ic[par, 0, 0] += mm * (d2 - ox * ox)
                ic[par, 0, 1] += mm * (-ox * oy)
                ic[par, 0, 2] += mm * (-ox * oz)
                ic[par, 1, 0] += mm * (-oy * ox)
                ic[par, 1, 1] += mm * (d2 - oy * oy)
                ic[par, 1, 2] += mm * (-oy * oz)
                ic[par, 2, 0] += mm * (-oz * ox)
                ic[par, 2, 1] += mm * (-oz * oy)
                ic[par, 2, 2] += mm * (d2 - oz * oz)
            mc[par] = mtot
            cc[par, 0] = nx
            cc[par, 1] = ny
            cc[par, 2] = nz
        # base-base block
        hx = mc[0] * (cc[0, 0] - p[0, 0])
        hy = mc[0] * (cc[0, 1] - p[0, 1])
        hz = mc[0] * (cc[0, 2] - p[0, 2])
        for r in range(3):
            mmat[r, r] = mc[0]
        mmat[0, 4] = hz
        mmat[0, 5] = -hy
        mmat[1, 3] = -hz
        mmat[1, 5] = hx
        mmat[2, 3] = hy
        mmat[2, 4] = -hx
        dxc = cc[0, 0] - p[0, 0]
        dyc = cc[0, 1] - p[0, 1]
        dzc = cc[0, 2] - p[0, 2]
        d2c = dxc * dxc + dyc * dyc + dzc * dzc
        mmat[3, 3] = ic[0, 0, 0] + mc[0] * (d2c - dxc * dxc)
        mmat[3, 4] = ic[0, 0, 1] + mc[0] * (-dxc * dyc)
        mmat[3, 5] = ic[0, 0, 2] + mc[0] * (-dxc * dzc)
        mmat[4, 3] = ic[0, 1, 0] + mc[0] * (-dyc * dxc)
        mmat[4, 4] = ic[0, 1, 1] + mc[0] * (d2c - dyc * dyc)
        mmat[4, 5] = ic[0, 1, 2] + mc[0] * (-dyc * dzc)
        mmat[5, 3] = ic[0, 2, 0] + mc[0] * (-dzc * dxc)
        mmat[5, 4] = ic[0, 2, 1] + mc[0] * (-dzc * dyc)
        mmat[5, 5] = ic[0, 2, 2] + mc[0] * (d2c - dzc * dzc)
        # mirror to the lower triangle
        for r in range(dof):
            for c in range(r + 1, dof):
                mmat[c, r] = mmat[r, c]

        # ---- applied torques, contacts, external force --------------------
        for j in range(nj):
            rhs[6 + j] += tau[b, j]
        if contacts_on:
            for k in range(n_feet):
                li = foot_links[k]
                fx_ = (p[li, 0] + R[li, 0, 0] * foot_offsets[k, 0]
                       + R[li, 0, 1] * foot_offsets[k, 1] + R[li, 0, 2] * foot_offsets[k, 2])
                fy_ = (p[li, 1] + R[li, 1, 0] * foot_offsets[k, 0]
                       + R[li, 1, 1] * foot_offsets[k, 1] + R[li, 1, 2] * foot_offsets[k, 2])
                fz_ = (p[li, 2] + R[li, 2, 0] * foot_offsets[k, 0]
                       + R[li, 2, 1] * foot_offsets[k, 1] + R[li, 2, 2] * foot_offsets[k, 2])
                if fz_ >= 0.0:
                    continue
                ax_ = fx_ - p[li, 0]
                ay_ = fy_ - p[li, 1]
                az_ = fz_ - p[li, 2]
                vx_ = v_o[li, 0] + omega[li, 1] * az_ - omega[li, 2] * ay_
                vy_ = v_o[li, 1] + omega[li, 2] * ax_ - omega[li, 0] * az_
                vz_ = v_o[li, 2] + omega[li, 0] * ay_ - omega[li, 1] * ax_
                fn = -k_n * fz_ - d_n * vz_
                if fn <= 0.0:
                    continue
                speed = np.sqrt(vx_ * vx_ + vy_ * vy_)
                denom = speed if speed > v_reg else v_reg
                ftx = -mu * fn * vx_ / denom
                fty = -mu * fn * vy_ / denom
                # generalized force via the point Jacobian
                rhs[0] += ftx
                rhs[1] += fty
                rhs[2] += fn
                rx_ = fx_ - p[0, 0]
                ry_ = fy_ - p[0, 1]
                rz_ = fz_ - p[0, 2]
                rhs[3] += ry_ * fn - rz_ * fty
                rhs[4] += rz_ * ftx - rx_ * fn
                rhs[5] += rx_ * fty - ry_ * ftx
                a = li
                while a != 0:
                    gx = fx_ - p[a, 0]
                    gy = fy_ - p[a, 1]
                    gz = fz_ - p[a, 2]
                    jx = axw[a, 1] * gz - axw[a, 2] * gy
                    jy = axw[a, 2] * gx - axw[a, 0] * gz
                    jz = axw[a, 0] * gy - axw[a, 1] * gx
                    rhs[6 + a - 1] += jx * ftx + jy * fty + jz * fn
                    a = parent[a]
        ex_ = external[b, 0]
        ey_ = external[b, 1]
        ez_ = external[b, 2]
        if ex_ != 0.0 or ey_ != 0.0 or ez_ != 0.0:
            rhs[0] += ex_
            rhs[1] += ey_
            rhs[2] += ez_
            bx = com[0, 0] - p[0, 0]
            by = com[0, 1] - p[0, 1]
            bz = com[0, 2] - p[0, 2]
            rhs[3] += by * ez_ - bz * ey_
            rhs[4] += bz * ex_ - bx * ez_
            rhs[5] += bx * ey_ - by * ex_

        # ---- solve and integrate (velocities first, then positions) -------
        if not _cholesky_solve(mmat, rhs, udot):
            ok = False
            continue
        vx_n = base_vel[b, 0] + dt * udot[0]
        vy_n = base_vel[b, 1] + dt * udot[1]
        vz_n = base_vel[b, 2] + dt * udot[2]
        wwx = omega[0, 0] + dt * udot[3]
        wwy = omega[0, 1] + dt * udot[4]
        wwz = omega[0, 2] + dt * udot[5]
        # world rate back to the body frame (R^T w)
        wbx = R[0, 0, 0] * wwx + R[0, 1, 0] * wwy + R[0, 2, 0] * wwz
        wby = R[0, 0, 1] * wwx + R[0, 1, 1] * wwy + R[0, 2, 1] * wwz
        wbz = R[0, 0, 2] * wwx + R[0, 1, 2] * wwy + R[0, 2, 2] * wwz
        out_vel[b, 0] = vx_n
        out_vel[b, 1] = vy_n
        out_vel[b, 2] = vz_n
        out_ang_vel[b, 0] = wbx
        out_ang_vel[b, 1] = wby
        out_ang_vel[b, 2] = wbz
        out_pos[b, 0] = base_pos[b, 0] + dt * vx_n
        out_pos[b, 1] = base_pos[b, 1] + dt * vy_n
        out_pos[b, 2] = base_pos[b, 2] + dt * vz_n
        tx_ = wbx * dt
        ty_ = wby * dt
        tz_ = wbz * dt
        ang = np.sqrt(tx_ * tx_ + ty_ * ty_ + tz_ * tz_)
        half = 0.5 * ang
        if ang < 1e-12:
            scale = 0.5
        else:
            scale = np.sin(half) / ang
        dw = np.cos(half)
        dx_ = tx_ * scale
        dy_ = ty_ * scale
        dz_ = tz_ * scale
        nw = qw * dw - qx * dx_ - qy * dy_ - qz * dz_
        nx_ = qw * dx_ + qx * dw + qy * dz_ - qz * dy_
        ny_ = qw * dy_ - qx * dz_ + qy * dw + qz * dx_
        nz_ = qw * dz_ + qx * dy_ - qy * dx_ + qz * dw
        norm = np.sqrt(nw * nw + nx_ * nx_ + ny_ * ny_ + nz_ * nz_)
        sign = 1.0 if nw >= 0.0 else -1.0
        out_quat[b, 0] = sign * nw / norm
        out_quat[b, 1] = sign * nx_ / norm
        out_quat[b, 2] = sign * ny_ / norm
        out_quat[b, 3] = sign * nz_ / norm
        for j in range(nj):
            qdn = joint_vel[b, j] + dt * udot[6 + j]
            out_jvel[b, j] = qdn
            out_jpos[b, j] = joint_pos[b, j] + dt * qdn
    return ok
