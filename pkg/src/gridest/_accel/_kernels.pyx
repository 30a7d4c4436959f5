# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric kernels.

Same functions and summation semantics as fallback.py; plain C loops over the
batch/edge structure instead of numpy whole-array expressions.
"""

import numpy as np

from libc.math cimport cos as ccos
from libc.math cimport sin as csin


def injections_dense(const double[:, :] g, const double[:, :] b, const double[:, :] v, const double[:, :] th):
    """Nodal injections for a batch of voltage states; see fallback version.

    Uses per-bus cos/sin plus angle-addition identities, so the inner loop is
    trig-free: cos(a-b) = ca*cb + sa*sb, sin(a-b) = sa*cb - ca*sb.
    """
    cdef Py_ssize_t nb = v.shape[0], n = v.shape[1]
    p_arr = np.empty((nb, n))
    q_arr = np.empty((nb, n))
    cdef double[:, ::1] p = p_arr
    cdef double[:, ::1] q = q_arr
    ct_arr = np.empty(n)
    st_arr = np.empty(n)
    cdef double[::1] ct = ct_arr
    cdef double[::1] st = st_arr
    cdef Py_ssize_t s, i, j
    cdef double accp, accq, cd, sd, vj, ci, si
    for s in range(nb):
        for j in range(n):
            ct[j] = ccos(th[s, j])
            st[j] = csin(th[s, j])
        for i in range(n):
            accp = 0.0
            accq = 0.0
            ci = ct[i]
            si = st[i]
            for j in range(n):
                cd = ci * ct[j] + si * st[j]
                sd = si * ct[j] - ci * st[j]
                vj = v[s, j]
                accp += vj * (g[i, j] * cd + b[i, j] * sd)
                accq += vj * (g[i, j] * sd - b[i, j] * cd)
            p[s, i] = v[s, i] * accp
            q[s, i] = v[s, i] * accq
    return p_arr, q_arr


def polar_jacobian(const double[:, :] g, const double[:, :] b, const double[:] v, const double[:] th):
    """Injections and polar derivatives for one state; see fallback version."""
    cdef Py_ssize_t n = v.shape[0]
    p_arr = np.empty(n)
    q_arr = np.empty(n)
    dpth_arr = np.empty((n, n))
    dpv_arr = np.empty((n, n))
    dqth_arr = np.empty((n, n))
    dqv_arr = np.empty((n, n))
    cdef double[::1] p = p_arr
    cdef double[::1] q = q_arr
    cdef double[:, ::1] dpth = dpth_arr
    cdef double[:, ::1] dpv = dpv_arr
    cdef double[:, ::1] dqth = dqth_arr
    cdef double[:, ::1] dqv = dqv_arr
    ct_arr = np.cos(th)
    st_arr = np.sin(th)
    cdef double[::1] ct = ct_arr
    cdef double[::1] st = st_arr
    cdef Py_ssize_t i, j
    cdef double accp, accq, cd, sd, gc_bs, gs_bc
    for i in range(n):
        accp = 0.0
        accq = 0.0
        for j in range(n):
            cd = ct[i] * ct[j] + st[i] * st[j]
            sd = st[i] * ct[j] - ct[i] * st[j]
            gc_bs = g[i, j] * cd + b[i, j] * sd
            gs_bc = g[i, j] * sd - b[i, j] * cd
            accp += v[j] * gc_bs
            accq += v[j] * gs_bc
            if i != j:
                dpth[i, j] = v[i] * v[j] * gs_bc
                dpv[i, j] = v[i] * gc_bs
                dqth[i, j] = -v[i] * v[j] * gc_bs
                dqv[i, j] = v[i] * gs_bc
        p[i] = v[i] * accp
        q[i] = v[i] * accq
    for i in range(n):
        dpth[i, i] = -q[i] - b[i, i] * v[i] * v[i]
        dpv[i, i] = p[i] / v[i] + g[i, i] * v[i]
        dqth[i, i] = p[i] - g[i, i] * v[i] * v[i]
        dqv[i, i] = q[i] / v[i] - b[i, i] * v[i]
    return p_arr, q_arr, dpth_arr, dpv_arr, dqth_arr, dqv_arr


def edge_injections_fwd(
    const long[:] fr,
    const long[:] to,
    const double[:] ge,
    const double[:] be,
    const double[:] gsh,
    const double[:] bsh,
    const double[:, :] v2,
    const double[:, :] vv,
    const double[:, :] cs,
    const double[:, :] sn,
):
    """Injections of an edge-parameterized network; see fallback version."""
    cdef Py_ssize_t nb = v2.shape[0], n = v2.shape[1], ne = fr.shape[0]
    p_arr = np.zeros((nb, n))
    q_arr = np.zeros((nb, n))
    cdef double[:, ::1] p = p_arr
    cdef double[:, ::1] q = q_arr
    cdef Py_ssize_t s, e, i, a, bb
    cdef double gcs, bsn, gsn, bcs, w
    for s in range(nb):
        for e in range(ne):
            a = fr[e]
            bb = to[e]
            w = vv[s, e]
            gcs = ge[e] * cs[s, e]
            bsn = be[e] * sn[s, e]
            gsn = ge[e] * sn[s, e]
            bcs = be[e] * cs[s, e]
            p[s, a] += v2[s, a] * ge[e] + w * (-gcs - bsn)
            p[s, bb] += v2[s, bb] * ge[e] + w * (-gcs + bsn)
            q[s, a] += -v2[s, a] * be[e] + w * (-gsn + bcs)
            q[s, bb] += -v2[s, bb] * be[e] + w * (gsn + bcs)
        for i in range(n):
            p[s, i] += v2[s, i] * gsh[i]
            q[s, i] -= v2[s, i] * bsh[i]
    return p_arr, q_arr


def edge_injections_vjp(
    const long[:] fr,
    const long[:] to,
    const double[:] ge,
    const double[:] be,
    const double[:, :] v2,
    const double[:, :] vv,
    const double[:, :] cs,
    const double[:, :] sn,
    const double[:, :] padj,
    const double[:, :] qadj,
):
    """Adjoints of edge_injections_fwd w.r.t. (ge, be, gsh, bsh)."""
    cdef Py_ssize_t nb = v2.shape[0], n = v2.shape[1], ne = fr.shape[0]
    ge_arr = np.zeros(ne)
    be_arr = np.zeros(ne)
    gsh_arr = np.zeros(n)
    bsh_arr = np.zeros(n)
    cdef double[::1] ge_adj = ge_arr
    cdef double[::1] be_adj = be_arr
    cdef double[::1] gsh_adj = gsh_arr
    cdef double[::1] bsh_adj = bsh_arr
    cdef Py_ssize_t s, e, i, a, bb
    cdef double w, pf, pt, qf, qt
    for s in range(nb):
        for e in range(ne):
            a = fr[e]
            bb = to[e]
            w = vv[s, e]
            pf = padj[s, a]
            pt = padj[s, bb]
            qf = qadj[s, a]
            qt = qadj[s, bb]
            ge_adj[e] += (
                pf * (v2[s, a] - w * cs[s, e])
                + pt * (v2[s, bb] - w * cs[s, e])
                + (qt - qf) * (w * sn[s, e])
            )
            be_adj[e] += (
                (pt - pf) * (w * sn[s, e])
                + qf * (w * cs[s, e] - v2[s, a])
                + qt * (w * cs[s, e] - v2[s, bb])
            )
        for i in range(n):
            gsh_adj[i] += v2[s, i] * padj[s, i]
            bsh_adj[i] -= v2[s, i] * qadj[s, i]
    return ge_arr, be_arr, gsh_arr, bsh_arr
