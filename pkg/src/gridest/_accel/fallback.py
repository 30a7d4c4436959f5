"""Pure-numpy implementations of the numeric kernels.

Used when the compiled extension is unavailable (or forced via GRIDEST_PURE).
Signatures and summation semantics match gridest._accel._kernels; results
agree with the compiled core to floating-point roundoff.
"""

from __future__ import annotations

import numpy as np


def injections_dense(g: np.ndarray, b: np.ndarray, v: np.ndarray, th: np.ndarray):
    """Nodal injections for a batch of voltage states.

    g, b: (n, n) real/imag parts of the bus-admittance matrix.
    v, th: (B, n) magnitudes and angles.
    Returns p, q of shape (B, n).
    """
    volt = v * np.exp(1j * th)
    s = volt * np.conj(volt @ (g + 1j * b).T)
    return np.ascontiguousarray(s.real), np.ascontiguousarray(s.imag)


def polar_jacobian(g: np.ndarray, b: np.ndarray, v: np.ndarray, th: np.ndarray):
    """Injections and their polar-coordinate derivatives for one state.

    Returns (p, q, dp_dth, dp_dv, dq_dth, dq_dv), each derivative (n, n)
    with [i, j] = d(p_i)/d(x_j).
    """
    y = g + 1j * b
    volt = v * np.exp(1j * th)
    ibus = y @ volt
    s = volt * np.conj(ibus)

    diag_v = np.diag(volt)
    diag_i = np.diag(ibus)
    diag_vn = np.diag(volt / v)
    ds_dth = 1j * diag_v @ np.conj(diag_i - y @ diag_v)
    ds_dv = diag_v @ np.conj(y @ diag_vn) + np.conj(diag_i) @ diag_vn
    return s.real, s.imag, ds_dth.real, ds_dv.real, ds_dth.imag, ds_dv.imag


def edge_injections_fwd(fr, to, ge, be, gsh, bsh, v2, vv, cs, sn):
    """Injections of an edge-parameterized network over a sample batch.

    fr, to: (E,) int endpoints; ge, be: (E,) per-edge series admittance parts;
    gsh, bsh: (n,) nodal shunts; v2: (B, n) squared magnitudes;
    vv, cs, sn: (B, E) products v_f*v_t, cos/sin of (th_f - th_t).
    Returns p, q of shape (B, n).
    """
    n = v2.shape[1]
    ef = _onehot(fr, n)
    et = _onehot(to, n)
    pe_f = v2[:, fr] * ge + vv * (-ge * cs - be * sn)
    pe_t = v2[:, to] * ge + vv * (-ge * cs + be * sn)
    qe_f = -v2[:, fr] * be + vv * (-ge * sn + be * cs)
    qe_t = -v2[:, to] * be + vv * (ge * sn + be * cs)
    p = pe_f @ ef + pe_t @ et + v2 * gsh
    q = qe_f @ ef + qe_t @ et - v2 * bsh
    return p, q


def edge_injections_vjp(fr, to, ge, be, v2, vv, cs, sn, padj, qadj):
    """Adjoints of edge_injections_fwd w.r.t. (ge, be, gsh, bsh)."""
    pf = padj[:, fr]
    pt = padj[:, to]
    qf = qadj[:, fr]
    qt = qadj[:, to]
    ge_adj = (
        pf * (v2[:, fr] - vv * cs)
        + pt * (v2[:, to] - vv * cs)
        + (qt - qf) * (vv * sn)
    ).sum(axis=0)
    be_adj = (
        (pt - pf) * (vv * sn)
        + qf * (vv * cs - v2[:, fr])
        + qt * (vv * cs - v2[:, to])
    ).sum(axis=0)
    gsh_adj = (v2 * padj).sum(axis=0)
    bsh_adj = -(v2 * qadj).sum(axis=0)
    return ge_adj, be_adj, gsh_adj, bsh_adj


def _onehot(idx, n):
    m = np.zeros((idx.shape[0], n))
    m[np.arange(idx.shape[0]), idx] = 1.0
    return m
