"""Extrinsic geometry of level sets ``{r = f(y)}`` in a diagonal chart metric.

The ambient metric is ``g = diag(g_0, g_1, ..., g_d)`` in coordinates
``(r, y_1, ..., y_d)``.  With ``F = r - f(y)`` the outward unit normal is
``grad F / |grad F|`` and

    H      = P^{ab} Hess F_{ab} / |grad F|,
    |h|^2  = P^{ab} P^{cd} Hess F_{ac} Hess F_{bd} / |grad F|^2,

where ``P = g^{-1} - n n`` projects onto the tangent space.  Slices
``r = const`` of ``dr^2 + r^2 g_L`` get ``H = (m-1)/r``.  All routines accept
complex input so that complex-step differentiation passes through them.
Leading array axes are batch axes; the metric index is last.
"""

import numpy as np


def christoffel_diag(g, dg):
    """Christoffel symbols ``G[..., l, a, b] = Gamma^l_{ab}`` of a diagonal metric.

    ``dg[..., k, i]`` is ``d g_i / d x^k``.
    """
    m = g.shape[-1]
    E = dg / (2.0 * g[..., None, :])  # E[k, i] = d_k g_i / (2 g_i)
    G = np.zeros(g.shape[:-1] + (m, m, m), dtype=np.result_type(g, dg))
    for l in range(m):
        G[..., l, l, :] += E[..., :, l]
        G[..., l, :, l] += E[..., :, l]
        G[..., l, l, l] -= E[..., l, l]
        for a in range(m):
            if a != l:
                G[..., l, a, a] -= dg[..., l, a] / (2.0 * g[..., l])
    return G


def _hessian_F(g, dg, f_d, f_dd):
    """Hess F and dF for ``F = r - f(y)``."""
    m = g.shape[-1]
    shape = np.broadcast_shapes(g.shape[:-1], f_d.shape[:-1])
    dtype = np.result_type(g, dg, f_d, f_dd)
    dF = np.empty(shape + (m,), dtype=dtype)
    dF[..., 0] = 1.0
    dF[..., 1:] = -f_d
    E = dg / (2.0 * g[..., None, :])
    # Q_{ab} = Gamma^l_{ab} dF_l
    T = E * dF[..., None, :]
    Q = T + np.swapaxes(T, -1, -2)
    diag = np.einsum("...l,...la->...a", dF / (2.0 * g), dg)
    Q = Q - np.einsum("...a,ab->...ab", diag, np.eye(m))
    hess = -Q
    hess[..., 1:, 1:] = hess[..., 1:, 1:] - f_dd
    return dF, hess


def level_set_geometry(g, dg, f_d, f_dd, full=True):
    """Mean curvature and related data of ``{r = f(y)}``.

    Parameters
    ----------
    g : ndarray (..., m)
        Metric diagonal at the surface points.
    dg : ndarray (..., m, m)
        ``dg[..., k, i] = d_k g_i`` at the surface points.
    f_d : ndarray (..., d)
        First partials of ``f``.
    f_dd : ndarray (..., d, d)
        Second partials of ``f``.
    full : bool
        When False only ``H`` is computed (cheap path for Jacobians).

    Returns
    -------
    dict with ``H``; if ``full`` also ``h_sq``, ``umbilicity``, ``normal``
    (contravariant unit normal), ``W`` (``|grad F|``), ``sqrt_det_gamma``
    (induced area density in the chart), ``gamma_inv`` (inverse induced
    metric in link coordinates).
    """
    dF, hess = _hessian_F(g, dg, f_d, f_dd)
    ginv = 1.0 / g
    grad = dF * ginv
    W = np.sqrt(np.sum(dF * grad, axis=-1))
    n_up = grad / W[..., None]
    m = g.shape[-1]
    P = np.einsum("...a,ab->...ab", ginv, np.eye(m)) - n_up[..., :, None] * n_up[..., None, :]
    A = np.einsum("...ab,...bc->...ac", P, hess)
    H = np.einsum("...aa->...", A) / W
    if not full:
        return {"H": H}
    h_sq = np.einsum("...ab,...ba->...", A, A) / W**2
    d = m - 1
    n_low = dF / W[..., None]
    Pi = np.eye(m) - n_low[..., :, None] * n_up[..., None, :]
    h_low = np.einsum("...ab,...bc,...dc->...ad", Pi, hess, Pi) / W[..., None, None]
    g_sigma = np.einsum("...a,ab->...ab", g, np.eye(m)) - n_low[..., :, None] * n_low[..., None, :]
    S = h_low - (H / d)[..., None, None] * g_sigma
    B = ginv[..., :, None] * S
    umb = np.sqrt(np.abs(np.einsum("...ab,...ba->...", B, B)))
    # induced metric gamma_ij = g_0 f_i f_j + g_i delta_ij
    gy = g[..., 1:]
    q = g[..., 0] * np.sum(f_d**2 / gy, axis=-1)
    sqrt_det_gamma = np.sqrt(np.prod(gy, axis=-1) * (1.0 + q))
    Dinv_f = f_d / gy
    gamma_inv = np.einsum("...i,ij->...ij", 1.0 / gy, np.eye(d)) - (
        g[..., 0] / (1.0 + q)
    )[..., None, None] * Dinv_f[..., :, None] * Dinv_f[..., None, :]
    return {
        "H": H,
        "h_sq": h_sq,
        "umbilicity": umb,
        "normal": n_up,
        "W": W,
        "sqrt_det_gamma": sqrt_det_gamma,
        "gamma_inv": gamma_inv,
    }
