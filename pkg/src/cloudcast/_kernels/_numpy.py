"""Pure-NumPy kernel implementations (fallback when the extension is absent).

Semantics must stay in lockstep with ``_core.pyx``; the parity tests compare
the two backends on random inputs.
"""

import numpy as np
from scipy import ndimage

GRAD_EPS = 1e-12


def warp_bilinear(img, u, v):
    """Sample ``img`` at (y + v, x + u) with bilinear interpolation.

    Coordinates outside the frame are clamped to the border, so no synthetic
    fill value is ever introduced.
    """
    h, w = img.shape
    yy, xx = np.mgrid[0:h, 0:w]
    coords = np.empty((2, h, w), dtype=np.float64)
    coords[0] = yy + v
    coords[1] = xx + u
    out = ndimage.map_coordinates(img.astype(np.float64), coords, order=1, mode="nearest")
    return out.astype(np.float32)


def median_filter(a, radius):
    """Windowed median with edge replication; window is (2*radius+1) square."""
    if radius <= 0:
        return a.copy()
    return ndimage.median_filter(a, size=2 * radius + 1, mode="nearest")


def _forward_grad(a):
    gx = np.zeros_like(a)
    gy = np.zeros_like(a)
    gx[:, :-1] = a[:, 1:] - a[:, :-1]
    gy[:-1, :] = a[1:, :] - a[:-1, :]
    return gx, gy


def _divergence(p1, p2):
    d = np.zeros_like(p1)
    d[:, 0] += p1[:, 0]
    d[:, 1:-1] += p1[:, 1:-1] - p1[:, :-2]
    d[:, -1] += -p1[:, -2]
    d[0, :] += p2[0, :]
    d[1:-1, :] += p2[1:-1, :] - p2[:-2, :]
    d[-1, :] += -p2[-2, :]
    return d


def solve_warp(i0, i1w, i1wx, i1wy, u, v, w_illum, lam, theta, tau, epsilon,
               gamma, n_outer, n_inner):
    """One warp of the TV-L1 fix-point alternation, updating u, v in place.

    ``i1w``/``i1wx``/``i1wy`` are the moving image and its gradients already
    warped by the flow (u, v) at entry, which is also the linearization point
    of the brightness-constancy residual. Each outer round applies the
    pointwise three-case shrinkage to the auxiliary variable, then runs dual
    ascent steps p <- (p + (tau/theta) grad) / (1 + (tau/theta)|grad|) until
    the root-mean-square flow update drops below ``epsilon`` or ``n_inner``
    is reached; the alternation itself stops on the same criterion or after
    ``n_outer`` rounds. With ``gamma`` > 0 a brightness-offset field
    ``w_illum`` joins the data term and is regularized like u and v.
    """
    use_illum = gamma > 0.0
    grad2 = i1wx * i1wx + i1wy * i1wy
    if use_illum:
        grad2 = grad2 + np.float32(gamma * gamma)
    rho_c = i1w - i1wx * u - i1wy * v - i0
    if use_illum:
        rho_c = rho_c - np.float32(gamma) * w_illum

    small = grad2 <= GRAD_EPS
    safe_grad2 = np.where(small, np.float32(1.0), grad2)
    lt = np.float32(lam * theta)
    th = lt * grad2
    tt = np.float32(tau / theta)
    theta32 = np.float32(theta)
    eps2 = float(epsilon) ** 2

    pu1 = np.zeros_like(u)
    pu2 = np.zeros_like(u)
    pv1 = np.zeros_like(u)
    pv2 = np.zeros_like(u)
    if use_illum:
        pw1 = np.zeros_like(u)
        pw2 = np.zeros_like(u)

    converged = False
    for _outer in range(n_outer):
        rho = rho_c + i1wx * u + i1wy * v
        if use_illum:
            rho = rho + np.float32(gamma) * w_illum
        d = np.where(rho < -th, lt,
                     np.where(rho > th, -lt,
                              np.where(small, np.float32(0.0), -rho / safe_grad2)))
        v1 = u + d * i1wx
        v2 = v + d * i1wy
        if use_illum:
            v3 = w_illum + d * np.float32(gamma)

        for _inner in range(n_inner):
            u_prev = u.copy()
            v_prev = v.copy()
            u[...] = v1 + theta32 * _divergence(pu1, pu2)
            v[...] = v2 + theta32 * _divergence(pv1, pv2)
            if use_illum:
                w_illum[...] = v3 + theta32 * _divergence(pw1, pw2)

            err = float(np.mean((u - u_prev).astype(np.float64) ** 2
                                + (v - v_prev).astype(np.float64) ** 2))

            gxu, gyu = _forward_grad(u)
            gxv, gyv = _forward_grad(v)
            nu = np.float32(1.0) + tt * np.sqrt(gxu * gxu + gyu * gyu)
            nv = np.float32(1.0) + tt * np.sqrt(gxv * gxv + gyv * gyv)
            pu1[...] = (pu1 + tt * gxu) / nu
            pu2[...] = (pu2 + tt * gyu) / nu
            pv1[...] = (pv1 + tt * gxv) / nv
            pv2[...] = (pv2 + tt * gyv) / nv
            if use_illum:
                gxw, gyw = _forward_grad(w_illum)
                nw = np.float32(1.0) + tt * np.sqrt(gxw * gxw + gyw * gyw)
                pw1[...] = (pw1 + tt * gxw) / nw
                pw2[...] = (pw2 + tt * gyw) / nw

            if err < eps2:
                converged = True
                break
        if converged:
            break
