# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled TV-L1 kernels. Mirrors ``_numpy.py``; keep both in lockstep."""

import numpy as np

from libc.math cimport sqrtf
from libc.stdlib cimport free, malloc

cdef double GRAD_EPS = 1e-12


cdef inline double _clampd(double x, double lo, double hi) noexcept nogil:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


cdef void _warp_loop(float[:, ::1] img, float[:, ::1] u, float[:, ::1] v,
                     float[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef Py_ssize_t i, j, x0, y0, x1, y1
    cdef double x, y, fx, fy, top, bot
    for i in range(h):
        for j in range(w):
            x = _clampd(j + <double> u[i, j], 0.0, w - 1.0)
            y = _clampd(i + <double> v[i, j], 0.0, h - 1.0)
            x0 = <Py_ssize_t> x
            y0 = <Py_ssize_t> y
            x1 = x0 + 1 if x0 + 1 < w else w - 1
            y1 = y0 + 1 if y0 + 1 < h else h - 1
            fx = x - x0
            fy = y - y0
            top = (1.0 - fx) * img[y0, x0] + fx * img[y0, x1]
            bot = (1.0 - fx) * img[y1, x0] + fx * img[y1, x1]
            out[i, j] = <float> ((1.0 - fy) * top + fy * bot)


def warp_bilinear(img, u, v):
    """Sample ``img`` at (y + v, x + u), bilinear, border-clamped."""
    img_arr = np.ascontiguousarray(img, dtype=np.float32)
    out_arr = np.empty_like(img_arr)
    cdef float[:, ::1] img_mv = img_arr
    cdef float[:, ::1] u_mv = np.ascontiguousarray(u, dtype=np.float32)
    cdef float[:, ::1] v_mv = np.ascontiguousarray(v, dtype=np.float32)
    cdef float[:, ::1] out_mv = out_arr
    with nogil:
        _warp_loop(img_mv, u_mv, v_mv, out_mv)
    return out_arr


cdef void _median_loop(float[:, ::1] a, float[:, ::1] out, int radius) noexcept nogil:
    cdef Py_ssize_t h = a.shape[0]
    cdef Py_ssize_t w = a.shape[1]
    cdef int size = 2 * radius + 1
    cdef int n = size * size
    cdef float* buf = <float*> malloc(n * sizeof(float))
    cdef Py_ssize_t i, j, ii, jj
    cdef int di, dj, k, m
    cdef float val
    if buf == NULL:
        return
    for i in range(h):
        for j in range(w):
            k = 0
            for di in range(-radius, radius + 1):
                ii = i + di
                if ii < 0:
                    ii = 0
                elif ii >= h:
                    ii = h - 1
                for dj in range(-radius, radius + 1):
                    jj = j + dj
                    if jj < 0:
                        jj = 0
                    elif jj >= w:
                        jj = w - 1
                    # insertion sort as we go
                    val = a[ii, jj]
                    m = k
                    while m > 0 and buf[m - 1] > val:
                        buf[m] = buf[m - 1]
                        m -= 1
                    buf[m] = val
                    k += 1
            out[i, j] = buf[n // 2]
    free(buf)


def median_filter(a, radius):
    """Windowed median with edge replication; window is (2*radius+1) square."""
    a_arr = np.ascontiguousarray(a, dtype=np.float32)
    if radius <= 0:
        return a_arr.copy()
    out_arr = np.empty_like(a_arr)
    cdef float[:, ::1] a_mv = a_arr
    cdef float[:, ::1] out_mv = out_arr
    cdef int r = int(radius)
    with nogil:
        _median_loop(a_mv, out_mv, r)
    return out_arr


cdef double _primal_step(float[:, ::1] u, float[:, ::1] v1,
                         float[:, ::1] pu1, float[:, ::1] pu2,
                         float theta) noexcept nogil:
    """u <- v1 + theta * div(p); returns sum of squared updates."""
    cdef Py_ssize_t h = u.shape[0]
    cdef Py_ssize_t w = u.shape[1]
    cdef Py_ssize_t i, j
    cdef float div, old, new
    cdef double acc = 0.0
    for i in range(h):
        for j in range(w):
            div = 0.0
            if j == 0:
                div += pu1[i, 0]
            elif j == w - 1:
                div += -pu1[i, w - 2]
            else:
                div += pu1[i, j] - pu1[i, j - 1]
            if i == 0:
                div += pu2[0, j]
            elif i == h - 1:
                div += -pu2[h - 2, j]
            else:
                div += pu2[i, j] - pu2[i - 1, j]
            old = u[i, j]
            new = v1[i, j] + theta * div
            u[i, j] = new
            acc += (<double> (new - old)) ** 2
    return acc


cdef void _dual_step(float[:, ::1] u, float[:, ::1] p1, float[:, ::1] p2,
                     float tt) noexcept nogil:
    """p <- (p + tt * grad(u)) / (1 + tt * |grad(u)|), forward differences."""
    cdef Py_ssize_t h = u.shape[0]
    cdef Py_ssize_t w = u.shape[1]
    cdef Py_ssize_t i, j
    cdef float gx, gy, norm
    for i in range(h):
        for j in range(w):
            gx = u[i, j + 1] - u[i, j] if j < w - 1 else 0.0
            gy = u[i + 1, j] - u[i, j] if i < h - 1 else 0.0
            norm = 1.0 + tt * sqrtf(gx * gx + gy * gy)
            p1[i, j] = (p1[i, j] + tt * gx) / norm
            p2[i, j] = (p2[i, j] + tt * gy) / norm


cdef void _threshold_step(float[:, ::1] i1wx, float[:, ::1] i1wy,
                          float[:, ::1] grad2, float[:, ::1] rho_c,
                          float[:, ::1] u, float[:, ::1] v, float[:, ::1] w_illum,
                          float[:, ::1] v1, float[:, ::1] v2, float[:, ::1] v3,
                          float lt, float gamma, bint use_illum) noexcept nogil:
    cdef Py_ssize_t h = u.shape[0]
    cdef Py_ssize_t w = u.shape[1]
    cdef Py_ssize_t i, j
    cdef float rho, th, d, g2
    for i in range(h):
        for j in range(w):
            g2 = grad2[i, j]
            rho = rho_c[i, j] + i1wx[i, j] * u[i, j] + i1wy[i, j] * v[i, j]
            if use_illum:
                rho += gamma * w_illum[i, j]
            th = lt * g2
            if rho < -th:
                d = lt
            elif rho > th:
                d = -lt
            elif g2 > GRAD_EPS:
                d = -rho / g2
            else:
                d = 0.0
            v1[i, j] = u[i, j] + d * i1wx[i, j]
            v2[i, j] = v[i, j] + d * i1wy[i, j]
            if use_illum:
                v3[i, j] = w_illum[i, j] + d * gamma


def solve_warp(i0, i1w, i1wx, i1wy, u, v, w_illum, double lam, double theta,
               double tau, double epsilon, double gamma, int n_outer, int n_inner):
    """One warp of the TV-L1 fix-point alternation, updating u, v in place.

    See the NumPy fallback for the full contract; this is the compiled twin.
    """
    cdef float[:, ::1] i0v = i0
    cdef float[:, ::1] i1wv = i1w
    cdef float[:, ::1] ixv = i1wx
    cdef float[:, ::1] iyv = i1wy
    cdef float[:, ::1] uv = u
    cdef float[:, ::1] vv = v

    cdef Py_ssize_t h = i0v.shape[0]
    cdef Py_ssize_t w = i0v.shape[1]
    cdef bint use_illum = gamma > 0.0
    cdef float gammaf = <float> gamma
    cdef float lt = <float> (lam * theta)
    cdef float tt = <float> (tau / theta)
    cdef float thetaf = <float> theta
    cdef double eps2 = (<double> epsilon) ** 2 * h * w
    cdef int io, ii
    cdef Py_ssize_t i, j
    cdef double err

    cdef float[:, ::1] grad2 = np.empty((h, w), dtype=np.float32)
    cdef float[:, ::1] rho_c = np.empty((h, w), dtype=np.float32)
    cdef float[:, ::1] v1 = np.empty((h, w), dtype=np.float32)
    cdef float[:, ::1] v2 = np.empty((h, w), dtype=np.float32)
    cdef float[:, ::1] v3 = np.empty((h, w), dtype=np.float32)
    cdef float[:, ::1] pu1 = np.zeros((h, w), dtype=np.float32)
    cdef float[:, ::1] pu2 = np.zeros((h, w), dtype=np.float32)
    cdef float[:, ::1] pv1 = np.zeros((h, w), dtype=np.float32)
    cdef float[:, ::1] pv2 = np.zeros((h, w), dtype=np.float32)

    cdef float[:, ::1] wv
    cdef float[:, ::1] pw1
    cdef float[:, ::1] pw2
    if use_illum:
        wv = w_illum
        pw1 = np.zeros((h, w), dtype=np.float32)
        pw2 = np.zeros((h, w), dtype=np.float32)
    else:
        wv = v3   # placeholders, never read
        pw1 = v3
        pw2 = v3

    cdef bint converged = False
    with nogil:
        for i in range(h):
            for j in range(w):
                grad2[i, j] = ixv[i, j] * ixv[i, j] + iyv[i, j] * iyv[i, j]
                if use_illum:
                    grad2[i, j] += gammaf * gammaf
                rho_c[i, j] = (i1wv[i, j] - ixv[i, j] * uv[i, j]
                               - iyv[i, j] * vv[i, j] - i0v[i, j])
                if use_illum:
                    rho_c[i, j] -= gammaf * wv[i, j]

        for io in range(n_outer):
            _threshold_step(ixv, iyv, grad2, rho_c, uv, vv, wv, v1, v2, v3,
                            lt, gammaf, use_illum)
            for ii in range(n_inner):
                err = _primal_step(uv, v1, pu1, pu2, thetaf)
                err += _primal_step(vv, v2, pv1, pv2, thetaf)
                if use_illum:
                    _primal_step(wv, v3, pw1, pw2, thetaf)
                _dual_step(uv, pu1, pu2, tt)
                _dual_step(vv, pv1, pv2, tt)
                if use_illum:
                    _dual_step(wv, pw1, pw2, tt)
                if err < eps2:
                    converged = True
                    break
            if converged:
                break
