# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot-loop kernels: streaming tracker accumulation and the DPLL.

Mirrors tonells._kernels.fallback; see that module for the contract.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, ceil, cos, fabs, hypot, sin

cnp.import_array()

cdef double TWO_PI = 6.283185307179586476925287
cdef double PI = 3.141592653589793238462643


cdef inline double _wrap(double x) nogil:
    return x - TWO_PI * ceil((x - PI) / TWO_PI)


def run_tracker_chunk(double[::1] y, double[::1] state, long long[::1] counts,
                      double[::1] sin_table, double[::1] cos_table,
                      double j11, double j12, double j21, double j22,
                      double[::1] weights, double dpsi):
    cdef Py_ssize_t n = sin_table.shape[0]
    cdef Py_ssize_t n_windows = weights.shape[0]
    cdef Py_ssize_t total = y.shape[0]
    cdef Py_ssize_t pos = 0
    cdef Py_ssize_t widx = counts[0]
    cdef Py_ssize_t wcount = counts[1]
    cdef bint have_prev = counts[2] != 0
    cdef double s_acc = state[0]
    cdef double c_acc = state[1]
    cdef double prev = state[2]
    cdef double omega_acc = state[3]
    cdef double b1, b2, phi, psi, omega, v

    while pos < total:
        v = y[pos]
        s_acc += sin_table[widx] * v
        c_acc += cos_table[widx] * v
        widx += 1
        pos += 1
        if widx == n:
            widx = 0
            b1 = j11 * s_acc + j12 * c_acc
            b2 = j21 * s_acc + j22 * c_acc
            s_acc = 0.0
            c_acc = 0.0
            phi = atan2(b2, b1)
            psi = _wrap(phi - wcount * dpsi)
            if have_prev:
                psi = prev + _wrap(psi - prev)
            else:
                have_prev = True
            prev = psi
            omega_acc += weights[wcount] * (psi + wcount * dpsi)
            wcount += 1
            if wcount == n_windows:
                omega = omega_acc
                counts[0] = 0
                counts[1] = 0
                counts[2] = 0
                state[0] = 0.0
                state[1] = 0.0
                state[2] = 0.0
                state[3] = 0.0
                return pos, True, omega

    counts[0] = widx
    counts[1] = wcount
    counts[2] = 1 if have_prev else 0
    state[0] = s_acc
    state[1] = c_acc
    state[2] = prev
    state[3] = omega_acc
    return pos, False, 0.0


def dpll_run(double[::1] y, double dt, double omega_c, double kp, double ki,
             double pd_scale, double lp_alpha, double lock_level,
             double lock_threshold, double theta0=0.0):
    cdef Py_ssize_t n = y.shape[0]
    omega_np = np.empty(n, dtype=np.float64)
    locked_np = np.zeros(n, dtype=np.uint8)
    cdef double[::1] omega_out = omega_np
    cdef unsigned char[::1] locked = locked_np
    cdef double theta = theta0
    cdef double integ = 0.0
    cdef double ef = 0.0
    cdef double qf = 0.0
    cdef double s, c, e, qd, v, w, amp
    cdef Py_ssize_t i

    for i in range(n):
        s = sin(theta)
        c = cos(theta)
        e = y[i] * c * pd_scale
        qd = y[i] * s * pd_scale
        integ += ki * e * dt
        v = kp * e + integ
        w = omega_c + v
        theta += w * dt
        if theta > TWO_PI:
            theta -= TWO_PI
        elif theta < -TWO_PI:
            theta += TWO_PI
        ef += lp_alpha * (e - ef)
        qf += lp_alpha * (qd - qf)
        omega_out[i] = w
        amp = hypot(ef, qf)
        if amp > lock_level and fabs(atan2(ef, qf)) < lock_threshold:
            locked[i] = 1
    return omega_np, locked_np
