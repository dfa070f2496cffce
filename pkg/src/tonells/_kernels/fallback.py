"""Pure-Python/numpy kernels, used when the compiled extension is absent.

Semantics match tonells._kernels._core exactly; only the inner-loop
realization differs (vectorized per-window dot products here, C loops
there). Floating-point results agree to roundoff-level reordering.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def _wrap(x):
    return x - TWO_PI * math.ceil((x - math.pi) / TWO_PI)


def run_tracker_chunk(y, state, counts, sin_table, cos_table,
                      j11, j12, j21, j22, weights, dpsi):
    """Advance the streaming tracker through a chunk of samples.

    Mutates ``state`` = [S, C, prev_psi, acc] and ``counts`` = [widx,
    wcount, have_prev] in place. Stops early when a block of N windows
    completes.

    Returns
    -------
    (consumed, emitted, omega_hat)
        Samples consumed from ``y``, whether a frequency estimate was
        emitted, and its value (0.0 when not emitted).
    """
    y = np.asarray(y, dtype=np.float64)
    n = sin_table.size
    n_windows = weights.size
    pos = 0
    total = y.size
    while pos < total:
        widx = int(counts[0])
        m = min(n - widx, total - pos)
        seg = y[pos:pos + m]
        state[0] += float(sin_table[widx:widx + m] @ seg)
        state[1] += float(cos_table[widx:widx + m] @ seg)
        counts[0] += m
        pos += m
        if counts[0] == n:
            counts[0] = 0
            b1 = j11 * state[0] + j12 * state[1]
            b2 = j21 * state[0] + j22 * state[1]
            state[0] = 0.0
            state[1] = 0.0
            k = int(counts[1])
            phi = math.atan2(b2, b1)
            psi = _wrap(phi - k * dpsi)
            if counts[2]:
                psi = state[2] + _wrap(psi - state[2])
            else:
                counts[2] = 1
            state[2] = psi
            state[3] += weights[k] * (psi + k * dpsi)
            counts[1] += 1
            if counts[1] == n_windows:
                omega = state[3]
                counts[1] = 0
                counts[2] = 0
                state[2] = 0.0
                state[3] = 0.0
                return pos, True, omega
    return pos, False, 0.0


def dpll_run(y, dt, omega_c, kp, ki, pd_scale, lp_alpha,
             lock_level, lock_threshold, theta0=0.0):
    """Second-order phase-locked loop over a full record.

    Multiplier phase detector against an internally generated quadrature
    oscillator, proportional-plus-integral loop filter, NCO integration.

    Returns
    -------
    (omega_out, locked)
        Instantaneous NCO frequency (rad/s) per sample and the boolean
        lock indicator per sample.
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    omega_out = np.empty(n)
    locked = np.zeros(n, dtype=np.uint8)
    theta = float(theta0)
    integ = 0.0
    ef = 0.0
    qf = 0.0
    for i in range(n):
        s = math.sin(theta)
        c = math.cos(theta)
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
        amp = math.hypot(ef, qf)
        if amp > lock_level and abs(math.atan2(ef, qf)) < lock_threshold:
            locked[i] = 1
    return omega_out, locked
