"""Dormand-Prince 5(4) integrator specialised to the carrier-resolved equations.

The right-hand side is

    da_j/dt = -(i/hbar) f(t) e^{i E_j t/hbar} sum_k d_jk e^{-i E_k t/hbar} a_k,
    f(t)    = sum_p V_p cos(w_p t),

which holds because every carrier shares the same spatial profile. Steps are
shortened to land exactly on the requested output times, so no interpolant
error enters the samples.
"""

import numpy as np
from numba import njit

# Butcher tableau (Dormand & Prince 1980)
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_MAXSTEPS = 2


@njit(cache=True, nogil=True)
def _rhs(t, y, energies, dmat, amps, carriers, hbar, t_on, t_off, rot, out):
    f = 0.0
    if t_on <= t <= t_off:
        for p in range(amps.shape[0]):
            f += amps[p] * np.cos(carriers[p] * t)
    n = y.shape[0]
    if f == 0.0:
        for j in range(n):
            out[j] = 0.0
        return
    for k in range(n):
        ph = energies[k] * t / hbar
        rot[k] = complex(np.cos(ph), -np.sin(ph)) * y[k]
    scale = -1j * f / hbar
    for j in range(n):
        acc = 0.0 + 0.0j
        for k in range(n):
            acc += dmat[j, k] * rot[k]
        ph = energies[j] * t / hbar
        out[j] = scale * complex(np.cos(ph), np.sin(ph)) * acc


@njit(cache=True, nogil=True)
def integrate(y0, t_out, energies, dmat, amps, carriers, hbar, t_on, t_off, tol, h_max, max_steps):
    """Integrate from ``t_out[0]`` through every ``t_out[i]`` (monotone, either direction).

    Returns ``(samples, status, fail_time, n_accept, n_reject, n_eval)``.
    """
    n = y0.shape[0]
    ns = t_out.shape[0]
    samples = np.empty((ns, n), dtype=np.complex128)
    samples[0, :] = y0
    y = y0.copy()
    t = t_out[0]
    direction = 1.0 if t_out[ns - 1] >= t_out[0] else -1.0

    k1 = np.empty(n, dtype=np.complex128)
    k2 = np.empty_like(k1)
    k3 = np.empty_like(k1)
    k4 = np.empty_like(k1)
    k5 = np.empty_like(k1)
    k6 = np.empty_like(k1)
    k7 = np.empty_like(k1)
    tmp = np.empty_like(k1)
    ynew = np.empty_like(k1)
    rot = np.empty_like(k1)

    _rhs(t, y, energies, dmat, amps, carriers, hbar, t_on, t_off, rot, k1)
    n_eval = 1
    n_accept = 0
    n_reject = 0
    span = abs(t_out[ns - 1] - t_out[0])
    h = min(h_max, 0.01 * span) if span > 0 else h_max

    for i in range(1, ns):
        t_next = t_out[i]
        while direction * (t_next - t) > 0:
            if n_accept + n_reject >= max_steps:
                return samples, STATUS_MAXSTEPS, t, n_accept, n_reject, n_eval
            remaining = abs(t_next - t)
            last = h >= remaining
            hs = remaining if last else h
            if hs < 1e-14 * max(1.0, abs(t)):
                return samples, STATUS_UNDERFLOW, t, n_accept, n_reject, n_eval
            dt = direction * hs

            for j in range(n):
                tmp[j] = y[j] + dt * A21 * k1[j]
            _rhs(t + C2 * dt, tmp, energies, dmat, amps, carriers, hbar, t_on, t_off, rot, k2)
            for j in range(n):
                tmp[j] = y[j] + dt * (A31 * k1[j] + A32 * k2[j])
            _rhs(t + C3 * dt, tmp, energies, dmat, amps, carriers, hbar, t_on, t_off, rot, k3)
            for j in range(n):
                tmp[j] = y[j] + dt * (A41 * k1[j] + A42 * k2[j] + A43 * k3[j])
            _rhs(t + C4 * dt, tmp, energies, dmat, amps, carriers, hbar, t_on, t_off, rot, k4)
            for j in range(n):
                tmp[j] = y[j] + dt * (A51 * k1[j] + A52 * k2[j] + A53 * k3[j] + A54 * k4[j])
            _rhs(t + C5 * dt, tmp, energies, dmat, amps, carriers, hbar, t_on, t_off, rot, k5)
            for j in range(n):
                tmp[j] = y[j] + dt * (
                    A61 * k1[j] + A62 * k2[j] + A63 * k3[j] + A64 * k4[j] + A65 * k5[j]
                )
            _rhs(t + dt, tmp, energies, dmat, amps, carriers, hbar, t_on, t_off, rot, k6)
            for j in range(n):
                ynew[j] = y[j] + dt * (
                    B1 * k1[j] + B3 * k3[j] + B4 * k4[j] + B5 * k5[j] + B6 * k6[j]
                )
            _rhs(t + dt, ynew, energies, dmat, amps, carriers, hbar, t_on, t_off, rot, k7)
            n_eval += 6

            err = 0.0
            for j in range(n):
                e = abs(
                    dt
                    * (E1 * k1[j] + E3 * k3[j] + E4 * k4[j] + E5 * k5[j] + E6 * k6[j] + E7 * k7[j])
                )
                if e > err:
                    err = e
            err /= tol

            if err <= 1.0:
                t = t_next if last else t + dt
                for j in range(n):
                    y[j] = ynew[j]
                    k1[j] = k7[j]
                n_accept += 1
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                # a step clipped to hit a sample says nothing about the natural size
                if not last:
                    h = min(h_max, hs * fac)
            else:
                n_reject += 1
                h = hs * max(0.2, 0.9 * err ** -0.2)
        samples[i, :] = y
    return samples, STATUS_OK, t, n_accept, n_reject, n_eval
