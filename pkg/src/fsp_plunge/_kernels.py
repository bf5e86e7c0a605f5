"""Compiled RK4 forward pass and its discrete adjoint for the neural thermal model.

Parameters arrive as the flat 63-vector
``[log C, log h, W_hidden (15x2 row-major), b_hidden, w_out, b_out]``.
Powers arrive pre-evaluated (and clamped) at the three distinct RK4 stage
times of every step: ``pstage[i] = (P(t_i), P(t_i + dt/2), P(t_i + dt))``.
"""
import math

import numpy as np
from numba import njit

DIVERGENCE_LIMIT = 1.0e5
# output logit is clipped here so that eta stays strictly inside (0, 1) in
# binary64 (sigmoid(37) already rounds to 1.0); the clip has zero derivative
OUT_LOGIT_MAX = 36.0


@njit(cache=True, error_model="numpy")
def _sig(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(cache=True, error_model="numpy")
def rhs(theta, t_sink, s_t, s_p, T, P):
    H = (theta.shape[0] - 3) // 4
    x0 = T / s_t
    x1 = P / s_p
    o = theta[2 + 4 * H]
    for j in range(H):
        z = theta[2 + 2 * j] * x0 + theta[3 + 2 * j] * x1 + theta[2 + 2 * H + j]
        o += theta[2 + 3 * H + j] * _sig(z)
    eta = _sig(min(max(o, -OUT_LOGIT_MAX), OUT_LOGIT_MAX))
    return (eta * P - math.exp(theta[1]) * (T - t_sink)) / math.exp(theta[0])


@njit(cache=True, error_model="numpy")
def rhs_vjp(theta, t_sink, s_t, s_p, T, P, g, gtheta, want_theta):
    """Accumulate g * df/dtheta into gtheta; return (g * df/dT, g * df/dP)."""
    H = (theta.shape[0] - 3) // 4
    C = math.exp(theta[0])
    h = math.exp(theta[1])
    x0 = T / s_t
    x1 = P / s_p
    a = np.empty(H)
    o = theta[2 + 4 * H]
    for j in range(H):
        z = theta[2 + 2 * j] * x0 + theta[3 + 2 * j] * x1 + theta[2 + 2 * H + j]
        a[j] = _sig(z)
        o += theta[2 + 3 * H + j] * a[j]
    clipped = abs(o) > OUT_LOGIT_MAX
    eta = _sig(min(max(o, -OUT_LOGIT_MAX), OUT_LOGIT_MAX))
    f = (eta * P - h * (T - t_sink)) / C
    s = 0.0 if clipped else eta * (1.0 - eta)
    ge = g * P / C * s  # d(g f)/d(output pre-activation)
    deta_dx0 = 0.0
    deta_dx1 = 0.0
    if want_theta:
        gtheta[0] += -g * f
        gtheta[1] += -g * h * (T - t_sink) / C
        gtheta[2 + 4 * H] += ge
    for j in range(H):
        w = theta[2 + 3 * H + j]
        da = w * a[j] * (1.0 - a[j])
        deta_dx0 += da * theta[2 + 2 * j]
        deta_dx1 += da * theta[3 + 2 * j]
        if want_theta:
            gz = ge * da
            gtheta[2 + 3 * H + j] += ge * a[j]
            gtheta[2 + 2 * H + j] += gz
            gtheta[2 + 2 * j] += gz * x0
            gtheta[3 + 2 * j] += gz * x1
    deta_dT = s * deta_dx0 / s_t
    deta_dP = s * deta_dx1 / s_p
    fT = (P * deta_dT - h) / C
    fP = (eta + P * deta_dP) / C
    return g * fT, g * fP


@njit(cache=True, error_model="numpy")
def rk4_forward(theta, t_sink, s_t, s_p, pstage, T0, dt):
    """Returns (temperatures[n+1], stage states[n, 4], failing step or -1)."""
    n = pstage.shape[0]
    T = np.empty(n + 1)
    Y = np.empty((n, 4))
    T[0] = T0
    half = 0.5 * dt
    for i in range(n):
        y1 = T[i]
        k1 = rhs(theta, t_sink, s_t, s_p, y1, pstage[i, 0])
        y2 = y1 + half * k1
        k2 = rhs(theta, t_sink, s_t, s_p, y2, pstage[i, 1])
        y3 = y1 + half * k2
        k3 = rhs(theta, t_sink, s_t, s_p, y3, pstage[i, 1])
        y4 = y1 + dt * k3
        k4 = rhs(theta, t_sink, s_t, s_p, y4, pstage[i, 2])
        Y[i, 0] = y1
        Y[i, 1] = y2
        Y[i, 2] = y3
        Y[i, 3] = y4
        T[i + 1] = y1 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        v = T[i + 1]
        if not (abs(v) <= DIVERGENCE_LIMIT) or not (abs(y4) <= DIVERGENCE_LIMIT):
            return T, Y, i
    return T, Y, -1


@njit(cache=True, error_model="numpy")
def rk4_backward(theta, t_sink, s_t, s_p, pstage, Y, dt, dL_dT, want_theta):
    """Reverse sweep through the unrolled RK4 steps.

    ``dL_dT[k]`` is the direct sensitivity of the loss to sample k.  Returns
    (dL/dtheta, dL/dpstage, dL/dT0).
    """
    n = pstage.shape[0]
    gtheta = np.zeros(theta.shape[0])
    gP = np.zeros((n, 3))
    lam = dL_dT[n]
    half = 0.5 * dt
    for i in range(n - 1, -1, -1):
        gk1 = lam * dt / 6.0
        gk2 = lam * dt / 3.0
        gk3 = lam * dt / 3.0
        gk4 = lam * dt / 6.0
        Tbar = lam
        gy, gp = rhs_vjp(theta, t_sink, s_t, s_p, Y[i, 3], pstage[i, 2], gk4, gtheta, want_theta)
        gP[i, 2] += gp
        Tbar += gy
        gk3 += gy * dt
        gy, gp = rhs_vjp(theta, t_sink, s_t, s_p, Y[i, 2], pstage[i, 1], gk3, gtheta, want_theta)
        gP[i, 1] += gp
        Tbar += gy
        gk2 += gy * half
        gy, gp = rhs_vjp(theta, t_sink, s_t, s_p, Y[i, 1], pstage[i, 1], gk2, gtheta, want_theta)
        gP[i, 1] += gp
        Tbar += gy
        gk1 += gy * half
        gy, gp = rhs_vjp(theta, t_sink, s_t, s_p, Y[i, 0], pstage[i, 0], gk1, gtheta, want_theta)
        gP[i, 0] += gp
        Tbar += gy
        lam = Tbar + dL_dT[i]
    return gtheta, gP, lam
