"""Compiled stepping kernels for the reduced flow.

Every kernel advances the augmented state: the phase point ``y`` and the three
t-leg immersion integrals, whose integrands are evaluated at the same stages as
the flow so quadrature and trajectory share one order of accuracy.
"""

import math

import numpy as np
from numba import njit

MIDPOINT = 0
GAUSS4 = 1

OK = 0
NOT_CONVERGED = 1

_S3 = math.sqrt(3.0)
_A11, _A12 = 0.25, 0.25 - _S3 / 6.0
_A21, _A22 = 0.25 + _S3 / 6.0, 0.25
_C1, _C2 = 0.5 - _S3 / 6.0, 0.5 + _S3 / 6.0


@njit(cache=True)
def rhs(y, lam, h):
    c = 2.0 * h * (y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3])
    out = np.empty(4)
    out[0] = -lam * y[0] + c * y[2]
    out[1] = -lam * y[1] + c * y[3]
    out[2] = lam * y[2] - c * y[0]
    out[3] = lam * y[3] - c * y[1]
    return out


@njit(cache=True)
def rhs_jac(y, lam, h):
    c = 2.0 * h * (y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3])
    J = np.zeros((4, 4))
    J[0, 0] = -lam
    J[1, 1] = -lam
    J[2, 2] = lam
    J[3, 3] = lam
    J[0, 2] = c
    J[1, 3] = c
    J[2, 0] = -c
    J[3, 1] = -c
    v0, v1, v2, v3 = y[2], y[3], -y[0], -y[1]
    for j in range(4):
        g = 4.0 * h * y[j]
        J[0, j] += g * v0
        J[1, j] += g * v1
        J[2, j] += g * v2
        J[3, j] += g * v3
    return J


@njit(cache=True)
def quad_integrand(y):
    # x = 0 coefficients of dt in the immersion, X^1 mirrored
    p1, p2, q1, q2 = y[0], y[1], y[2], y[3]
    out = np.empty(3)
    out[0] = 4.0 * (q1 * q2 - p1 * p2)
    out[1] = 2.0 * (p1 * p1 - p2 * p2 - q1 * q1 + q2 * q2)
    out[2] = -4.0 * (p1 * q1 + p2 * q2)
    return out


@njit(cache=True)
def _norm(v):
    return math.sqrt(np.sum(v * v))


@njit(cache=True)
def step_midpoint(y, dt, lam, h, tol, max_iter):
    """Return ``(y_new, dquad, status, residual, iterations)``."""
    z = y + dt * rhs(y, lam, h)
    eye = np.eye(4)
    res = np.inf
    for it in range(max_iter + 1):
        m = 0.5 * (y + z)
        F = z - y - dt * rhs(m, lam, h)
        res = _norm(F)
        if res < tol:
            m = 0.5 * (y + z)
            return z, dt * quad_integrand(m), OK, res, it
        if it == max_iter:
            break
        JF = eye - 0.5 * dt * rhs_jac(m, lam, h)
        if abs(np.linalg.det(JF)) < 1e-12:
            z = z - 0.5 * F
        else:
            z = z - np.linalg.solve(JF, F)
    return z, np.zeros(3), NOT_CONVERGED, res, max_iter


@njit(cache=True)
def step_gauss4(y, dt, lam, h, tol, max_iter):
    """Two-stage Gauss-Legendre collocation, solved for the stage values by Newton."""
    f0 = rhs(y, lam, h)
    Y1 = y + _C1 * dt * f0
    Y2 = y + _C2 * dt * f0
    res = np.inf
    F = np.empty(8)
    JF = np.empty((8, 8))
    for it in range(max_iter + 1):
        k1 = rhs(Y1, lam, h)
        k2 = rhs(Y2, lam, h)
        F[:4] = Y1 - y - dt * (_A11 * k1 + _A12 * k2)
        F[4:] = Y2 - y - dt * (_A21 * k1 + _A22 * k2)
        res = _norm(F)
        if res < tol:
            y_new = y + 0.5 * dt * (k1 + k2)
            dq = 0.5 * dt * (quad_integrand(Y1) + quad_integrand(Y2))
            return y_new, dq, OK, res, it
        if it == max_iter:
            break
        J1 = rhs_jac(Y1, lam, h)
        J2 = rhs_jac(Y2, lam, h)
        for i in range(4):
            for j in range(4):
                d = 1.0 if i == j else 0.0
                JF[i, j] = d - dt * _A11 * J1[i, j]
                JF[i, j + 4] = -dt * _A12 * J2[i, j]
                JF[i + 4, j] = -dt * _A21 * J1[i, j]
                JF[i + 4, j + 4] = d - dt * _A22 * J2[i, j]
        if abs(np.linalg.det(JF)) < 1e-12:
            delta = 0.5 * F
        else:
            delta = np.linalg.solve(JF, F)
        Y1 = Y1 - delta[:4]
        Y2 = Y2 - delta[4:]
    return y.copy(), np.zeros(3), NOT_CONVERGED, res, max_iter


@njit(cache=True)
def step(y, dt, lam, h, tol, max_iter, method):
    if method == MIDPOINT:
        return step_midpoint(y, dt, lam, h, tol, max_iter)
    return step_gauss4(y, dt, lam, h, tol, max_iter)


@njit(cache=True)
def integrate(y0, dt, n_steps, stride, lam, h, tol, max_iter, method):
    """Fixed-step integration recording every ``stride``-th state.

    Returns ``(states, quads, status, failed_step, residual)``.
    """
    n_rec = n_steps // stride + 1
    states = np.empty((n_rec, 4))
    quads = np.zeros((n_rec, 3))
    y = y0.copy()
    q = np.zeros(3)
    comp = np.zeros(3)
    states[0] = y
    rec = 1
    for k in range(n_steps):
        y_new, dq, status, res, _ = step(y, dt, lam, h, tol, max_iter, method)
        if status != OK:
            return states[:rec], quads[:rec], status, k, res
        y = y_new
        # compensated sum: the accumulators grow linearly over long spans
        d = dq - comp
        t = q + d
        comp = (t - q) - d
        q = t
        if (k + 1) % stride == 0:
            states[rec] = y
            quads[rec] = q
            rec += 1
    return states[:rec], quads[:rec], OK, -1, 0.0


@njit(cache=True)
def advance(y0, duration, max_dt, lam, h, tol, max_iter, method):
    """Advance by a signed ``duration`` in equal substeps no longer than ``max_dt``."""
    n = int(math.ceil(abs(duration) / max_dt - 1e-12))
    y = y0.copy()
    q = np.zeros(3)
    if n == 0:
        return y, q, OK, 0.0
    dt = duration / n
    for _ in range(n):
        y_new, dq, status, res, _it = step(y, dt, lam, h, tol, max_iter, method)
        if status != OK:
            return y, q, status, res
        y = y_new
        q = q + dq
    return y, q, OK, 0.0
