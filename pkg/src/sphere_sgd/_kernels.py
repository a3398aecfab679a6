"""Compiled inner loop for models whose gradient is w(v . x) * v.

``advance`` runs steps i0..i1-1 of a pre-drawn block in place and returns
early after any step that crosses ``next_th`` or ``stop_below`` or that
produced a non-finite norm. Weight kinds:

    0  student polynomial g (coeffs c, derivative coeffs d): 2 (g - y) g'
    1  relu student:  2 (relu(z) - y) 1{z > 0}
    2  abs student:   2 (|z| - y) sign(z)
    3  sigmoid student: 2 (s - y) s (1 - s)
    4  GLM linear: z - y      5  GLM logistic: s - y      6  GLM Poisson: e^z - y
    7  least squares regression: 2 (z - y)
    8  Gaussian mixture: -tanh(z + c[0])
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

KIND_POLY, KIND_RELU, KIND_ABS, KIND_SIGMOID = 0, 1, 2, 3
KIND_GLM_LINEAR, KIND_GLM_LOGISTIC, KIND_GLM_POISSON = 4, 5, 6
KIND_LINREG, KIND_MIXTURE = 7, 8


@njit(cache=True)
def _horner(c, z):
    acc = 0.0
    for i in range(c.size - 1, -1, -1):
        acc = acc * z + c[i]
    return acc


@njit(cache=True)
def _sigmoid(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@njit(cache=True)
def weight(kind, z, y, c, d):
    if kind == 0:
        return 2.0 * (_horner(c, z) - y) * _horner(d, z)
    if kind == 1:
        return 2.0 * (z - y) if z > 0.0 else 0.0
    if kind == 2:
        if z > 0.0:
            return 2.0 * (z - y)
        if z < 0.0:
            return -2.0 * (-z - y)
        return 0.0
    if kind == 3:
        sg = _sigmoid(z)
        return 2.0 * (sg - y) * sg * (1.0 - sg)
    if kind == 4:
        return z - y
    if kind == 5:
        return _sigmoid(z) - y
    if kind == 6:
        return math.exp(z) - y
    if kind == 7:
        return 2.0 * (z - y)
    return -math.tanh(z + c[0])


@njit(cache=True)
def advance(x, V, Y, i0, i1, s, kind, c, d, theta, e1, m, next_th, stop_below,
            diag, acc, phi_d):
    # acc = [drift_cum, martingale_cum, radial_cum, r_max, martingale_sup]
    n = x.size
    i = i0
    while i < i1:
        z = 0.0
        for j in range(n):
            z += V[i, j] * x[j]
        w = weight(kind, z, Y[i], c, d)
        cc = s * w
        a = 1.0 + cc * z
        r2 = 0.0
        for j in range(n):
            xt = a * x[j] - cc * V[i, j]
            x[j] = xt
            r2 += xt * xt
        i += 1
        if not (r2 < np.inf):
            return i, m, True
        r = math.sqrt(r2)
        inv = 1.0 / r
        for j in range(n):
            x[j] *= inv
        if e1:
            m_new = x[0]
        else:
            m_new = 0.0
            for j in range(n):
                m_new += x[j] * theta[j]
        if diag:
            if e1:
                vth = V[i - 1, 0]
            else:
                vth = 0.0
                for j in range(n):
                    vth += V[i - 1, j] * theta[j]
            gl_theta = w * (vth - z * m)
            dphi = -_horner(phi_d, m) * (1.0 - m * m)
            d_inc = -s * dphi
            mart_inc = s * (gl_theta - dphi)
            acc[0] += d_inc
            acc[1] += mart_inc
            acc[2] += (m_new - m) - d_inc + mart_inc
            if r > acc[3]:
                acc[3] = r
            if abs(acc[1]) > acc[4]:
                acc[4] = abs(acc[1])
        m = m_new
        if m >= next_th or m <= stop_below:
            return i, m, False
    return i, m, False
