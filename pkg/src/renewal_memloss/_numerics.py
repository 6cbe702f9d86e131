"""Compensated-summation kernels (numba-compiled)."""

import numpy as np
from numba import njit


@njit(cache=True)
def kahan_cumsum(x):
    """Running sum with Neumaier compensation."""
    out = np.empty(x.shape[0])
    s = 0.0
    c = 0.0
    for i in range(x.shape[0]):
        v = x[i]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
        out[i] = s + c
    return out


@njit(cache=True)
def kahan_tailsum(x):
    """``out[i] = sum(x[i+1:])`` with Neumaier compensation; ``out[-1] = 0``."""
    n = x.shape[0]
    out = np.empty(n)
    s = 0.0
    c = 0.0
    for i in range(n - 1, -1, -1):
        out[i] = s + c
        v = x[i]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return out


@njit(cache=True)
def renewal_recursion(p, n_max):
    """``u_n = sum_{k=1}^n p_k u_{n-k}`` for ``n <= n_max`` with compensated inner sums."""
    u = np.empty(n_max + 1)
    u[0] = 1.0
    for n in range(1, n_max + 1):
        s = 0.0
        c = 0.0
        for k in range(1, n + 1):
            v = p[k] * u[n - k]
            t = s + v
            if abs(s) >= abs(v):
                c += (s - t) + v
            else:
                c += (v - t) + s
            s = t
        u[n] = s + c
    return u


@njit(cache=True)
def compensated_sum(x):
    s = 0.0
    c = 0.0
    for i in range(x.shape[0]):
        v = x[i]
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c
