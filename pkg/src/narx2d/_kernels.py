"""Compiled inner loops for recursive model simulation."""

import numpy as np
from numba import njit


@njit(cache=True)
def simulate_terms(codes, theta, u, y, start, stop, max_lag, feedback, limit):
    """Evaluate a polynomial NARX model over ``[start, stop)``.

    ``codes`` is an ``(n_terms, degree)`` integer array: a positive entry ``j``
    is the factor ``y(k-j)``, a negative entry ``-j`` is ``u(k-j)`` and zero
    is padding. With ``feedback`` the output lags read the model's own
    predictions (free run), otherwise the measured ``y`` (one step ahead).

    Returns the prediction and the index (relative to ``start``) at which the
    magnitude first exceeded ``limit`` or became non-finite, or -1.
    """
    n = stop - start
    offset = start - max_lag
    buf = np.empty(stop - offset)
    for k in range(max_lag):
        buf[k] = y[offset + k]
    n_terms, degree = codes.shape
    for k in range(start, stop):
        acc = 0.0
        for i in range(n_terms):
            prod = 1.0
            first = True
            for j in range(degree):
                c = codes[i, j]
                if c == 0:
                    continue
                if c > 0:
                    if feedback:
                        f = buf[k - c - offset]
                    else:
                        f = y[k - c]
                else:
                    f = u[k + c]
                if first:
                    prod = f
                    first = False
                else:
                    prod = prod * f
            acc += theta[i] * prod
        buf[k - offset] = acc
        if not (abs(acc) <= limit):
            return buf[max_lag:max_lag + n], k - start
    return buf[max_lag:max_lag + n], -1
