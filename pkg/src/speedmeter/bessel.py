"""Modified Bessel function of the second kind, order one.

Power series for x <= 2; Steed/Temme continued fraction (CF2) above, which
converges to full double precision for every x > 2. Both branches are
vectorised over numpy arrays.
"""

import numpy as np

_EULER_GAMMA = 0.57721566490153286061
_EPS = 1e-16
_MAXIT = 10000


def _k1_series(x):
    # K1(x) = 1/x + ln(x/2) I1(x) - (x/4) sum_k [psi(k+1) + psi(k+2)] (x^2/4)^k / (k! (k+1)!)
    q = 0.25 * x * x
    term = np.ones_like(x)  # (x^2/4)^k / (k! (k+1)!)
    psi_k1 = -_EULER_GAMMA  # psi(k+1)
    psi_k2 = 1.0 - _EULER_GAMMA  # psi(k+2)
    i1_sum = np.zeros_like(x)
    psi_sum = np.zeros_like(x)
    for k in range(1, 40):
        i1_sum += term
        psi_sum += (psi_k1 + psi_k2) * term
        term = term * q / (k * (k + 1))
        psi_k1 += 1.0 / k
        psi_k2 += 1.0 / (k + 1)
        if np.all(term < _EPS * i1_sum):
            break
    i1 = 0.5 * x * i1_sum
    return 1.0 / x + np.log(0.5 * x) * i1 - 0.25 * x * psi_sum


def _k1_cf2(x):
    # Numerical Recipes bessik, CF2 branch with mu = 0.
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = -a1
    s = 1.0 + q * delh
    active = np.ones(x.shape, dtype=bool)
    for i in range(2, _MAXIT):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + np.where(active, delh, 0.0)
        dels = q * delh
        s = s + np.where(active, dels, 0.0)
        active &= np.abs(dels / s) >= _EPS
        if not active.any():
            break
    else:
        raise RuntimeError("K1 continued fraction did not converge")
    h = a1 * h
    k0 = np.sqrt(np.pi / (2.0 * x)) * np.exp(-x) / s
    return k0 * (x + 0.5 - h) / x


def k1(x):
    """K_1(x) for x > 0, elementwise."""
    arr = np.asarray(x, dtype=float)
    flat = np.atleast_1d(arr).ravel()
    if np.any(~(flat > 0)):
        raise ValueError("K1 requires x > 0")
    out = np.zeros_like(flat)
    small = flat <= 2.0
    big = (flat > 2.0) & (flat <= 745.0)  # K1 underflows beyond
    if small.any():
        out[small] = _k1_series(flat[small])
    if big.any():
        out[big] = _k1_cf2(flat[big])
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def x_k1(x):
    """|x| K_1(|x|), continuous at x = 0 where it equals 1."""
    arr = np.abs(np.asarray(x, dtype=float))
    flat = np.atleast_1d(arr).astype(float)
    out = np.ones_like(flat)
    pos = flat > 0
    out[pos] = flat[pos] * k1(flat[pos])
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)
