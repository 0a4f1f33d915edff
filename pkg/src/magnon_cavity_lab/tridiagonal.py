"""Eigenvalues of real symmetric tridiagonal matrices by implicit-shift QL."""
from __future__ import annotations

import numpy as np
from numba import njit

from .errors import ConvergenceError

MAX_SWEEPS_PER_EIGENVALUE = 60


@njit(cache=True)
def _tql(d, e, max_iter):
    # d: diagonal (n), e: sub-diagonal shifted so e[i] couples i and i+1, e[n-1] = 0.
    # Returns 0 on success, otherwise 1 + index of the eigenvalue that stalled.
    n = d.shape[0]
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= 2.220446049250313e-16 * dd:
                    break
                m += 1
            if m == l:
                break
            if it == max_iter:
                return l + 1
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + (r if g >= 0.0 else -r))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return 0


def tridiagonal_eigenvalues(diag, offdiag, max_sweeps: int = MAX_SWEEPS_PER_EIGENVALUE) -> np.ndarray:
    """Ascending eigenvalues of the symmetric tridiagonal matrix (diag, offdiag).

    Raises
    ------
    ConvergenceError
        If an eigenvalue needs more than ``max_sweeps`` QL sweeps.
    """
    d = np.array(diag, dtype=np.float64)
    n = d.shape[0]
    if n == 0:
        raise ValueError("empty matrix")
    off = np.asarray(offdiag, dtype=np.float64)
    if off.shape != (n - 1,):
        raise ValueError("offdiag must have length len(diag) - 1")
    e = np.zeros(n, dtype=np.float64)
    e[: n - 1] = off
    # power-of-two rescaling to O(1) magnitude is exact and keeps hypot away from overflow
    peak = max(np.max(np.abs(d)), np.max(np.abs(e)))
    if peak == 0.0:
        return d
    exponent = int(np.frexp(peak)[1])
    d = np.ldexp(d, -exponent)
    e = np.ldexp(e, -exponent)
    status = _tql(d, e, max_sweeps)
    if status:
        raise ConvergenceError(f"QL iteration stalled on eigenvalue {status - 1} after {max_sweeps} sweeps")
    d = np.ldexp(d, exponent)
    d.sort()
    return d
