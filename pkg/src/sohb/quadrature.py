"""Scalar quadrature used by the distribution and constants code.

Two independent routes are provided on purpose: an adaptive Simpson rule
and a fixed-order Gauss-Legendre rule. Quantities that feed the macroscopic
constants are computed with both and cross-checked in the test suite.
"""

import numpy as np

#: Absolute error floor: intervals whose contribution is below this are accepted.
ABS_FLOOR = 1e-14


def adaptive_simpson(f, a, b, rel_tol=1e-10, abs_floor=ABS_FLOOR, max_depth=48):
    """Adaptive Simpson integration of ``f`` on [a, b].

    The classic halving scheme with Richardson correction: an interval is
    accepted when |S_fine - S_coarse| / 15 is below the local tolerance,
    where the local tolerance is the relative target scaled to the interval
    and floored at ``abs_floor``.

    Args:
        f: scalar function (numpy-evaluable).
        a: lower limit.
        b: upper limit.
        rel_tol: relative tolerance on the whole integral.
        abs_floor: absolute floor for the per-interval tolerance.
        max_depth: maximal bisection depth before an interval is accepted
            as-is (prevents runaway recursion on kinks).

    Returns:
        Approximation of the integral.
    """
    a = float(a)
    b = float(b)
    if a == b:
        return 0.0

    fa = float(f(a))
    fb = float(f(b))
    m = 0.5 * (a + b)
    fm = float(f(m))
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    # Prime the global scale with a coarse estimate; refined below.
    scale = max(abs(whole), abs_floor)

    def recurse(x0, x2, f0, f1, f2, s, depth):
        x1 = 0.5 * (x0 + x2)
        lm = 0.5 * (x0 + x1)
        rm = 0.5 * (x1 + x2)
        flm = float(f(lm))
        frm = float(f(rm))
        left = (x1 - x0) / 6.0 * (f0 + 4.0 * flm + f1)
        right = (x2 - x1) / 6.0 * (f1 + 4.0 * frm + f2)
        err = (left + right - s) / 15.0
        tol = max(rel_tol * scale * (x2 - x0) / (b - a), abs_floor)
        if abs(err) <= tol or depth >= max_depth:
            return left + right + err
        return recurse(x0, x1, f0, flm, f1, left, depth + 1) + recurse(
            x1, x2, f1, frm, f2, right, depth + 1
        )

    return recurse(a, b, fa, fm, fb, whole, 0)


_GL_CACHE = {}


def gauss_legendre(f, a, b, n=512):
    """Fixed-order Gauss-Legendre integration of ``f`` on [a, b].

    ``f`` must accept a numpy array of nodes. Spectrally accurate for
    analytic integrands; used as the independent cross-check of
    :func:`adaptive_simpson`.
    """
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    x, w = _GL_CACHE[n]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    return half * float(np.sum(w * np.asarray(f(mid + half * x), dtype=np.float64)))
