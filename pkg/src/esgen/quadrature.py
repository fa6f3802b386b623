"""Adaptive Simpson quadrature and Richardson extrapolation helpers."""

import math

from .errors import NumericError


def adaptive_simpson(f, a, b, tol=1e-10, max_depth=48, rel_tol=1e-13):
    """Integrate ``f`` over ``[a, b]`` by adaptive Simpson with Richardson correction.

    The local acceptance test is ``|S_left + S_right - S_whole| <= 15 * tol_local``
    where ``tol_local`` mixes the absolute ``tol`` with ``rel_tol`` times the
    magnitude of the current estimate.  Raises :class:`NumericError` naming the
    sub-interval where the recursion depth ran out.
    """
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b = b, a
        sign = -1.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    if not all(map(math.isfinite, (fa, fm, fb))):
        raise NumericError(f"non-finite integrand on [{a!r}, {b!r}]")
    return sign * _simpson_rec(f, a, b, fa, fm, fb, whole, tol, rel_tol, max_depth)


def _simpson_rec(f, a, b, fa, fm, fb, whole, tol, rel_tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    if not (math.isfinite(flm) and math.isfinite(frm)):
        raise NumericError(f"non-finite integrand on [{a!r}, {b!r}]")
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    local = max(tol, rel_tol * abs(left + right))
    if abs(delta) <= 15.0 * local:
        return left + right + delta / 15.0
    if depth <= 0:
        raise NumericError(f"adaptive Simpson did not converge on [{a!r}, {b!r}]")
    return (_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, rel_tol, depth - 1)
            + _simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, rel_tol, depth - 1))


def richardson_limit(g, h0, levels=5):
    """Estimate ``lim_{h->0} g(h)`` from ``g(h0 / 2**j)`` by Neville extrapolation in h."""
    hs = [h0 / 2.0 ** j for j in range(levels)]
    table = [g(h) for h in hs]
    for j in range(1, levels):
        for i in range(levels - 1, j - 1, -1):
            table[i] = (hs[i - j] * table[i] - hs[i] * table[i - 1]) / (hs[i - j] - hs[i])
    return table[-1]


def five_point_derivative(f, z, h=None):
    """Fourth-order central difference with step ``1e-5 * max(1, |z|)``."""
    if h is None:
        h = 1e-5 * max(1.0, abs(z))
    return (f(z - 2 * h) - 8 * f(z - h) + 8 * f(z + h) - f(z + 2 * h)) / (12 * h)
