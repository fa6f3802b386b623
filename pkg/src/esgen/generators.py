"""Generating vector-field triples (F0, F1, F2) for extremum seeking.

A pair (F1, F2) of scalar functions of the shifted cost value z produces the
averaged drift ``-beta21 * grad J * F0(z)`` exactly when

    F2 F1' - F1 F2' = F0,

whose solutions are ``F2 = -F1 * int F0 / F1**2 dz``.  The integration constant
enters as an additive multiple of F1 (``GeneratorPair.gauge``).
"""

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DomainError, NumericError
from .quadrature import adaptive_simpson, five_point_derivative, richardson_limit

TOL_PFAFF_ANALYTIC = 1e-10
TOL_PFAFF_FD = 1e-6
TOL_QUAD = 1e-10
SINGULAR_GAP = 1e-4


@dataclass(frozen=True)
class A4Bounds:
    """Growth exponents and bounds of a vanishing generator relative to J~ = J - J*."""

    m2: float
    alpha1: float
    alpha2: float
    M: float
    H: Optional[float] = None

    @property
    def m3(self):
        return 0.5 * (self.m2 + 1.0)

    def m4(self, m1):
        return 1.5 * (1.0 + self.m2) - 1.0 / m1

    def m_tilde(self, m1):
        return 1.0 + self.m2 - 1.0 / m1


@dataclass(frozen=True)
class GeneratorPair:
    name: str
    f0: Callable
    f1: Callable
    f2: Callable
    df1: Optional[Callable] = None
    df2: Optional[Callable] = None
    singular_points: tuple = ()
    a4: Optional[A4Bounds] = None
    vanishing_at_min: bool = False
    domain: tuple = (-math.inf, math.inf)
    params: tuple = ()
    both: Optional[Callable] = None

    def values(self, z):
        """(F1(z), F2(z)) at a scalar z, sharing work between the two when the family allows it."""
        if self.both is not None:
            return self.both(z)
        return self.f1(z), self.f2(z)

    @property
    def analytic(self):
        return self.df1 is not None and self.df2 is not None

    def d1(self, z):
        return self.df1(z) if self.df1 is not None else _fd(self.f1, z)

    def d2(self, z):
        return self.df2(z) if self.df2 is not None else _fd(self.f2, z)

    def gauge(self, c):
        """Same F0 with F2 replaced by F2 + c F1."""
        f1, f2, df1, df2 = self.f1, self.f2, self.df1, self.df2
        new_df2 = None
        if df1 is not None and df2 is not None:
            new_df2 = lambda z: df2(z) + c * df1(z)  # noqa: E731
        return replace(self, name=f"{self.name}+{c:g}F1", f2=lambda z: f2(z) + c * f1(z),
                       df2=new_df2, both=None)


def _fd(f, z):
    if isinstance(z, (int, float)):
        return five_point_derivative(f, float(z))
    z = np.asarray(z, dtype=float)
    h = 1e-5 * np.maximum(1.0, np.abs(z))
    return (f(z - 2 * h) - 8 * f(z - h) + 8 * f(z + h) - f(z + 2 * h)) / (12 * h)


def _dual(fn, positive_only=False, at_zero=0.0):
    """Lift ``fn(z, xp)`` to scalars (math) and arrays (numpy).

    With ``positive_only`` the value for z <= 0 is ``at_zero``; this is the
    convention that the field is switched off at the minimum.
    """
    def f(z):
        if isinstance(z, (int, float)):
            z = float(z)
            if positive_only and z <= 0.0:
                return at_zero
            return fn(z, math)
        z = np.asarray(z, dtype=float)
        if not positive_only:
            with np.errstate(all="ignore"):
                return np.broadcast_to(fn(z, np), z.shape).astype(float)
        out = np.full(z.shape, at_zero, dtype=float)
        pos = z > 0
        with np.errstate(all="ignore"):
            out[pos] = fn(z[pos], np)
        return out
    return f


def _const(c):
    return _dual(lambda z, xp: c + 0.0 * z)


# -- builtin families -------------------------------------------------------

def _classic(params):
    return GeneratorPair(
        name="classic", f0=_const(1.0), f1=_dual(lambda z, xp: z), f2=_const(1.0),
        df1=_const(1.0), df2=_const(0.0))


def _exponential(params):
    return GeneratorPair(
        name="exponential", f0=_const(1.0),
        f1=_dual(lambda z, xp: 0.5 * xp.exp(z)), f2=_dual(lambda z, xp: xp.exp(-z)),
        df1=_dual(lambda z, xp: 0.5 * xp.exp(z)), df2=_dual(lambda z, xp: -xp.exp(-z)))


def _bounded(params):
    return GeneratorPair(
        name="bounded", f0=_const(1.0),
        f1=_dual(lambda z, xp: xp.sin(z)), f2=_dual(lambda z, xp: xp.cos(z)),
        df1=_dual(lambda z, xp: xp.cos(z)), df2=_dual(lambda z, xp: -xp.sin(z)))


def _power(params):
    alpha, k, r, m = (list(params) + [1.0, 1.0, 0.0, 1.0][len(params):])[:4]
    if not (alpha > 0 and k > 0 and 0 <= r < 1 and m > 0):
        raise ConfigError(f"power family needs alpha, k > 0, r in [0, 1), m > 0; got {params}")
    p1, p2, p0 = r / (2 * m), (2 - r) / (2 * m), (1 - m) / m
    c2 = -k / (1 - r)
    c0 = alpha * k / m
    # continuous limits at z = 0
    f1_zero = alpha if p1 == 0 else 0.0
    f0_zero = c0 if p0 == 0 else (0.0 if p0 > 0 else math.inf)
    return GeneratorPair(
        name="power", params=(alpha, k, r, m), domain=(0.0, math.inf),
        f0=_dual(lambda z, xp: c0 * z**p0, True, f0_zero),
        f1=_dual(lambda z, xp: alpha * z**p1, True, f1_zero),
        f2=_dual(lambda z, xp: c2 * z**p2, True, 0.0),
        df1=_dual(lambda z, xp: alpha * p1 * z ** (p1 - 1), True, 0.0),
        df2=_dual(lambda z, xp: c2 * p2 * z ** (p2 - 1), True, 0.0),
        vanishing_at_min=p1 > 0,
    )


def _sd17(params):
    return GeneratorPair(
        name="sd17", domain=(0.0, math.inf), vanishing_at_min=True,
        a4=A4Bounds(m2=0.0, alpha1=1.0, alpha2=1.0, M=1.0),
        f0=_const(1.0), both=_sd17_both,
        f1=_dual(lambda z, xp: xp.sqrt(z) * xp.sin(xp.log(z)), True),
        f2=_dual(lambda z, xp: xp.sqrt(z) * xp.cos(xp.log(z)), True),
        df1=_dual(lambda z, xp: (0.5 * xp.sin(xp.log(z)) + xp.cos(xp.log(z))) / xp.sqrt(z), True),
        df2=_dual(lambda z, xp: (0.5 * xp.cos(xp.log(z)) - xp.sin(xp.log(z))) / xp.sqrt(z), True),
    )


def _log_expm1(z, xp):
    # log(e^z - 1) without cancellation for small z or overflow for large z
    if xp is math:
        return math.log(math.expm1(z)) if z < 30.0 else z + math.log1p(-math.exp(-z))
    return np.where(z < 30.0, np.log(np.expm1(np.minimum(z, 30.0))),
                    z + np.log1p(-np.exp(-z)))


def _bv_parts(z, xp):
    q = xp.exp(-z)
    phi1 = -xp.expm1(-z) * q / (1.0 + q)
    dphi1 = q * (-1.0 + 2.0 * q + q * q) / (1.0 + q) ** 2
    phi2 = xp.exp(z) + 2.0 * _log_expm1(z, xp)
    dphi2 = xp.exp(z) * (1.0 + q) / (-xp.expm1(-z))
    return phi1, dphi1, phi2, dphi2


def _bv_f1(z, xp):
    phi1, _, phi2, _ = _bv_parts(z, xp)
    return xp.sqrt(phi1) * xp.sin(phi2)


def _bv_f2(z, xp):
    phi1, _, phi2, _ = _bv_parts(z, xp)
    return xp.sqrt(phi1) * xp.cos(phi2)


def _bv_df1(z, xp):
    phi1, dphi1, phi2, dphi2 = _bv_parts(z, xp)
    s = xp.sqrt(phi1)
    return dphi1 / (2.0 * s) * xp.sin(phi2) + s * xp.cos(phi2) * dphi2


def _bv_df2(z, xp):
    phi1, dphi1, phi2, dphi2 = _bv_parts(z, xp)
    s = xp.sqrt(phi1)
    return dphi1 / (2.0 * s) * xp.cos(phi2) - s * xp.sin(phi2) * dphi2


def _bv_both(z):
    if z <= 0.0:
        return 0.0, 0.0
    q = math.exp(-z)
    s = math.sqrt(-math.expm1(-z) * q / (1.0 + q))
    phi2 = 1.0 / q + 2.0 * _log_expm1(z, math)
    return s * math.sin(phi2), s * math.cos(phi2)


def _sd17_both(z):
    if z <= 0.0:
        return 0.0, 0.0
    s, lz = math.sqrt(z), math.log(z)
    return s * math.sin(lz), s * math.cos(lz)


def _bounded_vanishing(params):
    return GeneratorPair(
        name="bounded_vanishing", domain=(0.0, math.inf), vanishing_at_min=True,
        a4=A4Bounds(m2=0.0, alpha1=1.0, alpha2=1.0, M=math.sqrt(0.5)),
        f0=_const(1.0),
        f1=_dual(_bv_f1, True), f2=_dual(_bv_f2, True), both=_bv_both,
        df1=_dual(_bv_df1, True), df2=_dual(_bv_df2, True),
    )


def _tunable(params):
    c1, c2 = (list(params) + [1.0, 1.0][len(params):])[:2]
    if c1 == 0:
        raise ConfigError("tunable family needs c1 != 0")
    return GeneratorPair(
        name="tunable", params=(c1, c2), f0=_const(c2),
        f1=_dual(lambda z, xp: c1 * z), f2=_const(c2 / c1),
        df1=_const(c1), df2=_const(0.0))


BUILTINS = {
    "classic": _classic,
    "exponential": _exponential,
    "bounded": _bounded,
    "power": _power,
    "sd17": _sd17,
    "bounded_vanishing": _bounded_vanishing,
    "tunable": _tunable,
}


def builtin_generator(name, params=()):
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ConfigError(f"unknown generator family {name!r}; known: {sorted(BUILTINS)}") from None
    return factory(tuple(float(p) for p in params))


def admissible_grid(pair, points=201):
    """Default z-grid for residual checks: [-5, 5] for whole-line families, [0.01, 10] otherwise."""
    if pair.domain[0] >= 0:
        return np.geomspace(0.01, 10.0, points)
    lo = max(pair.domain[0], -5.0)
    hi = min(pair.domain[1], 5.0)
    return np.linspace(lo, hi, points)


# -- Pfaffian residual ------------------------------------------------------

@dataclass
class PfaffianReport:
    z: np.ndarray
    residuals: np.ndarray
    tol: float
    analytic: bool

    @property
    def max_residual(self):
        return float(np.max(np.abs(self.residuals))) if self.residuals.size else 0.0

    @property
    def passed(self):
        return bool(np.all(np.isfinite(self.residuals))) and self.max_residual <= self.tol

    @property
    def worst_z(self):
        if not self.residuals.size:
            return None
        return float(self.z[int(np.argmax(np.abs(self.residuals)))])


def verify_pfaffian(pair, z_grid=None, tol=None):
    """Residual F2 F1' - F1 F2' - F0 on a grid away from the singular points."""
    z = admissible_grid(pair) if z_grid is None else np.asarray(z_grid, dtype=float)
    for zs in pair.singular_points:
        z = z[np.abs(z - zs) >= SINGULAR_GAP]
    if tol is None:
        tol = TOL_PFAFF_ANALYTIC if pair.analytic else TOL_PFAFF_FD
    vals = np.array([_residual(pair, float(v)) for v in z])
    return PfaffianReport(z=z, residuals=vals, tol=tol, analytic=pair.analytic)


def _residual(pair, z):
    return pair.f2(z) * pair.d1(z) - pair.f1(z) * pair.d2(z) - pair.f0(z)


# -- construction from (F1, F0) ---------------------------------------------

def find_zeros(f, lo, hi, scan_points, xtol=1e-12):
    """Zeros of ``f`` on [lo, hi] found by a sign-change scan refined by bisection."""
    zs = np.linspace(lo, hi, scan_points)
    vals = [f(float(v)) for v in zs]
    zeros = []
    for i, v in enumerate(vals):
        if v == 0.0:
            zeros.append(float(zs[i]))
    for i in range(len(zs) - 1):
        a, b, fa, fb = float(zs[i]), float(zs[i + 1]), vals[i], vals[i + 1]
        if fa == 0.0 or fb == 0.0 or (fa > 0) == (fb > 0):
            continue
        while b - a > xtol:
            m = 0.5 * (a + b)
            fm = f(m)
            if fm == 0.0:
                a = b = m
                break
            if (fm > 0) == (fa > 0):
                a, fa = m, fm
            else:
                b = m
        zeros.append(0.5 * (a + b))
    return sorted(set(zeros))


class _Antiderivative:
    """Psi(z) = int_{z_ref}^z F0 / F1^2 on one component, anchored at cached knots."""

    def __init__(self, integrand, z_ref, lo, hi, lo_singular, hi_singular, tol, n_knots=64):
        self.integrand = integrand
        self.z_ref = z_ref
        self.tol = tol
        self.step = (hi - lo) / n_knots
        safe_lo = lo + (self.step if lo_singular else 0.0)
        safe_hi = hi - (self.step if hi_singular else 0.0)
        self.up = [0.0]
        self.down = [0.0]
        z = z_ref
        while z + self.step <= safe_hi:
            self.up.append(self.up[-1] + adaptive_simpson(integrand, z, z + self.step, tol))
            z += self.step
        z = z_ref
        while z - self.step >= safe_lo:
            self.down.append(self.down[-1] + adaptive_simpson(integrand, z, z - self.step, tol))
            z -= self.step

    def __call__(self, z):
        offset = z - self.z_ref
        j = int(abs(offset) / self.step)
        table = self.up if offset >= 0 else self.down
        j = min(j, len(table) - 1)
        anchor = self.z_ref + math.copysign(j * self.step, offset)
        return table[j] + adaptive_simpson(self.integrand, anchor, z, self.tol)


def from_f1_f0(f1, f0, z_ref, domain, f1_deriv=None, shift=0.0, tol_quad=TOL_QUAD,
               grid_points=100, name="custom", verify=True):
    """Build the pair (F0, F1, F2) with F2 = -F1 * Psi + shift * F1, Psi(z_ref) = 0.

    The pair is restricted to the connected component of ``domain`` minus the
    zeros of F1 that contains ``z_ref``.  At a zero bounding the component, F2
    is the one-sided limit of -F1 * Psi, estimated by Richardson extrapolation.
    """
    lo, hi = map(float, domain)
    if not lo <= z_ref <= hi:
        raise ConfigError(f"z_ref={z_ref} lies outside the domain [{lo}, {hi}]")
    if f1(float(z_ref)) == 0.0:
        raise ConfigError(f"F1 vanishes at z_ref={z_ref}")
    zeros = find_zeros(f1, lo, hi, 10 * grid_points)
    below = [z for z in zeros if z < z_ref]
    above = [z for z in zeros if z > z_ref]
    c_lo = below[-1] if below else lo
    c_hi = above[0] if above else hi
    lo_sing, hi_sing = bool(below), bool(above)
    if not lo_sing and lo in zeros:
        lo_sing = True
    if not hi_sing and hi in zeros:
        hi_sing = True
    singular = tuple(z for z, s in ((c_lo, lo_sing), (c_hi, hi_sing)) if s)

    def integrand(s):
        v = f1(s)
        return f0(s) / (v * v)

    psi = _Antiderivative(integrand, float(z_ref), c_lo, c_hi, lo_sing, hi_sing, tol_quad)
    width = c_hi - c_lo
    h0 = min(1e-3 * width, 1e-3)

    def f2_scalar(z):
        if z < c_lo or z > c_hi:
            raise DomainError(f"z={z} is outside the component [{c_lo}, {c_hi}] of the constructed pair")
        for zs, side in ((c_lo, 1.0), (c_hi, -1.0)):
            if zs in singular and abs(z - zs) < SINGULAR_GAP * 1e-2:
                lim = richardson_limit(lambda h: -f1(zs + side * h) * psi(zs + side * h), h0)
                return lim + shift * f1(z)
        return -f1(z) * psi(z) + shift * f1(z)

    def f2(z):
        if isinstance(z, (int, float)):
            return f2_scalar(float(z))
        z = np.asarray(z, dtype=float)
        return np.vectorize(f2_scalar, otypes=[float])(z)

    def lift(g):
        def h(z):
            if isinstance(z, (int, float)):
                return g(float(z))
            return np.vectorize(g, otypes=[float])(np.asarray(z, dtype=float))
        return h

    pair = GeneratorPair(
        name=name, f0=lift(f0), f1=lift(f1), f2=f2,
        df1=lift(f1_deriv) if f1_deriv is not None else None, df2=None,
        singular_points=singular, domain=(c_lo, c_hi),
        vanishing_at_min=False)
    if verify:
        grid = component_grid(pair, 16)
        rep = verify_pfaffian(pair, grid)
        if not rep.passed:
            raise NumericError(f"constructed pair fails the Pfaffian check: max residual "
                               f"{rep.max_residual:.3g} at z={rep.worst_z}")
    return pair


def component_grid(pair, points):
    """Interior grid of a constructed pair's component, kept away from its ends."""
    lo, hi = pair.domain
    pad = 0.01 * (hi - lo)
    return np.linspace(lo + pad, hi - pad, points)


# -- growth bounds ----------------------------------------------------------

@dataclass
class A4Report:
    a4: Optional[A4Bounds]
    checks: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(self.checks) and all(self.checks.values())


def fit_exponent(z, values, max_denominator=4):
    """Slope of log|values| against log z on the smallest z, snapped to a simple fraction."""
    order = np.argsort(z)
    k = max(4, len(z) // 10)
    sel = order[:k]
    v = np.abs(values[sel])
    good = v > 0
    if good.sum() < 2:
        return 0.0
    slope = np.polyfit(np.log(z[sel][good]), np.log(v[good]), 1)[0]
    return float(Fraction(slope).limit_denominator(max_denominator))


def estimate_a4_bounds(pair, cost, m1, domain_radius, grid_points, inflate=1.0):
    """Fit m2 and the A4 bounds alpha1, alpha2, M, H of ``pair`` used on every axis of ``cost``.

    Suprema are taken over the cost's verification grid plus radial probes
    reaching three decades closer to the minimizer; vanishing is tested on a
    geometric tail z in [1e-12, 1e-8].
    """
    from .costs import radial_probes, verification_grid
    from .lie import channel_functions, lie_terms

    center = cost.minimizer
    pts = np.vstack([verification_grid(center, domain_radius, grid_points),
                     radial_probes(center, domain_radius)])
    z = np.array([cost.shifted(p) for p in pts])
    if np.any(z <= 0):
        raise DomainError("J(x) <= J* at a sample point away from the minimizer")
    f0 = np.asarray(pair.f0(z), dtype=float)
    m2 = fit_exponent(z, f0)
    m3 = 0.5 * (m2 + 1.0)
    m4 = 1.5 * (1.0 + m2) - 1.0 / m1
    checks, details = {}, {}
    checks["m2_admissible"] = m2 >= 1.0 / m1 - 1.0 - 1e-12
    ratio0 = f0 / z**m2
    alpha1, alpha2 = float(ratio0.min()), float(ratio0.max())
    checks["alpha1_positive"] = alpha1 > 0

    fabs = np.maximum(np.abs(pair.f1(z)), np.abs(pair.f2(z)))
    head = float(np.max(fabs / z**m3))
    tail_z = np.geomspace(1e-12, 1e-8, 9)
    tail = float(np.max(np.maximum(np.abs(pair.f1(tail_z)), np.abs(pair.f2(tail_z))) / tail_z**m3))
    checks["vanishing"] = bool(np.isfinite(tail) and tail <= 1.5 * head)
    M = max(head, tail)
    details.update(m2=m2, m3=m3, m4=m4, M_grid=head, M_tail=tail)

    channels = channel_functions(cost, [pair] * cost.dim)
    worst_h = 0.0
    for p, zp in zip(pts, z):
        _, _, second = lie_terms(channels, p, center)
        worst_h = max(worst_h, float(second.max()) / zp**m4)
    checks["H_finite"] = bool(np.isfinite(worst_h))
    a4 = A4Bounds(m2=m2, alpha1=alpha1 / inflate, alpha2=alpha2 * inflate,
                  M=M * inflate, H=worst_h * inflate)
    return A4Report(a4=a4, checks=checks, details=details)
