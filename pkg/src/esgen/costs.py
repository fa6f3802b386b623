"""Cost functions, their derivatives, and the local regularity constants.

A cost carries its minimum data (minimizer and minimal value) and gives access
to the gradient, either analytic or by central differences.  The constants
``gamma1, gamma2, kappa1, kappa2, mu, m1`` describe how the shifted cost
``J(x) - J*`` behaves like a power of the distance to the minimizer; they are
fitted on sample grids and checked back against the same inequalities.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DomainError, NumericError

TOL_MIN = 1e-9
TOL_GRAD = 1e-6
M1_CANDIDATES = (1.0, 1.5, 2.0, 2.5, 3.0)


@dataclass(frozen=True)
class CostProfile:
    """A cost ``J`` on R^n with optional analytic gradient and Hessian."""

    dim: int
    func: Callable[[np.ndarray], float]
    grad_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    minimizer: Optional[np.ndarray] = None
    min_value: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError("cost dimension must be positive")
        if self.minimizer is not None:
            xs = np.asarray(self.minimizer, dtype=float).reshape(-1)
            if xs.size != self.dim:
                raise ConfigError(f"minimizer has {xs.size} entries, cost dimension is {self.dim}")
            object.__setattr__(self, "minimizer", xs)

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    def shifted(self, x):
        """J(x) - J*."""
        return self(x) - self.min_value

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        if self.grad_fn is not None:
            return np.asarray(self.grad_fn(x), dtype=float).reshape(self.dim)
        return fd_gradient(self.func, x)

    def hessian(self, x):
        """Hessian by second central differences (the analytic one is not used for fitting)."""
        return fd_hessian(self.func, np.asarray(x, dtype=float))

    def check_minimizer(self, tol_min=TOL_MIN, tol_grad=TOL_GRAD):
        """Return (value_gap, grad_norm) at the declared minimizer, raising if out of tolerance."""
        if self.minimizer is None:
            raise ConfigError(f"cost {self.name!r} has no declared minimizer")
        gap = abs(self(self.minimizer) - self.min_value)
        gnorm = float(np.linalg.norm(self.grad(self.minimizer)))
        if gap > tol_min or gnorm > tol_grad:
            raise ConfigError(f"declared minimizer of {self.name!r} is inconsistent: "
                              f"|J(x*)-J*|={gap:.3g}, |grad J(x*)|={gnorm:.3g}")
        return gap, gnorm


@dataclass(frozen=True)
class CostConstants:
    gamma1: float
    gamma2: float
    kappa1: float
    kappa2: float
    mu: float
    m1: float

    def __post_init__(self):
        if self.m1 < 1:
            raise ConfigError(f"m1 must be >= 1, got {self.m1}")
        for name in ("gamma1", "gamma2", "kappa1", "kappa2", "mu"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.gamma1 > self.gamma2 or self.kappa1 > self.kappa2:
            raise ConfigError("lower constants must not exceed upper constants")


def fd_gradient(func, x, rel_step=1e-5):
    x = np.asarray(x, dtype=float)
    h = rel_step * max(1.0, float(np.linalg.norm(x)))
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (func(x + e) - func(x - e)) / (2 * h)
    return g


def fd_hessian(func, x, rel_step=1e-4):
    x = np.asarray(x, dtype=float)
    n = x.size
    h = rel_step * max(1.0, float(np.linalg.norm(x)))
    f0 = func(x)
    H = np.empty((n, n))
    eye = np.eye(n) * h
    for i in range(n):
        H[i, i] = (func(x + eye[i]) - 2 * f0 + func(x - eye[i])) / h**2
        for j in range(i + 1, n):
            v = (func(x + eye[i] + eye[j]) - func(x + eye[i] - eye[j])
                 - func(x - eye[i] + eye[j]) + func(x - eye[i] - eye[j])) / (4 * h**2)
            H[i, j] = H[j, i] = v
    return H


# -- builtins ---------------------------------------------------------------

def _center(params, dim, default):
    if not params:
        return np.full(dim, float(default))
    c = np.asarray(params, dtype=float).reshape(-1)
    if c.size == 1:
        return np.full(dim, float(c[0]))
    if c.size != dim:
        raise ConfigError(f"minimizer needs {dim} coordinates, got {c.size}")
    return c


def _sq(d):
    return float(d @ d)


def _sq_elem(d):
    return d * d


def builtin_cost(name, params=()):
    """Builtin costs.

    ``J1``: 2 (x - x*)^2 and ``J2``: 2 (x - x*)^4 on R, params ``[x*]`` (default 1).
    ``quadratic_nd``: ||x - x*||^2 on R^n, params ``[n, x*...]`` where ``x*`` is a
    single value broadcast to all coordinates or n values (default 1).
    """
    params = list(params)
    if name == "J1":
        c = _center(params, 1, 1.0)
        return CostProfile(
            dim=1, name="J1", minimizer=c, min_value=0.0,
            func=lambda x: 2.0 * _sq(x - c),
            grad_fn=lambda x: 4.0 * (x - c),
            hess_fn=lambda x: np.array([[4.0]]))
    if name == "J2":
        c = _center(params, 1, 1.0)
        return CostProfile(
            dim=1, name="J2", minimizer=c, min_value=0.0,
            func=lambda x: 2.0 * _sq(_sq_elem(x - c)),
            grad_fn=lambda x: 8.0 * (x - c) ** 3,
            hess_fn=lambda x: np.diag(24.0 * (x - c) ** 2))
    if name == "quadratic_nd":
        if not params:
            raise ConfigError("quadratic_nd needs params [dim, x*...]")
        dim = int(params[0])
        if dim != params[0] or dim < 1:
            raise ConfigError(f"quadratic_nd dimension must be a positive integer, got {params[0]}")
        c = _center(params[1:], dim, 1.0)
        return CostProfile(
            dim=dim, name="quadratic_nd", minimizer=c, min_value=0.0,
            func=lambda x: _sq(x - c),
            grad_fn=lambda x: 2.0 * (x - c),
            hess_fn=lambda x: 2.0 * np.eye(dim))
    raise ConfigError(f"unknown builtin cost {name!r}")


def expression_cost(source, dim, minimizer=None, min_value=0.0):
    """Cost from an expression string in x1..xn (or x for dim 1); gradient by finite differences."""
    from .expr import state_function
    fn = state_function(source, dim)
    return CostProfile(dim=dim, func=fn, minimizer=minimizer, min_value=float(min_value),
                       name=f"expr:{source}")


# -- sampling ---------------------------------------------------------------

def verification_grid(center, radius, grid_points, exclude_frac=1 / 50):
    """Uniform tensor grid over [c - r, c + r]^n minus the ball of radius r * exclude_frac."""
    center = np.asarray(center, dtype=float).reshape(-1)
    if radius <= 0 or grid_points < 2:
        raise DomainError("grid needs a positive radius and at least two points per axis")
    axes = [np.linspace(c - radius, c + radius, grid_points) for c in center]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, center.size)
    dist = np.linalg.norm(mesh - center, axis=1)
    keep = dist >= radius * exclude_frac
    if not np.any(keep):
        raise DomainError("degenerate grid: every point lies at the minimizer")
    return mesh[keep]


def radial_probes(center, radius, per_ray=40, inner_frac=1e-3):
    """Geometrically spaced points along +-axis and +-diagonal rays out to ``radius``.

    Used on top of the tensor grid where a supremum has log-periodic structure
    near the minimizer that a uniform grid undersamples.
    """
    center = np.asarray(center, dtype=float).reshape(-1)
    n = center.size
    dirs = [np.eye(n)[i] * s for i in range(n) for s in (1.0, -1.0)]
    if n > 1:
        d = np.ones(n) / np.sqrt(n)
        dirs += [d, -d]
    radii = radius * np.geomspace(inner_frac, 1.0, per_ray)
    return np.array([center + r * u for u in dirs for r in radii])


def _evaluate(cost, points):
    shifted = np.array([cost.shifted(p) for p in points])
    grads = np.array([cost.grad(p) for p in points])
    hnorm = np.array([np.linalg.norm(cost.hessian(p), 2) for p in points])
    if not (np.all(np.isfinite(shifted)) and np.all(np.isfinite(grads)) and np.all(np.isfinite(hnorm))):
        raise NumericError("non-finite cost, gradient or Hessian value on the grid")
    return shifted, grads, hnorm


def fit_m1(dist, shifted):
    """Fit 2*m1 as the log-log slope of J~ against distance on the innermost points."""
    order = np.argsort(dist)
    k = max(4, len(dist) // 10)
    sel = order[:k]
    sel = sel[shifted[sel] > 0]
    if sel.size < 2 or np.ptp(np.log(dist[sel])) == 0:
        raise DomainError("cannot fit m1: need points at two distinct distances with J > J*")
    slope = np.polyfit(np.log(dist[sel]), np.log(shifted[sel]), 1)[0]
    return min(M1_CANDIDATES, key=lambda m: abs(2 * m - slope)), slope


def estimate_a2_constants(cost, domain_radius, grid_points, m1=None):
    """Tightest A2 constants over the verification grid.

    ``m1`` is fitted from the log-log slope near the minimizer unless given.
    """
    if cost.minimizer is None:
        raise ConfigError("estimate_a2_constants needs a cost with a declared minimizer")
    pts = verification_grid(cost.minimizer, domain_radius, grid_points)
    dist = np.linalg.norm(pts - cost.minimizer, axis=1)
    shifted, grads, hnorm = _evaluate(cost, pts)
    if np.any(shifted <= 0):
        raise DomainError("J(x) <= J* at a grid point away from the minimizer")
    if m1 is None:
        m1, _ = fit_m1(dist, shifted)
    g = shifted / dist ** (2 * m1)
    k = np.sum(grads**2, axis=1) / shifted ** (2 - 1 / m1)
    mu = hnorm / shifted ** (1 - 1 / m1)
    return CostConstants(gamma1=float(g.min()), gamma2=float(g.max()),
                         kappa1=float(k.min()), kappa2=float(k.max()),
                         mu=float(mu.max()), m1=float(m1))


@dataclass
class A2Report:
    violations: list = field(default_factory=list)
    checked: int = 0

    @property
    def passed(self):
        return not self.violations


def verify_a2(cost, constants, domain_radius, grid_points, rtol=1e-6):
    """Check the three A2 sandwich inequalities on the grid.

    Each violation is a dict with the point, the failing inequality and its
    slack (negative means violated).  A relative tolerance ``rtol`` absorbs
    rounding in constants fitted on the same grid and finite-difference Hessian error.
    """
    c = constants
    pts = verification_grid(cost.minimizer, domain_radius, grid_points)
    dist = np.linalg.norm(pts - cost.minimizer, axis=1)
    shifted, grads, hnorm = _evaluate(cost, pts)
    g2 = np.sum(grads**2, axis=1)
    p = 2 * c.m1
    with np.errstate(invalid="ignore", divide="ignore"):
        pos = np.clip(shifted, 0.0, None)
        sides = {
            "gamma_lower": (shifted, c.gamma1 * dist**p),
            "gamma_upper": (c.gamma2 * dist**p, shifted),
            "kappa_lower": (g2, c.kappa1 * pos ** (2 - 1 / c.m1)),
            "kappa_upper": (c.kappa2 * pos ** (2 - 1 / c.m1), g2),
            "mu_upper": (c.mu * pos ** (1 - 1 / c.m1), hnorm),
        }
    report = A2Report(checked=len(pts))
    for name, (big, small) in sides.items():
        slack = big - small
        bad = slack < -rtol * np.maximum(np.abs(big), np.abs(small))
        for i in np.flatnonzero(bad):
            report.violations.append({"point": pts[i].tolist(), "inequality": name,
                                      "slack": float(slack[i])})
    return report


def check_a1(cost, domain_radius, grid_points):
    """Grid points (away from x*) where J <= J* or the gradient vanishes."""
    pts = verification_grid(cost.minimizer, domain_radius, grid_points)
    bad = []
    for p in pts:
        if cost.shifted(p) <= 0 or not np.any(cost.grad(p)):
            bad.append(p.tolist())
    return bad


def gradient_agreement(cost, points, rel=1e-6, abs_tol=1e-8):
    """Max relative error of the analytic gradient against central differences."""
    worst = 0.0
    for p in points:
        p = np.asarray(p, dtype=float)
        ga = cost.grad(p)
        gf = fd_gradient(cost.func, p)
        err = np.linalg.norm(ga - gf)
        scale = max(np.linalg.norm(ga), abs_tol / rel)
        worst = max(worst, err / scale)
    return worst
