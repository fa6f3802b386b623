"""Explicit stability constants: eps thresholds, Volterra bounds, descent estimate and decay envelopes.

Notation: J~ = J - J*, d(x) = |x - x*|, m~ = 1 + m2 - 1/m1 (m~ = 1 - 1/m1 for
non-vanishing generators), nu = max_t sum |u_si(t)| = nu_coeff / sqrt(eps).
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .costs import CostConstants, radial_probes, verification_grid
from .dithers import nu_coefficient
from .errors import DomainError, InputError, PreconditionError
from .lie import lie_terms

SAFETY = 1.05
MARGIN = 0.99


def slack_tol(rhs):
    return 1e-9 + 1e-6 * abs(rhs)


# -- decay envelopes --------------------------------------------------------

def phi(m_tilde, J0, m1, s):
    """exp(-s/2) for m~ = 0, (1 + m~ s J0^m~)^(-1/(2 m1 m~)) for m~ > 0."""
    if s < 0 or m_tilde < 0 or J0 < 0 or m1 <= 0:
        raise DomainError(f"phi needs s, m_tilde, J0 >= 0 and m1 > 0; got s={s}, m_tilde={m_tilde}, J0={J0}")
    if m_tilde == 0:
        return math.exp(-0.5 * s)
    base = 1.0 + m_tilde * s * J0**m_tilde
    return base ** (-1.0 / (2.0 * m1 * m_tilde))


@dataclass(frozen=True)
class DecayEnvelope:
    m_tilde: float
    lam: float
    rho: float
    m1: float
    gamma1: float
    gamma2: float
    x0_dist: float
    J0: float
    M: float = 0.0
    L: float = 1.0
    delta: float = 0.0
    nu: float = 0.0
    eps: float = 0.0

    @property
    def sigma_bound(self):
        growth = math.expm1(self.nu * self.L * self.eps)
        return 1.0 + (self.M / self.L) * (self.gamma2 / self.gamma1) ** (self.m_tilde / 2) \
            * self.delta ** (self.m1 * self.m_tilde) * growth

    def with_lambda(self, lam):
        return DecayEnvelope(**{**self.__dict__, "lam": lam})


def envelope_eval(env, t):
    ratio = (env.gamma2 / env.gamma1) ** (1.0 / (2.0 * env.m1))
    s = env.lam * max(t - env.eps, 0.0)
    return env.sigma_bound * ratio * env.x0_dist * phi(env.m_tilde, env.J0, env.m1, s) + env.rho


# -- Volterra-series bounds -------------------------------------------------

def lemma3_bound(M_tilde, L, m, nu, t, x0_dist):
    """Displacement bound (M~ d0^m / L)(exp(nu L t) - 1)."""
    if not L > 0 or t < 0:
        raise DomainError("lemma3_bound needs L > 0 and t >= 0")
    return M_tilde * x0_dist**m / L * math.expm1(nu * L * t)


def lemma4_c1(M_tilde, L, varpi):
    return 6.0 * (M_tilde * math.expm1(L)) ** varpi / (L * (varpi + 1) * (varpi + 2) * (varpi + 3))


def lemma4_remainder_bound(H_tilde, varpi, M_tilde, L, m, nu, t, x0_dist):
    """Remainder bound (t nu)^3 d0^varpi 2^(varpi-1) H~ (1 + c1 (nu t d0^(m-1))^varpi)."""
    if nu * t > 1.0 + 1e-12:
        raise PreconditionError(f"remainder bound needs nu t <= 1, got nu t = {nu * t:.6g}")
    if not (varpi == 0 or varpi >= 1):
        raise PreconditionError(f"varpi must be 0 or >= 1, got {varpi}")
    c1 = lemma4_c1(M_tilde, L, varpi)
    inner = nu * t * x0_dist ** (m - 1) if varpi else 1.0
    C = 2.0 ** (varpi - 1) * H_tilde * (1.0 + c1 * inner**varpi)
    return (t * nu) ** 3 * x0_dist**varpi * C


def lemma5_descent(J0, eps, alpha1, kappa1, kappa2, mu, m1, alpha2, remainder_ratio, m_tilde):
    """Upper bound on J~(x(eps)) from the second-order expansion of J~^(1/m1)."""
    k1 = alpha1 * kappa1 - math.sqrt(kappa2) * remainder_ratio
    k2 = ((m1 - 1) * kappa2 + mu * m1) * (alpha2 * math.sqrt(kappa2) + remainder_ratio) ** 2
    base = 1.0 - eps * k1 / m1 * J0**m_tilde + eps**2 * k2 / (2 * m1**2) * J0 ** (2 * m_tilde)
    return J0 * math.copysign(abs(base) ** m1, base)


# -- eps certificate --------------------------------------------------------

@dataclass
class CertificateInputs:
    """Scenario constants for the eps certificate.

    Vanishing case: give ``a4`` (with H).  Non-vanishing case: give ``alpha``
    (F0 >= alpha), ``H`` (max single second Lie derivative on D0) and the
    practical radii ``rho > rho0 > rho_min > 0``.
    """

    constants: CostConstants
    k_list: tuple
    Delta: float
    delta: float
    delta0: float
    lambda_bar: float
    L: float
    M_F: float
    a4: Optional[object] = None
    alpha: Optional[float] = None
    H: Optional[float] = None
    M: Optional[float] = None
    rho: Optional[float] = None
    rho0: Optional[float] = None
    rho_min: Optional[float] = None
    margin: float = MARGIN


@dataclass
class EpsilonCertificate:
    case: str
    eps0: float
    eps1: float
    eps2: float
    eps4: float
    eps_bar: float
    limits: dict = field(default_factory=dict)
    intermediates: dict = field(default_factory=dict)

    def as_dict(self):
        out = {"case": self.case, "eps0": self.eps0, "eps1": self.eps1, "eps2": self.eps2,
               "eps4": self.eps4, "eps_bar": self.eps_bar}
        out.update({f"limit.{k}": v for k, v in self.limits.items()})
        out.update(self.intermediates)
        return out

    def to_kv(self):
        return "".join(f"{k}={_kv(v)}\n" for k, v in self.as_dict().items())

    def to_text(self):
        lines = [f"eps certificate (case {self.case})"]
        for k in ("eps0", "eps1", "eps2", "eps4", "eps_bar"):
            lines.append(f"  {k:<14} {_num(getattr(self, k))}")
        for k, v in self.limits.items():
            lines.append(f"  limit {k:<8} {_num(v)}")
        lines.append("  intermediates:")
        for k, v in self.intermediates.items():
            lines.append(f"    {k:<16} {_num(v)}")
        return "\n".join(lines) + "\n"


def _kv(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else format(v, ".17g")
    return str(v)


def _num(v):
    if isinstance(v, float):
        return "unbounded" if math.isinf(v) else format(v, ".6g")
    return str(v)


def _require(cond, what):
    if not cond:
        raise PreconditionError(f"hypothesis violated: {what}")


def epsilon_certificate(inp):
    """Thresholds eps0, eps1, eps2, eps4 and the certified eps_bar.

    Strict inequalities of the construction are met by scaling each threshold
    by ``margin`` < 1.
    """
    c = inp.constants
    m1, g1, g2 = c.m1, c.gamma1, c.gamma2
    q = inp.margin
    _require(inp.delta > 0, "delta > 0")
    _require(inp.delta < (g1 / g2) ** (1 / (2 * m1)) * inp.Delta,
             "delta < (gamma1/gamma2)^(1/(2 m1)) Delta")
    _require((g2 / g1) ** (1 / (2 * m1)) * inp.delta < inp.delta0 < inp.Delta,
             "(gamma2/gamma1)^(1/(2 m1)) delta < delta0 < Delta")
    _require(inp.L > 0 and inp.M_F > 0, "L > 0 and M_F > 0")
    vanishing = inp.a4 is not None
    if vanishing:
        a4 = inp.a4
        alpha1, alpha2, m2 = a4.alpha1, a4.alpha2, a4.m2
        _require(a4.H is not None, "A4 bound H is given")
    else:
        _require(inp.alpha is not None and inp.alpha > 0, "F0 >= alpha > 0")
        _require(inp.H is not None, "second Lie derivative bound H is given")
        alpha1 = alpha2 = inp.alpha
        m2 = 0.0
    _require(0 < inp.lambda_bar < alpha1 * c.kappa1, "0 < lambda_bar < alpha1 kappa1")

    m_t = 1.0 + m2 - 1.0 / m1
    nc = nu_coefficient(inp.k_list)
    n = len(inp.k_list)
    d = inp.Delta - inp.delta0
    c0 = g1 * inp.delta0 ** (2 * m1)
    L = inp.L

    def eps_reach(dist, bound):
        if math.isinf(dist):
            return math.inf
        return q * (math.log(L * dist / bound + 1.0) / (nc * L)) ** 2

    eps0 = eps_reach(d, inp.M_F)
    eps1 = nc**-2
    eps2 = q * min(eps0, eps1, c0**-m_t)
    K = (m1 - 1) * c.kappa2 + c.mu * m1
    sk2 = math.sqrt(c.kappa2)
    inter = {"nu_coeff": nc, "d": d, "M_F": inp.M_F, "L": L, "c0": c0, "delta0": inp.delta0,
             "m_tilde": m_t}
    limits = {"m1/(lambda_bar c0^m~)": q * m1 / (inp.lambda_bar * c0**m_t)}
    if m_t > 0:
        limits["1/(lambda_bar m~ c0^m~)"] = q / (inp.lambda_bar * m_t * c0**m_t)

    if vanishing:
        m3 = 0.5 * (m2 + 1.0)
        m4 = 1.5 * (1.0 + m2) - 1.0 / m1
        m, varpi = 2 * m1 * m3, 2 * m1 * m4
        M_t = a4.M * g2**m3
        H_t = (2 * n) ** 3 * a4.H * g2**m4
        c1 = lemma4_c1(M_t, L, varpi)
        B = nc * math.sqrt(eps2) * inp.delta0 ** (m1 * m_t)
        C = 2.0 ** (varpi - 1) * H_t * (1.0 + c1 * B**varpi)
        Omega = nc**3 * g1**-m4 * C
        lam1 = Omega * sk2 + K * (alpha2 * sk2 + Omega) ** 2 / (2 * m1)
        eps4 = q * ((alpha1 * c.kappa1 - inp.lambda_bar) / (c0 ** (m_t / 2) * lam1)) ** 2
        inter.update(m=m, varpi=varpi, M_tilde=M_t, H_tilde=H_t, c1=c1, Omega=Omega, lambda1=lam1)
        eps_bar = min([eps2, eps4] + list(limits.values()))
        case = "II"
    else:
        _require(inp.rho is not None and inp.rho0 is not None and inp.rho_min is not None,
                 "rho, rho0, rho_min are given")
        _require(0 < inp.rho_min < inp.rho0 < inp.rho < inp.delta, "0 < rho_min < rho0 < rho < delta")
        M = inp.M if inp.M is not None else inp.M_F
        d_t = min(inp.rho - inp.rho0, inp.rho0 - inp.rho_min)
        limits["eps0_tilde"] = eps_reach(d_t, M)
        H_t = (2 * n) ** 3 * inp.H
        Omega_t = nc**3 * H_t * (1.0 + 1.0 / L) / 2.0
        r = Omega_t * g1 ** (1 / (2 * m1) - 1) * inp.rho0 ** (1 - 2 * m1)
        lam1 = sk2 * r * c0 ** (-m_t / 2) + K * (alpha1 * sk2 + r * math.sqrt(eps2)) ** 2 / (2 * m1)
        eps4 = q * ((alpha1 * c.kappa1 - inp.lambda_bar) / (c0 ** (m_t / 2) * lam1)) ** 2
        inter.update(H_tilde=H_t, Omega_tilde=Omega_t, d_tilde=d_t, lambda1_tilde=lam1)
        eps_bar = min([eps2, eps4] + list(limits.values()))
        case = "I"
    return EpsilonCertificate(case=case, eps0=eps0, eps1=eps1, eps2=eps2, eps4=eps4,
                              eps_bar=eps_bar, limits=limits, intermediates=inter)


# -- trajectory checks ------------------------------------------------------

@dataclass
class CheckReport:
    name: str
    checked: int = 0
    violations: list = field(default_factory=list)
    worst_margin: float = math.inf

    @property
    def passed(self):
        return self.checked > 0 and not self.violations

    def record(self, where, lhs, rhs):
        self.checked += 1
        margin = rhs + slack_tol(rhs) - lhs
        self.worst_margin = min(self.worst_margin, margin)
        if margin < 0:
            self.violations.append((where, lhs, rhs))

    def summary(self):
        status = "pass" if self.passed else "FAIL"
        return (f"{self.name}: {status} ({self.checked} checked, {len(self.violations)} violations, "
                f"worst margin {self.worst_margin:.6g})")


def eps_multiples(times, eps, tol=1e-6):
    """Map n -> sample index for the samples lying on t = n eps."""
    idx = {}
    for i, t in enumerate(times):
        n = round(t / eps)
        if abs(t - n * eps) <= tol * eps:
            idx.setdefault(n, i)
    return idx


def check_descent(traj, eps, lam, m1, m_tilde, J_star=0.0):
    """J~(x((n+1) eps)) <= J~(x(n eps)) (1 - eps lam J~^m~ / m1)^m1 for consecutive multiples."""
    idx = eps_multiples(traj.times, eps)
    ns = sorted(idx)
    pairs = [(a, b) for a, b in zip(ns, ns[1:]) if b == a + 1]
    if not pairs:
        raise InputError("trajectory has no two consecutive samples on the eps grid")
    rep = CheckReport("descent")
    for a, b in pairs:
        j0 = max(traj.cost_values[idx[a]] - J_star, 0.0)
        j1 = traj.cost_values[idx[b]] - J_star
        base = 1.0 - eps * lam / m1 * j0**m_tilde
        rhs = j0 * max(base, 0.0) ** m1
        rep.record(b * eps, j1, rhs)
    return rep


def check_envelope(traj, env, x_star):
    x_star = np.asarray(x_star, dtype=float).reshape(-1)
    rep = CheckReport("envelope")
    dist = np.linalg.norm(traj.states - x_star, axis=1)
    for t, dval in zip(traj.times, dist):
        rep.record(float(t), float(dval), envelope_eval(env, float(t)))
    return rep


def fit_envelope_lambda(traj, env, x_star, lam_max=100.0, iters=60):
    """Largest lambda in [0, lam_max] for which the envelope check passes (0 if none)."""
    if check_envelope(traj, env.with_lambda(lam_max), x_star).passed:
        return lam_max
    if not check_envelope(traj, env.with_lambda(0.0), x_star).passed:
        return 0.0
    lo, hi = 0.0, lam_max
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if check_envelope(traj, env.with_lambda(mid), x_star).passed:
            lo = mid
        else:
            hi = mid
    return lo


# -- field constants and lemma dominance ------------------------------------

@dataclass
class FieldConstants:
    """Bound constants of the channel fields on a ball around x*."""

    M_tilde: float
    L: float
    H_tilde: float
    M_F: float
    m: float
    varpi: float
    radius: float
    raw: dict = field(default_factory=dict)


def lemma_exponents(m1, m2=None):
    """(m, varpi) for the vanishing construction, (0, 0) without growth bounds."""
    if m2 is None:
        return 0.0, 0.0
    return m1 * (1.0 + m2), 3.0 * m1 * (1.0 + m2) - 2.0


def sample_points(center, radius, grid_points):
    pts = np.vstack([verification_grid(center, radius, grid_points), radial_probes(center, radius)])
    dist = np.linalg.norm(pts - center, axis=1)
    return pts[dist <= radius * (1 + 1e-12)]


def estimate_field_constants(sys, radius, m, varpi, grid_points=41, inflate=SAFETY):
    """Suprema of |phi_c|/d^m, |grad phi_c| and sum |L L f| / d^varpi over the ball of ``radius``."""
    center = sys.cost.minimizer
    channels = sys.channels()
    pts = sample_points(center, radius, grid_points)
    best = {"M_tilde": 0.0, "L": 0.0, "H_tilde": 0.0, "M_F": 0.0}
    for p in pts:
        dist = float(np.linalg.norm(p - center))
        grads, _, second = lie_terms(channels, p, center)
        vals = np.abs([fn(p) for _, fn in channels])
        best["M_tilde"] = max(best["M_tilde"], float(vals.max()) / dist**m)
        best["M_F"] = max(best["M_F"], float(vals.max()))
        best["L"] = max(best["L"], float(grads.max()))
        best["H_tilde"] = max(best["H_tilde"], float(second.sum()) / dist**varpi)
    return FieldConstants(M_tilde=best["M_tilde"] * inflate, L=best["L"] * inflate,
                          H_tilde=best["H_tilde"] * inflate, M_F=best["M_F"] * inflate,
                          m=m, varpi=varpi, radius=radius, raw=best)


@dataclass
class DominanceReport:
    lemma3: CheckReport
    lemma4: CheckReport
    lemma5: CheckReport
    max_dist: float

    @property
    def passed(self):
        return self.lemma3.passed and self.lemma4.passed and self.lemma5.passed

    def summary(self):
        return "\n".join(r.summary() for r in (self.lemma3, self.lemma4, self.lemma5))


def lemma_dominance(sys, x0, n_periods, fc, a2, f0_bounds, h=None):
    """Check the displacement, remainder and descent bounds period by period along a simulation.

    ``f0_bounds`` is ``(alpha1, alpha2, m2)`` with alpha1 J~^m2 <= F0(J~) <= alpha2 J~^m2.
    """
    from .dithers import nu
    from .dynamics import simulate

    eps = sys.eps
    h = sys.default_step() if h is None else h
    per = int(round(eps / h))
    if abs(per * h - eps) > 1e-9 * eps:
        raise InputError("step must divide eps")
    traj = simulate(sys, x0, n_periods * eps, h=h)
    nu_val = nu([a.dither for a in sys.axes])
    center = sys.cost.minimizer
    alpha1, alpha2, m2 = f0_bounds
    m1 = a2.m1
    m_t = 1.0 + m2 - 1.0 / m1
    r3, r4, r5 = CheckReport("lemma3"), CheckReport("lemma4"), CheckReport("lemma5")
    dist_all = np.linalg.norm(traj.states - center, axis=1)
    for p in range(n_periods):
        i0, i1 = p * per, (p + 1) * per
        x_start, t_start = traj.states[i0], traj.times[i0]
        d0 = float(np.linalg.norm(x_start - center))
        for i in range(i0 + 1, i1 + 1):
            disp = float(np.linalg.norm(traj.states[i] - x_start))
            r3.record(float(traj.times[i]), disp,
                      lemma3_bound(fc.M_tilde, fc.L, fc.m, nu_val, traj.times[i] - t_start, d0))
        x_end = traj.states[i1]
        R = x_end - x_start - eps * sys.averaged(t_start, x_start)
        rnorm = float(np.linalg.norm(R))
        r4.record(float(traj.times[i1]), rnorm,
                  lemma4_remainder_bound(fc.H_tilde, fc.varpi, fc.M_tilde, fc.L, fc.m, nu_val, eps, d0))
        J0 = float(sys.cost.shifted(x_start))
        if J0 > 0:
            ratio = rnorm / (eps * J0 ** (m_t + 1.0 / (2 * m1)))
            bound = lemma5_descent(J0, eps, alpha1, a2.kappa1, a2.kappa2, a2.mu, m1, alpha2, ratio, m_t)
            r5.record(float(traj.times[i1]), float(sys.cost.shifted(x_end)), bound)
    return DominanceReport(r3, r4, r5, float(dist_all.max()))
