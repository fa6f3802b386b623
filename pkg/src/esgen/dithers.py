"""Periodic excitation signals, their averaging coefficients, and the amplitude bound nu.

The extremum seeking inputs for axis ``i`` are

    u1(t) = 2 sqrt(pi k / eps) cos(2 pi k t / eps)
    u2(t) = 2 sqrt(pi k / eps) sin(2 pi k t / eps)

with period ``eps``.  The averaging coefficient of an ordered pair of inputs is

    beta[i, j] = (1/T) int_0^T u_i(theta) int_0^theta u_j(tau) dtau dtheta,

which for the pair above gives beta[u2, u1] = 1.
"""

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, NumericError

DEFAULT_QUAD_STEPS = 8192


@dataclass(frozen=True)
class DitherPair:
    """Sinusoid pair with frequency index ``k`` and period ``eps``."""

    k: int
    eps: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ConfigError(f"dither frequency index must be a positive integer, got {self.k}")
        if not self.eps > 0:
            raise ConfigError(f"dither period must be positive, got {self.eps}")

    @cached_property
    def amplitude(self):
        return 2.0 * math.sqrt(math.pi * self.k / self.eps)

    @cached_property
    def omega(self):
        return 2.0 * math.pi * self.k / self.eps

    @property
    def expected_beta21(self):
        return 1.0

    def __call__(self, t):
        a, w = self.amplitude, self.omega
        if isinstance(t, (int, float)):
            return a * math.cos(w * t), a * math.sin(w * t)
        t = np.asarray(t, dtype=float)
        return a * np.cos(w * t), a * np.sin(w * t)

    def signals(self):
        a, w = self.amplitude, self.omega
        return (lambda t: a * np.cos(w * np.asarray(t, dtype=float)),
                lambda t: a * np.sin(w * np.asarray(t, dtype=float)))

    def with_eps(self, eps):
        return DitherPair(self.k, eps)


@dataclass(frozen=True)
class SqrtOmegaDither:
    """Unit sinusoids scaled by sqrt(omega): sqrt(w) cos(w t), sqrt(w) sin(w t), w = 2 pi k / eps.

    This is the normalization of the classic one-dimensional scheme and of the
    vibrational control law; its averaging coefficient beta21 is 1/2.
    """

    k: int
    eps: float

    def __post_init__(self):
        DitherPair(self.k, self.eps)

    @cached_property
    def omega(self):
        return 2.0 * math.pi * self.k / self.eps

    @cached_property
    def amplitude(self):
        return math.sqrt(self.omega)

    @property
    def expected_beta21(self):
        return 0.5

    def __call__(self, t):
        a, w = self.amplitude, self.omega
        if isinstance(t, (int, float)):
            return a * math.cos(w * t), a * math.sin(w * t)
        t = np.asarray(t, dtype=float)
        return a * np.cos(w * t), a * np.sin(w * t)

    def signals(self):
        a, w = self.amplitude, self.omega
        return (lambda t: a * np.cos(w * np.asarray(t, dtype=float)),
                lambda t: a * np.sin(w * np.asarray(t, dtype=float)))

    def with_eps(self, eps):
        return SqrtOmegaDither(self.k, eps)


def eval_dither(d, t):
    return d(t)


def _simpson_weights(n):
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def beta(signals, T, quad_steps=DEFAULT_QUAD_STEPS):
    """Averaging coefficients of a list of T-periodic scalar signals.

    Composite Simpson on a uniform grid of ``quad_steps`` intervals for the outer
    integral; the inner running integral is accumulated by Simpson on a grid
    twice as fine, so every outer node carries an exact Simpson partial sum.
    Returns the matrix ``B`` with ``B[i, j] = beta_{i,j}``.
    """
    if quad_steps < 1024:
        raise ConfigError("quad_steps must be at least 1024")
    n = quad_steps + (quad_steps % 2)
    fine = np.linspace(0.0, T, 2 * n + 1)
    vals = np.array([np.broadcast_to(s(fine), fine.shape) for s in signals], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NumericError("non-finite signal value in beta quadrature")
    hf = T / (2 * n)
    # Simpson panels on the fine grid: each covers two fine steps = one coarse step.
    panels = hf / 3.0 * (vals[:, 0:-1:2] + 4.0 * vals[:, 1::2] + vals[:, 2::2])
    inner = np.concatenate([np.zeros((len(signals), 1)), np.cumsum(panels, axis=1)], axis=1)
    outer_vals = vals[:, ::2]
    w = _simpson_weights(n) * (T / n)
    B = np.einsum("it,jt,t->ij", outer_vals, inner, w) / T
    return B


def zero_mean(signal, T, quad_steps=DEFAULT_QUAD_STEPS):
    """Simpson integral of ``signal`` over one period."""
    n = quad_steps + (quad_steps % 2)
    t = np.linspace(0.0, T, n + 1)
    return float(np.dot(_simpson_weights(n), signal(t)) * (T / n))


def _aligned_steps(pairs, quad_steps):
    # the grid step must divide the shortest sub-period eps / max k
    kmax = max(p.k for p in pairs)
    unit = 2 * kmax
    return int(math.ceil(quad_steps / unit) * unit)


def pairs_beta(pairs, quad_steps=DEFAULT_QUAD_STEPS):
    """beta matrix over the channels (u1_1, u2_1, u1_2, u2_2, ...) of dither pairs sharing eps."""
    eps = _shared_eps(pairs)
    sigs = [s for p in pairs for s in p.signals()]
    return beta(sigs, eps, _aligned_steps(pairs, quad_steps))


def beta21(d, quad_steps=DEFAULT_QUAD_STEPS):
    """beta_{2,1} of a single pair by quadrature."""
    return float(pairs_beta([d], quad_steps)[1, 0])


def _shared_eps(pairs):
    if not pairs:
        raise ConfigError("need at least one dither pair")
    eps = pairs[0].eps
    if any(abs(p.eps - eps) > 1e-15 * eps for p in pairs):
        raise ConfigError("all dither pairs must share the same eps")
    return eps


def nu(pairs):
    """Exact maximum over t of sum_{s,i} |u_si(t)| for the cont_eps family."""
    if not all(isinstance(p, DitherPair) for p in pairs):
        raise ConfigError("nu is defined for the cont_eps family only")
    eps = _shared_eps(pairs)
    return 2.0 * math.sqrt(2.0 * math.pi) / math.sqrt(eps) * sum(math.sqrt(p.k) for p in pairs)


def nu_coefficient(ks):
    """nu * sqrt(eps) = 2 sqrt(2 pi) sum sqrt(k_i)."""
    return 2.0 * math.sqrt(2.0 * math.pi) * sum(math.sqrt(k) for k in ks)
