"""Extremum-seeking and vibrational control systems, their averaged fields, and RK4 integration."""

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .costs import CostProfile
from .dithers import DitherPair, beta21 as quad_beta21
from .errors import ConfigError, DivergenceError, EscapeError, InputError, ModelError
from .generators import GeneratorPair

Z_FLOOR = 1e-12
TOL_BELOW_MIN = 1e-9
BOX_HALF_WIDTH = 10.0
STEPS_PER_PERIOD = 400


@dataclass(frozen=True)
class Axis:
    gen: GeneratorPair
    dither: DitherPair


@dataclass
class EsSystem:
    """x_i' = F1_i(J~(x)) u1_i(t) + F2_i(J~(x)) u2_i(t), i = 1..n."""

    cost: CostProfile
    axes: tuple
    beta21: Optional[tuple] = None
    z_floor: float = Z_FLOOR
    box: Optional[tuple] = None

    def __post_init__(self):
        self.axes = tuple(self.axes)
        if len(self.axes) != self.cost.dim:
            raise ConfigError(f"{len(self.axes)} axes configured for a {self.cost.dim}-dimensional cost")
        ks = [a.dither.k for a in self.axes]
        if len(set(ks)) != len(ks):
            raise ConfigError(f"dither frequency indices must be pairwise distinct, got {ks}")
        eps = self.axes[0].dither.eps
        if any(abs(a.dither.eps - eps) > 1e-15 * eps for a in self.axes):
            raise ConfigError("all dithers must share the same eps")
        if self.beta21 is None:
            self.beta21 = tuple(quad_beta21(a.dither) for a in self.axes)
        if self.box is None and self.cost.minimizer is not None:
            c = self.cost.minimizer
            self.box = (c - BOX_HALF_WIDTH, c + BOX_HALF_WIDTH)
        self._fv = [a.gen.values for a in self.axes]
        self._van = [a.gen.vanishing_at_min for a in self.axes]
        self._dith = [a.dither for a in self.axes]

    @property
    def dim(self):
        return self.cost.dim

    @property
    def eps(self):
        return self.axes[0].dither.eps

    @property
    def kmax(self):
        return max(a.dither.k for a in self.axes)

    def default_step(self):
        return self.eps / (STEPS_PER_PERIOD * self.kmax)

    def with_eps(self, eps):
        axes = tuple(Axis(a.gen, a.dither.with_eps(eps)) for a in self.axes)
        return EsSystem(self.cost, axes, None, self.z_floor, self.box)

    def shifted_cost(self, x):
        z = float(self.cost.shifted(x))
        if z < -TOL_BELOW_MIN * max(1.0, abs(self.cost.min_value)):
            raise ModelError(f"J(x) - J* = {z:.3g} < 0 at x = {np.asarray(x).tolist()}; "
                             "the declared minimum is wrong")
        return z

    def controls(self, t, x):
        """Per-axis control sum_s F_si(J~(x)) u_si(t)."""
        z = self.shifted_cost(x)
        t = float(t)
        out = np.empty(len(self.axes))
        for i in range(len(self.axes)):
            if self._van[i] and z <= self.z_floor:
                out[i] = 0.0
                continue
            u1, u2 = self._dith[i](t)
            f1, f2 = self._fv[i](z)
            out[i] = f1 * u1 + f2 * u2
        return out

    def field(self, t, x):
        return self.controls(t, x)

    def averaged(self, t, x):
        z = self.shifted_cost(x)
        g = self.cost.grad(x)
        return np.array([-self.beta21[i] * g[i] * a.gen.f0(z) for i, a in enumerate(self.axes)])

    def channels(self):
        from .lie import channel_functions
        return channel_functions(self.cost, [a.gen for a in self.axes])


def es_field(sys, t, x):
    return sys.field(t, np.asarray(x, dtype=float))


def lie_field(sys, x):
    return sys.averaged(0.0, np.asarray(x, dtype=float))


@dataclass
class VibSystem:
    """x' = f(x) + g(x) [F1(V) u1(t) + 2 alpha F2(V) u2(t)] with V the control Lyapunov function."""

    drift: Callable
    input_field: Callable
    clf: CostProfile
    alpha: float
    gen: GeneratorPair
    dither: object
    beta21: Optional[float] = None
    box: Optional[tuple] = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if self.beta21 is None:
            self.beta21 = quad_beta21(self.dither)
        if self.box is None:
            c = np.zeros(self.clf.dim) if self.clf.minimizer is None else self.clf.minimizer
            self.box = (c - BOX_HALF_WIDTH, c + BOX_HALF_WIDTH)
        # scalar maps for one-dimensional states skip the array round trips
        fs, gs = getattr(self.drift, "scalar", None), getattr(self.input_field, "scalar", None)
        self._scalar = (fs, gs) if self.clf.dim == 1 and fs and gs else None

    @property
    def dim(self):
        return self.clf.dim

    @property
    def eps(self):
        return self.dither.eps

    def default_step(self):
        return self.dither.eps / (STEPS_PER_PERIOD * self.dither.k)

    def with_eps(self, eps):
        return replace(self, dither=self.dither.with_eps(eps), beta21=None)

    def controls(self, t, x):
        v = float(self.clf.shifted(x))
        if self.gen.vanishing_at_min and v <= Z_FLOOR:
            return np.zeros(1)
        u1, u2 = self.dither(float(t))
        f1, f2 = self.gen.values(v)
        return np.array([f1 * u1 + 2.0 * self.alpha * f2 * u2])

    def field(self, t, x):
        v = float(self.clf.func(x)) - self.clf.min_value
        if self.gen.vanishing_at_min and v <= Z_FLOOR:
            u = 0.0
        else:
            u1, u2 = self.dither(float(t))
            f1, f2 = self.gen.values(v)
            u = f1 * u1 + 2.0 * self.alpha * f2 * u2
        if self._scalar is not None:
            xv = float(x[0])
            return np.array([self._scalar[0](xv) + self._scalar[1](xv) * u])
        return self.drift(x) + self.input_field(x) * u

    def averaged(self, t, x):
        # bracket of F1(V) g and 2 alpha F2(V) g is -2 alpha F0(V) L_gV g
        v = float(self.clf.shifted(x))
        g = np.asarray(self.input_field(x), dtype=float)
        lgv = float(np.dot(self.clf.grad(x), g))
        return np.asarray(self.drift(x), dtype=float) - \
            2.0 * self.alpha * self.beta21 * self.gen.f0(v) * lgv * g


def vib_field(sys, t, x, averaged=False):
    x = np.asarray(x, dtype=float)
    return sys.averaged(t, x) if averaged else sys.field(t, x)


# -- trajectories -----------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    cost_values: np.ndarray
    controls: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        n = len(self.times)
        states = np.asarray(self.states, dtype=float)
        controls = np.asarray(self.controls, dtype=float)
        self.cost_values = np.asarray(self.cost_values, dtype=float).reshape(-1)
        if not (len(states) == len(self.cost_values) == len(controls) == n):
            raise InputError("trajectory arrays have inconsistent lengths")
        self.states = states.reshape(n, -1)
        self.controls = controls.reshape(n, -1)
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise InputError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def final(self):
        return self.states[-1]

    def window(self, t0, t1):
        mask = (self.times >= t0 - 1e-12) & (self.times <= t1 + 1e-12)
        return mask

    def control_amplitude(self, t0, t1):
        m = self.window(t0, t1)
        return float(np.max(np.abs(self.controls[m]))) if np.any(m) else 0.0

    def to_csv(self, path=None):
        buf = io.StringIO()
        n, c = self.states.shape[1], self.controls.shape[1]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(n)] + ["J"] + [f"u{i + 1}" for i in range(c)])
        for t, x, j, u in zip(self.times, self.states, self.cost_values, self.controls):
            w.writerow([_fmt(t)] + [_fmt(v) for v in x] + [_fmt(j)] + [_fmt(v) for v in u])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise InputError(f"{path}: empty trajectory file")
        head = rows[0]
        if not head or head[0] != "t" or "J" not in head:
            raise InputError(f"{path}: header must start with t and contain J")
        j = head.index("J")
        try:
            data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(head))
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from None
        return cls(times=data[:, 0], states=data[:, 1:j], cost_values=data[:, j],
                   controls=data[:, j + 1:])


def _fmt(v):
    return format(float(v), ".17g")


# -- integration ------------------------------------------------------------

def rk4_step(f, t, x, h):
    k1 = f(t, x)
    k2 = f(t + 0.5 * h, x + (0.5 * h) * k1)
    k3 = f(t + 0.5 * h, x + (0.5 * h) * k2)
    k4 = f(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(field, x0, t_end, h, sample_stride=1, cost=None, controls=None, box=None):
    """Fixed-step classical RK4 from t = 0 to ``t_end``.

    Samples every ``sample_stride`` steps plus the final point.  A last short
    step is taken when ``h`` does not divide ``t_end``.
    """
    if not t_end > 0:
        raise ConfigError(f"t_end must be positive, got {t_end}")
    if not h > 0:
        raise ConfigError(f"step must be positive, got {h}")
    if int(sample_stride) != sample_stride or sample_stride < 1:
        raise ConfigError("sample_stride must be a positive integer")
    x = np.array(x0, dtype=float).reshape(-1)
    n_full = int(math.floor(t_end / h + 1e-9))
    rest = t_end - n_full * h
    steps = [h] * n_full
    if rest > 1e-9 * h:
        steps.append(rest)
    lo, hi = (None, None) if box is None else (np.asarray(box[0]), np.asarray(box[1]))
    times, states = [0.0], [x.copy()]
    t = 0.0
    total = len(steps)
    with np.errstate(over="ignore", invalid="ignore"):
        for i, hs in enumerate(steps):
            x_new = rk4_step(field, t, x, hs)
            t_new = (i + 1) * h if i < n_full else t_end
            if not math.isfinite(x_new.sum()):
                raise DivergenceError(f"non-finite state after t = {t:.6g}", t_last=t)
            if lo is not None and ((x_new < lo).any() or (x_new > hi).any()):
                raise EscapeError(f"state left the domain box at t = {t_new:.6g}", t_exit=t_new)
            x, t = x_new, t_new
            if (i + 1) % sample_stride == 0 or i + 1 == total:
                times.append(t)
                states.append(x.copy())
    states = np.array(states)
    if cost is not None:
        cv = np.array([float(cost(s)) for s in states])
    else:
        cv = np.full(len(times), np.nan)
    if controls is not None:
        cu = np.array([controls(tt, s) for tt, s in zip(times, states)])
    else:
        cu = np.zeros((len(times), 0))
    return Trajectory(times=np.array(times), states=states, cost_values=cv, controls=cu)


def simulate(sys, x0, t_end, h=None, sample_stride=1, averaged=False):
    """Integrate an EsSystem or VibSystem (or its averaged field) with the default step eps / (400 k_max)."""
    h = sys.default_step() if h is None else h
    f = sys.averaged if averaged else sys.field
    cost = sys.cost if isinstance(sys, EsSystem) else sys.clf
    ctrl = None if averaged else sys.controls
    traj = integrate(f, x0, t_end, h, sample_stride, cost=cost, controls=ctrl, box=sys.box)
    if averaged:
        traj.controls = np.zeros((len(traj), 0))
    traj.meta.update(eps=sys.eps, h=h, averaged=averaged)
    return traj


def sup_deviation(a, b):
    """max_t |x_a(t) - x_b(t)| over the common sample times of two trajectories."""
    if len(a) != len(b) or np.max(np.abs(a.times - b.times)) > 1e-9:
        raise InputError("trajectories are not sampled at the same times")
    return float(np.max(np.linalg.norm(a.states - b.states, axis=1)))
