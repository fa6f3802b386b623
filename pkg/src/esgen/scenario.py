"""INI scenario files: parsing, overrides and system construction.

Sections: ``[scenario]`` (name, mode = es | lie | vib), ``[cost]``,
``[generator]`` (or ``[generator.1]``, ``[generator.2]``, ... per axis),
``[dither]``, ``[run]``, and the optional ``[vib]``, ``[checks]``,
``[certificate]``.  See the bundled files in ``esgen/scenarios`` for examples.
"""

import configparser
import math
import os
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .costs import builtin_cost, expression_cost
from .dithers import DitherPair, SqrtOmegaDither
from .dynamics import Axis, EsSystem, VibSystem
from .errors import ConfigError
from .expr import Expression, state_function
from .generators import GeneratorPair, builtin_generator, from_f1_f0

MODES = ("es", "lie", "vib")
DITHER_KINDS = {"cont_eps": DitherPair, "sqrt_omega": SqrtOmegaDither}
SWEEP_PARAMS = ("eps", "x0", "alpha", "mu", "lambda")


@dataclass(frozen=True)
class GeneratorSpec:
    family: str = None
    params: tuple = ()
    f0: str = None
    f1: str = None
    f2: str = None
    z_ref: float = None
    domain: tuple = None
    shift: float = 0.0


@dataclass(frozen=True)
class Scenario:
    name: str
    mode: str
    cost: dict
    generators: tuple
    ks: tuple
    eps: float
    dither_kind: str
    x0: tuple
    t_end: float
    h: float = None
    sample_stride: int = 1
    vib: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    certificate: dict = field(default_factory=dict)
    path: str = None

    @property
    def dim(self):
        return len(self.x0)

    def override(self, param, value):
        """Copy with one parameter replaced (eps, x0, t_end, h, alpha, mu or lambda)."""
        if param == "eps":
            return replace(self, eps=_positive(float(value), "eps"))
        if param == "x0":
            x0 = tuple(np.atleast_1d(np.asarray(value, dtype=float)).tolist())
            if len(x0) != self.dim:
                raise ConfigError(f"x0 needs {self.dim} entries")
            return replace(self, x0=x0)
        if param == "t_end":
            return replace(self, t_end=_positive(float(value), "t_end"))
        if param == "h":
            return replace(self, h=_positive(float(value), "h"))
        if param in ("alpha", "mu"):
            if self.mode != "vib":
                raise ConfigError(f"parameter {param!r} only applies to vib scenarios")
            return replace(self, vib={**self.vib, param: float(value)})
        if param == "lambda":
            return replace(self, checks={**self.checks, "descent_lambda": float(value)})
        raise ConfigError(f"unknown parameter {param!r}; expected one of {SWEEP_PARAMS}")


def _positive(v, what):
    if not v > 0:
        raise ConfigError(f"{what} must be positive, got {v}")
    return v


def _floats(text, what):
    if text is None or not str(text).strip():
        return ()
    try:
        return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{what}: expected a comma-separated list of numbers, got {text!r}") from None


def _float(sec, key, default=None, what=None):
    if key not in sec or not sec[key].strip():
        return default
    try:
        return float(sec[key])
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key}: expected a number, got {sec[key]!r}") from None


def bundled_names():
    root = resources.files("esgen") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def resolve(name_or_path):
    """A path to an existing file, or the name of a bundled scenario."""
    if os.path.exists(name_or_path):
        return str(name_or_path)
    res = resources.files("esgen") / "scenarios" / f"{name_or_path}.ini"
    if res.is_file():
        return str(res)
    raise ConfigError(f"no scenario file or bundled scenario named {name_or_path!r} "
                      f"(bundled: {', '.join(bundled_names())})")


def _parser():
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str  # keys are case-sensitive: Delta and delta differ
    return cp


def _parse_error(path, exc):
    if isinstance(exc, configparser.ParsingError):
        where = "; ".join(f"line {n}: {line}" for n, line in exc.errors)
        return ConfigError(f"cannot parse {path}: {where}")
    return ConfigError(f"cannot parse {path}: {exc}")


def load(name_or_path):
    path = resolve(name_or_path)
    with open(path) as fh:
        return loads(fh.read(), path)


def loads(text, path="<string>"):
    cp = _parser()
    try:
        cp.read_string(text, source=path)
    except configparser.Error as exc:
        raise _parse_error(path, exc) from None
    return parse(cp, path)


def _section(cp, name, required=True):
    if cp.has_section(name):
        return cp[name]
    if required:
        raise ConfigError(f"missing section [{name}]")
    return None


def _generator_spec(sec):
    if "family" in sec:
        return GeneratorSpec(family=sec["family"].strip(), params=_floats(sec.get("params"), "params"))
    if "f1" not in sec or "f0" not in sec:
        raise ConfigError(f"[{sec.name}] needs 'family', or expressions 'f1' and 'f0' (and 'f2' or 'z_ref')")
    if "f2" in sec:
        return GeneratorSpec(f0=sec["f0"], f1=sec["f1"], f2=sec["f2"])
    if "z_ref" not in sec or "domain" not in sec:
        raise ConfigError(f"[{sec.name}] constructing F2 needs 'z_ref' and 'domain'")
    dom = _floats(sec["domain"], "domain")
    if len(dom) != 2 or not dom[0] < dom[1]:
        raise ConfigError(f"[{sec.name}] domain must be 'lo, hi' with lo < hi")
    return GeneratorSpec(f0=sec["f0"], f1=sec["f1"], z_ref=_float(sec, "z_ref"), domain=dom,
                         shift=_float(sec, "shift", 0.0))


def parse(cp, path):
    head = _section(cp, "scenario")
    name = head.get("name", os.path.splitext(os.path.basename(path))[0]).strip()
    mode = head.get("mode", "es").strip()
    if mode not in MODES:
        raise ConfigError(f"[scenario] mode must be one of {MODES}, got {mode!r}")

    csec = _section(cp, "cost")
    if "builtin" in csec:
        cost = {"builtin": csec["builtin"].strip(), "params": _floats(csec.get("params"), "cost params")}
    elif "expression" in csec:
        cost = {"expression": csec["expression"], "dim": int(_float(csec, "dim", 1)),
                "minimizer": _floats(csec.get("minimizer"), "minimizer") or None,
                "min_value": _float(csec, "min_value", 0.0)}
    else:
        raise ConfigError("[cost] needs 'builtin' or 'expression'")

    run = _section(cp, "run")
    x0 = _floats(run.get("x0"), "x0")
    if not x0:
        raise ConfigError("[run] x0 is required")
    dim = len(x0)

    dsec = _section(cp, "dither")
    ks = tuple(int(k) for k in _floats(dsec.get("k", "1"), "k"))
    if any(k != kk for k, kk in zip(ks, _floats(dsec.get("k", "1"), "k"))):
        raise ConfigError("[dither] k must be integers")
    eps = _float(dsec, "eps")
    if eps is None:
        raise ConfigError("[dither] eps is required")
    kind = dsec.get("kind", "cont_eps").strip()
    if kind not in DITHER_KINDS:
        raise ConfigError(f"[dither] kind must be one of {sorted(DITHER_KINDS)}, got {kind!r}")

    n_axes = 1 if mode == "vib" else dim
    if len(ks) == 1 and n_axes > 1:
        raise ConfigError(f"[dither] k needs {n_axes} distinct entries for a {n_axes}-dimensional state")
    if len(ks) != n_axes:
        raise ConfigError(f"[dither] k has {len(ks)} entries, expected {n_axes}")
    if len(set(ks)) != len(ks):
        raise ConfigError(f"[dither] k entries must be pairwise distinct, got {list(ks)}")

    gens = []
    for i in range(n_axes):
        sec = cp[f"generator.{i + 1}"] if cp.has_section(f"generator.{i + 1}") else _section(cp, "generator")
        gens.append(_generator_spec(sec))

    vib = {}
    if mode == "vib":
        vsec = _section(cp, "vib")
        vib = {"drift": vsec.get("drift", "x"), "input": vsec.get("input", "mu"),
               "mu": _float(vsec, "mu", 1.0), "alpha": _float(vsec, "alpha", 1.0),
               "averaged": vsec.getboolean("averaged", False)}

    checks = {k: v for k, v in cp["checks"].items()} if cp.has_section("checks") else {}
    cert = {k: v for k, v in cp["certificate"].items()} if cp.has_section("certificate") else {}
    h = _float(run, "h")
    sc = Scenario(name=name, mode=mode, cost=cost, generators=tuple(gens), ks=ks,
                  eps=_positive(eps, "eps"), dither_kind=kind, x0=x0,
                  t_end=_positive(_float(run, "t_end", 10.0), "t_end"),
                  h=None if h is None else _positive(h, "h"),
                  sample_stride=int(_float(run, "sample_stride", 1)),
                  vib=vib, checks=_typed(checks), certificate=_typed(cert), path=path)
    if sc.sample_stride < 1:
        raise ConfigError("[run] sample_stride must be a positive integer")
    return sc


def _typed(d):
    out = {}
    for k, v in d.items():
        v = v.strip()
        try:
            out[k] = float(v)
        except ValueError:
            out[k] = {"true": True, "false": False}.get(v.lower(), v)
    return out


# -- construction -----------------------------------------------------------

def build_cost(sc):
    c = sc.cost
    if "builtin" in c:
        cost = builtin_cost(c["builtin"], c["params"])
    else:
        mz = c["minimizer"]
        cost = expression_cost(c["expression"], c["dim"],
                               None if mz is None else np.asarray(mz, dtype=float), c["min_value"])
    want = 1 if sc.mode == "vib" else sc.dim
    if sc.mode != "vib" and cost.dim != want:
        raise ConfigError(f"cost dimension {cost.dim} does not match x0 dimension {want}")
    if sc.mode == "vib" and cost.dim != sc.dim:
        raise ConfigError(f"control Lyapunov function dimension {cost.dim} does not match x0")
    return cost


def _zfun(source):
    ex = Expression(source, ("z",))
    return lambda z: float(ex(float(z)))


def build_generator(spec):
    if spec.family is not None:
        return builtin_generator(spec.family, spec.params)
    f0, f1 = _zfun(spec.f0), _zfun(spec.f1)
    if spec.f2 is not None:
        f2 = _zfun(spec.f2)
        vec = lambda g: lambda z: (g(float(z)) if isinstance(z, (int, float))  # noqa: E731
                                   else np.vectorize(g, otypes=[float])(np.asarray(z, dtype=float)))
        return GeneratorPair(name=f"expr:{spec.f1}", f0=vec(f0), f1=vec(f1), f2=vec(f2))
    return from_f1_f0(f1, f0, spec.z_ref, spec.domain, shift=spec.shift, name=f"expr:{spec.f1}")


def build_dither(sc, k, eps=None):
    return DITHER_KINDS[sc.dither_kind](k, sc.eps if eps is None else eps)


def _vector_field(source, dim, params):
    parts = [p for p in source.split(";") if p.strip()]
    if len(parts) != dim:
        raise ConfigError(f"vector field {source!r} needs {dim} ';'-separated components")
    fns = [state_function(p, dim, params) for p in parts]
    if dim == 1:
        ex = fns[0].expression

        def field(x):
            return np.array([float(ex(float(x[0])))])
        field.scalar = lambda v: float(ex(v))  # float -> float, used by 1-D fast paths
        return field
    return lambda x: np.array([fn(x) for fn in fns])


def build_system(sc):
    cost = build_cost(sc)
    gens = [build_generator(g) for g in sc.generators]
    if sc.mode == "vib":
        params = {"mu": sc.vib["mu"], "alpha": sc.vib["alpha"]}
        return VibSystem(drift=_vector_field(sc.vib["drift"], sc.dim, params),
                         input_field=_vector_field(sc.vib["input"], sc.dim, params),
                         clf=cost, alpha=sc.vib["alpha"], gen=gens[0],
                         dither=build_dither(sc, sc.ks[0]))
    if cost.minimizer is None:
        raise ConfigError("extremum seeking scenarios need a declared minimizer")
    axes = [Axis(g, build_dither(sc, k)) for g, k in zip(gens, sc.ks)]
    return EsSystem(cost, axes)


def x_star(sc, sys):
    if isinstance(sys, VibSystem):
        return np.zeros(sc.dim) if sys.clf.minimizer is None else sys.clf.minimizer
    return sys.cost.minimizer


def cert_value(sc, key, default=None):
    v = sc.certificate.get(key, default)
    if isinstance(v, str) and v.lower() in ("inf", "infinity"):
        return math.inf
    return v
