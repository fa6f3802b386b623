"""Small arithmetic-expression evaluator for user-supplied costs and generators.

Expressions use ``+ - * / ^`` (``**`` also accepted), parentheses, numeric
literals, the constants ``pi`` and ``e``, and the functions
``sin cos exp ln sqrt abs``.  Parsing goes through :mod:`ast` and rejects
anything outside that whitelist, so the compiled callable is safe to run.
"""

import ast
import math

import numpy as np

from .errors import ConfigError

_FUNCS_NP = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "ln": np.log,
             "sqrt": np.sqrt, "abs": np.abs}
_FUNCS_MATH = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "ln": math.log,
               "sqrt": math.sqrt, "abs": abs}
_CONSTS = {"pi": math.pi, "e": math.e}

_ALLOWED_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name,
                  ast.Load, ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.Div,
                  ast.Pow, ast.USub, ast.UAdd)


class Expression:
    """A compiled expression in a fixed set of variables.

    Calling with scalars uses :mod:`math`; calling with arrays broadcasts via numpy.
    """

    def __init__(self, source, variables, params=None):
        self.source = source
        self.variables = tuple(variables)
        self.params = dict(params or {})
        text = source.replace("^", "**")
        try:
            tree = ast.parse(text.strip(), mode="eval")
        except SyntaxError as exc:
            col = (exc.offset or 0)
            raise ConfigError(f"cannot parse expression {source!r}: {exc.msg} "
                              f"(line {exc.lineno or 1}, column {col})") from None
        known = set(self.variables) | set(_CONSTS) | set(self.params)
        for node in ast.walk(tree):
            if not isinstance(node, _ALLOWED_NODES):
                raise ConfigError(f"unsupported syntax {type(node).__name__} in {source!r} "
                                  f"(column {getattr(node, 'col_offset', 0) + 1})")
            if isinstance(node, ast.Call):
                if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS_NP:
                    raise ConfigError(f"unknown function in {source!r} "
                                      f"(column {node.col_offset + 1})")
                if node.keywords or len(node.args) != 1:
                    raise ConfigError(f"functions take exactly one argument: {source!r}")
            elif isinstance(node, ast.Name):
                if node.id not in known and node.id not in _FUNCS_NP:
                    raise ConfigError(f"unknown name {node.id!r} in {source!r} "
                                      f"(column {node.col_offset + 1})")
            elif isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
                raise ConfigError(f"only numeric literals allowed in {source!r}")
        lam = ast.Expression(ast.Lambda(
            args=ast.arguments(posonlyargs=[], args=[ast.arg(arg=v) for v in self.variables],
                               kwonlyargs=[], kw_defaults=[], defaults=[]),
            body=tree.body))
        ast.fix_missing_locations(lam)
        code = compile(lam, f"<expr {source}>", "eval")
        base = {"__builtins__": {}, **_CONSTS, **self.params}
        self._scalar = eval(code, {**base, **_FUNCS_MATH})
        self._array = eval(code, {**base, **_FUNCS_NP})
        self._arity = len(self.variables)

    def __call__(self, *args):
        if len(args) != self._arity:
            raise TypeError(f"expected {self._arity} arguments, got {len(args)}")
        try:
            if self._arity == 1 and type(args[0]) is float:
                return self._scalar(args[0])
            if all(isinstance(a, (int, float)) for a in args):
                return self._scalar(*args)
            with np.errstate(all="ignore"):
                return self._array(*args)
        except (ValueError, ZeroDivisionError, OverflowError):
            return math.nan

    def __repr__(self):
        return f"Expression({self.source!r}, variables={self.variables})"


def state_variables(dim):
    """Variable names for a state of dimension ``dim``: x1..xn (plus x when n == 1)."""
    return tuple(f"x{i + 1}" for i in range(dim))


def state_function(source, dim, params=None):
    """Compile an expression in x1..xn into a map from a state vector to a float."""
    names = state_variables(dim)
    if dim == 1 and "x1" not in source:
        ex = Expression(source, ("x",), params)

        def fn(x):
            v = x[0] if isinstance(x, np.ndarray) and x.ndim == 1 else np.ravel(x)[0]
            return float(ex(float(v)))
    else:
        ex = Expression(source, names, params)

        def fn(x):
            xs = np.asarray(x, dtype=float).reshape(-1)
            return float(ex(*(float(v) for v in xs)))
    fn.expression = ex
    return fn
