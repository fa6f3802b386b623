"""Lie derivatives of the per-channel vector fields ``F_si(J~(x)) e_i`` by nested central differences."""

import numpy as np


def channel_functions(cost, gens):
    """Scalar channel functions phi_c(x) = F_si(J(x) - J*), ordered (1,axis0), (2,axis0), (1,axis1), ...

    Returns a list of ``(axis, fn)`` pairs; the vector field of channel c is ``fn(x) e_axis``.
    """
    out = []
    for i, g in enumerate(gens):
        for f in (g.f1, g.f2):
            out.append((i, _compose(f, cost)))
    return out


def _compose(f, cost):
    def phi(x):
        return float(f(float(cost.shifted(x))))
    return phi


def lie_terms(channels, x, center=None, rel_step=1e-4):
    """First- and second-order Lie derivative magnitudes at ``x``.

    Returns ``(grad_norms, first, second)`` with
      grad_norms[a]      = |grad phi_a(x)|,
      first[a, b]        = |L_{f_b} f_a (x)|        = |d_{i_b} phi_a| |phi_b|,
      second[a, b, c]    = |L_{f_c} L_{f_b} f_a (x)| = |d_{i_c}(d_{i_b} phi_a phi_b)| |phi_c|.
    The difference step scales with the distance to ``center`` so that fields
    with structure on the scale of that distance are resolved.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if center is not None:
        scale = float(np.clip(np.linalg.norm(x - center), 1e-8, 1.0))
    else:
        scale = max(1.0, float(np.linalg.norm(x)))
    h = rel_step * scale
    eye = np.eye(n) * h
    C = len(channels)

    def d(fn, y, axis):
        return (fn(y + eye[axis]) - fn(y - eye[axis])) / (2 * h)

    phi = np.array([fn(x) for _, fn in channels])
    grads = np.array([[d(fn, x, j) for j in range(n)] for _, fn in channels])
    grad_norms = np.linalg.norm(grads, axis=1)
    first = np.empty((C, C))
    second = np.empty((C, C, C))
    for a, (_, fa) in enumerate(channels):
        for b, (ib, fb) in enumerate(channels):
            first[a, b] = abs(grads[a, ib] * phi[b])

            def g(y, fa=fa, fb=fb, ib=ib):
                return d(fa, y, ib) * fb(y)
            for c, (ic, _) in enumerate(channels):
                second[a, b, c] = abs(d(g, x, ic) * phi[c])
    return grad_norms, first, second
