"""Lyapunov candidates, their exact derivatives, the diffusion generator,
and the universal-formula feedback.

Two candidates for the integrator state (x1, x2, x3), writing
X = x1^2 + x2^2:

* ``v1`` = x1^2 + x2^2 + x3^2, the obvious quadratic.  Its control
  derivative vanishes identically on the plane M = {x1 = x2 = 0}, which is
  what obstructs a continuous stabilizer.
* ``v2`` = 2 x3^2 - (X/2)(1 + x3^2) + 2 (X/2)^(1 + x3^2/2), positive
  definite and shaped so that its Hessian restricted to M is
  diag(-(1+x3^2), -(1+x3^2), 4): concave down exactly where noise has to do
  the work.

All evaluators broadcast over leading batch axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

# Below this value of X = x1^2 + x2^2 the log-carrying terms are replaced by
# their X -> 0 limits.
X_GUARD = 1e-300

# |G| below this is treated as the exact G = 0 branch of the control law.
G_ZERO = 1e-300


def _coords(x):
    x = np.asarray(x, dtype=float)
    return x, x[..., 0], x[..., 1], x[..., 2]


def v1_eval(x):
    """The quadratic candidate x1^2 + x2^2 + x3^2."""
    x = np.asarray(x, dtype=float)
    return np.einsum('...i,...i->...', x, x)


def v1_gradient(x):
    return 2.0 * np.asarray(x, dtype=float)


def v1_hessian(x):
    x = np.asarray(x, dtype=float)
    return np.broadcast_to(2.0 * np.eye(3), x.shape[:-1] + (3, 3)).copy()


def v2_eval(x):
    """v2 = 2 x3^2 - (X/2)(1 + x3^2) + 2 (X/2)^(1 + x3^2/2)."""
    _, x1, x2, x3 = _coords(x)
    a = 0.5 * (x1 * x1 + x2 * x2)
    y = x3 * x3
    return 2.0 * y - a * (1.0 + y) + 2.0 * a ** (1.0 + 0.5 * y)


def v2_gradient(x):
    """Closed-form gradient of :func:`v2_eval`.

    The planar components are x_i (-(1+x3^2) + (2+x3^2) (X/2)^(x3^2/2)); the
    axial one is x3 (4 - X + 2 (X/2)^(1+x3^2/2) log(X/2)).  At X = 0 the
    power-log terms take their limit 0; the 0^0 corner (X = 0, x3 = 0) is
    defined as 1.  Both extensions leave the gradient continuous.
    """
    _, x1, x2, x3 = _coords(x)
    big_x = x1 * x1 + x2 * x2
    a = 0.5 * big_x
    y = x3 * x3
    p = 1.0 + 0.5 * y
    small = big_x < X_GUARD
    a_safe = np.where(small, 1.0, a)
    log_a = np.log(a_safe)
    pow_pm1 = np.where(small, np.where(y > 0.0, 0.0, 1.0), a_safe ** (p - 1.0))
    planar = -(1.0 + y) + 2.0 * p * pow_pm1
    pow_log = np.where(small, 0.0, a_safe ** p * log_a)
    axial = 4.0 - 2.0 * a + 2.0 * pow_log
    return np.stack([x1 * planar, x2 * planar, x3 * axial], axis=-1)


def v2_hessian(x):
    """Closed-form Hessian of :func:`v2_eval`.

    On X = 0 the evaluator returns diag(-(1+x3^2), -(1+x3^2), 4), the limit
    of the Hessian within that plane.  v2 is not C^2 across the origin (the
    transverse second derivative there is +1), so this is a choice: the
    within-plane continuation is the one the noise design relies on.
    """
    _, x1, x2, x3 = _coords(x)
    big_x = x1 * x1 + x2 * x2
    a = 0.5 * big_x
    y = x3 * x3
    p = 1.0 + 0.5 * y
    small = big_x < X_GUARD
    a_safe = np.where(small, 1.0, a)
    log_a = np.log(a_safe)
    a_pm1 = a_safe ** (p - 1.0)
    a_pm2 = a_safe ** (p - 2.0)
    a_p = a_safe ** p

    planar = -(1.0 + y) + 2.0 * p * a_pm1
    rank1 = 2.0 * p * (p - 1.0) * a_pm2          # coefficient of x_i x_j
    cross = 2.0 * x3 * (a_pm1 * (1.0 + p * log_a) - 1.0)

    h11 = np.where(small, -(1.0 + y), planar + rank1 * x1 * x1)
    h22 = np.where(small, -(1.0 + y), planar + rank1 * x2 * x2)
    h12 = np.where(small, 0.0, rank1 * x1 * x2)
    h13 = np.where(small, 0.0, x1 * cross)
    h23 = np.where(small, 0.0, x2 * cross)
    h33 = np.where(small, 4.0,
                   4.0 - 2.0 * a + 2.0 * a_p * log_a + 2.0 * y * a_p * log_a * log_a)

    row1 = np.stack([h11, h12, h13], axis=-1)
    row2 = np.stack([h12, h22, h23], axis=-1)
    row3 = np.stack([h13, h23, h33], axis=-1)
    return np.stack([row1, row2, row3], axis=-2)


def fd_gradient(value: Callable, x) -> np.ndarray:
    """Central differences of a scalar map, step max(1e-5, 1e-5 |x_i|)."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    comps = []
    for j in range(n):
        h = np.maximum(1e-5, 1e-5 * np.abs(x[..., j]))
        xp = x.copy()
        xp[..., j] += h
        xm = x.copy()
        xm[..., j] -= h
        comps.append((np.asarray(value(xp), float) - np.asarray(value(xm), float))
                     / (2.0 * h))
    return np.stack(comps, axis=-1)


def fd_hessian(value: Callable, x) -> np.ndarray:
    """Central second differences of a scalar map (same step policy).

    Diagonal entries use the three-point stencil, off-diagonal entries the
    four-point cross stencil; the result is symmetric by construction.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    v0 = np.asarray(value(x), float)
    hs = [np.maximum(1e-5, 1e-5 * np.abs(x[..., j])) for j in range(n)]

    def shifted(i, si, j=None, sj=0.0):
        y = x.copy()
        y[..., i] += si * hs[i]
        if j is not None:
            y[..., j] += sj * hs[j]
        return np.asarray(value(y), float)

    entries = [[None] * n for _ in range(n)]
    for i in range(n):
        entries[i][i] = (shifted(i, 1.0) - 2.0 * v0 + shifted(i, -1.0)) / hs[i] ** 2
        for j in range(i + 1, n):
            mixed = (shifted(i, 1.0, j, 1.0) - shifted(i, 1.0, j, -1.0)
                     - shifted(i, -1.0, j, 1.0) + shifted(i, -1.0, j, -1.0)) \
                    / (4.0 * hs[i] * hs[j])
            entries[i][j] = mixed
            entries[j][i] = mixed
    rows = [np.stack(entries[i], axis=-1) for i in range(n)]
    return np.stack(rows, axis=-2)


@dataclass(frozen=True)
class ScalarField:
    """Scalar field with value/gradient/hessian evaluators.

    The flags record whether each derivative evaluator is closed-form or a
    finite-difference fallback.
    """

    value: Callable
    gradient: Callable
    hessian: Callable
    analytic_gradient: bool = True
    analytic_hessian: bool = True


def v1_field() -> ScalarField:
    return ScalarField(v1_eval, v1_gradient, v1_hessian)


def v2_field() -> ScalarField:
    return ScalarField(v2_eval, v2_gradient, v2_hessian)


def field_from_value(value: Callable) -> ScalarField:
    """Wrap a bare scalar map with finite-difference derivatives."""
    return ScalarField(value,
                       lambda x: fd_gradient(value, x),
                       lambda x: fd_hessian(value, x),
                       analytic_gradient=False, analytic_hessian=False)


@dataclass(frozen=True, eq=False)
class GeneratorBreakdown:
    """Parts of the diffusion generator of a field V along an SDE.

    ``lf_v`` is grad V . f, ``trace_term`` is (1/2) sigma^T (Hess V) sigma,
    and ``lg_v`` (present only when a control matrix was supplied) is the row
    grad V . g awaiting a control.
    """

    lf_v: np.ndarray
    trace_term: np.ndarray
    lg_v: Optional[np.ndarray] = None

    def value(self, u=None):
        """Generator value for control u (default u = 0)."""
        total = self.lf_v + self.trace_term
        if u is not None:
            if self.lg_v is None:
                raise ValueError("no control row was computed for this breakdown")
            total = total + np.einsum('...k,...k->...', self.lg_v,
                                      np.asarray(u, float))
        return total


def generator(field: ScalarField, drift, diffusion, x,
              control_matrix=None) -> GeneratorBreakdown:
    """Evaluate the generator of ``field`` at x, split into its parts.

    ``drift`` and ``diffusion`` may be None, meaning identically zero.  The
    trace term uses the Ito-form diffusion; callers must convert Stratonovich
    systems first.
    """
    x = np.asarray(x, dtype=float)
    grad = np.asarray(field.gradient(x), float)
    zeros = np.zeros(x.shape[:-1])
    if drift is None:
        lf = zeros.copy()
    else:
        lf = np.einsum('...i,...i->...', grad, np.asarray(drift(x), float))
    if diffusion is None:
        trace = zeros.copy()
    else:
        s = np.asarray(diffusion(x), float)
        hess = np.asarray(field.hessian(x), float)
        trace = 0.5 * np.einsum('...i,...ij,...j->...', s, hess, s)
    lg = None
    if control_matrix is not None:
        lg = np.einsum('...i,...ik->...k', grad,
                       np.asarray(control_matrix(x), float))
    return GeneratorBreakdown(lf, trace, lg)


def sontag_control(f_term, g_term, lg_v) -> np.ndarray:
    """Universal formula u = -((F + sqrt(F^2 + G^2)) / G) lg_v^T, u = 0 at G = 0.

    ``g_term`` must equal ||lg_v||^2; consistency is checked to 1e-12
    relative and violations raise ValueError.  G below 1e-300 takes the
    exact-zero branch.
    """
    f_term = np.asarray(f_term, dtype=float)
    g_term = np.asarray(g_term, dtype=float)
    lg = np.asarray(lg_v, dtype=float)
    gg = np.einsum('...k,...k->...', lg, lg)
    if np.any(np.abs(g_term - gg) > 1e-12 * np.maximum(1.0, np.abs(g_term))):
        raise ValueError("g_term is inconsistent with lg_v . lg_v^T")
    zero = ~(g_term > G_ZERO)
    g_safe = np.where(zero, 1.0, g_term)
    factor = np.where(zero, 0.0,
                      (f_term + np.sqrt(f_term * f_term + g_term * g_term)) / g_safe)
    return -factor[..., None] * lg
