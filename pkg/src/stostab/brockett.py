"""The Brockett integrator randomized by Wiener feedback.

The deterministic plant is dx = g(x) u dt with control matrix

    g(x) = [[b1, 0], [0, b2], [b3 x2, -b4 x1]],

controllable for b1 != 0, b2 != 0, b1 b4 + b2 b3 != 0, yet not stabilizable
by any continuous state feedback.  Feeding back a Wiener process through
gains B(x) = (B1, B2) produces the single-channel diffusion
sigma(x) = g(x) B(x).  The gains used here scale with the squared
eigenvalues of H(x) = g(x)^T Hess(v2)(x) g(x) and with |x|^2, so noise acts
where the candidate v2 is concave down and switches off at the origin:

    B1 = k1 lam1(x)^2 |x|^2,        B2 = k2 lam2(x)^2 |x|^2 x3.

A smooth pre-feedback v cancels the first two components of the
Stratonovich-to-Ito drift correction, and the Sontag-type formula built on
v2 closes the loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .lyapunov import v2_gradient, v2_hessian, sontag_control
from .sde import ITO, SdeSystem

_E3 = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class SystemParams:
    """Plant gains b1..b4; the constructor enforces controllability."""

    b1: float
    b2: float
    b3: float
    b4: float

    def __post_init__(self):
        if self.b1 == 0.0:
            raise ValueError("b1 must be nonzero")
        if self.b2 == 0.0:
            raise ValueError("b2 must be nonzero")
        if self.b1 * self.b4 + self.b2 * self.b3 == 0.0:
            raise ValueError("b1*b4 + b2*b3 must be nonzero")


@dataclass(frozen=True)
class DiffusionDesign:
    """Gains k1, k2 of the noise design.

    Negative gains are rejected.  Zero gains are tolerated so the no-noise
    loop can be assembled as a negative control; a working design needs both
    strictly positive.
    """

    k1: float
    k2: float

    def __post_init__(self):
        if self.k1 < 0.0 or self.k2 < 0.0:
            raise ValueError("design gains must be nonnegative")


def g_matrix(p: SystemParams, x) -> np.ndarray:
    """Control matrix [[b1,0],[0,b2],[b3 x2, -b4 x1]], batched."""
    x = np.asarray(x, dtype=float)
    g = np.zeros(x.shape[:-1] + (3, 2))
    g[..., 0, 0] = p.b1
    g[..., 1, 1] = p.b2
    g[..., 2, 0] = p.b3 * x[..., 1]
    g[..., 2, 1] = -p.b4 * x[..., 0]
    return g


def controllability_rank(p: SystemParams, x) -> int:
    """Numerical rank of [g1, g2, [g1, g2]] at a single point.

    The Lie bracket [g1, g2] = (dg2/dx) g1 - (dg1/dx) g2 evaluates to the
    constant column (0, 0, -(b1 b4 + b2 b3)).  Rank uses SVD with tolerance
    1e-10 times the spectral norm.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (3,):
        raise ValueError("controllability_rank takes a single state")
    g = g_matrix(p, x)
    bracket = np.array([0.0, 0.0, -(p.b1 * p.b4 + p.b2 * p.b3)])
    m = np.column_stack([g[:, 0], g[:, 1], bracket])
    tol = 1e-10 * np.linalg.norm(m, 2)
    return int(np.linalg.matrix_rank(m, tol=tol))


def h_matrix(p: SystemParams, x) -> np.ndarray:
    """Symmetric 2x2 form H(x) = g^T Hess(v2) g, batched."""
    g = g_matrix(p, x)
    hess = v2_hessian(x)
    return np.einsum('...ji,...jk,...kl->...il', g, hess, g)


def eigs_sym2(h) -> tuple:
    """Closed-form eigenvalues of a symmetric 2x2, ascending."""
    h = np.asarray(h, dtype=float)
    if h.shape[-2:] != (2, 2):
        raise ValueError("expected trailing shape (2, 2)")
    if np.any(np.abs(h[..., 0, 1] - h[..., 1, 0])
              > 1e-9 * np.maximum(1.0, np.abs(h).max(axis=(-2, -1)))):
        raise ValueError("matrix is not symmetric")
    a = h[..., 0, 0]
    b = h[..., 0, 1]
    c = h[..., 1, 1]
    mid = 0.5 * (a + c)
    rad = np.sqrt((0.5 * (a - c)) ** 2 + b * b)
    return mid - rad, mid + rad


def diffusion_b(d: DiffusionDesign, p: SystemParams, x) -> tuple:
    """Noise gains (B1, B2) of the eigenvalue-scaled design."""
    x = np.asarray(x, dtype=float)
    lam1, lam2 = eigs_sym2(h_matrix(p, x))
    r2 = np.einsum('...i,...i->...', x, x)
    return d.k1 * lam1 ** 2 * r2, d.k2 * lam2 ** 2 * r2 * x[..., 2]


def sigma(p: SystemParams, d: DiffusionDesign, x) -> np.ndarray:
    """Single-channel diffusion sigma = g B."""
    x = np.asarray(x, dtype=float)
    b1v, b2v = diffusion_b(d, p, x)
    g = g_matrix(p, x)
    b = np.stack([b1v, b2v], axis=-1)
    return np.einsum('...ik,...k->...i', g, b)


def _lambda_gradients(p: SystemParams, x) -> tuple:
    # Central differences, step max(1e-6, 1e-6 |x_j|): the eigenvalues have no
    # tractable closed-form gradient away from the x1 = x2 = 0 plane.
    x = np.asarray(x, dtype=float)
    d1 = np.empty(x.shape)
    d2 = np.empty(x.shape)
    for j in range(3):
        h = np.maximum(1e-6, 1e-6 * np.abs(x[..., j]))
        xp = x.copy()
        xp[..., j] += h
        xm = x.copy()
        xm[..., j] -= h
        l1p, l2p = eigs_sym2(h_matrix(p, xp))
        l1m, l2m = eigs_sym2(h_matrix(p, xm))
        d1[..., j] = (l1p - l1m) / (2.0 * h)
        d2[..., j] = (l2p - l2m) / (2.0 * h)
    return d1, d2


def _pieces(p: SystemParams, d: DiffusionDesign, x):
    """One-pass evaluation of (g, B1, B2, sigma, grad B1, grad B2)."""
    x = np.asarray(x, dtype=float)
    g = g_matrix(p, x)
    lam1, lam2 = eigs_sym2(h_matrix(p, x))
    r2 = np.einsum('...i,...i->...', x, x)
    x3 = x[..., 2]
    b1v = d.k1 * lam1 ** 2 * r2
    b2v = d.k2 * lam2 ** 2 * r2 * x3
    b = np.stack([b1v, b2v], axis=-1)
    s = np.einsum('...ik,...k->...i', g, b)

    # Product rule on B: analytic in |x|^2 and x3, numeric in the eigenvalues.
    dl1, dl2 = _lambda_gradients(p, x)
    grad_b1 = d.k1 * (2.0 * lam1[..., None] * dl1 * r2[..., None]
                      + (lam1 ** 2)[..., None] * 2.0 * x)
    grad_b2 = d.k2 * (2.0 * lam2[..., None] * dl2 * (r2 * x3)[..., None]
                      + (lam2 ** 2)[..., None]
                      * (2.0 * x * x3[..., None] + r2[..., None] * _E3))
    return g, b1v, b2v, s, grad_b1, grad_b2


def sigma_jacobian(p: SystemParams, d: DiffusionDesign, x) -> np.ndarray:
    """d sigma/dx assembled by the product rule over g and B."""
    g, b1v, b2v, _, grad_b1, grad_b2 = _pieces(p, d, x)
    jb = np.stack([grad_b1, grad_b2], axis=-2)
    jac = np.einsum('...ik,...kj->...ij', g, jb)
    # x-dependence of g itself: sigma_3 = b3 x2 B1 - b4 x1 B2.
    jac[..., 2, 0] -= p.b4 * b2v
    jac[..., 2, 1] += p.b3 * b1v
    return jac


def prefeedback_v(p: SystemParams, d: DiffusionDesign, x) -> np.ndarray:
    """Pre-feedback v_i = -(1/(2 b_i)) (d sigma_i/dx) . sigma for i = 1, 2.

    Since sigma_i = b_i B_i, the b_i cancels and v_i = -(grad B_i . sigma)/2.
    Plugging u = v + u_c into the plant makes the Ito drift's first two
    components vanish identically, whatever the residual control u_c.
    """
    _, _, _, s, grad_b1, grad_b2 = _pieces(p, d, x)
    q1 = np.einsum('...j,...j->...', grad_b1, s)
    q2 = np.einsum('...j,...j->...', grad_b2, s)
    return np.stack([-0.5 * q1, -0.5 * q2], axis=-1)


def _drift_third(p: SystemParams, b1v, b2v):
    return 0.5 * (p.b2 * p.b3 - p.b1 * p.b4) * b1v * b2v


def randomized_drift(p: SystemParams, d: DiffusionDesign, x) -> np.ndarray:
    """Ito drift of the randomized loop before any residual control.

    Equals g v + (1/2)(d sigma/dx) sigma.  The gradient-of-B cross terms
    cancel exactly between the two summands, so the sum is assembled in the
    grouped form (0, 0, (1/2)(b2 b3 - b1 b4) B1 B2); evaluating the two
    summands separately and adding would pollute the third component with
    rounding noise of the order of the discarded cross terms, which grow
    fast with |x3|.
    """
    x = np.asarray(x, dtype=float)
    b1v, b2v = diffusion_b(d, p, x)
    out = np.zeros(x.shape)
    out[..., 2] = _drift_third(p, b1v, b2v)
    return out


def sontag_terms(p: SystemParams, d: DiffusionDesign, x) -> tuple:
    """(F, G, L_g v2) feeding the universal formula.

    F is the generator of v2 along the uncontrolled randomized loop (drift
    part plus noise trace); G = ||L_g v2||^2.
    """
    x = np.asarray(x, dtype=float)
    grad = v2_gradient(x)
    hess = v2_hessian(x)
    g = g_matrix(p, x)
    b1v, b2v = diffusion_b(d, p, x)
    b = np.stack([b1v, b2v], axis=-1)
    s = np.einsum('...ik,...k->...i', g, b)
    f_term = grad[..., 2] * _drift_third(p, b1v, b2v) \
        + 0.5 * np.einsum('...i,...ij,...j->...', s, hess, s)
    lg = np.einsum('...i,...ik->...k', grad, g)
    g_term = np.einsum('...k,...k->...', lg, lg)
    return f_term, g_term, lg


@dataclass(frozen=True, eq=False)
class ClosedLoop:
    """Assembled Ito loop: drift = randomized drift + g u_s, diffusion = sigma."""

    params: SystemParams
    design: DiffusionDesign
    sde: SdeSystem
    control: Callable


def closed_loop(p: SystemParams, d: DiffusionDesign) -> ClosedLoop:
    """Assemble the noise-stabilized loop.

    Raises ValueError naming the violated condition when the gain map does
    not vanish at the origin or the equilibrium is not preserved exactly.
    """
    zero = np.zeros(3)
    b10, b20 = diffusion_b(d, p, zero)
    if b10 != 0.0 or b20 != 0.0:
        raise ValueError("brockett6 violated: B(0) != 0 for this design")

    def drift(x):
        x = np.asarray(x, dtype=float)
        grad = v2_gradient(x)
        hess = v2_hessian(x)
        g = g_matrix(p, x)
        b1v, b2v = diffusion_b(d, p, x)
        b = np.stack([b1v, b2v], axis=-1)
        s = np.einsum('...ik,...k->...i', g, b)
        f3 = _drift_third(p, b1v, b2v)
        f_term = grad[..., 2] * f3 \
            + 0.5 * np.einsum('...i,...ij,...j->...', s, hess, s)
        lg = np.einsum('...i,...ik->...k', grad, g)
        g_term = np.einsum('...k,...k->...', lg, lg)
        u = sontag_control(f_term, g_term, lg)
        out = np.einsum('...ik,...k->...i', g, u)
        out[..., 2] += f3
        return out

    def diffusion(x):
        return sigma(p, d, x)

    def control(x):
        f_term, g_term, lg = sontag_terms(p, d, x)
        return sontag_control(f_term, g_term, lg)

    if np.any(drift(zero) != 0.0) or np.any(diffusion(zero) != 0.0):
        raise ValueError("closed loop does not preserve the origin exactly")
    sde = SdeSystem(3, drift, diffusion, ITO,
                    diffusion_jacobian=lambda x: sigma_jacobian(p, d, x))
    return ClosedLoop(p, d, sde, control)


# Radii of the shrinking-circle sequences in the design report.
CONTINUITY_RADII = (1e-1, 1e-2, 1e-3, 1e-4)


@dataclass(eq=False)
class DesignReport:
    """Named verdicts for a diffusion gain map.

    Condition names: ``brockett6`` (B vanishes at the origin), ``brockett7``
    (sign condition (b1 b4 - b2 b3) B1 B2 x3 >= 0), ``brockett8`` (gains do
    not vanish on the x1 = x2 = 0 axis away from the origin), and
    ``continuous1``/``continuous2`` (shrinking-radius limits that make the
    closed-loop control continuous at M and at the origin).
    """

    conditions: dict
    details: dict
    c1_sequence: tuple
    c2_sequence: tuple

    @property
    def passed(self) -> bool:
        return all(self.conditions.values())

    def failed(self) -> list:
        return [name for name, ok in self.conditions.items() if not ok]


def _nonincreasing(seq) -> bool:
    return bool(np.all(np.diff(seq) <= 0.0))


def check_design_conditions(p: SystemParams, d: DiffusionDesign, grid,
                            b_fn: Optional[Callable] = None,
                            n_angles: int = 16) -> DesignReport:
    """Check the gain-map conditions on a cloud of states.

    ``grid`` is either an object with a ``points()`` method (a grid
    specification) or a plain (N, 3) array; the points feed the sign
    condition, and their third coordinates provide the axis samples for the
    nonvanishing check.  ``b_fn`` (default: the eigenvalue-scaled design)
    maps states to (B1, B2) so stub designs can be audited with the same
    report.
    """
    if b_fn is None:
        b_fn = lambda pts: diffusion_b(d, p, pts)
    pts = np.asarray(grid.points() if hasattr(grid, "points") else grid,
                     dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("grid_points must have shape (N, 3)")
    conditions = {}
    details = {}

    b10, b20 = b_fn(np.zeros(3))
    conditions["brockett6"] = (b10 == 0.0) and (b20 == 0.0)
    details["brockett6"] = f"B(0) = ({b10:.3g}, {b20:.3g})"

    b1v, b2v = b_fn(pts)
    sign_expr = b1v * b2v * (p.b1 * p.b4 - p.b2 * p.b3) * pts[:, 2]
    worst = float(sign_expr.min()) if len(sign_expr) else 0.0
    conditions["brockett7"] = worst >= -1e-12
    details["brockett7"] = f"min (b1 b4 - b2 b3) B1 B2 x3 = {worst:.6g} over {len(pts)} points"

    axis_vals = np.unique(pts[:, 2])
    axis_vals = axis_vals[np.abs(axis_vals) > 1e-3]
    if len(axis_vals) == 0:
        conditions["brockett8"] = True
        details["brockett8"] = "no axis samples with |x3| > 1e-3 (vacuous)"
    else:
        m_pts = np.zeros((len(axis_vals), 3))
        m_pts[:, 2] = axis_vals
        b1m, b2m = b_fn(m_pts)
        conditions["brockett8"] = bool(np.all(np.abs(b1m) > 0.0)
                                       and np.all(np.abs(b2m) > 0.0))
        details["brockett8"] = (f"min |B1| = {np.abs(b1m).min():.3g}, "
                                f"min |B2| = {np.abs(b2m).min():.3g} on the axis")

    angles = 2.0 * np.pi * np.arange(n_angles) / n_angles
    c1_seq = []
    c2_seq = []
    for r in CONTINUITY_RADII:
        ring = np.stack([r * np.cos(angles), r * np.sin(angles),
                         np.full(n_angles, r)], axis=-1)
        b1r, b2r = b_fn(ring)
        c1_seq.append(float(np.abs(b1r * b2r * ring[:, 2]).max()))
        flat = ring.copy()
        flat[:, 2] = 0.0
        b1f, b2f = b_fn(flat)
        num = p.b1 ** 2 * b1f ** 2 + p.b2 ** 2 * b2f ** 2
        den = p.b1 ** 2 * flat[:, 0] ** 2 + p.b2 ** 2 * flat[:, 1] ** 2
        c2_seq.append(float((num / den).max()))
    conditions["continuous1"] = _nonincreasing(c1_seq) and c1_seq[-1] < 1e-6
    details["continuous1"] = "max |B1 B2 x3| by radius: " + \
        ", ".join(f"{v:.3g}" for v in c1_seq)
    conditions["continuous2"] = _nonincreasing(c2_seq) and c2_seq[-1] < 1e-6
    details["continuous2"] = "max |g B|^2/|g_12 x|^2 by radius: " + \
        ", ".join(f"{v:.3g}" for v in c2_seq)

    return DesignReport(conditions, details, tuple(c1_seq), tuple(c2_seq))
