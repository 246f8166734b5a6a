"""Finite differences for the drift equation Lap(u) + b . grad(u) = 0 on a disk.

The solver uses the 5-point Laplacian plus centered first differences for
the drift on a square grid masked to the disk B_kappa(0).  Unknowns are the
nodes strictly inside the disk; outside nodes adjacent to an unknown carry
Dirichlet data evaluated at their exact positions, so manufactured solutions
see no geometric boundary error and converge at second order.  The stencil
is an M-matrix when h * max|b| < 2, which also yields the discrete maximum
principle.

From a solution, phi = log|grad_h u|^2 is split as

    phi(z) = sum_j log|z - z_j|^2 + psi(z)

over the zeros z_j of the discrete gradient (located by winding numbers of
grad_h u around clusters of small-gradient nodes).  The module measures the
size of psi, the dyadic mean oscillation of grad psi, the small-scale
doubling of exp(psi), and the weak residual of the equation satisfied by
phi away from the critical set,

    Lap(phi) = -div( (b . grad u / |grad u|^2) grad u ).

`appendix_identity_residual` checks the pointwise algebraic identity behind
that equation: with v = |grad u|^2,

    2 v |D2u|^2 - 4 |D2u grad u|^2
        = -4 Lap(u) (D2u grad u) . grad u + 2 v (Lap u)^2

holds for every real 5-tuple (u_x, u_y, u_xx, u_xy, u_yy) in two dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse.linalg import spsolve

from .exceptions import (
    ConvergenceError,
    MaskOverlapError,
    StencilStabilityError,
    ZeroLocationMismatchError,
)

CRITICAL_CUTOFF_REL = 1e-12  # |grad_h u|^2 below this times the max is "critical"
CRITICAL_DILATION = 2        # cells to dilate the critical mask by


@dataclass(frozen=True)
class DriftProblem:
    """Dirichlet problem for Lap(u) + b . grad(u) = 0 on B_kappa(0).

    boundary: callable z -> values (vectorized); drift: callable z -> (bx, by)
    arrays or a constant 2-vector.
    """

    kappa: float
    n: int  # nodes per side on [-kappa, kappa]
    boundary: object
    drift: object = (0.0, 0.0)

    @property
    def h(self) -> float:
        return 2.0 * self.kappa / (self.n - 1)

    def nodes(self):
        c = np.linspace(-self.kappa, self.kappa, self.n)
        return c[:, None] + 1j * c[None, :]

    def drift_at(self, z):
        if callable(self.drift):
            return self.drift(z)
        bx, by = self.drift
        return np.full(z.shape, float(bx)), np.full(z.shape, float(by))


@dataclass(frozen=True)
class DriftSolution:
    problem: DriftProblem
    u: np.ndarray              # values on unknown + Dirichlet-ring nodes, NaN outside
    unknown_mask: np.ndarray
    ring_mask: np.ndarray
    residual: float            # relative algebraic residual of the linear solve

    @property
    def h(self) -> float:
        return self.problem.h

    def nodes(self):
        return self.problem.nodes()


def solve_drift(problem: DriftProblem, tol: float = 1e-9) -> DriftSolution:
    """Assemble and solve the drift stencil; checks the M-matrix condition."""
    z = problem.nodes()
    h = problem.h
    inside = np.abs(z) < problem.kappa
    bx, by = problem.drift_at(z)
    max_b = float(max(np.max(np.abs(bx)), np.max(np.abs(by))))
    if h * max_b >= 2.0:
        raise StencilStabilityError(
            f"h*max|b| = {h * max_b:.3f} >= 2; refine the grid or shrink the drift"
        )

    ring = ndimage.binary_dilation(inside) & ~inside
    n = problem.n
    idx = -np.ones((n, n), dtype=np.int64)
    idx[inside] = np.arange(int(inside.sum()))
    g = np.asarray(problem.boundary(z[ring]), dtype=float)

    rows, cols, vals = [], [], []
    rhs = np.zeros(int(inside.sum()))
    ii, jj = np.nonzero(inside)
    ring_values = np.full((n, n), np.nan)
    ring_values[ring] = g
    inv_h2 = 1.0 / (h * h)
    for di, dj, coef_fn in (
        (1, 0, lambda k: inv_h2 + bx[ii[k], jj[k]] / (2 * h)),
        (-1, 0, lambda k: inv_h2 - bx[ii[k], jj[k]] / (2 * h)),
        (0, 1, lambda k: inv_h2 + by[ii[k], jj[k]] / (2 * h)),
        (0, -1, lambda k: inv_h2 - by[ii[k], jj[k]] / (2 * h)),
    ):
        ni, nj = ii + di, jj + dj
        coef = np.array([coef_fn(k) for k in range(ii.size)])
        neigh_idx = idx[ni, nj]
        interior = neigh_idx >= 0
        rows.extend(idx[ii[interior], jj[interior]])
        cols.extend(neigh_idx[interior])
        vals.extend(coef[interior])
        bdry = ~interior
        rhs[idx[ii[bdry], jj[bdry]]] -= coef[bdry] * ring_values[ni[bdry], nj[bdry]]
    k_all = np.arange(ii.size)
    rows.extend(k_all)
    cols.extend(k_all)
    vals.extend(np.full(ii.size, -4.0 * inv_h2))

    A = sparse.csr_matrix((vals, (rows, cols)), shape=(ii.size, ii.size))
    sol = spsolve(A, rhs)
    denom = float(np.linalg.norm(rhs)) or 1.0
    resid = float(np.linalg.norm(A @ sol - rhs)) / denom
    if not np.all(np.isfinite(sol)) or resid > tol:
        raise ConvergenceError(f"linear solve residual {resid:.3e} above tol {tol}")

    u = np.full((n, n), np.nan)
    u[inside] = sol
    u[ring] = g
    return DriftSolution(problem=problem, u=u, unknown_mask=inside, ring_mask=ring, residual=resid)


def gradient_field(sol: DriftSolution):
    """Centered-difference gradient and its squared modulus.

    Returns (gx, gy, gsq, defined_mask); gradients exist where both
    neighbors carry values.
    """
    u = sol.u
    h = sol.h
    have = ~np.isnan(u)
    ok = np.zeros_like(have)
    ok[1:-1, 1:-1] = (
        have[1:-1, 1:-1] & have[2:, 1:-1] & have[:-2, 1:-1] & have[1:-1, 2:] & have[1:-1, :-2]
    )
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    with np.errstate(invalid="ignore"):
        gx[1:-1, 1:-1] = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * h)
        gy[1:-1, 1:-1] = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * h)
    gx[~ok] = 0.0
    gy[~ok] = 0.0
    return gx, gy, gx * gx + gy * gy, ok


def critical_mask(gsq: np.ndarray, defined: np.ndarray, rel_cutoff: float = CRITICAL_CUTOFF_REL):
    """Nodes where the discrete gradient is negligibly small (near-zeros)."""
    peak = float(gsq[defined].max()) if defined.any() else 0.0
    return defined & (gsq < rel_cutoff * peak)


def find_zeros(sol: DriftSolution, region_radius: float | None = None):
    """Zeros of grad_h u with multiplicities by winding number.

    Clusters of near-critical nodes are surrounded by a one-cell-dilated
    rectangle; the winding of F = u_x - i u_y along the loop counts the
    enclosed zeros with multiplicity.  Returns a list of (position, winding)
    with winding != 0.
    """
    gx, gy, gsq, ok = gradient_field(sol)
    crit = critical_mask(gsq, ok)
    if region_radius is not None:
        crit &= np.abs(sol.nodes()) <= region_radius
    if not crit.any():
        return []
    labels, count = ndimage.label(crit)
    F = gx - 1j * gy
    zeros = []
    z = sol.nodes()
    for lab in range(1, count + 1):
        sel = labels == lab
        ii, jj = np.nonzero(sel)
        i0, i1 = ii.min() - 1, ii.max() + 1
        j0, j1 = jj.min() - 1, jj.max() + 1
        if i0 < 0 or j0 < 0 or i1 >= sol.problem.n or j1 >= sol.problem.n:
            continue
        loop = _rect_loop(i0, i1, j0, j1)
        vals = np.array([F[i, j] for i, j in loop])
        if np.any(np.isnan(vals)) or np.any(vals == 0):
            continue
        args = np.angle(vals[1:] / vals[:-1])
        winding = int(round(float(np.sum(args)) / (2 * math.pi)))
        if winding != 0:
            centroid = complex(np.mean(z[sel]))
            zeros.append((centroid, winding))
    return zeros


def _rect_loop(i0, i1, j0, j1):
    loop = []
    loop += [(i, j0) for i in range(i0, i1 + 1)]
    loop += [(i1, j) for j in range(j0 + 1, j1 + 1)]
    loop += [(i, j1) for i in range(i1 - 1, i0 - 1, -1)]
    loop += [(i0, j) for j in range(j1 - 1, j0 - 1, -1)]
    loop.append((i0, j0))
    return loop


@dataclass(frozen=True)
class GradientLogField:
    """phi = log|grad_h u|^2 and its bounded part psi over the zero set."""

    phi: np.ndarray
    psi: np.ndarray
    defined_mask: np.ndarray     # off the dilated critical set, inside the disk
    critical: np.ndarray
    zeros: tuple


def build_gradient_log(sol: DriftSolution, zeros=None, region_radius: float | None = None) -> GradientLogField:
    """Split phi into the root potential and psi; verifies the reassembly.

    `zeros` overrides the winding-number detection (e.g. when the critical
    points are known analytically).  Raises ZeroLocationMismatchError when
    psi still carries a log singularity near a detected cluster.
    """
    gx, gy, gsq, ok = gradient_field(sol)
    crit = critical_mask(gsq, ok)
    dil = ndimage.binary_dilation(crit, iterations=CRITICAL_DILATION) if crit.any() else crit
    defined = ok & ~dil
    if region_radius is not None:
        defined &= np.abs(sol.nodes()) <= region_radius
    if zeros is None:
        zeros = find_zeros(sol, region_radius)
    z = sol.nodes()
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(ok, np.log(np.where(ok & (gsq > 0), gsq, 1.0)), np.nan)
        phi[ok & (gsq == 0.0)] = -np.inf
    pot = np.zeros_like(phi)
    for zj, m in zeros:
        d2 = np.abs(z - zj) ** 2
        with np.errstate(divide="ignore"):
            pot += m * np.log(d2)
    psi = np.where(defined, phi - pot, np.nan)
    vals = psi[defined]
    if vals.size:
        med = float(np.median(vals))
        if float(np.max(np.abs(vals - med))) > 25.0:
            raise ZeroLocationMismatchError(
                "psi spans more than e^25 after removing the listed zeros"
            )
    return GradientLogField(
        phi=phi, psi=psi, defined_mask=defined, critical=crit, zeros=tuple(zeros)
    )


def bmo_dyadic(vec_x: np.ndarray, vec_y: np.ndarray, defined: np.ndarray, min_cells: int = 4):
    """Dyadic mean-oscillation estimate of a vector field on the grid.

    Splits the index square dyadically; for each square fully inside the
    defined mask with at least min_cells^2 nodes, computes the mean of
    |V - mean(V)| and returns the maximum over squares.
    """
    n = vec_x.shape[0]
    best = 0.0
    size = n
    while size >= min_cells:
        for i0 in range(0, n - size + 1, size):
            for j0 in range(0, n - size + 1, size):
                sel = defined[i0 : i0 + size, j0 : j0 + size]
                if not sel.all():
                    continue
                vx = vec_x[i0 : i0 + size, j0 : j0 + size]
                vy = vec_y[i0 : i0 + size, j0 : j0 + size]
                dx = vx - vx.mean()
                dy = vy - vy.mean()
                osc = float(np.mean(np.hypot(dx, dy)))
                best = max(best, osc)
        size //= 2
    return best


@dataclass(frozen=True)
class PsiReport:
    max_abs_psi: float
    ratio_to_budget: float
    bmo_grad_psi: float
    small_scale_freq: float      # sup over sampled centers of the doubling of exp(psi)
    small_scale_radius: float
    small_scale_ok: bool         # <= 3/4
    zero_count: int
    inputs: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "lemma": "psi-bound-and-small-scale-doubling",
            "inputs": self.inputs,
            "measured": {
                "max_abs_psi": self.max_abs_psi,
                "ratio_to_budget": self.ratio_to_budget,
                "bmo_grad_psi": self.bmo_grad_psi,
                "small_scale_freq": self.small_scale_freq,
            },
            "threshold": 0.75,
            "pass": self.small_scale_ok,
        }


def psi_report(
    sol: DriftSolution,
    freq_budget: float,
    zeros=None,
    eps: float = 0.5,
    c_eps: float = 0.5,
    center_grid: int = 8,
) -> PsiReport:
    """Size, oscillation, and small-scale doubling of psi on the half disk."""
    kappa = sol.problem.kappa
    glog = build_gradient_log(sol, zeros=zeros, region_radius=kappa / 2.0)
    defined = glog.defined_mask
    vals = glog.psi[defined]
    max_abs = float(np.max(np.abs(vals)))

    h = sol.h
    psi_x = np.full_like(glog.psi, np.nan)
    psi_y = np.full_like(glog.psi, np.nan)
    ok_grad = np.zeros_like(defined)
    ok_grad[1:-1, 1:-1] = (
        defined[1:-1, 1:-1]
        & defined[2:, 1:-1] & defined[:-2, 1:-1]
        & defined[1:-1, 2:] & defined[1:-1, :-2]
    )
    with np.errstate(invalid="ignore"):
        psi_x[1:-1, 1:-1] = (glog.psi[2:, 1:-1] - glog.psi[:-2, 1:-1]) / (2 * h)
        psi_y[1:-1, 1:-1] = (glog.psi[1:-1, 2:] - glog.psi[1:-1, :-2]) / (2 * h)
    psi_x[~ok_grad] = 0.0
    psi_y[~ok_grad] = 0.0
    bmo = bmo_dyadic(psi_x, psi_y, ok_grad)

    r_small = c_eps / freq_budget ** (1.0 + eps)
    freq = _exp_psi_doubling_sup(sol, glog, r_small, center_grid)
    return PsiReport(
        max_abs_psi=max_abs,
        ratio_to_budget=max_abs / freq_budget,
        bmo_grad_psi=bmo,
        small_scale_freq=freq,
        small_scale_radius=r_small,
        small_scale_ok=bool(freq <= 0.75),
        zero_count=sum(abs(m) for _, m in glog.zeros),
        inputs={"freq_budget": freq_budget, "eps": eps, "c_eps": c_eps},
    )


def _exp_psi_doubling_sup(sol: DriftSolution, glog: GradientLogField, r: float, center_grid: int):
    """sup over sampled centers of log2-doubling of exp(2 psi) disk means."""
    from .frequency import frequency_ball_grid

    kappa = sol.problem.kappa
    origin = complex(-kappa, -kappa)
    exp2psi = np.where(glog.defined_mask, np.exp(2.0 * np.nan_to_num(glog.psi)), np.nan)
    # fill undefined nodes by nearest defined value so interpolation stays finite
    if np.isnan(exp2psi).any():
        ind = ndimage.distance_transform_edt(
            np.isnan(exp2psi), return_distances=False, return_indices=True
        )
        exp2psi = exp2psi[tuple(ind)]
    side = np.linspace(-kappa / 4.0, kappa / 4.0, center_grid)
    best = -np.inf
    for cx in side:
        for cy in side:
            val = frequency_ball_grid(exp2psi, origin, sol.h, complex(cx, cy), r, 512)
            best = max(best, val)
    return float(best)


def phi_weak_residual(sol: DriftSolution, test_functions, zeros=None) -> float:
    """Max over the bank of |int grad(phi).grad(eta) - int V.grad(eta)| with
    V = (b . grad u / |grad u|^2) grad u, by grid quadrature off the critical set.

    Each test function is (eta(z), grad_eta(z) -> (ex, ey)) with support away
    from the dilated critical mask (MaskOverlapError otherwise).
    """
    z = sol.nodes()
    h = sol.h
    glog = build_gradient_log(sol, zeros=zeros)
    gx, gy, gsq, ok = gradient_field(sol)
    defined = glog.defined_mask
    phi_x = np.zeros_like(gx)
    phi_y = np.zeros_like(gy)
    okp = np.zeros_like(defined)
    okp[1:-1, 1:-1] = (
        defined[1:-1, 1:-1]
        & defined[2:, 1:-1] & defined[:-2, 1:-1]
        & defined[1:-1, 2:] & defined[1:-1, :-2]
    )
    with np.errstate(invalid="ignore"):
        phi_x[1:-1, 1:-1] = (glog.phi[2:, 1:-1] - glog.phi[:-2, 1:-1]) / (2 * h)
        phi_y[1:-1, 1:-1] = (glog.phi[1:-1, 2:] - glog.phi[1:-1, :-2]) / (2 * h)
    phi_x[~okp] = 0.0
    phi_y[~okp] = 0.0

    bx, by = sol.problem.drift_at(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(defined & (gsq > 0), (bx * gx + by * gy) / np.where(gsq > 0, gsq, 1.0), 0.0)
    Vx = factor * gx
    Vy = factor * gy

    crit_region = ~okp  # nodes where phi gradients are unavailable
    worst = 0.0
    for eta_fn, grad_fn in test_functions:
        ex, ey = grad_fn(z)
        support = (np.abs(ex) > 0) | (np.abs(ey) > 0) | (np.abs(np.asarray(eta_fn(z))) > 0)
        if np.any(support & crit_region):
            raise MaskOverlapError("test function touches the unresolved critical region")
        lhs = float(np.sum((phi_x * ex + phi_y * ey)[support]) * h * h)
        rhs = float(np.sum((Vx * ex + Vy * ey)[support]) * h * h)
        worst = max(worst, abs(lhs - rhs))
    return worst


def bump_test_function(center: complex, radius: float):
    """C^2 compactly supported bump (1 - t^2)^3 with analytic gradient."""

    def eta(z):
        t2 = (np.abs(z - center) / radius) ** 2
        return np.where(t2 < 1.0, (1.0 - t2) ** 3, 0.0)

    def grad(z):
        dx = z.real - center.real
        dy = z.imag - center.imag
        t2 = (dx * dx + dy * dy) / radius**2
        base = np.where(t2 < 1.0, -6.0 * (1.0 - t2) ** 2 / radius**2, 0.0)
        return base * dx, base * dy

    return eta, grad


def appendix_identity_residual(u_x, u_y, u_xx, u_xy, u_yy):
    """LHS - RHS of the two-dimensional gradient-log identity (zero for all reals).

    LHS = 2 v |D2u|^2 - 4 |D2u grad u|^2, RHS = -4 Lap(u) (D2u grad u).grad u
    + 2 v (Lap u)^2, with v = |grad u|^2.  Inputs may be ndarrays.
    """
    v = u_x * u_x + u_y * u_y
    hess_sq = u_xx * u_xx + 2.0 * u_xy * u_xy + u_yy * u_yy
    wx = u_xx * u_x + u_xy * u_y
    wy = u_xy * u_x + u_yy * u_y
    lap = u_xx + u_yy
    lhs = 2.0 * v * hess_sq - 4.0 * (wx * wx + wy * wy)
    rhs = -4.0 * lap * (wx * u_x + wy * u_y) + 2.0 * v * lap * lap
    return lhs - rhs


def appendix_identity_scale(u_x, u_y, u_xx, u_xy, u_yy):
    """Magnitude scale of the identity's terms, for relative residuals."""
    v = u_x * u_x + u_y * u_y
    hess_sq = u_xx * u_xx + 2.0 * u_xy * u_xy + u_yy * u_yy
    wx = u_xx * u_x + u_xy * u_y
    wy = u_xy * u_x + u_yy * u_y
    lap = u_xx + u_yy
    return (
        np.abs(2.0 * v * hess_sq)
        + 4.0 * (wx * wx + wy * wy)
        + np.abs(4.0 * lap * (wx * u_x + wy * u_y))
        + np.abs(2.0 * v * lap * lap)
        + 1e-300
    )
