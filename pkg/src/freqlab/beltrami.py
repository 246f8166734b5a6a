"""Isothermal coordinates from Lipschitz metrics via the Beltrami equation.

A symmetric positive metric with components (E, F, G) deviates from
conformality by the Beltrami coefficient

    mu = (E - G + 2iF) / (E + G + 2 sqrt(EG - F^2)),        |mu| < 1,

and isothermal coordinates are a homeomorphic solution of
d/dzbar(omega) = mu * d/dz(omega).  With mu compactly supported and
sup|mu| < 1 the resolvent series converges and

    sigma = C [ (I - mu S)^(-1) dz(mu) ],   dz(omega) = e^sigma,
    dzbar(omega) = mu e^sigma,              omega = z + C[ mu e^sigma ],

where C and S are the Cauchy and Beurling transforms.  The solver resolves
h = (I - mu S)^(-1) dz(mu) by Neumann iteration h <- dz(mu) + mu S h, whose
discrete contraction factor is sup|mu|.  The reported residual is the
max-norm defect of dzbar(omega) = mu dz(omega) with
dz(omega) = 1 + S[mu e^sigma]; analytically e^sigma = 1 + S[mu e^sigma], so
the residual certifies the whole operator chain, not just the iteration.

The differential of omega in (z, zbar) coordinates is

    D omega = [[e^sigma, mu e^sigma], [conj(mu e^sigma), conj(e^sigma)]]

with eigenvalues Re(e^sigma) +/- sqrt(Re(e^sigma)^2 + (|mu|^2 - 1)|e^{2 sigma}|);
their moduli measure the bi-Lipschitz distortion of the coordinate change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError, DegenerateMetricError
from .fields import ComplexGridField
from .transforms import (
    PAD_FACTOR,
    beurling_transform,
    cauchy_transform,
    dz_spectral,
    grid_l2_norm,
)


@dataclass(frozen=True)
class MetricField:
    """Sampled symmetric positive-definite metric with its stated constants."""

    origin: complex
    h: float
    E: np.ndarray
    F_comp: np.ndarray
    G: np.ndarray
    ellipticity: float
    lipschitz: float

    @property
    def nx(self) -> int:
        return self.E.shape[0]

    @property
    def ny(self) -> int:
        return self.E.shape[1]

    def nodes(self):
        i = np.arange(self.nx)[:, None]
        j = np.arange(self.ny)[None, :]
        return self.origin + self.h * (i + 1j * j)

    def validate(self, tol: float = 1e-9):
        """Check positivity, eigenvalue range, and the discrete Lipschitz quotient."""
        det = self.E * self.G - self.F_comp**2
        if np.any(det <= 0):
            raise DegenerateMetricError("EG - F^2 <= 0 at some node")
        if np.any(self.E <= 0) or np.any(self.G <= 0):
            raise DegenerateMetricError("E or G nonpositive at some node")
        tr = self.E + self.G
        disc = np.sqrt(np.maximum(tr * tr - 4 * det, 0.0))
        lam_max = 0.5 * (tr + disc)
        lam_min = 0.5 * (tr - disc)
        lam = self.ellipticity
        if np.any(lam_max > lam * (1 + tol)) or np.any(lam_min < (1 / lam) * (1 - tol)):
            raise DegenerateMetricError("metric eigenvalues leave [1/lambda, lambda]")
        lip = metric_lipschitz(self)
        if lip > self.lipschitz * (1 + tol) + tol:
            raise DegenerateMetricError(
                f"discrete Lipschitz quotient {lip:.4g} exceeds stated {self.lipschitz}"
            )


def metric_lipschitz(metric: MetricField) -> float:
    """Max discrete Lipschitz quotient of the components between adjacent nodes."""
    worst = 0.0
    for comp in (metric.E, metric.F_comp, metric.G):
        if comp.shape[0] > 1:
            worst = max(worst, float(np.max(np.abs(np.diff(comp, axis=0)))) / metric.h)
        if comp.shape[1] > 1:
            worst = max(worst, float(np.max(np.abs(np.diff(comp, axis=1)))) / metric.h)
    return worst


def conformal_metric(origin, h, nx, ny, log_factor_fn, ellipticity, lipschitz) -> MetricField:
    """Metric e^{2 phi} I sampled from a callable phi; Beltrami coefficient zero."""
    i = np.arange(nx)[:, None]
    j = np.arange(ny)[None, :]
    z = complex(origin) + h * (i + 1j * j)
    factor = np.exp(2.0 * log_factor_fn(z))
    return MetricField(
        origin=complex(origin), h=float(h), E=factor, F_comp=np.zeros_like(factor),
        G=factor.copy(), ellipticity=ellipticity, lipschitz=lipschitz,
    )


def mu_from_metric(metric: MetricField) -> ComplexGridField:
    """Beltrami coefficient mu = (E - G + 2iF) / (E + G + 2 sqrt(EG - F^2))."""
    det = metric.E * metric.G - metric.F_comp**2
    if np.any(det <= 0):
        raise DegenerateMetricError("EG - F^2 <= 0 at some node")
    mu = (metric.E - metric.G + 2j * metric.F_comp) / (
        metric.E + metric.G + 2.0 * np.sqrt(det)
    )
    if np.any(np.abs(mu) >= 1.0):
        raise DegenerateMetricError("|mu| >= 1 at some node")
    return ComplexGridField(metric.origin, metric.h, mu)


@dataclass(frozen=True)
class ExtensionReport:
    field: ComplexGridField
    sup_before: float
    sup_after: float
    lipschitz_before: float
    lipschitz_after: float


def extend_mu(mu: ComplexGridField, eta: float, margin_cells: int = 4) -> ExtensionReport:
    """Extend mu from B_eta to a compactly supported field on a larger grid.

    Values inside B_eta are kept; on the annulus eta <= |z| <= 2 eta the
    boundary trace is continued radially with the linear ramp (2 - |z|/eta),
    and everything outside B_2eta is zero.  Requires mu(0) = 0 so the ramp
    cannot raise the sup norm.  The output grid keeps the spacing and covers
    B_2eta with `margin_cells` clear cells on each side.
    """
    h = mu.h
    half = 2.0 * eta + margin_cells * h
    n = 2 * int(math.ceil(half / h)) + 1
    origin = complex(-((n - 1) // 2) * h, -((n - 1) // 2) * h)
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    z = origin + h * (i + 1j * j)
    rad = np.abs(z)

    src_nodes = mu.nodes()
    interp_real = _bilinear(mu.values.real, mu.origin, h)
    interp_imag = _bilinear(mu.values.imag, mu.origin, h)

    out = np.zeros((n, n), dtype=complex)
    inner = rad < eta
    out[inner] = interp_real(z[inner]) + 1j * interp_imag(z[inner])
    ring = (rad >= eta) & (rad <= 2.0 * eta)
    zr = z[ring]
    trace_pts = eta * zr / np.abs(zr)
    ramp = 2.0 - np.abs(zr) / eta
    out[ring] = (interp_real(trace_pts) + 1j * interp_imag(trace_pts)) * ramp

    ext = ComplexGridField(origin, h, out)
    return ExtensionReport(
        field=ext,
        sup_before=float(np.max(np.abs(mu.values))),
        sup_after=float(np.max(np.abs(out))),
        lipschitz_before=_grid_lipschitz(mu.values, h),
        lipschitz_after=_grid_lipschitz(out, h),
    )


def _bilinear(arr: np.ndarray, origin: complex, h: float):
    from scipy.ndimage import map_coordinates

    def interp(z):
        z = np.asarray(z, dtype=complex).ravel()
        ci = (z.real - origin.real) / h
        cj = (z.imag - origin.imag) / h
        return map_coordinates(arr, np.vstack([ci, cj]), order=1, mode="nearest")

    return interp


def _grid_lipschitz(vals: np.ndarray, h: float) -> float:
    worst = 0.0
    if vals.shape[0] > 1:
        worst = max(worst, float(np.max(np.abs(np.diff(vals, axis=0)))) / h)
    if vals.shape[1] > 1:
        worst = max(worst, float(np.max(np.abs(np.diff(vals, axis=1)))) / h)
    return worst


@dataclass(frozen=True)
class BeltramiSolution:
    """Converged isothermal coordinate data on the mu grid."""

    mu: ComplexGridField
    sigma: ComplexGridField       # C[(I - mu S)^(-1) dz mu]; dz(omega) = e^sigma
    omega: ComplexGridField       # z + C[mu e^sigma]
    neumann_iters: int
    residual: float               # max |dzbar(omega) - mu dz(omega)|

    @property
    def sigma_sup(self) -> float:
        return float(np.max(np.abs(self.sigma.values)))


def solve_beltrami(
    mu: ComplexGridField,
    tol: float = 1e-10,
    max_iters: int = 60,
    mu_max: float = 0.5,
    pad: int = PAD_FACTOR,
) -> BeltramiSolution:
    """Solve dzbar(omega) = mu dz(omega) for compactly supported mu.

    Raises ConvergenceError when the Neumann increments are still above tol
    after max_iters sweeps; sup|mu| must stay below mu_max (< 1).
    """
    sup_mu = float(np.max(np.abs(mu.values)))
    if sup_mu >= min(mu_max, 1.0):
        raise ValueError(f"sup|mu| = {sup_mu:.4g} not below mu_max = {mu_max}")
    if sup_mu == 0.0:
        zero = ComplexGridField(mu.origin, mu.h, np.zeros_like(mu.values))
        omega = ComplexGridField(mu.origin, mu.h, mu.nodes())
        return BeltramiSolution(mu=mu, sigma=zero, omega=omega, neumann_iters=0, residual=0.0)

    dmu = dz_spectral(mu, pad)
    # the true dz(mu) vanishes off supp(mu); masking strips spectral ringing
    # so every Neumann iterate stays compactly supported
    dmu = ComplexGridField(mu.origin, mu.h, dmu.values * (mu.values != 0))
    h_field = dmu.values.copy()
    scale = grid_l2_norm(dmu) or 1.0
    iters = 0
    converged = False
    while iters < max_iters:
        s_h = beurling_transform(ComplexGridField(mu.origin, mu.h, h_field), pad)
        new_h = dmu.values + mu.values * s_h.values
        change = float(np.sqrt(np.sum(np.abs(new_h - h_field) ** 2)) * mu.h) / scale
        h_field = new_h
        iters += 1
        if change < tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"Neumann iteration change {change:.3e} above tol {tol} after {iters} sweeps"
        )

    sigma = cauchy_transform(ComplexGridField(mu.origin, mu.h, h_field), pad)
    e_sigma = np.exp(sigma.values)
    flux = ComplexGridField(mu.origin, mu.h, mu.values * e_sigma)
    omega_vals = mu.nodes() + cauchy_transform(flux, pad).values
    dz_omega = 1.0 + beurling_transform(flux, pad).values
    residual = float(np.max(np.abs(flux.values - mu.values * dz_omega)))
    return BeltramiSolution(
        mu=mu,
        sigma=sigma,
        omega=ComplexGridField(mu.origin, mu.h, omega_vals),
        neumann_iters=iters,
        residual=residual,
    )


@dataclass(frozen=True)
class EigenvalueReport:
    """Moduli of the eigenvalues of D omega over a disk of interest."""

    min_modulus: float
    max_modulus: float
    flagged_nodes: int
    nodes_checked: int

    @property
    def within_bounds(self) -> bool:
        return self.flagged_nodes == 0


def differential_check(
    sol: BeltramiSolution, eta: float, lower: float = 0.5, upper: float = 2.0
) -> EigenvalueReport:
    """Eigenvalue moduli of D omega over B_eta, flagged outside [lower, upper].

    Uses Re(e^sigma) +/- sqrt(Re(e^sigma)^2 + (|mu|^2 - 1) |e^{2 sigma}|);
    a negative discriminant gives the conjugate pair of modulus
    |e^sigma| sqrt(1 - |mu|^2).
    """
    nodes = sol.mu.nodes()
    sel = np.abs(nodes) <= eta
    mu = sol.mu.values[sel]
    e_sig = np.exp(sol.sigma.values[sel])
    re = e_sig.real
    disc = re**2 + (np.abs(mu) ** 2 - 1.0) * np.abs(e_sig) ** 2
    sq = np.sqrt(disc.astype(complex))
    lam1 = np.abs(re + sq)
    lam2 = np.abs(re - sq)
    mods = np.concatenate([lam1, lam2])
    flagged = int(np.count_nonzero((mods < lower) | (mods > upper)))
    return EigenvalueReport(
        min_modulus=float(mods.min()),
        max_modulus=float(mods.max()),
        flagged_nodes=flagged,
        nodes_checked=int(mods.size // 2),
    )


# -- synthetic metric families -------------------------------------------------


def bump_metric(eta: float, n: int, strength: float, support_fraction: float = 0.8) -> MetricField:
    """Smooth compactly supported perturbation of the identity on B_eta.

    g = I + s * phi(|z| / (f * eta)) * [[x, y], [y, -x]] with phi a
    C-infinity bump; g(0) = I, the slope (hence the Lipschitz constant) is
    set by s alone, and sup|mu| grows like s * eta, so families over eta
    probe the linear growth of the coordinate-change correction.
    """
    h = 2.2 * eta / (n - 1)
    origin = complex(-1.1 * eta, -1.1 * eta)
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    z = origin + h * (i + 1j * j)
    rho = np.abs(z) / (support_fraction * eta)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        bump = np.where(rho < 1.0, np.exp(1.0 - 1.0 / np.maximum(1.0 - rho**2, 1e-300)), 0.0)
    px = strength * bump * z.real
    py = strength * bump * z.imag
    E = 1.0 + px
    G = 1.0 - px
    F = py
    lam = float(1.0 / (1.0 - np.max(np.abs(px) + np.abs(py))) + 1e-9)
    return MetricField(
        origin=origin, h=h, E=E, F_comp=F, G=G,
        ellipticity=lam, lipschitz=_grid_lipschitz(px + 1j * py, h) + 1e-9,
    )
