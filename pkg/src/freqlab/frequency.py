"""Frequency (doubling index) of harmonic gradients.

For a nonconstant harmonic u the frequency at center x and scale r is

    N(x, r) = log2( mean_{B_2r(x)} |grad u|^2 / mean_{B_r(x)} |grad u|^2 ),

computed here three ways: by polar product quadrature on |F|^2 where
F = u_x - i u_y (`frequency_ball`), exactly from the homogeneous expansion
coefficients (`frequency_series`), and in the coarser sup/inf form used for
polynomial estimates (`frequency_supinf`).  Base-2 logarithms throughout,
so a gradient vanishing to order j at x has N >= 2j - 2 at every scale.

All disk averages run in the log domain, so fields like exp(40 z) on large
disks never overflow; an average below the positive-double floor raises
DegenerateDenominatorError instead of returning +/-inf.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .exceptions import AllZeroCoefficientsError, DegenerateDenominatorError
from .fields import HoloField, SeriesRep, log_abs_F, make_field

LN2 = math.log(2.0)

# averages of |F|^2 below exp(AVG_LOG_FLOOR) are treated as underflowed
AVG_LOG_FLOOR = math.log(1e-300)


@lru_cache(maxsize=32)
def polar_rule(n_radial: int, n_angular: int):
    """Unit-disk product rule: Gauss-Legendre radial x uniform angular.

    Returns (offsets, log_weights) with sum(weights) == 1, so that
    mean_{B_1} f ~= sum_k w_k f(offsets_k).  Scale offsets by r for B_r.
    """
    x, w = np.polynomial.legendre.leggauss(n_radial)
    rho = 0.5 * (x + 1.0)
    w_rad = 0.5 * w * 2.0 * rho  # jacobian of the normalized disk average
    theta = 2.0 * np.pi * np.arange(n_angular) / n_angular
    offsets = (rho[:, None] * np.exp(1j * theta)[None, :]).ravel()
    weights = np.repeat(w_rad / n_angular, n_angular)
    return offsets, np.log(weights)


def _split_quad_points(quad_points: int):
    n = max(8, int(math.isqrt(int(quad_points))))
    return n, n


def _log_mean_sq(fld: HoloField, x: complex, r: float, offsets, log_w):
    """log of mean_{B_r(x)} |F|^2 via the supplied unit-disk rule."""
    vals = 2.0 * log_abs_F(fld, x + r * offsets)
    return float(logsumexp(vals + log_w))


def frequency_ball(fld: HoloField, x, r, quad_points: int = 4096) -> float:
    """Quadrature frequency N(x, r) of the field's harmonic potential."""
    if r <= 0:
        raise ValueError("r must be positive")
    if quad_points < 64:
        raise ValueError("quad_points must be >= 64")
    nr, na = _split_quad_points(quad_points)
    offsets, log_w = polar_rule(nr, na)
    inner = _log_mean_sq(fld, complex(x), float(r), offsets, log_w)
    if not inner > AVG_LOG_FLOOR:
        raise DegenerateDenominatorError(
            f"inner average underflowed at x={x}, r={r} (log mean {inner:.1f})"
        )
    outer = _log_mean_sq(fld, complex(x), 2.0 * float(r), offsets, log_w)
    return (outer - inner) / LN2


def frequency_series(rep: SeriesRep, r) -> float:
    """Exact frequency from expansion coefficients:

    N(r) = log2( sum_d 2^(2d-2) d a_d^2 r^(2d) / sum_d d a_d^2 r^(2d) ).
    """
    if r <= 0:
        raise ValueError("r must be positive")
    a = np.asarray(rep.coeffs, dtype=float)
    if not np.any(a != 0.0):
        raise AllZeroCoefficientsError("all series coefficients vanish")
    d = np.arange(1, a.size + 1, dtype=float)
    # work with log terms for stability at large degree/scale
    with np.errstate(divide="ignore"):
        log_t = np.log(d) + 2.0 * np.log(np.abs(a)) + 2.0 * d * math.log(r)
    finite = np.isfinite(log_t)
    log_num = logsumexp(log_t[finite] + (2.0 * d[finite] - 2.0) * LN2)
    log_den = logsumexp(log_t[finite])
    return (log_num - log_den) / LN2


def frequency_supinf(fld: HoloField, x, r, n_radial: int = 24, n_angular: int = 256) -> float:
    """log2( sup_{B_2r(x)} |F|^2 / inf_{B_r(x)} |F|^2 ) on a radial-angular sample.

    The sample includes the center and the bounding circles; for entire F the
    true extrema sit on the circles, so the sample density mainly controls
    the angular resolution.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    x = complex(x)
    rho = np.linspace(0.0, 1.0, n_radial + 1)
    theta = np.exp(2j * np.pi * np.arange(n_angular) / n_angular)
    pts = (rho[:, None] * theta[None, :]).ravel()
    sup_log = float(np.max(log_abs_F(fld, x + 2.0 * r * pts)))
    inf_log = float(np.min(log_abs_F(fld, x + r * pts)))
    # a listed root inside the inner disk forces a true zero infimum
    for zj, _ in fld.roots:
        if abs(zj - x) <= r:
            inf_log = -np.inf
    if not 2.0 * inf_log > AVG_LOG_FLOOR:
        raise DegenerateDenominatorError(f"infimum underflowed at x={x}, r={r}")
    return 2.0 * (sup_log - inf_log) / LN2


def monotonicity_scan(rep: SeriesRep, r_grid, tol: float = 1e-9):
    """Adjacent-scale violations of N(r_{k+1}) >= N(r_k) - tol (expected empty)."""
    r_grid = np.asarray(r_grid, dtype=float)
    if np.any(np.diff(r_grid) <= 0):
        raise ValueError("r_grid must be strictly increasing")
    vals = np.array([frequency_series(rep, r) for r in r_grid])
    drops = vals[:-1] - vals[1:]
    bad = np.nonzero(drops > tol)[0]
    return [(float(r_grid[k]), float(r_grid[k + 1]), float(drops[k])) for k in bad]


def series_to_field(rep: SeriesRep) -> HoloField:
    """Convert the expansion to its holomorphic gradient in factored form.

    u = sum_d a_d Re((z - c)^d) has F(z) = sum_d d a_d (z - c)^(d-1); the
    polynomial is factored with numpy's eigenvalue root finder, which is
    accurate to rounding for the moderate degrees used here.
    """
    a = np.asarray(rep.coeffs, dtype=float)
    d = np.arange(1, a.size + 1, dtype=float)
    b = d * a  # F coefficients about the center, ascending
    nz = np.nonzero(np.abs(b) > 1e-13 * np.max(np.abs(b)))[0]
    b = b[: nz[-1] + 1]
    if b.size == 1:
        return make_field(roots=(), exp_poly=(0.0,), scale=b[0])
    roots = np.roots(b[::-1]) + rep.center
    return make_field(
        roots=[(z, 1) for z in roots], exp_poly=(0.0,), scale=b[-1]
    )


# -- grid-sampled fields -----------------------------------------------------


def frequency_ball_grid(values_sq, origin, h, x, r, quad_points: int = 1024) -> float:
    """Frequency of a grid-sampled squared-magnitude field |F|^2.

    `values_sq` holds nonnegative samples of |F|^2 with values_sq[i, j] at
    origin + h*(i + 1j*j); disk means use bilinear interpolation at the
    polar rule nodes.  Used for discrete solutions where no closed form of
    the gradient exists.
    """
    from scipy.ndimage import map_coordinates

    nr, na = _split_quad_points(quad_points)
    offsets, log_w = polar_rule(nr, na)
    w = np.exp(log_w)

    def disk_mean(radius):
        z = complex(x) + radius * offsets
        ci = (z.real - origin.real) / h
        cj = (z.imag - origin.imag) / h
        if ci.min() < 0 or cj.min() < 0 or ci.max() > values_sq.shape[0] - 1 or cj.max() > values_sq.shape[1] - 1:
            raise ValueError("quadrature disk leaves the sampled grid")
        vals = map_coordinates(values_sq, np.vstack([ci, cj]), order=1, mode="nearest")
        return float(np.sum(w * vals))

    inner = disk_mean(r)
    if not inner > 1e-300:
        raise DegenerateDenominatorError(f"inner grid average underflowed at x={x}, r={r}")
    return math.log2(disk_mean(2.0 * r) / inner)


def doubling_index_map(
    log_abs_fn, centers, r, n_radial: int = 8, n_angular: int = 32, chunk: int = 16384
):
    """Vectorized N(x, r) over an array of centers.

    `log_abs_fn(z_array) -> log|F|` must accept complex ndarrays.  Centers are
    processed in chunks against the full node set so the shifted-exponential
    reduction runs as a handful of large array operations per chunk.
    Returns (N, degenerate_mask); degenerate centers carry NaN.
    """
    centers = np.asarray(centers, dtype=complex).ravel()
    offsets, log_w = polar_rule(n_radial, n_angular)
    weights = np.exp(log_w)[:, None]

    def log_mean(radius, cs):
        vals = log_abs_fn(cs[None, :] + radius * offsets[:, None])
        vals *= 2.0
        m = vals.max(axis=0)
        ok = np.isfinite(m)
        with np.errstate(invalid="ignore"):
            s = (weights * np.exp(vals - np.where(ok, m, 0.0))).sum(axis=0)
        # the max node contributes a positive weight, so s > 0 wherever ok
        return np.where(ok, m + np.log(np.where(ok, s, 1.0)), -np.inf)

    n_out = np.empty(centers.shape, dtype=float)
    degenerate = np.zeros(centers.shape, dtype=bool)
    for start in range(0, centers.size, chunk):
        cs = centers[start : start + chunk]
        inner = log_mean(r, cs)
        bad = ~(inner > AVG_LOG_FLOOR)
        outer = log_mean(2.0 * r, cs)
        with np.errstate(invalid="ignore"):
            vals = (outer - inner) / LN2
        n_out[start : start + chunk] = np.where(bad, np.nan, vals)
        degenerate[start : start + chunk] = bad
    return n_out, degenerate


# -- profiles ----------------------------------------------------------------


@dataclass(frozen=True)
class FrequencyProfile:
    """Sampled N(x_i, r_j) with the method and quadrature resolution used."""

    centers: tuple[complex, ...]
    scales: tuple[float, ...]
    values: np.ndarray  # shape (len(centers), len(scales))
    method: str
    quad_points: int

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["center_re", "center_im", "scale", "N", "method"])
            for i, c in enumerate(self.centers):
                for j, r in enumerate(self.scales):
                    writer.writerow(
                        [f"{c.real:.17g}", f"{c.imag:.17g}", f"{r:.17g}",
                         f"{self.values[i, j]:.17g}", self.method]
                    )


def profile_ball(fld: HoloField, centers, scales, quad_points: int = 4096) -> FrequencyProfile:
    centers = [complex(c) for c in centers]
    scales = [float(r) for r in scales]
    vals = np.array([[frequency_ball(fld, c, r, quad_points) for r in scales] for c in centers])
    return FrequencyProfile(tuple(centers), tuple(scales), vals, "quadrature", quad_points)


def profile_series(rep: SeriesRep, scales) -> FrequencyProfile:
    scales = [float(r) for r in scales]
    vals = np.array([[frequency_series(rep, r) for r in scales]])
    return FrequencyProfile((rep.center,), tuple(scales), vals, "series", 0)
