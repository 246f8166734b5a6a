"""Level-set geometry: superlevel volumes, Cartan covers, Hausdorff content,
weak-L2 quasinorms, and propagation-of-smallness measurements.

The superlevel estimator counts grid cells whose center frequency exceeds a
threshold; transparent cell counting keeps the estimate monotone under
refinement, with the one-cell boundary layer as the only systematic error.
Cartan covers follow the classical constructive argument: with n roots and
clearance parameter a, repeatedly take the largest k admitting a disk of
radius k/n * e * exp(-a/n) that holds k of the remaining roots, and emit the
concentric disk of twice that radius.  Outside the doubled disks the sorted
distances d_1 <= ... <= d_n to the roots satisfy d_s > s/n * e * exp(-a/n),
so the product of distances exceeds exp(-a): the emitted balls cover the
sublevel set {|P| < exp(-a)} in full.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .exceptions import NormalizationError, ResolutionError
from .fields import HoloField, eval_F, log_abs_F
from .frequency import LN2, doubling_index_map, polar_rule

# circumscribed ball radius over half the dyadic square side
CIRCUMSCRIPTION_FACTOR = math.sqrt(2.0)


# -- superlevel volumes ------------------------------------------------------


@dataclass(frozen=True)
class SuperlevelResult:
    """Cell-counted area of {x in window : N(x, r) > threshold}."""

    threshold: float
    scale: float
    area_estimate: float
    h: float
    degenerate_cells: int
    cells_in_window: int
    cells_above: int
    window_center: complex = 0j
    window_radius: float = 0.5

    @property
    def window_area(self) -> float:
        return math.pi * self.window_radius**2


def window_cells(center: complex, radius: float, h: float):
    """Centers of the h-cells whose midpoint lies in the disk window."""
    n = int(math.ceil(2.0 * radius / h))
    idx = np.arange(n)
    xs = center.real - radius + (idx + 0.5) * h
    ys = center.imag - radius + (idx + 0.5) * h
    zz = xs[:, None] + 1j * ys[None, :]
    return zz.ravel()[np.abs(zz.ravel() - center) <= radius]


def superlevel_volume(
    log_abs_fn,
    r: float,
    threshold: float = 1.0,
    window=(0j, 0.5),
    h: float | None = None,
    n_radial: int = 8,
    n_angular: int = 32,
) -> SuperlevelResult:
    """Area of the frequency superlevel set at scale r inside a disk window.

    `log_abs_fn` is either a HoloField or a callable z -> log|F(z)| accepting
    complex ndarrays.  Cells with a degenerate inner average are counted
    separately, never as members of the superlevel set.
    """
    if isinstance(log_abs_fn, HoloField):
        fld = log_abs_fn
        log_abs_fn = lambda z: log_abs_F(fld, z)  # noqa: E731
    if h is None:
        h = r / 4.0
    if h > r / 4.0 + 1e-15:
        raise ResolutionError(f"h = {h} exceeds r/4 = {r / 4.0}")
    center, radius = complex(window[0]), float(window[1])
    cells = window_cells(center, radius, h)
    n_vals, degenerate = doubling_index_map(log_abs_fn, cells, r, n_radial, n_angular)
    above = np.count_nonzero(~degenerate & (n_vals > threshold))
    return SuperlevelResult(
        threshold=float(threshold),
        scale=float(r),
        area_estimate=above * h * h,
        h=float(h),
        degenerate_cells=int(np.count_nonzero(degenerate)),
        cells_in_window=int(cells.size),
        cells_above=int(above),
        window_center=center,
        window_radius=radius,
    )


# -- weak-L2 quasinorm -------------------------------------------------------


def weak_l2_quasinorm(values, region_area: float, min_count: int = 64) -> float:
    """sup_gamma gamma * measure({|f| > gamma})^(1/2) from samples.

    The measure of a level set is estimated as sample fraction times
    region_area.  Levels supported by fewer than min_count samples are not
    trusted: the top order statistics of unbounded integrands fluctuate
    wildly, and the resolved levels already realize the supremum for the
    homogeneous integrands this targets.  Set min_count=1 for the raw sup.
    """
    vals = np.abs(np.asarray(values, dtype=float).ravel())
    if vals.size == 0:
        raise ValueError("empty sample")
    vals = np.sort(vals)[::-1]
    n = vals.size
    j = np.arange(1, n + 1, dtype=float)
    stats = vals * np.sqrt(j / n * region_area)
    j_min = min(int(min_count), n)
    return float(np.max(stats[j_min - 1 :]))


# -- Cartan covers -----------------------------------------------------------


@dataclass(frozen=True)
class BallCover:
    """Finite ball cover with its sum-of-radii^delta statistic."""

    balls: tuple[tuple[complex, float], ...]
    delta: float
    content_stat: float

    def covers_points(self, points) -> np.ndarray:
        """Boolean mask: point lies in at least one ball."""
        points = np.asarray(points, dtype=complex).ravel()
        inside = np.zeros(points.shape, dtype=bool)
        for c, rad in self.balls:
            inside |= np.abs(points - c) <= rad
        return inside


def make_ball_cover(balls, delta: float) -> BallCover:
    balls = tuple((complex(c), float(r)) for c, r in balls)
    stat = float(sum(r**delta for _, r in balls))
    return BallCover(balls=balls, delta=float(delta), content_stat=stat)


def _best_disk(points: np.ndarray, radius: float):
    """Deterministic max-points-in-disk search for small point sets.

    Candidate centers: every point, plus for each close pair the two centers
    of radius-`radius` circles through both.  Returns (center, covered_idx).
    """
    best_center = points[0]
    best_mask = np.abs(points - points[0]) <= radius * (1 + 1e-12)
    m = points.size
    candidates = list(points)
    for i in range(m):
        for k in range(i + 1, m):
            dz = points[k] - points[i]
            d = abs(dz)
            if d > 2 * radius or d == 0.0:
                continue
            mid = 0.5 * (points[i] + points[k])
            half = math.sqrt(max(radius * radius - 0.25 * d * d, 0.0))
            perp = 1j * dz / d
            candidates.extend([mid + half * perp, mid - half * perp])
    for c in candidates:
        mask = np.abs(points - c) <= radius * (1 + 1e-12)
        if mask.sum() > best_mask.sum():
            best_center, best_mask = c, mask
    return best_center, best_mask


def cartan_cover(roots, a: float, delta: float) -> BallCover:
    """Cover {|P| < exp(-a)} for the monic polynomial with the given roots.

    `roots` is a sequence of complex roots repeated per multiplicity, or of
    (root, multiplicity) pairs.  Always succeeds; the content statistic may
    be conservative.
    """
    if a <= 0 or delta <= 0:
        raise ValueError("a and delta must be positive")
    pts = []
    for entry in roots:
        if isinstance(entry, (tuple, list)):
            z, m = entry
            pts.extend([complex(z)] * int(m))
        else:
            pts.append(complex(entry))
    n = len(pts)
    if n < 1:
        raise ValueError("need at least one root")
    lam = math.e * math.exp(-a / n) / n  # per-root selection radius
    remaining = np.array(pts, dtype=complex)
    balls = []
    while remaining.size:
        chosen = None
        for k in range(remaining.size, 0, -1):
            center, mask = _best_disk(remaining, k * lam)
            if mask.sum() >= k:
                chosen = (center, k, mask)
                break
        center, k, mask = chosen  # k = 1 always succeeds
        balls.append((center, 2.0 * k * lam))
        remaining = remaining[~mask]
    return make_ball_cover(balls, delta)


def cartan_bound(n: int, a: float, delta: float) -> float:
    """Reference decay e^(-a delta / n) that the cover content is tested against."""
    return math.exp(-a * delta / n)


# -- Hausdorff content upper bounds ------------------------------------------


def hausdorff_content_upper(mask: np.ndarray, h: float, delta: float, origin: complex = 0j):
    """Greedy dyadic upper bound for the delta-dimensional Hausdorff content.

    Covers the occupied cells of the boolean grid `mask` (cell size h,
    mask[i, j] centered at origin + h*(i + 1j*j)) by maximal fully-occupied
    dyadic squares, circumscribes each with a ball (radius = side/2 * sqrt 2)
    and returns the resulting BallCover; content_stat is the upper bound.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return make_ball_cover([], delta)
    size = 1 << max(int(np.ceil(np.log2(max(mask.shape)))), 0)
    padded = np.zeros((size, size), dtype=bool)
    padded[: mask.shape[0], : mask.shape[1]] = mask
    counts = padded.astype(np.int64)
    # counts[level][i, j]: occupied cells in the dyadic square of side 2^level
    pyramid = [counts]
    while pyramid[-1].shape[0] > 1:
        c = pyramid[-1]
        pyramid.append(c[0::2, 0::2] + c[1::2, 0::2] + c[0::2, 1::2] + c[1::2, 1::2])
    balls = []

    def emit(level, i, j):
        side = 1 << level
        c = pyramid[level][i, j]
        if c == 0:
            return
        if c == side * side:
            center = origin + h * ((i + 0.5) * side - 0.5 + 1j * ((j + 0.5) * side - 0.5))
            balls.append((center, 0.5 * side * h * CIRCUMSCRIPTION_FACTOR))
            return
        for di in (0, 1):
            for dj in (0, 1):
                emit(level - 1, 2 * i + di, 2 * j + dj)

    emit(len(pyramid) - 1, 0, 0)
    return make_ball_cover(balls, delta)


# -- propagation of smallness --------------------------------------------------


@dataclass(frozen=True)
class PropagationReport:
    """Smallness-set content versus the gradient sup on the half disk."""

    a: float
    delta: float
    beta: float                 # dyadic upper bound for the content of E_a
    witness_center: complex     # largest grid ball contained in E_a
    witness_radius: float
    witness_content: float      # witness_radius^delta, a content lower bound
    sup_half: float             # max sampled |F| on B_1/2 after normalization
    implied_gamma: float | None  # -log(sup_half)/a when sup_half < 1
    vacuous: bool               # E_a empty: nothing to propagate from
    grid_n: int = 0

    def to_record(self) -> dict:
        return {
            "lemma": "propagation-of-smallness",
            "inputs": {"a": self.a, "delta": self.delta, "grid_n": self.grid_n},
            "measured": {
                "beta": self.beta,
                "witness_radius": self.witness_radius,
                "witness_content": self.witness_content,
                "sup_half": self.sup_half,
                "implied_gamma": self.implied_gamma,
            },
            "threshold": 0.0,
            "pass": self.vacuous or (self.implied_gamma or 0.0) > 0.0,
        }


def propagation_experiment(
    fld: HoloField, a: float, delta: float, grid_n: int = 512
) -> PropagationReport:
    """Measure E_a = {|F| < e^-a} inside B_1 and the half-disk sup of |F|.

    The field is normalized so the maximum grid sample of |F| on B_1 is 1.
    beta is the dyadic content upper bound of E_a; the witness ball (largest
    grid ball inside E_a) certifies a content lower bound witness_radius^delta.
    """
    h = 2.0 / (grid_n - 1)
    idx = np.arange(grid_n)
    zz = (-1.0 + idx[:, None] * h) + 1j * (-1.0 + idx[None, :] * h)
    in_disk = np.abs(zz) <= 1.0
    log_vals = log_abs_F(fld, zz)
    finite = np.isfinite(log_vals) & in_disk
    if not finite.any():
        raise NormalizationError("field is identically zero on the grid")
    log_max = float(np.max(log_vals[finite]))
    log_norm = log_vals - log_max  # normalized: max sample of log|F| is 0

    mask = in_disk & (log_norm < -a)
    cover = hausdorff_content_upper(mask, h, delta, origin=complex(-1.0, -1.0))
    beta = cover.content_stat
    vacuous = not mask.any()
    if vacuous:
        witness_center, witness_radius = 0j, 0.0
    else:
        dist = ndimage.distance_transform_edt(mask)
        i, j = np.unravel_index(int(np.argmax(dist)), dist.shape)
        witness_center = zz[i, j]
        witness_radius = float(dist[i, j]) * h

    half = np.abs(zz) <= 0.5
    sup_half = float(np.exp(np.max(log_norm[half])))
    gamma = (-math.log(sup_half) / a) if sup_half < 1.0 else None
    return PropagationReport(
        a=float(a),
        delta=float(delta),
        beta=float(beta),
        witness_center=witness_center,
        witness_radius=witness_radius,
        witness_content=witness_radius**delta,
        sup_half=sup_half,
        implied_gamma=gamma,
        vacuous=vacuous,
        grid_n=grid_n,
    )


# -- effective critical set ----------------------------------------------------


def potential_increment(fld: HoloField, x: complex, y, n_gauss: int = 24):
    """u(y) - u(x) by Gauss-Legendre integration of Re F along the segment."""
    y = np.asarray(y, dtype=complex)
    t, w = np.polynomial.legendre.leggauss(n_gauss)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    dz = y - x
    acc = np.zeros(y.shape, dtype=float)
    for tk, wk in zip(t, w):
        acc += wk * (eval_F(fld, x + tk * dz) * dz).real
    return acc if acc.shape else float(acc)


def effective_critical_mask(
    fld: HoloField,
    r: float,
    centers,
    C: float = 10.0,
    n_angular: int = 64,
    n_radial: int = 12,
) -> np.ndarray:
    """Centers where r^2 inf_{B_r}|grad u|^2 < C * mean_{bd B_2r} |u - u(x)|^2.

    The inf is sampled on a radial-angular net (exact zero when a listed
    root lies inside); the boundary mean uses angular quadrature with radial
    line integrals of Re F for the potential increments.
    """
    centers = np.asarray(centers, dtype=complex).ravel()
    theta = np.exp(2j * np.pi * np.arange(n_angular) / n_angular)
    rho = np.linspace(0.0, 1.0, n_radial + 1)
    net = (rho[:, None] * theta[None, :]).ravel()
    out = np.zeros(centers.shape, dtype=bool)
    for k, x in enumerate(centers):
        inf_log = float(np.min(log_abs_F(fld, x + r * net)))
        for zj, _ in fld.roots:
            if abs(zj - x) <= r:
                inf_log = -np.inf
        lhs = r * r * math.exp(2.0 * inf_log) if np.isfinite(inf_log) else 0.0
        incr = potential_increment(fld, x, x + 2.0 * r * theta)
        rhs = C * float(np.mean(incr**2))
        out[k] = lhs < rhs
    return out
