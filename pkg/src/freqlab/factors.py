"""Root/nonvanishing factorizations of holomorphic gradients and their bounds.

Splits F = P * g with P the monic polynomial over the roots inside the unit
disk and g nonvanishing there, counts zeros independently by the argument
principle, and measures the two bounds that drive the superlevel-set
estimates: the logarithmic size of a nonvanishing gradient against its
frequency budget, and the quasi-subadditivity of the frequency under the
factorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    BoundaryRootError,
    BudgetViolatedError,
    NearCircleRootError,
    QuadratureFailureError,
)
from .fields import HoloField, log_abs_F, log_deriv_F, make_field
from .frequency import doubling_index_map, frequency_ball

BOUNDARY_TOL = 1e-12
CIRCLE_CLEARANCE = 1e-9


@dataclass(frozen=True)
class Factorization:
    """F = monic polynomial over poly_roots (inside B_1) times cofactor."""

    poly_roots: tuple[tuple[complex, int], ...]
    cofactor: HoloField
    monic_flag: bool

    @property
    def poly_degree(self) -> int:
        return sum(m for _, m in self.poly_roots)


def factor_in_disk(fld: HoloField) -> Factorization:
    """Partition listed roots by |root| < 1; cofactor keeps the rest.

    Roots on the unit circle within 1e-12 make the partition ambiguous and
    raise BoundaryRootError.
    """
    inside = []
    outside = []
    for z, m in fld.roots:
        if abs(abs(z) - 1.0) <= BOUNDARY_TOL:
            raise BoundaryRootError(f"root {z} lies on the unit circle within tolerance")
        (inside if abs(z) < 1.0 else outside).append((z, m))
    cofactor = make_field(roots=outside, exp_poly=fld.exp_poly, scale=fld.scale)
    return Factorization(poly_roots=tuple(inside), cofactor=cofactor, monic_flag=True)


def eval_factor_poly(fact: Factorization, z):
    """Evaluate the monic polynomial part at z."""
    z = np.asarray(z, dtype=complex)
    out = np.ones(z.shape, dtype=complex)
    for zj, m in fact.poly_roots:
        out *= (z - zj) ** m
    return out if out.shape else complex(out)


def count_zeros_circle(fld: HoloField, center, radius, quad_points: int = 512) -> int:
    """Zeros inside the circle by the argument principle.

    Trapezoid rule on (1/2 pi i) * contour integral of F'/F; the integrand is
    analytic near the contour when no root is close, so the rule converges
    exponentially.  A residue farther than 0.25 from an integer flags
    quadrature failure.
    """
    center = complex(center)
    radius = float(radius)
    for zj, _ in fld.roots:
        if abs(abs(zj - center) - radius) < CIRCLE_CLEARANCE:
            raise NearCircleRootError(f"root {zj} within {CIRCLE_CLEARANCE} of the contour")
    theta = 2.0 * np.pi * np.arange(quad_points) / quad_points
    ring = np.exp(1j * theta)
    z = center + radius * ring
    integrand = log_deriv_F(fld, z) * ring  # dz = i R ring dtheta; /(2 pi i) leaves R ring / (2 pi)
    value = radius * np.mean(integrand)
    count = round(value.real)
    if abs(value - count) > 0.25:
        raise QuadratureFailureError(f"residue {value} not near an integer")
    return int(count)


@dataclass(frozen=True)
class NonvanishingReport:
    """Size of log|F| on the half disk for a gradient nonvanishing on B_1."""

    max_log_abs_half: float      # max over B_1/2 of |log |F|| after sup normalization
    sup_small_scale_freq: float  # sup over sampled centers of N(x, c / budget)
    ratio_to_budget: float       # max_log_abs_half / budget
    measured_freq: float         # N(0, 1) of the normalized field
    small_scale_violation: bool  # sup_small_scale_freq > 1/2
    inputs: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "lemma": "nonvanishing-log-bound",
            "inputs": self.inputs,
            "measured": {
                "max_log_abs_half": self.max_log_abs_half,
                "sup_small_scale_freq": self.sup_small_scale_freq,
                "ratio_to_budget": self.ratio_to_budget,
                "measured_freq": self.measured_freq,
            },
            "threshold": 0.5,
            "pass": not self.small_scale_violation,
        }


def _sup_log_abs_circle(fld: HoloField, radius: float, n: int = 2048) -> float:
    theta = np.exp(2j * np.pi * np.arange(n) / n)
    return float(np.max(log_abs_F(fld, radius * theta)))


def nonvanishing_report(
    fld: HoloField,
    freq_budget: float,
    small_scale_c: float = 0.05,
    center_grid: int = 32,
    quad_points: int = 4096,
) -> NonvanishingReport:
    """Measure |log|F|| on B_1/2 and the small-scale frequency for nonvanishing F.

    The field is first rescaled so sup_{B_1} |F| = 1 (the sup of an entire
    function sits on the boundary circle).  Raises BudgetViolatedError if the
    measured N(0,1) exceeds the declared budget.
    """
    if any(abs(z) <= 1.0 for z, _ in fld.roots):
        raise ValueError("field has a listed root in the closed unit disk")
    sup_log = _sup_log_abs_circle(fld, 1.0)
    normalized = make_field(
        roots=fld.roots, exp_poly=fld.exp_poly, scale=fld.scale * np.exp(-sup_log)
    )
    measured = frequency_ball(normalized, 0.0, 1.0, quad_points)
    if measured > freq_budget:
        raise BudgetViolatedError(
            f"measured N(0,1) = {measured:.3f} exceeds budget {freq_budget}"
        )
    # log|F| is harmonic off the roots, so its extrema over the closed half
    # disk sit on the bounding circle
    theta = np.exp(2j * np.pi * np.arange(2048) / 2048)
    vals = log_abs_F(normalized, 0.5 * theta)
    max_log_half = float(np.max(np.abs(vals)))

    scale = small_scale_c / freq_budget
    side = np.linspace(-1.0, 1.0, center_grid)
    xs, ys = np.meshgrid(side, side, indexing="ij")
    centers = (xs + 1j * ys).ravel()
    centers = centers[np.abs(centers) < 1.0]
    n_map, _ = doubling_index_map(
        lambda z: log_abs_F(normalized, z), centers, scale, n_radial=8, n_angular=32
    )
    sup_n = float(np.nanmax(n_map))
    return NonvanishingReport(
        max_log_abs_half=max_log_half,
        sup_small_scale_freq=float(sup_n),
        ratio_to_budget=max_log_half / freq_budget,
        measured_freq=float(measured),
        small_scale_violation=bool(sup_n > 0.5),
        inputs={"freq_budget": freq_budget, "small_scale_c": small_scale_c},
    )


@dataclass(frozen=True)
class QuasiSubadditivityReport:
    """Frequency of the nonvanishing factor against the full-field budget."""

    freq_full_2t: float   # N_F(0, 2t)
    freq_cofactor_t: float  # N_g(0, t)
    ratio: float
    flagged: bool
    inputs: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "lemma": "quasi-subadditivity",
            "inputs": self.inputs,
            "measured": {
                "freq_full_2t": self.freq_full_2t,
                "freq_cofactor_t": self.freq_cofactor_t,
                "ratio": self.ratio,
            },
            "threshold": self.inputs.get("bound_C", None),
            "pass": not self.flagged,
        }


def quasi_subadditivity_check(
    fld: HoloField,
    freq_budget: float,
    t: float = 5.0,
    bound_C: float = 10.0,
    quad_points: int = 4096,
) -> QuasiSubadditivityReport:
    """Compare N_g(0, t) of the nonvanishing factor with C * budget.

    Requires every polynomial root inside B_1 and a cofactor nonvanishing
    there (guaranteed by factor_in_disk on such fields).
    """
    fact = factor_in_disk(fld)
    n_full = frequency_ball(fld, 0.0, 2.0 * t, quad_points)
    n_cof = frequency_ball(fact.cofactor, 0.0, t, quad_points)
    ratio = n_cof / n_full if n_full != 0 else np.inf
    flagged = bool(n_cof > bound_C * freq_budget)
    return QuasiSubadditivityReport(
        freq_full_2t=float(n_full),
        freq_cofactor_t=float(n_cof),
        ratio=float(ratio),
        flagged=flagged,
        inputs={"freq_budget": freq_budget, "t": t, "bound_C": bound_C},
    )
