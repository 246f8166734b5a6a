"""Exact representations of 2D harmonic functions via holomorphic gradients.

A harmonic function u on a plane domain determines the holomorphic function
F(x+iy) = u_x - i u_y with |F| = |grad u| pointwise.  We keep F in factored
form

    F(z) = scale * exp(Q(z)) * prod_j (z - z_j)**m_j

with a finite list of roots z_j (integer multiplicities m_j >= 1) and a
polynomial exponent Q.  The class of such F is closed under differentiation,
so gradients and Hessians of u are always evaluated analytically; the root
set is known exactly, which removes root finding from every downstream
estimator.

The series form stores the coefficients a_d of the expansion of u - u(x0)
into homogeneous harmonic polynomials about a center x0, normalized so that
u = sum_d a_d Re((z - x0)**d).  The two forms serve different formulas and
are only converted where explicitly needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import json

import numpy as np
from numpy.polynomial import polynomial as npoly

from .exceptions import GridSizeError

GRID_CELL_CAP = 1 << 24  # hard cap on nx*ny for sample_grid

_LOG_FLOOR = -745.0  # log of the smallest positive double, rounded down


def _require_finite(name, value):
    arr = np.atleast_1d(np.asarray(value, dtype=complex))
    if not (np.all(np.isfinite(arr.real)) and np.all(np.isfinite(arr.imag))):
        raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class HoloField:
    """Holomorphic gradient F(z) = scale * e^{Q(z)} * prod (z - z_j)^{m_j}."""

    roots: tuple[tuple[complex, int], ...]
    exp_poly: tuple[complex, ...]
    scale: complex

    @property
    def degree(self) -> int:
        """Total root count with multiplicity."""
        return sum(m for _, m in self.roots)

    def __call__(self, z):
        return eval_F(self, z)


def make_field(roots=(), exp_poly=(0.0,), scale=1.0) -> HoloField:
    """Build a HoloField, validating finiteness and multiplicities.

    roots: iterable of (complex position, positive integer multiplicity).
    exp_poly: coefficients c_0..c_m of Q(z) = sum c_k z^k (ascending order).
    scale: complex prefactor; scale == 0 gives the zero field, whose
    frequency is degenerate everywhere but whose evaluation is still exact.
    """
    norm_roots = []
    for entry in roots:
        z, m = entry
        m = int(m)
        if m < 1:
            raise ValueError(f"root multiplicity must be >= 1, got {m}")
        _require_finite("root", z)
        norm_roots.append((complex(z), m))
    poly = tuple(complex(c) for c in exp_poly) or (0j,)
    _require_finite("exp_poly", poly)
    _require_finite("scale", scale)
    return HoloField(roots=tuple(norm_roots), exp_poly=poly, scale=complex(scale))


def _exp_poly_at(fld: HoloField, z):
    coeffs = np.asarray(fld.exp_poly, dtype=complex)
    return npoly.polyval(z, coeffs)


def eval_F(fld: HoloField, z):
    """Evaluate F at z (scalar or ndarray); exact zero at listed roots."""
    z = np.asarray(z, dtype=complex)
    out = np.full(z.shape, fld.scale, dtype=complex)
    out *= np.exp(_exp_poly_at(fld, z))
    for zj, m in fld.roots:
        out *= (z - zj) ** m
    return out if out.shape else complex(out)


def log_abs_F(fld: HoloField, z):
    """log|F(z)|, overflow-free (returns -inf at roots and for scale == 0)."""
    z = np.asarray(z, dtype=complex)
    with np.errstate(divide="ignore"):
        out = np.full(z.shape, np.log(abs(fld.scale)) if fld.scale != 0 else -np.inf)
        poly = fld.exp_poly
        if len(poly) == 1:
            out = out + poly[0].real
        elif len(poly) == 2:
            # scans hit this path hard; real arithmetic halves the bandwidth
            c0, c1 = poly
            out = out + (c0.real + c1.real * z.real - c1.imag * z.imag)
        else:
            out = out + _exp_poly_at(fld, z).real
        for zj, m in fld.roots:
            d = z - zj
            # 0.5*log(x^2+y^2) dodges hypot; node moduli are O(1) so the
            # square cannot overflow, and underflow to -inf is the intended
            # value at a root
            out = out + (0.5 * m) * np.log(d.real**2 + d.imag**2)
    return out if out.shape else float(out)


def log_deriv_F(fld: HoloField, z):
    """Logarithmic derivative F'/F = Q'(z) + sum m_j/(z - z_j)."""
    z = np.asarray(z, dtype=complex)
    coeffs = np.asarray(fld.exp_poly, dtype=complex)
    dcoeffs = npoly.polyder(coeffs) if len(coeffs) > 1 else np.zeros(1, complex)
    out = npoly.polyval(z, dcoeffs) * np.ones(z.shape, dtype=complex)
    for zj, m in fld.roots:
        out = out + m / (z - zj)
    return out if out.shape else complex(out)


def eval_F_prime(fld: HoloField, z):
    """Analytic F'(z), valid at listed roots as well."""
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.zeros(z_arr.shape, dtype=complex)
    hit_any = np.zeros(z_arr.shape, dtype=bool)
    for zj, m in fld.roots:
        hit = z_arr == zj
        if np.any(hit):
            hit_any |= hit
            if m == 1:
                # product rule: only the differentiated factor survives
                rest = np.full(hit.sum(), fld.scale, dtype=complex)
                rest *= np.exp(_exp_poly_at(fld, z_arr[hit]))
                for zk, mk in fld.roots:
                    if zk != zj:
                        rest *= (z_arr[hit] - zk) ** mk
                out[hit] = rest
            # m > 1 leaves F'(z_j) = 0, already in place
    free = ~hit_any
    if np.any(free):
        out[free] = eval_F(fld, z_arr[free]) * log_deriv_F(fld, z_arr[free])
    return out.reshape(np.shape(z)) if np.shape(z) else complex(out[0])


def eval_derivatives(fld: HoloField, z):
    """Gradient and Hessian of the harmonic potential u at z.

    Returns (u_x, u_y, u_xx, u_xy, u_yy); the Hessian comes from F' through
    the Cauchy-Riemann equations and is trace free by construction.
    """
    F = eval_F(fld, complex(z))
    Fp = eval_F_prime(fld, complex(z))
    return (F.real, -F.imag, Fp.real, -Fp.imag, -Fp.real)


@dataclass(frozen=True)
class SeriesRep:
    """Homogeneous harmonic expansion u - u(center) = sum_d a_d Re((z-center)^d)."""

    coeffs: tuple[float, ...]  # a_1 .. a_D
    center: complex = 0j

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=float)
        if arr.size == 0 or not np.any(arr != 0.0):
            from .exceptions import AllZeroCoefficientsError

            raise AllZeroCoefficientsError("series needs at least one nonzero a_d")
        if not np.all(np.isfinite(arr)):
            raise ValueError("series coefficients must be finite")


def make_series(coeffs, center=0j) -> SeriesRep:
    return SeriesRep(coeffs=tuple(float(a) for a in coeffs), center=complex(center))


@dataclass(frozen=True)
class ComplexGridField:
    """Complex samples on a uniform grid: values[i, j] = f(origin + h*(i + 1j*j))."""

    origin: complex
    h: float
    values: np.ndarray
    masked: bool = False

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        vals = np.asarray(self.values)
        if vals.ndim != 2:
            raise ValueError("grid values must be a 2D array")
        if not self.masked and not np.all(np.isfinite(vals.view(float))):
            raise ValueError("grid values contain NaN/Inf and are not flagged masked")

    @property
    def nx(self) -> int:
        return self.values.shape[0]

    @property
    def ny(self) -> int:
        return self.values.shape[1]

    def nodes(self):
        """Complex node positions, shape (nx, ny)."""
        i = np.arange(self.nx)[:, None]
        j = np.arange(self.ny)[None, :]
        return self.origin + self.h * (i + 1j * j)


def sample_grid(fld: HoloField, origin, h, nx, ny, cap=GRID_CELL_CAP) -> ComplexGridField:
    """Sample F on a uniform nx-by-ny grid (deterministic)."""
    if h <= 0:
        raise ValueError("h must be positive")
    if nx * ny > cap:
        raise GridSizeError(f"grid {nx}x{ny} exceeds cap {cap}")
    i = np.arange(nx)[:, None]
    j = np.arange(ny)[None, :]
    z = complex(origin) + h * (i + 1j * j)
    return ComplexGridField(origin=complex(origin), h=float(h), values=eval_F(fld, z))


# -- structured-text field specifications ----------------------------------
#
# Schema: {"roots": [[re, im, mult], ...],
#          "exp_poly": [[re, im], ...],
#          "scale": [re, im]}


def field_to_dict(fld: HoloField) -> dict:
    return {
        "roots": [[z.real, z.imag, m] for z, m in fld.roots],
        "exp_poly": [[c.real, c.imag] for c in fld.exp_poly],
        "scale": [fld.scale.real, fld.scale.imag],
    }


def field_from_dict(spec: dict) -> HoloField:
    roots = [(complex(r[0], r[1]), int(r[2])) for r in spec.get("roots", [])]
    exp_poly = [complex(c[0], c[1]) for c in spec.get("exp_poly", [[0.0, 0.0]])]
    sc = spec.get("scale", [1.0, 0.0])
    return make_field(roots=roots, exp_poly=exp_poly, scale=complex(sc[0], sc[1]))


def field_to_json(fld: HoloField) -> str:
    return json.dumps(field_to_dict(fld), sort_keys=True)


def field_from_json(text: str) -> HoloField:
    return field_from_dict(json.loads(text))
