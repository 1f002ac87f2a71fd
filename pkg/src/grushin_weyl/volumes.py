"""Ball and box volumes, the ratio functions f and G, and Hausdorff measure of the axis.

Ball volumes integrate the measure over the sublevel set ``{d < s}`` of a
numeric distance field. Each grid cell is split into two triangles, the
distance is interpolated linearly on each, and the area fraction below ``s``
is taken in closed form; the fraction multiplies the exact integral of the
density over the cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate
from scipy.special import gamma

from .errors import InvalidParameter, NonPositiveScale
from .geometry import (
    DEFAULT_STENCIL,
    GridSpec,
    GrushinParams,
    Point,
    graph_distances,
    padded_grid,
    stencil_anisotropy,
)


class VolumeMethod(str, Enum):
    QUADRATURE = "quadrature-over-distance-field"
    CLOSED_FORM = "closed-form"


@dataclass(frozen=True)
class VolumeResult:
    value: float
    method: VolumeMethod
    error_estimate: float = 0.0


@dataclass(frozen=True)
class RatioTable:
    tau_values: np.ndarray
    f_values: np.ndarray
    G_values: np.ndarray
    f_errors: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.tau_values) <= 0):
            raise InvalidParameter("tau values must be strictly increasing")

    def rows(self):
        return zip(self.tau_values, self.f_values, self.G_values)


def _triangle_fraction(a, b, c, level):
    """Area fraction of a triangle where the linear interpolant of vertex values is below ``level``."""
    lo = np.minimum(np.minimum(a, b), c)
    hi = np.maximum(np.maximum(a, b), c)
    mid = a + b + c - lo - hi
    out = np.where(level >= hi, 1.0, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        low_part = (level - lo) ** 2 / ((mid - lo) * (hi - lo))
        high_part = 1.0 - (hi - level) ** 2 / ((hi - lo) * (hi - mid))
    out = np.where((level > lo) & (level <= mid) & (mid > lo), low_part, out)
    out = np.where((level > mid) & (level < hi), high_part, out)
    return out


def _row_masses(params: GrushinParams, grid: GridSpec) -> np.ndarray:
    """Exact measure of each cell row (per cell), from the density in conformal coordinates.

    In ``(x, y)`` the measure is ``c_m k^(2 alpha + q) y^e dx dy`` with
    ``e = (q - 2 alpha)/k``; integrability at the axis is ``e > -1``.
    """
    params.require_integrable()
    k = params.snowflake_exponent
    q = params.weight_exponent
    e1 = (q + 1.0) / k
    ys = grid.y_nodes
    const = params.c_m * k ** (2 * params.alpha + q) / e1
    return grid.hx * const * (ys[1:] ** e1 - ys[:-1] ** e1)


def sublevel_measure(params: GrushinParams, grid: GridSpec, values: np.ndarray, level: float) -> float:
    """Measure of ``{values < level}`` with linear interpolation on the two triangles of each cell."""
    d = np.where(np.isfinite(values), values, 4.0 * level + 1.0)
    d00, d01 = d[:-1, :-1], d[:-1, 1:]
    d10, d11 = d[1:, :-1], d[1:, 1:]
    frac = 0.5 * (_triangle_fraction(d00, d01, d11, level) + _triangle_fraction(d00, d10, d11, level))
    return float(np.sum(_row_masses(params, grid)[:, None] * frac))


def ball_window(params: GrushinParams, center: Point, s: float):
    """``(r, v)`` rectangle containing ``B_s(center)``."""
    r_hi = center.r + s
    half_v = s * r_hi ** (2 * params.alpha)
    return (max(0.0, center.r - s), r_hi), (center.v - half_v, center.v + half_v)


def ball_volume(params: GrushinParams, center: Point, s: float, grid: GridSpec | None = None, *,
                resolution: int = 96, stencil: int = DEFAULT_STENCIL, refine: bool = True) -> VolumeResult:
    """Measure of the metric ball ``B_s(center)``.

    Without an explicit ``grid`` the ball's bounding window is covered with
    ``resolution`` cells across. With ``refine`` the value is taken from the
    grid with halved spacing. The error estimate adds the change relative to
    the requested grid and the volume deficit of a ball shrunk by the
    stencil's worst-case anisotropy (graph distances only overestimate).
    """
    if not (s > 0):
        raise NonPositiveScale(f"ball radius must be positive, got {s}")
    params.require_integrable()
    if grid is None:
        r_range, v_range = ball_window(params, center, s)
        grid = padded_grid(params, r_range, v_range, resolution=resolution, anchor=center,
                           stencil=stencil, pad_cells=2)
    limit = 2.0 * s
    coarse = sublevel_measure(params, grid, graph_distances(params, grid, center, limit), s)
    if not refine:
        return VolumeResult(coarse, VolumeMethod.QUADRATURE, float("nan"))
    fine_grid = grid.refined(2)
    fine = sublevel_measure(params, fine_grid, graph_distances(params, fine_grid, center, limit), s)
    anisotropy = fine * (1.0 - (1.0 + stencil_anisotropy(grid.stencil)) ** -2)
    return VolumeResult(fine, VolumeMethod.QUADRATURE, abs(fine - coarse) + anisotropy)


def ball_bracket(params: GrushinParams, r0: float, s: float) -> tuple[float, float]:
    """Elementary lower and upper bounds for a ball volume when ``r0 > s``."""
    if not (r0 > s):
        raise InvalidParameter("the bracket needs the ball to stay away from the axis (r0 > s)")
    m = (params.n - 1) / 2.0
    base = params.c_m * math.pi * s * s
    return base * (r0 - s) ** m, base * (r0 + s) ** m


def box_volume(params: GrushinParams, r0: float, s: float) -> VolumeResult:
    """Measure of the dilated unit box ``[r0 - s, r0 + s] x [-s^k, s^k]``, clipped at the axis."""
    if s < 0 or r0 < 0:
        raise InvalidParameter("box needs r0 >= 0 and s >= 0")
    params.require_integrable()
    p = params.volume_exponent
    k = params.snowflake_exponent
    value = params.c_m * 2.0 * s**k / p * ((r0 + s) ** p - max(r0 - s, 0.0) ** p)
    return VolumeResult(value, VolumeMethod.CLOSED_FORM, 0.0)


def box_constant(params: GrushinParams) -> float:
    """``4 c_m / (n + 1 - 4 alpha)``, the prefactor of the box volume in scaled form."""
    return 4.0 * params.c_m / (params.n + 1 - 4 * params.alpha)


def _shell_difference(params: GrushinParams, tau: float) -> float:
    p = params.volume_exponent
    return (1.0 + tau) ** p - max(1.0 - tau, 0.0) ** p


def f_ratio_with_error(params: GrushinParams, tau_inv: float, grid: GridSpec | None = None, *,
                       resolution: int = 96, stencil: int = DEFAULT_STENCIL) -> tuple[float, float]:
    """Ratio of unit-box to unit-ball measure at ``(tau_inv, 0)`` and its propagated error."""
    if tau_inv < 0:
        raise InvalidParameter("tau_inv must be nonnegative")
    ball = ball_volume(params, Point(tau_inv, 0.0), 1.0, grid, resolution=resolution, stencil=stencil)
    box = box_volume(params, tau_inv, 1.0).value
    f = box / ball.value
    return f, f * ball.error_estimate / ball.value


def f_ratio(params: GrushinParams, tau_inv: float, grid: GridSpec | None = None, *,
            resolution: int = 96, stencil: int = DEFAULT_STENCIL) -> float:
    return f_ratio_with_error(params, tau_inv, grid, resolution=resolution, stencil=stencil)[0]


def G_of_tau(params: GrushinParams, tau: float, grid: GridSpec | None = None, *,
             resolution: int = 96, stencil: int = DEFAULT_STENCIL, f_value: float | None = None) -> float:
    """``f(1/tau)`` divided by ``(1 + tau)^p - (1 - tau)_+^p``; ``tau = inf`` uses the axis ball."""
    if not (tau > 0):
        raise InvalidParameter("tau must be positive")
    if f_value is None:
        tau_inv = 0.0 if math.isinf(tau) else 1.0 / tau
        f_value = f_ratio(params, tau_inv, grid, resolution=resolution, stencil=stencil)
    if math.isinf(tau):
        return 0.0
    return f_value / _shell_difference(params, tau)


def ratio_table(params: GrushinParams, taus, *, resolution: int = 96,
                stencil: int = DEFAULT_STENCIL) -> RatioTable:
    taus = np.asarray(sorted(taus), dtype=float)
    f_vals, f_errs, g_vals = [], [], []
    for tau in taus:
        f, err = f_ratio_with_error(params, 1.0 / tau, resolution=resolution, stencil=stencil)
        f_vals.append(f)
        f_errs.append(err)
        g_vals.append(f / _shell_difference(params, tau))
    return RatioTable(taus, np.array(f_vals), np.array(g_vals), np.array(f_errs))


def unit_ball_inverse(params: GrushinParams, r0: float, s: float, G_value: float) -> float:
    """``1 / m(B_s(x))`` reconstructed from ``G(s / r0)``."""
    k = params.snowflake_exponent
    return G_value / (box_constant(params) * s**k * r0**params.volume_exponent)


def ball_volume_constant(k: float) -> float:
    """Volume of the unit ball in dimension ``k``, continued to non-integer ``k``."""
    return math.pi ** (k / 2.0) / gamma(k / 2.0 + 1.0)


def hausdorff_measure_singular(params: GrushinParams | None, k: float, C_boundary: float, v_length: float,
                               c_k: float | None = None) -> float:
    """``k``-dimensional Hausdorff measure of an axis interval of length ``v_length``.

    On the axis the distance is ``C |dv|^(1/k)``, so an arc of length ``L/N``
    has diameter ``C (L/N)^(1/k)`` and every uniform cover gives the same sum
    ``c_k (C/2)^k L``.
    """
    if v_length < 0 or C_boundary <= 0 or k <= 0:
        raise InvalidParameter("need k > 0, C > 0 and a nonnegative length")
    if c_k is None:
        c_k = ball_volume_constant(k)
    return c_k * (C_boundary / 2.0) ** k * v_length


def unweighted_area_near_axis(alpha: float, eps: float) -> float:
    """Riemannian area per unit ``v``-length of ``[eps, 1]``, that is the integral of ``r^(-2 alpha)``."""
    if not (0 < eps < 1):
        raise InvalidParameter("eps must lie in (0, 1)")
    value, _ = integrate.quad(lambda r: r ** (-2.0 * alpha), eps, 1.0, limit=200,
                              points=np.geomspace(eps, 1.0, 12)[1:-1])
    return value
