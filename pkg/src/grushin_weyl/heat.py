"""Heat traces, modal heat kernels, the scale-invariant function h and Tauberian limits.

Heat kernels are eigen-expansions. A normalized eigenfunction of a warped
cylinder with period ``P`` is ``phi(r) e^(2 pi i k v / P) / sqrt(c_m P)``, so
the diagonal is

    H(x, x, t) = sum mult * exp(-lambda t) * phi(r)^2 / (c_m P)

and the integral of ``H`` over a radial band times the full circle is the
same sum with ``phi(r)^2 / (c_m P)`` replaced by the eigenvector's mass in
the band. On the doubled space each copy carries half of every eigenvector.

Half-plane quantities are computed on the quotient cylinder with a period
large enough that every nontrivial deck image is at least ``8 sqrt(t)`` away
from the evaluation points, which makes the covering correction of order
``exp(-16)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator
from scipy.special import gamma, gammaincc

from .errors import InvalidParameter, NoPlateau, QuadratureFailure, TailDominates
from .geometry import GrushinParams, Point, distances_from
from .spectrum import (
    ModeProblem,
    OuterBC,
    RadialGrid,
    Space,
    Spectrum,
    WarpProfile,
    _mode_problems,
    decay_radius,
    default_spacing,
    solve_modes,
)
from .volumes import ball_volume, box_volume, G_of_tau

TAIL_EXPONENT = 25.0


def t_min(spec: Spectrum) -> float:
    """Smallest time with ``lambda_max * t >= 25``."""
    return 0.0 if math.isinf(spec.complete_below) else TAIL_EXPONENT / spec.complete_below


def tail_bound(spec: Spectrum, t) -> np.ndarray:
    """Upper bound for the heat trace contribution of eigenvalues above the computed range.

    The counting function beyond ``Lambda = complete_below`` is bounded by
    ``N(Lambda) (lambda / Lambda)^g`` with ``g`` the log-log growth over the
    top decade plus a margin of 1/2. Integrating ``exp(-lambda t) dN`` by
    parts gives ``N(Lambda) (Lambda t)^(-g) Gamma(g + 1, Lambda t)``.
    """
    t = np.asarray(t, dtype=float)
    top = spec.complete_below
    if math.isinf(top) or spec.total_count == 0:
        return np.zeros_like(t)
    n_top = float(spec.counting(top))
    n_low = float(spec.counting(top / 10.0))
    growth = (math.log(n_top / n_low) / math.log(10.0) if n_low > 0 else 1.0) + 0.5
    x = top * t
    return n_top * x ** (-growth) * gammaincc(growth + 1.0, x) * gamma(growth + 1.0)


@dataclass(frozen=True)
class TraceSeries:
    t_values: np.ndarray
    Z_values: np.ndarray
    truncation_error: np.ndarray

    def rows(self):
        return zip(self.t_values, self.Z_values, self.truncation_error)


def heat_trace(spec: Spectrum, t_values, *, check: bool = True) -> TraceSeries:
    """``Z(t) = sum mult exp(-lambda t)`` with tail bounds, ``t`` sorted decreasing.

    ``TailDominates`` is raised for ``t`` below ``t_min`` or where the tail
    bound exceeds 1% of ``Z``.
    """
    t = np.sort(np.asarray(t_values, dtype=float))[::-1]
    if np.any(t <= 0):
        raise InvalidParameter("heat trace needs t > 0")
    if check and t.size and t[-1] < t_min(spec) * (1 - 1e-12):
        raise TailDominates(f"t = {t[-1]:.4g} is below t_min = {t_min(spec):.4g}")
    Z = np.array([np.sum(spec.mult * np.exp(-spec.lam * ti)) for ti in t])
    tail = tail_bound(spec, t)
    if check and np.any(tail > 0.01 * Z):
        raise TailDominates("spectral tail bound exceeds 1% of Z")
    return TraceSeries(t, Z, tail)


def covering_period(params: GrushinParams, r_max: float, s_max: float, v_length: float = 0.0) -> float:
    """Quotient period keeping every deck image of points with ``r <= r_max`` at least ``8 s_max`` away.

    A closed loop around the cylinder either reaches radius ``r_max + 4s``
    (length at least ``8s``) or stays below it and pays at least
    ``P (r_max + 4s)^(-2 alpha)`` in the ``v`` direction.
    """
    return max(v_length, 8.0 * s_max * (r_max + 4.0 * s_max) ** (2.0 * params.alpha))


@dataclass
class ModalHeatKernel:
    """Eigen-expansion of the heat kernel at fixed radii and over fixed radial bands.

    ``point_weights[j, i]`` is the coefficient of ``exp(-lam[j] t)`` in
    ``H(x_i, x_i, t)``; ``band_weights[j, b]`` is that in the integral of
    ``H`` over band ``b`` times the full circle (one copy for the doubled
    space).
    """

    params: GrushinParams
    space: Space
    lam: np.ndarray
    mult: np.ndarray
    r_values: np.ndarray
    point_weights: np.ndarray
    bands: list
    band_weights: np.ndarray
    complete_below: float

    @property
    def t_min(self) -> float:
        return TAIL_EXPONENT / self.complete_below

    def _factors(self, t: float) -> np.ndarray:
        if t < self.t_min * (1 - 1e-12):
            raise TailDominates(f"t = {t:.4g} is below t_min = {self.t_min:.4g}")
        return np.exp(-self.lam * t)

    def diagonal(self, t: float) -> np.ndarray:
        return self._factors(t) @ self.point_weights

    def band_trace(self, t: float) -> np.ndarray:
        return self._factors(t) @ self.band_weights

    def trace(self, t: float) -> float:
        return float(self._factors(t) @ self.mult)


def _interpolate_nodes(sol, r_values):
    nodes = sol.operator.r
    vecs = sol.vectors
    if nodes[0] > 0:
        nodes = np.concatenate([[0.0], nodes])
        vecs = np.vstack([np.zeros((1, vecs.shape[1])), vecs])
    out = np.empty((vecs.shape[1], r_values.size))
    for j in range(vecs.shape[1]):
        out[j] = np.interp(r_values, nodes, vecs[:, j], right=0.0)
    return out


def modal_heat_kernel(params: GrushinParams, space: Space | str, lambda_max: float, *, r_values=(),
                      bands=(), truncation: float | None = None, warp: WarpProfile | None = None,
                      spacing: float | None = None, t_max: float | None = None) -> ModalHeatKernel:
    """Collect eigenpairs up to ``lambda_max`` for kernel evaluation.

    For ``Ybar`` the cylinder is truncated at ``truncation`` (default: the
    largest requested radius plus ``10 sqrt(t_max)``) with a Neumann end,
    including the truncated ``k = 0`` sector; the kernel at the requested
    radii then differs from the untruncated one by ``exp(-25)``. Modes whose
    eigenfunctions have decayed before the smallest requested radius are
    skipped.
    """
    space = Space(space)
    r_values = np.atleast_1d(np.asarray(r_values, dtype=float))
    bands = [tuple(b) for b in bands]
    spacing = spacing or default_spacing(lambda_max)
    t_max = t_max or 4.0 * TAIL_EXPONENT / lambda_max
    reach = [r for r in r_values] + [b for band in bands for b in band if math.isfinite(b)]
    r_need = min([r for r in r_values] + [band[0] for band in bands], default=0.0)
    if space is Space.YBAR:
        if truncation is None:
            truncation = max(reach, default=0.0) + 10.0 * math.sqrt(t_max)
    else:
        warp = warp or WarpProfile(params.alpha)
        params.require_integrable()
    copies = 0.5 if space is Space.XDOUBLE else 1.0
    lam, mult, pw, bw = [], [], [], []
    k = 0
    while True:
        if space is Space.YBAR:
            cut = decay_radius(params, k, lambda_max) if k else math.inf
            R = min(truncation, cut)
            bc = OuterBC.NEUMANN if R >= truncation else OuterBC.NONE
            groups = [(ModeProblem(space, k, bc, RadialGrid(spacing, R), None, k == 0), ("Neumann",))]
        else:
            cut = decay_radius(params, k, lambda_max, warp) if k else math.inf
            groups = _mode_problems(params, space, k, lambda_max, spacing, warp, None)
        if k > 0 and cut <= r_need:
            break
        found = 0
        for problem, tags in groups:
            sol = solve_modes(params, problem, lambda_max, vectors=True, check_truncation=False)
            if not len(sol):
                continue
            found += len(sol)
            m = 1 if k == 0 else 2
            phi2 = _interpolate_nodes(sol, r_values) ** 2 if r_values.size else np.zeros((len(sol), 0))
            masses = (np.stack([sol.masses_inside(b) for b in bands], axis=1) if bands
                      else np.zeros((len(sol), 0)))
            for _ in tags:
                lam.append(sol.eigenvalues)
                mult.append(np.full(len(sol), m))
                pw.append(m * copies * phi2 / (params.c_m * params.period))
                bw.append(m * copies * masses)
        if found == 0 and k > 0:
            break
        k += 1
    lam = np.concatenate(lam)
    lam = np.where(np.abs(lam) < 1e-8, 0.0, lam)
    return ModalHeatKernel(params, space, lam, np.concatenate(mult), r_values, np.vstack(pw), bands,
                           np.vstack(bw), lambda_max)


def diagonal_heat_kernel(params: GrushinParams, space: Space | str, r: float, t: float, **kwargs) -> float:
    """``H(x, x, t)`` at radius ``r`` from eigenpairs up to ``25 / t`` (``t`` is then exactly ``t_min``)."""
    if not (t > 0):
        raise InvalidParameter("t must be positive")
    kernel = modal_heat_kernel(params, space, TAIL_EXPONENT / t, r_values=[r], t_max=t, **kwargs)
    return float(kernel.diagonal(t)[0])


def half_plane_kernel(params: GrushinParams, r_values, t: float, *, spacing: float | None = None) -> np.ndarray:
    """Diagonal heat kernel of the half-plane at the given radii, via a wide enough quotient."""
    r_values = np.atleast_1d(np.asarray(r_values, dtype=float))
    s = math.sqrt(t)
    wide = replace(params, period=covering_period(params, float(r_values.max()), s))
    kernel = modal_heat_kernel(wide, Space.YBAR, TAIL_EXPONENT / t, r_values=r_values, t_max=t, spacing=spacing)
    return kernel.diagonal(t)


# ---------------------------------------------------------------- h(r, s)

class HSource(str, Enum):
    MODAL = "modal-expansion"
    TRANSPORTED = "scaling-transported"


@dataclass(frozen=True)
class HValue:
    r: float
    s: float
    h: float
    heat: float
    ball: float
    ball_error: float
    source: HSource
    representative: tuple[float, float]


def h_function(params: GrushinParams, r: float, s: float, *, s_min: float = 0.05, resolution: int = 64,
               spacing: float | None = None) -> HValue:
    """``h(r, s) = m(B_s(x)) H(x, x, s^2)`` on the half-plane.

    Scales below ``s_min`` need eigenvalues beyond ``25 / s_min^2``; such a
    request is moved along the dilation orbit to ``(r s_min / s, s_min)``,
    which has the same ``h``, and tagged as transported.
    """
    if not (s > 0) or r < 0:
        raise InvalidParameter("h needs r >= 0 and s > 0")
    params.require_integrable()
    if s >= s_min:
        rep, source = (r, s), HSource.MODAL
    else:
        rep, source = (r * s_min / s, s_min), HSource.TRANSPORTED
    rr, ss = rep
    heat = float(half_plane_kernel(params, [rr], ss * ss, spacing=spacing)[0])
    ball = ball_volume(params, Point(rr, 0.0), ss, resolution=resolution)
    return HValue(r, s, ball.value * heat, heat, ball.value, ball.error_estimate, source, rep)


@dataclass(frozen=True)
class HFunctionTable:
    """``h(1, tau)`` and ``G(tau)`` sampled at ``r = 1/tau``, ``s = 1`` (``tau = inf`` is the axis)."""

    tau: np.ndarray
    r: np.ndarray
    s: np.ndarray
    h: np.ndarray
    G: np.ndarray
    heat: np.ndarray
    ball: np.ndarray
    ball_error: np.ndarray
    source: np.ndarray

    @property
    def bound(self) -> float:
        """Smallest ``C`` with ``1/C <= h <= C`` over the table."""
        return float(max(self.h.max(), 1.0 / self.h.min()))

    def finite(self):
        keep = np.isfinite(self.tau)
        return self.tau[keep], (self.h * self.G)[keep]

    def rows(self):
        return zip(self.r, self.s, self.h, self.source)


def h_table(params: GrushinParams, taus, *, include_axis: bool = True, resolution: int = 64,
            spacing: float | None = None) -> HFunctionTable:
    taus = np.sort(np.asarray(taus, dtype=float))
    if np.any(taus <= 0):
        raise InvalidParameter("tau must be positive")
    if include_axis:
        taus = np.concatenate([taus, [math.inf]])
    rows = []
    for tau in taus:
        r = 0.0 if math.isinf(tau) else 1.0 / tau
        value = h_function(params, r, 1.0, resolution=resolution, spacing=spacing)
        f = box_volume(params, r, 1.0).value / value.ball
        rows.append((tau, r, 1.0, value.h, G_of_tau(params, tau, f_value=f), value.heat, value.ball,
                     value.ball_error, value.source.value))
    cols = list(zip(*rows))
    return HFunctionTable(*(np.array(c) for c in cols))


# ---------------------------------------------------------------- trace integrals

def _hg_integral(params: GrushinParams, table: HFunctionTable, lo: float, hi: float, *, rtol: float = 1e-6) -> float:
    """Integral of ``h(1,tau) G(tau) / tau`` over ``[lo, hi]`` (``hi`` may be ``inf``, ``lo`` may be 0).

    Inside the table ``log(hG)`` is interpolated monotonically in ``u = log
    tau`` and integrated adaptively in ``u``. Below the table the integrand
    follows its known ``tau^(2 alpha - 2)`` law; above it a power law fitted
    to the last samples; both pieces are integrated in closed form.
    """
    tau, hg = table.finite()
    if np.any(hg <= 0):
        raise QuadratureFailure("h G must be positive to interpolate in log scale")
    u = np.log(tau)
    interp = PchipInterpolator(u, np.log(hg))
    t_lo, t_hi = tau[0], tau[-1]
    total = 0.0
    a, b = max(lo, t_lo), min(hi, t_hi)
    if b > a:
        value, err = integrate.quad(lambda x: math.exp(float(interp(x))), math.log(a), math.log(b),
                                    limit=200, epsrel=rtol)
        if err > 1e-4 * abs(value) + 1e-14:
            raise QuadratureFailure(f"tau quadrature error {err:.3g} on {value:.6g}")
        total += value
    if lo < t_lo:
        e = 2.0 * params.alpha - 1.0
        amp = hg[0] / t_lo**e
        top = min(hi, t_lo)
        if abs(e) < 1e-12:
            if lo <= 0:
                raise QuadratureFailure("log-divergent integral at tau = 0 (alpha = 1/2)")
            total += amp * math.log(top / lo)
        elif e < 0 and lo <= 0:
            raise QuadratureFailure("integral diverges at tau = 0 for alpha < 1/2")
        else:
            total += amp * (top**e - max(lo, 0.0) ** e) / e
    if hi > t_hi:
        slope = np.polyfit(u[-3:], np.log(hg[-3:]), 1)[0]
        if slope >= 0:
            raise QuadratureFailure("h G does not decay beyond the table")
        start = max(lo, t_hi)
        amp = hg[-1] / t_hi**slope
        upper = 0.0 if math.isinf(hi) else hi**slope
        total += amp * (upper - start**slope) / slope
    return total


def trace_constant(params: GrushinParams) -> float:
    """``C' = (n + 1 - 4 alpha) / 4``."""
    return (params.n + 1 - 4 * params.alpha) / 4.0


def trace_integral(params: GrushinParams, v1: float, v2: float, r1: float, r2: float, s: float,
                   table: HFunctionTable) -> float:
    """Heat trace over the box ``[r1, r2] x [v1, v2]`` at time ``s^2`` through the ``tau`` integral.

    ``C' s^(-1 - 2 alpha) (v2 - v1)`` times the integral of
    ``h(1, tau) G(tau) / tau`` from ``s/r2`` to ``s/r1``.
    """
    if not (0 <= r1 < r2 and v1 < v2 and s > 0):
        raise InvalidParameter("need 0 <= r1 < r2, v1 < v2 and s > 0")
    lo = 0.0 if math.isinf(r2) else s / r2
    hi = math.inf if r1 == 0 else s / r1
    k = params.snowflake_exponent
    return trace_constant(params) * s ** (-k) * (v2 - v1) * _hg_integral(params, table, lo, hi)


def Ltilde(params: GrushinParams, s: float, r2: float, table: HFunctionTable) -> float:
    """``integral_{s/r2}^inf h(1, tau) G(tau) / tau dtau`` (critical case)."""
    if abs(params.alpha - 0.5) > 1e-12:
        raise InvalidParameter("Ltilde is defined for alpha = 1/2")
    return _hg_integral(params, table, s / r2, math.inf)


def direct_trace_integral(params: GrushinParams, v1: float, v2: float, r1: float, r2: float, s_values, *,
                          spacing: float | None = None) -> np.ndarray:
    """Heat trace over a box computed from eigenvector masses on a wide quotient cylinder.

    The period is at least ``v2 - v1`` and large enough for the covering rule
    at ``r2`` and the largest ``s``; on the quotient the kernel does not
    depend on ``v``, so the box trace is ``(v2 - v1) / P`` times the band
    trace over the full circle.
    """
    s_values = np.atleast_1d(np.asarray(s_values, dtype=float))
    if not (0 <= r1 < r2 < math.inf and v1 < v2):
        raise InvalidParameter("need 0 <= r1 < r2 < inf and v1 < v2")
    s_lo, s_hi = float(s_values.min()), float(s_values.max())
    wide = replace(params, period=covering_period(params, r2, s_hi, v2 - v1))
    kernel = modal_heat_kernel(wide, Space.YBAR, TAIL_EXPONENT / s_lo**2, bands=[(r1, r2)], spacing=spacing,
                               t_max=s_hi**2)
    return np.array([(v2 - v1) / wide.period * kernel.band_trace(s * s)[0] for s in s_values])


@dataclass(frozen=True)
class LogFit:
    slope: float
    intercept: float
    remainder: float
    residual: float


def log_fit(s_values, values, *, remainder: bool = True) -> LogFit:
    """Least squares ``values = slope (-log s) + intercept (+ remainder s)``."""
    s = np.asarray(s_values, dtype=float)
    y = np.asarray(values, dtype=float)
    cols = [-np.log(s), np.ones_like(s)] + ([s] if remainder else [])
    A = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.max(np.abs(A @ coef - y))) if y.size else 0.0
    return LogFit(float(coef[0]), float(coef[1]), float(coef[2]) if remainder else 0.0, resid)


# ---------------------------------------------------------------- coverings

def covering_sum_circle(t: float, x: float, y: float, terms: int = 50) -> tuple[float, float]:
    """Both sides of the heat-kernel covering identity on the unit circle.

    The lattice side sums Euclidean kernels over the deck translates; the
    Fourier side is the circle's eigen-expansion.
    """
    if not (t > 0):
        raise InvalidParameter("t must be positive")
    l = np.arange(-terms, terms + 1, dtype=float)
    d = x - y + l
    lattice = float(np.sum(np.exp(-d * d / (4.0 * t))) / math.sqrt(4.0 * math.pi * t))
    fourier = float(np.sum(np.exp(-4.0 * math.pi**2 * l * l * t) * np.cos(2.0 * math.pi * l * (x - y))))
    return lattice, fourier


@dataclass(frozen=True)
class CoveringTail:
    bound: float
    terms: np.ndarray
    distances: np.ndarray
    C_LY: float


def covering_tail(params: GrushinParams, r0: float, s: float, *, terms: int = 6, C_LY: float = 1.0,
                  resolution: int = 96, distances=None) -> CoveringTail:
    """Upper bound ``sum_{l != 0} C_LY exp(-d(x, gamma^l x)^2 / (6 s^2))`` for the deck images.

    ``gamma`` shifts ``v`` by the period. Distances come from the numeric
    distance field; ``C_LY`` is the Li-Yau type constant, for instance the
    bound of an ``h`` table.
    """
    if r0 < 0 or not (0 < s < 1):
        raise InvalidParameter("need r0 >= 0 and 0 < s < 1")
    if distances is None:
        source = Point(r0, 0.0)
        targets = [Point(r0, l * params.period) for l in range(1, terms + 1)]
        distances, _ = distances_from(params, source, targets, resolution=resolution, refine=False)
    distances = np.asarray(distances, dtype=float)[:terms]
    term = C_LY * np.exp(-distances**2 / (6.0 * s * s))
    return CoveringTail(float(2.0 * term.sum()), term, distances, C_LY)


# ---------------------------------------------------------------- Karamata

class TauberLaw(str, Enum):
    POWER = "power"
    LOG = "log"


@dataclass(frozen=True)
class KaramataResult:
    law: TauberLaw
    beta: float | None
    heat_limit: float
    counting_limit: float
    ratio: float
    heat_variation: float
    counting_variation: float
    plateau_ok: bool
    heat_window: tuple[float, float]
    counting_window: tuple[float, float]


def _variation(values) -> float:
    values = np.asarray(values, dtype=float)
    return float((values.max() - values.min()) / abs(values.mean()))


def _log_law_coefficient(x, y, basis) -> float:
    coef, *_ = np.linalg.lstsq(np.stack(basis(x), axis=1), y, rcond=None)
    return float(coef[0])


def karamata_limits(spec: Spectrum, beta: float | None = None, law: TauberLaw | str = TauberLaw.POWER, *,
                    tolerance: float = 0.15, samples: int = 64, subwindows: int = 4,
                    strict: bool = True) -> KaramataResult:
    """Heat-side and counting-side limits of a spectrum and their ratio.

    The counting window is the top decade below ``0.9 Lambda``; the heat
    window is ``t in [25/Lambda, 250/Lambda]``. Power law: ``t^(beta/2) Z``
    and ``N / lambda^(beta/2)`` are extrapolated linearly in ``t^(beta/2)``
    and ``lambda^(-beta/2)``, the order at which a constant offset in ``Z``
    or ``N`` enters. Log law: ``t Z = a log(1/t) + c`` and
    ``N = a lambda log(lambda) + b lambda`` by least squares. The plateau
    check compares the estimates over ``subwindows`` log-spaced pieces.
    """
    law = TauberLaw(law)
    if law is TauberLaw.POWER and not (beta and beta > 0):
        raise InvalidParameter("power law needs beta > 0")
    top = spec.complete_below
    lam_hi = 0.9 * top
    lam_lo = lam_hi / 10.0
    t_lo, t_hi = TAIL_EXPONENT / top, 10.0 * TAIL_EXPONENT / top
    lam_grid = np.geomspace(lam_lo, lam_hi, samples)
    t_grid = np.geomspace(t_lo, t_hi, samples)
    N = spec.counting(lam_grid).astype(float)
    Z = heat_trace(spec, t_grid).Z_values[::-1]

    if law is TauberLaw.POWER:
        half = beta / 2.0

        def heat_est(idx):
            return np.polyfit(t_grid[idx] ** half, t_grid[idx] ** half * Z[idx], 1)[1]

        def count_est(idx):
            return np.polyfit(lam_grid[idx] ** -half, N[idx] / lam_grid[idx] ** half, 1)[1]
    else:
        def heat_est(idx):
            return _log_law_coefficient(t_grid[idx], t_grid[idx] * Z[idx],
                                        lambda x: [np.log(1.0 / x), np.ones_like(x)])

        def count_est(idx):
            return _log_law_coefficient(lam_grid[idx], N[idx], lambda x: [x * np.log(x), x])

    full = np.arange(samples)
    pieces = np.array_split(full, subwindows)
    heat_limit = float(heat_est(full))
    count_limit = float(count_est(full))
    heat_var = _variation([heat_est(p) for p in pieces])
    count_var = _variation([count_est(p) for p in pieces])
    ok = heat_var <= tolerance and count_var <= tolerance
    if strict and not ok:
        raise NoPlateau(f"windowed estimates vary by {max(heat_var, count_var):.3g} > {tolerance}")
    return KaramataResult(law, beta, heat_limit, count_limit, heat_limit / count_limit, heat_var, count_var, ok,
                          (t_lo, t_hi), (lam_lo, lam_hi))
