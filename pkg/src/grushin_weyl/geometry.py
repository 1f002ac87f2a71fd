"""Metric, measure, dilations and numeric geodesic distance on the Grushin half-plane.

The half-plane ``Y = [0, inf) x R`` carries the metric ``dr^2 + r^(-4 alpha) dv^2``
and the measure ``c_m r^((n-1)/2 - 2 alpha) dr dv``.

Distances are computed as shortest paths on a grid graph. The grid lives in
conformal coordinates

    x = v / k^(2 alpha),    y = (r / k)^k,    k = 1 + 2 alpha,

in which the metric becomes ``(dx^2 + dy^2) / y^(2c)`` with ``c = 2 alpha / k``.
The dilation ``(r, v) -> (lam r, lam^k v)`` turns into the homothety
``(x, y) -> lam^k (x, y)``, so a uniform square grid in ``(x, y)`` is
self-similar under dilations and automatically graded towards the axis in
``r``. Because the conformal factor depends on ``y`` only, the Riemannian
length of a straight segment has a closed form, which is used as the exact
edge weight (axis-to-axis edges have infinite length and are omitted).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numba import njit

from .errors import (
    GridTooCoarse,
    InvalidParameter,
    MeasureExponentNonIntegrable,
    NoConvergence,
    NonPositiveAlpha,
    NonPositiveScale,
    SingularAxis,
)

logger = logging.getLogger(__name__)

DEFAULT_STENCIL = 4
DEFAULT_TOLERANCE = 0.05


@dataclass(frozen=True)
class GrushinParams:
    """Exponent ``alpha``, dimension parameter ``n``, measure normalisation and v-period.

    Construction checks only the basic sign conditions so that spectral
    computations for non-integrable weights (such as the unweighted ``n = 1``
    cylinder) remain possible. Use :func:`validate_params` for the full check.
    """

    alpha: float
    n: int
    c_m: float = 1.0
    period: float = 2 * math.pi

    def __post_init__(self):
        if not (self.alpha > 0):
            raise NonPositiveAlpha(f"alpha must be positive, got {self.alpha}")
        if not (self.c_m > 0):
            raise InvalidParameter(f"c_m must be positive, got {self.c_m}")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidParameter(f"n must be an integer >= 1, got {self.n}")
        if not (self.period > 0):
            raise InvalidParameter(f"period must be positive, got {self.period}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "c_m", float(self.c_m))
        object.__setattr__(self, "period", float(self.period))

    @property
    def rcd_valid(self) -> bool:
        a = self.alpha
        return self.n >= max(4 * a + 3, 16 * a * a + 8 * a + 1) - 1e-12

    @property
    def snowflake_exponent(self) -> float:
        """Hausdorff dimension ``k = 1 + 2 alpha`` of the axis."""
        return 1.0 + 2.0 * self.alpha

    @property
    def weight_exponent(self) -> float:
        """Exponent ``q`` of the radial density ``r^q``."""
        return (self.n - 1) / 2.0 - 2.0 * self.alpha

    @property
    def volume_exponent(self) -> float:
        """``(n + 1)/2 - 2 alpha``, the exponent of ``r`` in integrated volumes."""
        return (self.n + 1) / 2.0 - 2.0 * self.alpha

    @property
    def homogeneous_dimension(self) -> float:
        """Measure scaling exponent under dilations, ``(n + 3)/2``."""
        return (self.n + 3) / 2.0

    @property
    def integrable(self) -> bool:
        return self.n + 1 > 4 * self.alpha

    def require_integrable(self) -> None:
        if not self.integrable:
            raise MeasureExponentNonIntegrable(
                f"n + 1 = {self.n + 1} <= 4 alpha = {4 * self.alpha}: "
                "the radial weight is not integrable at the axis"
            )


def validate_params(alpha: float, n: int, c_m: float = 1.0, period: float = 2 * math.pi) -> GrushinParams:
    """Build parameters and reject weights that are not integrable at the axis."""
    params = GrushinParams(alpha, n, c_m, period)
    params.require_integrable()
    if not params.rcd_valid:
        logger.info("alpha=%g, n=%d is outside the curvature-dimension range", alpha, n)
    return params


@dataclass(frozen=True)
class Point:
    r: float
    v: float = 0.0

    def __post_init__(self):
        if not (self.r >= 0):
            raise InvalidParameter(f"radial coordinate must be nonnegative, got {self.r}")

    @property
    def on_axis(self) -> bool:
        return self.r == 0


def metric_coefficients(params: GrushinParams, p: Point) -> tuple[float, float]:
    if p.r == 0:
        raise SingularAxis("the metric degenerates on the axis r = 0")
    return 1.0, p.r ** (-4.0 * params.alpha)


def measure_density(params: GrushinParams, r):
    """Radial density ``c_m r^q`` of the measure with respect to ``dr dv``.

    Accepts scalars or arrays. At ``r = 0`` the value is 0 for a positive
    exponent, 1 (times ``c_m``) for a zero exponent and ``inf`` otherwise.
    """
    q = params.weight_exponent
    r_arr = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        out = params.c_m * np.power(r_arr, q)
    return float(out) if out.ndim == 0 else out


def dilate(params: GrushinParams, p: Point, lam: float) -> Point:
    if not (lam > 0):
        raise NonPositiveScale(f"dilation factor must be positive, got {lam}")
    return Point(lam * p.r, lam ** params.snowflake_exponent * p.v)


def rectangle_measure(params: GrushinParams, r_range: tuple[float, float], v_range: tuple[float, float]) -> float:
    """Exact measure of ``[r_lo, r_hi] x [v_lo, v_hi]``."""
    params.require_integrable()
    (r_lo, r_hi), (v_lo, v_hi) = r_range, v_range
    p = params.volume_exponent
    return params.c_m * (v_hi - v_lo) * (r_hi**p - max(r_lo, 0.0) ** p) / p


# ---------------------------------------------------------------------------
# conformal coordinates


def to_conformal(params: GrushinParams, r, v):
    k = params.snowflake_exponent
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    return v / k ** (2 * params.alpha), (r / k) ** k


def from_conformal(params: GrushinParams, x, y):
    k = params.snowflake_exponent
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return k * np.power(y, 1.0 / k), x * k ** (2 * params.alpha)


def _secant_factor(params: GrushinParams, ya, yb):
    """Length of a conformal segment divided by its Euclidean length.

    Equals ``(r(yb) - r(ya)) / (yb - ya)``, the mean of the conformal factor
    ``y^(-c)`` along the segment; ``inf`` when both ends lie on the axis.
    """
    k = params.snowflake_exponent
    ya = np.asarray(ya, dtype=float)
    yb = np.asarray(yb, dtype=float)
    dy = yb - ya
    close = np.abs(dy) <= 1e-9 * np.maximum(np.abs(ya), np.abs(yb))
    with np.errstate(divide="ignore", invalid="ignore"):
        secant = k * (np.power(yb, 1.0 / k) - np.power(ya, 1.0 / k)) / np.where(close, 1.0, dy)
        mid = np.power(0.5 * (ya + yb), 1.0 / k - 1.0)
    return np.where(close, mid, secant)


def segment_length(params: GrushinParams, xa, ya, xb, yb):
    """Riemannian length of the straight conformal segment between two points."""
    euclid = np.hypot(np.asarray(xb) - xa, np.asarray(yb) - ya)
    with np.errstate(invalid="ignore"):
        out = euclid * _secant_factor(params, ya, yb)
    return np.where(euclid == 0, 0.0, out)


def stencil_anisotropy(radius: int) -> float:
    """Worst relative excess of stencil path length over Euclidean length.

    A straight line between two adjacent stencil directions separated by
    angle ``theta`` is approximated with excess ``1/cos(theta/2) - 1``.
    """
    angles = sorted(math.atan2(b, a) for a, b in stencil_offsets(radius))
    angles = angles + [angles[0] + math.pi]
    widest = max(b - a for a, b in zip(angles, angles[1:]))
    return 1.0 / math.cos(widest / 2.0) - 1.0


def stencil_offsets(radius: int) -> list[tuple[int, int]]:
    """Primitive integer directions with max-norm at most ``radius``, one per +/- pair."""
    out = []
    for a in range(0, radius + 1):
        for b in range(-radius, radius + 1):
            if a == 0 and b <= 0:
                continue
            if math.gcd(a, abs(b)) == 1:
                out.append((a, b))
    return out


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid in conformal coordinates.

    Nodes are ``(x0 + i hx, y0 + j hy)`` for ``0 <= i <= nx`` and
    ``0 <= j <= ny``; in the radial coordinate this is a power-law grading
    towards the axis. ``stencil`` is the max-norm radius of the neighbour
    directions.
    """

    x0: float
    y0: float
    hx: float
    hy: float
    nx: int
    ny: int
    stencil: int = DEFAULT_STENCIL

    def __post_init__(self):
        if self.y0 < 0 or self.hx <= 0 or self.hy <= 0 or self.nx < 1 or self.ny < 1:
            raise InvalidParameter(f"degenerate grid {self}")
        if self.stencil < 1:
            raise InvalidParameter("stencil radius must be at least 1")

    @property
    def x_nodes(self) -> np.ndarray:
        return self.x0 + self.hx * np.arange(self.nx + 1)

    @property
    def y_nodes(self) -> np.ndarray:
        return self.y0 + self.hy * np.arange(self.ny + 1)

    @property
    def node_count(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    def refined(self, factor: int = 2) -> "GridSpec":
        """Same window with spacing divided by ``factor``; old nodes stay nodes."""
        return GridSpec(self.x0, self.y0, self.hx / factor, self.hy / factor,
                        self.nx * factor, self.ny * factor, self.stencil)

    def node_of(self, x: float, y: float, rel_tol: float = 1e-9) -> tuple[int, int] | None:
        """Index ``(j, i)`` of the node at ``(x, y)``, or None when off-grid."""
        fi = (x - self.x0) / self.hx
        fj = (y - self.y0) / self.hy
        i, j = round(fi), round(fj)
        if abs(fi - i) <= rel_tol * max(1.0, abs(fi)) and abs(fj - j) <= rel_tol * max(1.0, abs(fj)):
            if 0 <= i <= self.nx and 0 <= j <= self.ny:
                return j, i
        return None

    def contains(self, x: float, y: float) -> bool:
        eps = 1e-12
        return (self.x0 - eps * self.hx <= x <= self.x0 + self.nx * self.hx * (1 + eps) + eps
                and self.y0 - eps * self.hy <= y <= self.y0 + self.ny * self.hy * (1 + eps) + eps)

    @classmethod
    def covering(cls, params: GrushinParams, r_range, v_range, *, spacing: float | None = None,
                 resolution: int | None = None, anchor: Point | None = None,
                 stencil: int = DEFAULT_STENCIL) -> "GridSpec":
        """Square-cell grid covering an ``(r, v)`` window.

        ``spacing`` is the conformal cell size; alternatively ``resolution``
        sets the number of cells across the longer side of the window. When
        ``anchor`` is given it is placed exactly on a node. A window touching
        the axis always has a node row on the axis.
        """
        r_lo, r_hi = max(0.0, r_range[0]), r_range[1]
        xs, ys = to_conformal(params, [r_lo, r_hi], list(v_range))
        x_lo, x_hi = sorted(map(float, xs))
        y_lo, y_hi = float(ys[0]), float(ys[1])
        if spacing is None:
            if resolution is None:
                raise InvalidParameter("either spacing or resolution is required")
            spacing = max(x_hi - x_lo, y_hi - y_lo) / resolution
        h = float(spacing)
        ax, ay = (None, None)
        if anchor is not None:
            ax, ay = (float(c) for c in to_conformal(params, anchor.r, anchor.v))

        hy = h
        if r_lo == 0 or (ay is not None and ay - math.ceil((ay - y_lo) / h - 1e-9) * h < 0):
            y0 = 0.0
            # an anchor within two cells of the axis stays off-grid rather than distort the rows
            if ay is not None and ay >= 2.0 * h:
                hy = ay / round(ay / h)
        elif ay is not None:
            y0 = ay - math.ceil((ay - y_lo) / h - 1e-9) * h
        else:
            y0 = y_lo
        ny = max(1, math.ceil((y_hi - y0) / hy - 1e-9))

        if ax is not None:
            x0 = ax - math.ceil((ax - x_lo) / h - 1e-9) * h
        else:
            x0 = x_lo
        nx = max(1, math.ceil((x_hi - x0) / h - 1e-9))
        return cls(x0, y0, h, hy, nx, ny, stencil)


def comparison_path_bound(params: GrushinParams, a: Point, b: Point) -> float:
    """Length of the best radial-out, translate, radial-in path from ``a`` to ``b``.

    The path climbs to radius ``rho``, moves in ``v`` at constant radius, and
    returns; the optimal ``rho`` is available in closed form.
    """
    dv = abs(b.v - a.v)
    top = max(a.r, b.r)
    if dv == 0:
        return abs(a.r - b.r)
    alpha = params.alpha
    rho = max(top, (alpha * dv) ** (1.0 / (1.0 + 2.0 * alpha)))
    return abs(a.r - rho) + abs(b.r - rho) + dv * rho ** (-2.0 * alpha)


# ---------------------------------------------------------------------------
# graph distances


@njit(cache=True)
def _heap_push(keys, vals, size, key, val):
    if size == keys.size:
        grown_k = np.empty(2 * keys.size)
        grown_v = np.empty(2 * keys.size, dtype=np.int64)
        grown_k[:size] = keys[:size]
        grown_v[:size] = vals[:size]
        keys, vals = grown_k, grown_v
    pos = size
    keys[pos] = key
    vals[pos] = val
    while pos > 0:
        parent = (pos - 1) >> 1
        if keys[parent] <= keys[pos]:
            break
        keys[parent], keys[pos] = keys[pos], keys[parent]
        vals[parent], vals[pos] = vals[pos], vals[parent]
        pos = parent
    return keys, vals, size + 1


@njit(cache=True)
def _heap_pop(keys, vals, size):
    key, val = keys[0], vals[0]
    size -= 1
    keys[0], vals[0] = keys[size], vals[size]
    pos = 0
    while True:
        left = 2 * pos + 1
        if left >= size:
            break
        child = left
        if left + 1 < size and keys[left + 1] < keys[left]:
            child = left + 1
        if keys[pos] <= keys[child]:
            break
        keys[child], keys[pos] = keys[pos], keys[child]
        vals[child], vals[pos] = vals[pos], vals[child]
        pos = child
    return key, val, size


@njit(cache=True)
def _grid_dijkstra(nxp, nyp, da, db, row_weight, seed_nodes, seed_dist, limit):
    """Dijkstra on the implicit stencil graph.

    ``row_weight[d, j]`` is the length of the edge leaving row ``j`` in
    direction ``d`` (``inf`` when absent); the graph is never stored.
    """
    n = nxp * nyp
    dist = np.full(n, np.inf)
    done = np.zeros(n, dtype=np.bool_)
    keys = np.empty(1024)
    vals = np.empty(1024, dtype=np.int64)
    size = 0
    for s in range(seed_nodes.size):
        node = seed_nodes[s]
        if seed_dist[s] < dist[node]:
            dist[node] = seed_dist[s]
            keys, vals, size = _heap_push(keys, vals, size, seed_dist[s], node)
    while size > 0:
        d0, node, size = _heap_pop(keys, vals, size)
        if done[node] or d0 > dist[node]:
            continue
        if d0 > limit:
            break
        done[node] = True
        j = node // nxp
        i = node - j * nxp
        for e in range(da.size):
            ii = i + da[e]
            jj = j + db[e]
            if ii < 0 or ii >= nxp or jj < 0 or jj >= nyp:
                continue
            w = row_weight[e, j]
            if not np.isfinite(w):
                continue
            nb = jj * nxp + ii
            cand = d0 + w
            if cand < dist[nb]:
                dist[nb] = cand
                keys, vals, size = _heap_push(keys, vals, size, cand, nb)
    for node in range(n):
        if dist[node] > limit:
            dist[node] = np.inf
    return dist


def _stencil_tables(params: GrushinParams, grid: GridSpec):
    half = stencil_offsets(grid.stencil)
    directions = half + [(-a, -b) for a, b in half]
    ys = grid.y_nodes
    nyp = grid.ny + 1
    da = np.array([a for a, _ in directions], dtype=np.int64)
    db = np.array([b for _, b in directions], dtype=np.int64)
    row_weight = np.full((len(directions), nyp), np.inf)
    for e, (a, b) in enumerate(directions):
        j = np.arange(max(0, -b), nyp - max(0, b))
        row_weight[e, j] = math.hypot(a * grid.hx, b * grid.hy) * _secant_factor(params, ys[j], ys[j + b])
    return da, db, row_weight


def _neighbourhood(params: GrushinParams, grid: GridSpec, x: float, y: float):
    """Flat node indices within one stencil box of ``(x, y)`` and segment lengths to them."""
    m = grid.stencil
    ci = (x - grid.x0) / grid.hx
    cj = (y - grid.y0) / grid.hy
    i = np.arange(max(0, math.floor(ci) - m + 1), min(grid.nx, math.ceil(ci) + m - 1) + 1)
    j = np.arange(max(0, math.floor(cj) - m + 1), min(grid.ny, math.ceil(cj) + m - 1) + 1)
    jj, ii = np.meshgrid(j, i, indexing="ij")
    xn = grid.x0 + ii * grid.hx
    yn = grid.y0 + jj * grid.hy
    lengths = segment_length(params, x, y, xn, yn)
    flat = (jj * (grid.nx + 1) + ii).ravel()
    lengths = lengths.ravel()
    keep = np.isfinite(lengths)
    return flat[keep], lengths[keep]


def graph_distances(params: GrushinParams, grid: GridSpec, source: Point, limit: float = np.inf) -> np.ndarray:
    """Shortest-path distances from ``source`` to every node, shape ``(ny+1, nx+1)``.

    An off-grid source seeds the nodes of its stencil box with exact segment
    lengths. Nodes farther than ``limit`` are reported as ``inf``.
    """
    sx, sy = (float(c) for c in to_conformal(params, source.r, source.v))
    if not grid.contains(sx, sy):
        raise InvalidParameter(f"source {source} lies outside the grid window")
    hit = grid.node_of(sx, sy)
    if hit is not None:
        seeds = np.array([hit[0] * (grid.nx + 1) + hit[1]], dtype=np.int64)
        seed_dist = np.zeros(1)
    else:
        seeds, seed_dist = _neighbourhood(params, grid, sx, sy)
    da, db, row_weight = _stencil_tables(params, grid)
    dist = _grid_dijkstra(grid.nx + 1, grid.ny + 1, da, db, row_weight,
                          seeds.astype(np.int64), np.asarray(seed_dist, dtype=float), float(limit))
    return dist.reshape(grid.ny + 1, grid.nx + 1)


def _evaluate(params: GrushinParams, grid: GridSpec, values: np.ndarray, point: Point) -> float:
    px, py = (float(c) for c in to_conformal(params, point.r, point.v))
    hit = grid.node_of(px, py)
    if hit is not None:
        return float(values[hit])
    nb, lengths = _neighbourhood(params, grid, px, py)
    return float(np.min(values.ravel()[nb] + lengths))


def _relative_change(coarse: np.ndarray, fine_on_coarse: np.ndarray) -> float:
    finite = np.isfinite(coarse) & np.isfinite(fine_on_coarse)
    if not finite.any():
        return 0.0
    scale = fine_on_coarse[finite].max()
    sel = finite & (fine_on_coarse >= 0.05 * scale)
    if not sel.any():
        return 0.0
    return float(np.max(np.abs(coarse[sel] - fine_on_coarse[sel]) / fine_on_coarse[sel]))


@dataclass(frozen=True)
class DistanceField:
    """Graph distances from ``source`` on ``grid`` with a refinement-based error indicator."""

    source: Point
    grid: GridSpec
    values: np.ndarray = field(repr=False)
    resolution_indicator: float
    params: GrushinParams = field(repr=False)

    def distance_to(self, point: Point) -> float:
        return _evaluate(self.params, self.grid, self.values, point)

    @cached_property
    def node_coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical ``(r, v)`` of every node, each of shape ``values.shape``."""
        xs, ys = np.meshgrid(self.grid.x_nodes, self.grid.y_nodes)
        return from_conformal(self.params, xs, ys)

    def rows(self):
        r, v = self.node_coordinates
        return zip(r.ravel(), v.ravel(), self.values.ravel())


def distance_field(params: GrushinParams, source: Point, grid: GridSpec, *,
                   tolerance: float | None = DEFAULT_TOLERANCE, limit: float = np.inf) -> DistanceField:
    """Distances from ``source`` on ``grid``; the indicator compares against one halving of the spacing.

    Raises GridTooCoarse when the relative change exceeds ``tolerance``
    (pass ``None`` to only report it).
    """
    coarse = graph_distances(params, grid, source, limit)
    fine = graph_distances(params, grid.refined(2), source, limit)[::2, ::2]
    indicator = _relative_change(coarse, fine)
    if tolerance is not None and indicator > tolerance:
        raise GridTooCoarse(f"refinement changed distances by {indicator:.3g} > {tolerance:.3g}")
    return DistanceField(source, grid, coarse, indicator, params)


def pair_window(params: GrushinParams, a: Point, b: Point, pad: float = 0.05):
    """``(r, v)`` window that contains every minimizing path between ``a`` and ``b``.

    Along a geodesic the radius is unimodal and ``v`` is monotone, so the
    window is the ``v``-span of the endpoints and the radial band allowed by
    the comparison-path bound, padded slightly for the grid.
    """
    bound = comparison_path_bound(params, a, b)
    r_lo = min(a.r, b.r)
    r_hi = 0.5 * (a.r + b.r + bound)
    v_lo, v_hi = sorted((a.v, b.v))
    dr = (r_hi - r_lo) * pad + 1e-12
    dv = (v_hi - v_lo) * pad + bound * pad * max(r_hi, 1e-12) ** (2 * params.alpha) + 1e-12
    return (max(0.0, r_lo - dr), r_hi + dr), (v_lo - dv, v_hi + dv)


def padded_grid(params: GrushinParams, r_range, v_range, *, spacing: float | None = None,
                resolution: int | None = None, anchor: Point | None = None,
                stencil: int = DEFAULT_STENCIL, pad_cells: int | None = None) -> GridSpec:
    """Grid covering the window plus ``pad_cells`` cells on every side (default: one stencil radius)."""
    base = GridSpec.covering(params, r_range, v_range, spacing=spacing, resolution=resolution,
                             anchor=anchor, stencil=stencil)
    pad = (stencil if pad_cells is None else pad_cells) * base.hx
    k = params.snowflake_exponent
    dv = pad * k ** (2 * params.alpha)
    y_lo, y_hi = (float(c) for c in to_conformal(params, [max(0.0, r_range[0]), r_range[1]], [0, 0])[1])
    r_lo, r_hi = from_conformal(params, [0, 0], [max(0.0, y_lo - pad), y_hi + pad])[0]
    if r_range[0] <= 0:
        r_lo = 0.0
    return GridSpec.covering(params, (float(r_lo), float(r_hi)), (v_range[0] - dv, v_range[1] + dv),
                             spacing=base.hx, anchor=anchor, stencil=stencil)


def distances_from(params: GrushinParams, source: Point, targets, *, spacing: float | None = None,
                   resolution: int = 128, stencil: int = DEFAULT_STENCIL,
                   refine: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Numeric distances from ``source`` to each target, and their relative change under refinement.

    One grid anchored at ``source`` covers the windows of all pairs. It is
    sized by ``spacing`` (conformal units) or, if that is None, by
    ``resolution`` cells across the combined window.
    """
    targets = list(targets)
    windows = [pair_window(params, source, t) for t in targets]
    r_range = (min(w[0][0] for w in windows), max(w[0][1] for w in windows))
    v_range = (min(w[1][0] for w in windows), max(w[1][1] for w in windows))
    grid = padded_grid(params, r_range, v_range, spacing=spacing, resolution=resolution,
                       anchor=source, stencil=stencil)
    # minimizing graph paths are no longer than the comparison path plus one stencil hop per end
    limit = 1.25 * max(comparison_path_bound(params, source, t) for t in targets) + 1e-12
    values = graph_distances(params, grid, source, limit)
    coarse = np.array([_evaluate(params, grid, values, t) for t in targets])
    if not refine:
        return coarse, np.full(len(targets), np.nan)
    fine_grid = grid.refined(2)
    values = graph_distances(params, fine_grid, source, limit)
    fine = np.array([_evaluate(params, fine_grid, values, t) for t in targets])
    with np.errstate(invalid="ignore", divide="ignore"):
        change = np.where(fine > 0, np.abs(coarse - fine) / fine, 0.0)
    return coarse, change


def point_distance(params: GrushinParams, a: Point, b: Point, *, spacing: float | None = None,
                   resolution: int = 128, stencil: int = DEFAULT_STENCIL,
                   refine: bool = True) -> tuple[float, float]:
    """Numeric ``d(a, b)`` and its relative change under one refinement."""
    d, change = distances_from(params, a, [b], spacing=spacing, resolution=resolution,
                               stencil=stencil, refine=refine)
    return float(d[0]), float(change[0])


@dataclass(frozen=True)
class BoundaryConstant:
    value: float
    error: float
    estimates: tuple[float, ...]
    resolutions: tuple[int, ...]


def _axis_distance(params: GrushinParams, length: float, cells_per_length: int, stencil: int) -> float:
    a, b = Point(0.0, 0.0), Point(0.0, length)
    r_range, v_range = pair_window(params, a, b)
    k = params.snowflake_exponent
    h = length / k ** (2 * params.alpha) / cells_per_length
    grid = GridSpec.covering(params, r_range, v_range, spacing=h, anchor=a, stencil=stencil)
    return _evaluate(params, grid, graph_distances(params, grid, a), b)


def axis_distance(params: GrushinParams, length: float, *, cells_per_length: int = 128,
                  stencil: int = DEFAULT_STENCIL) -> float:
    """Graph distance between the axis points ``(0, 0)`` and ``(0, length)``."""
    return _axis_distance(params, length, cells_per_length, stencil)


def boundary_distance_constant(params: GrushinParams, resolution: int = 64, *, levels: int = 3,
                               stencil: int = DEFAULT_STENCIL) -> BoundaryConstant:
    """Richardson-extrapolated ``C = d((0, 1), (0, 0))``.

    ``resolution`` is the number of cells along the axis segment on the
    coarsest level; each further level halves the spacing. Graph distances
    between nodes decrease monotonically under this refinement, so the
    successive differences must contract.
    """
    res = tuple(resolution * 2**i for i in range(levels))
    est = tuple(_axis_distance(params, 1.0, m, stencil) for m in res)
    if levels < 3:
        return BoundaryConstant(est[-1], abs(est[-1] - est[0]) if levels > 1 else float("nan"), est, res)
    d1, d2 = est[-3] - est[-2], est[-2] - est[-1]
    if abs(d2) >= abs(d1) and abs(d1) > 1e-14 * est[-1]:
        raise NoConvergence(f"axis distance refinements do not contract: {est}")
    ratio = d2 / d1 if d1 != 0 else 0.0
    value = est[-1] - d2 * ratio / (1.0 - ratio)
    error = max(abs(value - est[-1]), abs(d2))
    return BoundaryConstant(value, error, est, res)


@dataclass(frozen=True)
class TranslationCheck:
    dist: float
    normalized: float          # dist / l^(1/k), the empirical lower-bound constant
    upper: float               # 3 l^(1/k)
    comparison_bound: float    # best explicit comparison path
    resolution_indicator: float
    upper_violated: bool


def translation_distance_check(params: GrushinParams, x: Point, l: int, *, resolution: int = 128,
                               stencil: int = DEFAULT_STENCIL) -> TranslationCheck:
    """Distance from ``x`` to its translate by ``l`` periods of unit length, with bounds."""
    if int(l) != l or l < 1:
        raise InvalidParameter(f"translation count must be a positive integer, got {l}")
    target = Point(x.r, x.v + l)
    d, change = point_distance(params, x, target, resolution=resolution, stencil=stencil)
    k = params.snowflake_exponent
    upper = 3.0 * l ** (1.0 / k)
    return TranslationCheck(
        dist=d,
        normalized=d / l ** (1.0 / k),
        upper=upper,
        comparison_bound=comparison_path_bound(params, x, target),
        resolution_indicator=change,
        upper_violated=bool(d > upper * (1.0 + change)),
    )


def conformal_separation(params: GrushinParams, a: Point, b: Point) -> float:
    xa, ya = to_conformal(params, a.r, a.v)
    xb, yb = to_conformal(params, b.r, b.v)
    return float(math.hypot(xa - xb, ya - yb))


def sample_pairs(params: GrushinParams, sources: int = 4, per_source: int = 5, *, r_range=(0.5, 1.5),
                 v_range=(-0.5, 0.5), min_separation: float = 0.2) -> list[tuple[Point, list[Point]]]:
    """Deterministic source/target groups from an unscrambled Halton sequence.

    Targets closer than ``min_separation`` (conformal units) to their source
    are skipped so every pair spans many grid cells.
    """
    from scipy.stats import qmc

    halton = qmc.Halton(d=2, scramble=False)
    halton.fast_forward(1)

    def draw():
        u = halton.random(1)[0]
        return Point(r_range[0] + u[0] * (r_range[1] - r_range[0]), v_range[0] + u[1] * (v_range[1] - v_range[0]))

    groups = []
    for _ in range(sources):
        src = draw()
        targets = []
        while len(targets) < per_source:
            cand = draw()
            if conformal_separation(params, src, cand) >= min_separation:
                targets.append(cand)
        groups.append((src, targets))
    return groups


@dataclass(frozen=True)
class DilationReport:
    """Relative scaling-identity errors ``|d(F x, F y) / (lam d(x, y)) - 1|`` per pair and factor."""

    lambdas: tuple[float, ...]
    spacing: float
    errors: np.ndarray

    @property
    def max_errors(self) -> np.ndarray:
        return self.errors.max(axis=0)


def dilation_check(params: GrushinParams, groups, lambdas=(0.5, 2.0, 4.0), *, spacing: float = 0.01,
                   stencil: int = DEFAULT_STENCIL) -> DilationReport:
    """Compare distances with their dilated counterparts on grids of equal conformal spacing.

    Both sides use the same absolute spacing, so the dilated pair is resolved
    on a relatively finer or coarser grid and the check is not exact by
    construction.
    """
    rows = []
    for src, targets in groups:
        base = distances_from(params, src, targets, spacing=spacing, stencil=stencil, refine=False)[0]
        per_lam = []
        for lam in lambdas:
            scaled = distances_from(params, dilate(params, src, lam), [dilate(params, t, lam) for t in targets],
                                    spacing=spacing, stencil=stencil, refine=False)[0]
            per_lam.append(np.abs(scaled / (lam * base) - 1.0))
        rows.append(np.array(per_lam).T)
    return DilationReport(tuple(float(l) for l in lambdas), spacing, np.concatenate(rows))
