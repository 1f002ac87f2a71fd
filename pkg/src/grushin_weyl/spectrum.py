"""Separated radial eigenvalue problems and spectrum assembly.

An eigenfunction ``phi(r) e^(2 pi i k v / P)`` of the weighted Laplacian on a
warped cylinder with metric ``dr^2 + h(r)^2 dv^2`` and measure ``w(r) dr dv``
solves

    -(1/w) (w phi')' + (2 pi k / P)^2 h(r)^(-2) phi = lambda phi.

The radial operator is discretized by cell-centred finite volumes: nodes
``r_i = i h``, fluxes through the midpoints weighted by ``w``, and lumped
masses equal to the exact integral of ``w`` over each dual cell. The result is
a symmetric tridiagonal pencil ``A phi = lambda M phi``.

Three spaces are supported. ``Ybar`` is the quotient cylinder with
``h = r^(-2 alpha)`` on ``(0, R]``. ``Ytilde`` uses the warp profile that
flattens to ``h = 1/2`` on ``[2, 3]``. ``Xdouble`` glues two copies of
``Ytilde`` along ``r = 3``; its spectrum is the union of the Neumann and the
Dirichlet problems at ``r = 3``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import cumulative_trapezoid
from scipy.linalg import LinAlgError, eigh_tridiagonal
from scipy.optimize import brentq

from .errors import EigenSolveFailure, GridTooCoarse, InvalidParameter, TruncationTooSmall
from .geometry import GrushinParams

_GAUSS_X, _GAUSS_W = leggauss(8)
DECAY_EXPONENT = 30.0


class Space(str, Enum):
    YBAR = "Ybar"
    YTILDE = "Ytilde"
    XDOUBLE = "Xdouble"


class OuterBC(str, Enum):
    NEUMANN = "Neumann"
    DIRICHLET = "Dirichlet"
    # The grid ends where every retained mode has decayed; a Dirichlet row is used.
    NONE = "None"


class Bridge(str, Enum):
    LOG_HERMITE = "log-hermite"
    POWER = "power"


def _gauss_integral(func, a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    total = np.zeros(np.broadcast(a, b).shape)
    for x, w in zip(_GAUSS_X, _GAUSS_W):
        total = total + w * func(mid + half * x)
    return total * half


def _power_integral(q, a, b):
    """Integral of ``r^q`` over ``[a, b]`` (elementwise, ``0 <= a <= b``)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if q == -1.0:
        with np.errstate(divide="ignore"):
            return np.where(b > a, np.log(b) - np.log(a), 0.0)
    with np.errstate(divide="ignore"):
        return (b ** (q + 1.0) - a ** (q + 1.0)) / (q + 1.0)


class _PowerProfile:
    """``h(r) = r^(-2 alpha)`` on the whole half-line."""

    def __init__(self, alpha: float):
        self.alpha = alpha

    def h(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return r ** (-2.0 * self.alpha)

    def inverse_square(self, r):
        return np.asarray(r, dtype=float) ** (4.0 * self.alpha)

    def density(self, r, n: int):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return r ** _weight_exponent(self.alpha, n)

    def density_integral(self, a, b, n: int):
        return _power_integral(_weight_exponent(self.alpha, n), a, b)


def _weight_exponent(alpha: float, n: int) -> float:
    return (n - 1) / 2.0 - 2.0 * alpha


@dataclass(frozen=True)
class WarpProfile:
    """Warp factor ``h~`` of the perturbed cylinder.

    ``h~ = r^(-2 alpha)`` up to ``r_break1``, a decreasing convex bridge on
    ``[r_break1, r_break2]`` and the constant ``plateau`` up to ``r_end``.
    The bridge is checked on construction by dense sampling.
    """

    alpha: float
    r_break1: float = 1.0
    r_break2: float = 2.0
    r_end: float = 3.0
    bridge: Bridge = Bridge.LOG_HERMITE
    plateau: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "bridge", Bridge(self.bridge))
        if not (self.alpha > 0):
            raise InvalidParameter("alpha must be positive")
        if not (0 < self.r_break1 < self.r_break2 < self.r_end):
            raise InvalidParameter("need 0 < r_break1 < r_break2 < r_end")
        if not (0 < self.plateau < self.r_break1 ** (-2 * self.alpha)):
            raise InvalidParameter("plateau must lie below h~(r_break1)")
        problems = self.shape_problems()
        if problems:
            raise InvalidParameter(f"{self.bridge.value} bridge for alpha={self.alpha}: " + ", ".join(problems))

    @property
    def _start(self):
        r1 = self.r_break1
        return r1 ** (-2 * self.alpha), -2 * self.alpha * r1 ** (-2 * self.alpha - 1)

    def _bridge(self, t):
        length = self.r_break2 - self.r_break1
        h1, dh1 = self._start
        if self.bridge is Bridge.LOG_HERMITE:
            g0, g1 = math.log(h1), math.log(self.plateau)
            s0 = dh1 / h1 * length
            g = (2 * t**3 - 3 * t**2 + 1) * g0 + (t**3 - 2 * t**2 + t) * s0 + (-2 * t**3 + 3 * t**2) * g1
            return np.exp(g)
        # h' = h'(r1) (1 - t)^p with p fixed by the drop h(r1) - plateau
        p = -dh1 * length / (h1 - self.plateau) - 1.0
        return h1 + dh1 * length * (1.0 - (1.0 - t) ** (p + 1.0)) / (p + 1.0)

    def h(self, r):
        r = np.asarray(r, dtype=float)
        t = np.clip((r - self.r_break1) / (self.r_break2 - self.r_break1), 0.0, 1.0)
        with np.errstate(divide="ignore"):
            inner = r ** (-2.0 * self.alpha)
        out = np.where(r <= self.r_break1, inner, self._bridge(t))
        return np.where(r >= self.r_break2, self.plateau, out)

    def inverse_square(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.r_break1, r ** (4.0 * self.alpha), self.h(r) ** -2.0)

    def density(self, r, n: int):
        r = np.asarray(r, dtype=float)
        return self.h(r) ** (1.0 - (n - 1) / (4.0 * self.alpha))

    def density_integral(self, a, b, n: int):
        """Exact on the power and plateau parts, 8-point Gauss on the bridge."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        r1, r2 = self.r_break1, self.r_break2
        q = _weight_exponent(self.alpha, n)
        lo = np.minimum(a, r1)
        total = _power_integral(q, lo, np.minimum(b, r1))
        ba, bb = np.clip(a, r1, r2), np.clip(b, r1, r2)
        total = total + _gauss_integral(lambda x: self.density(x, n), ba, bb)
        flat = self.plateau ** (1.0 - (n - 1) / (4.0 * self.alpha))
        return total + flat * (np.maximum(b, r2) - np.maximum(a, r2))

    def shape_problems(self, samples: int = 4001) -> list[str]:
        """Failed shape checks of the bridge (empty when compliant)."""
        out = []
        if self.bridge is Bridge.POWER:
            h1, dh1 = self._start
            p = -dh1 * (self.r_break2 - self.r_break1) / (h1 - self.plateau) - 1.0
            if not p > 0:
                out.append("no C1 convex power bridge exists")
                return out
        r = np.linspace(self.r_break1, self.r_break2, samples)
        h = self.h(r)
        step = r[1] - r[0]
        if np.any(np.diff(h) > 1e-13):
            out.append("not decreasing")
        if np.any(np.diff(h, 2) < -1e-12 * step):
            out.append("not convex")
        # one-sided slopes must merge as the step shrinks (slowly for the power bridge)
        scale = max(1.0, abs(self._start[1]))
        for x in (self.r_break1, self.r_break2):
            gaps = []
            for eps in (1e-4, 1e-7):
                left = (self.h(x) - self.h(x - eps)) / eps
                right = (self.h(x + eps) - self.h(x)) / eps
                gaps.append(abs(left - right))
            if gaps[1] > 1e-5 * scale and not gaps[1] < 0.9 * gaps[0]:
                out.append(f"not C1 at r={x}")
        return out


@dataclass(frozen=True)
class RadialGrid:
    """Uniform nodes ``r_i = i * r_end / N`` with ``N = ceil(r_end / spacing)``."""

    spacing: float
    r_end: float

    def __post_init__(self):
        if not (self.spacing > 0 and self.r_end > 0):
            raise InvalidParameter("radial grid needs positive spacing and end point")

    @property
    def cells(self) -> int:
        return max(int(math.ceil(self.r_end / self.spacing - 1e-9)), 4)

    @property
    def step(self) -> float:
        return self.r_end / self.cells

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.r_end, self.cells + 1)

    def refined(self, factor: int = 2) -> "RadialGrid":
        return RadialGrid(self.step / factor, self.r_end)


@dataclass(frozen=True)
class ModeProblem:
    space: Space
    k: int
    outer_bc: OuterBC
    grid: RadialGrid
    warp: WarpProfile | None = None
    # Ybar's k = 0 sector is continuous; a truncated version is only built on request.
    truncated_continuum: bool = False

    def __post_init__(self):
        object.__setattr__(self, "space", Space(self.space))
        object.__setattr__(self, "outer_bc", OuterBC(self.outer_bc))
        if int(self.k) != self.k:
            raise InvalidParameter("Fourier index k must be an integer")
        if self.space is Space.YBAR:
            if self.k == 0 and not self.truncated_continuum:
                raise InvalidParameter("Ybar with k = 0 is continuous spectrum; set truncated_continuum")
        elif self.warp is None:
            raise InvalidParameter(f"space {self.space.value} needs a WarpProfile")
        elif self.grid.r_end > self.warp.r_end + 1e-12:
            raise InvalidParameter("radial grid extends past the end of the warped cylinder")



@dataclass(frozen=True)
class RadialOperator:
    """Pencil ``A phi = lambda M phi`` on the retained nodes ``r``.

    ``diag`` and ``off`` hold the tridiagonal stiffness-plus-potential matrix,
    ``mass`` the lumped dual-cell masses and ``cell_edges`` the dual-cell
    boundaries of the retained nodes.
    """

    r: np.ndarray
    diag: np.ndarray
    off: np.ndarray
    mass: np.ndarray
    potential: np.ndarray
    cell_edges: np.ndarray
    spacing: float

    def symmetric_tridiagonal(self):
        s = 1.0 / np.sqrt(self.mass)
        return self.diag * s * s, self.off * s[:-1] * s[1:]

    def dense_matrix(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """``M^(-1) A vec``, the discrete operator acting on nodal values."""
        out = self.diag * vec
        out[:-1] += self.off * vec[1:]
        out[1:] += self.off * vec[:-1]
        return out / self.mass


def _angular_frequency(params: GrushinParams, k: int) -> float:
    return 2.0 * math.pi * k / params.period


def _fv_pencil(nodes, density, density_integral, inverse_square, freq2, inner_flux: bool, outer_dirichlet: bool):
    step = nodes[1] - nodes[0]
    r_end = nodes[-1]
    faces = 0.5 * (nodes[1:] + nodes[:-1])
    edges = np.concatenate([[nodes[0]], faces, [r_end]])
    flux = density(faces) / step
    diag = np.zeros(nodes.size)
    diag[:-1] += flux
    diag[1:] += flux
    off = -flux.copy()
    first = 0 if inner_flux else 1
    last = nodes.size - 1 if outer_dirichlet else nodes.size
    mass = density_integral(edges[first:last], edges[first + 1:last + 1])
    potential = freq2 * inverse_square(nodes[first:last])
    diag = diag[first:last] + potential * mass
    off = off[first:last - 1]
    return nodes[first:last], diag, off, mass, potential, edges[first:last + 1], step


def build_radial_operator(params: GrushinParams, problem: ModeProblem) -> RadialOperator:
    """Finite-volume pencil for one Fourier mode.

    The axis node carries a zero-flux cell when the measure is integrable at
    ``r = 0``; otherwise only the solution vanishing at the axis has finite
    weighted norm and the axis node is eliminated (Dirichlet row).
    """
    if problem.space is Space.YBAR:
        profile = _PowerProfile(params.alpha)
    elif abs(problem.warp.alpha - params.alpha) > 1e-15:
        raise InvalidParameter("warp profile alpha differs from params.alpha")
    else:
        profile = problem.warp
    n = params.n
    nodes = problem.grid.nodes
    return RadialOperator(*_fv_pencil(
        nodes,
        lambda x: profile.density(x, n),
        lambda a, b: profile.density_integral(a, b, n),
        profile.inverse_square,
        _angular_frequency(params, problem.k) ** 2,
        inner_flux=params.integrable,
        outer_dirichlet=problem.outer_bc is not OuterBC.NEUMANN,
    ))


def interval_operator(a: float, b: float, spacing: float, weight: float = 1.0,
                      outer_bc: OuterBC = OuterBC.NEUMANN, inner_bc: OuterBC = OuterBC.NEUMANN) -> RadialOperator:
    """Pencil of ``-phi''`` on ``[a, b]`` with constant weight (a flat smooth sector)."""
    if not (b > a and spacing > 0 and weight > 0):
        raise InvalidParameter("interval needs b > a, positive spacing and weight")
    cells = max(int(math.ceil((b - a) / spacing - 1e-9)), 4)
    nodes = np.linspace(a, b, cells + 1)
    return RadialOperator(*_fv_pencil(
        nodes,
        lambda x: np.full_like(np.asarray(x, dtype=float), weight),
        lambda lo, hi: weight * (np.asarray(hi) - np.asarray(lo)),
        lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        0.0,
        inner_flux=OuterBC(inner_bc) is OuterBC.NEUMANN,
        outer_dirichlet=OuterBC(outer_bc) is not OuterBC.NEUMANN,
    ))


def _eigs(op: RadialOperator, *, upper: float | None = None, count: int | None = None, vectors: bool = False):
    d, e = op.symmetric_tridiagonal()
    try:
        if count is not None:
            count = min(count, d.size)
            if count == 0:
                return (np.empty(0), np.empty((d.size, 0))) if vectors else np.empty(0)
            res = eigh_tridiagonal(d, e, eigvals_only=not vectors, select="i", select_range=(0, count - 1))
        else:
            res = eigh_tridiagonal(d, e, eigvals_only=not vectors, select="v", select_range=(-1.0, upper))
    except (LinAlgError, ValueError) as exc:
        raise EigenSolveFailure(str(exc)) from exc
    if not vectors:
        return res
    vals, vecs = res
    # back to nodal values, normalized in sum(M phi^2) = 1, positive at the first node
    vecs = vecs / np.sqrt(op.mass)[:, None]
    sign = np.sign(vecs[np.argmax(np.abs(vecs) > 1e-12 * np.abs(vecs).max(axis=0), axis=0), np.arange(vecs.shape[1])])
    return vals, vecs * np.where(sign == 0, 1.0, sign)


@dataclass
class ModeSolution:
    """Eigenpairs of one radial problem below ``lambda_max``.

    ``eigenvalues`` are Richardson-extrapolated from the requested grid and its
    refinement (or raw when extrapolation is off); ``convergence`` is the size
    of the extrapolation correction. Eigenvectors live on the refined grid.
    """

    params: GrushinParams
    problem: ModeProblem
    eigenvalues: np.ndarray
    convergence: np.ndarray
    raw_eigenvalues: np.ndarray
    operator: RadialOperator
    vectors: np.ndarray | None = None

    def __len__(self):
        return self.eigenvalues.size

    def __iter__(self):
        for i, lam in enumerate(self.eigenvalues):
            yield lam, None if self.vectors is None else self.vectors[:, i]

    def mass_inside(self, index: int, region: tuple[float, float] | None) -> float:
        if self.vectors is None:
            raise InvalidParameter("eigenvectors were not computed")
        if region is None:
            return 0.0
        return float(self.masses_inside(region)[index])

    def masses_inside(self, region: tuple[float, float]) -> np.ndarray:
        """Mass of every eigenvector inside the radial band ``region``."""
        lo, hi = region
        a = np.clip(self.operator.cell_edges[:-1], lo, hi)
        b = np.clip(self.operator.cell_edges[1:], lo, hi)
        profile = _PowerProfile(self.params.alpha) if self.problem.space is Space.YBAR else self.problem.warp
        return profile.density_integral(a, b, self.params.n) @ (self.vectors**2)

    def mass_outside(self, index: int, region: tuple[float, float] | None) -> float:
        return max(0.0, 1.0 - self.mass_inside(index, region))


def default_spacing(lambda_max: float) -> float:
    """Grid spacing with ``h sqrt(lambda_max) = 0.6`` (capped at 0.05)."""
    return min(0.05, 0.6 / math.sqrt(lambda_max))


def turning_point(params: GrushinParams, k: int, lambda_max: float, warp: WarpProfile | None = None) -> float:
    """Radius where the mode-``k`` potential reaches ``lambda_max`` (``inf`` if never)."""
    freq = _angular_frequency(params, k)
    if freq == 0:
        return math.inf
    if warp is None:
        return (lambda_max / freq**2) ** (1.0 / (4.0 * params.alpha))
    top = freq**2 * float(warp.inverse_square(warp.r_end))
    if top <= lambda_max:
        return math.inf
    return brentq(lambda r: freq**2 * float(warp.inverse_square(r)) - lambda_max, 0.0, warp.r_end)


def decay_radius(params: GrushinParams, k: int, lambda_max: float, warp: WarpProfile | None = None,
                 decay: float = DECAY_EXPONENT) -> float:
    """Radius beyond the turning point where the WKB exponent reaches ``decay``.

    Eigenfunctions with eigenvalue at most ``lambda_max`` carry relative
    amplitude below ``exp(-decay)`` past this radius. Returns ``inf`` when the
    exponent is not reached inside the warped cylinder.
    """
    r_star = turning_point(params, k, lambda_max, warp)
    if math.isinf(r_star):
        return math.inf
    freq2 = _angular_frequency(params, k) ** 2
    profile = warp if warp is not None else _PowerProfile(params.alpha)
    length = max(r_star, 1.0)
    while True:
        end = r_star + length
        if warp is not None:
            end = min(end, warp.r_end)
        r = np.linspace(r_star, end, 4001)
        integrand = np.sqrt(np.clip(freq2 * profile.inverse_square(r) - lambda_max, 0.0, None))
        acc = cumulative_trapezoid(integrand, r, initial=0.0)
        if acc[-1] >= decay:
            return float(np.interp(decay, acc, r))
        if warp is not None and end >= warp.r_end:
            return math.inf
        length *= 2.0


def ybar_truncation(params: GrushinParams, k: int, lambda_max: float) -> float:
    """Default outer radius for Ybar: at least 8, twice the turning point and past the decay radius."""
    return max(8.0, 2.0 * turning_point(params, k, lambda_max), decay_radius(params, k, lambda_max))


def _tail_mass(op: RadialOperator, vec: np.ndarray, nodes: int = 10) -> float:
    return float(np.sum(op.mass[-nodes:] * vec[-nodes:] ** 2))


def solve_modes(params: GrushinParams, problem: ModeProblem, lambda_max: float, *, richardson: bool = True,
                vectors: bool = True, tolerance: float | None = 0.05, check_truncation: bool = True) -> ModeSolution:
    """All eigenpairs of one radial problem with eigenvalue at most ``lambda_max``.

    The fine grid halves the problem's spacing. Extrapolated values are
    ``(4 lam_fine - lam_coarse) / 3``. ``GridTooCoarse`` is raised when the
    refinement moves any eigenvalue by more than ``tolerance`` relative.
    With ``check_truncation`` a Ybar ground state that still has mass near
    the artificial outer boundary raises ``TruncationTooSmall``; heat-kernel
    evaluation turns this off because it relies on locality instead.
    """
    if not (lambda_max > 0):
        raise InvalidParameter("lambda_max must be positive")
    margin = 1.05 * lambda_max + 1.0
    if not richardson:
        op = build_radial_operator(params, problem)
        res = _eigs(op, upper=margin, vectors=vectors)
        vals, vecs = res if vectors else (res, None)
        keep = vals <= lambda_max
        out = ModeSolution(params, problem, vals[keep], np.full(keep.sum(), np.nan), vals[keep], op,
                           vecs[:, keep] if vectors else None)
    else:
        fine_problem = ModeProblem(problem.space, problem.k, problem.outer_bc, problem.grid.refined(2),
                                   problem.warp, problem.truncated_continuum)
        fine_op = build_radial_operator(params, fine_problem)
        res = _eigs(fine_op, upper=margin, vectors=vectors)
        fine, vecs = res if vectors else (res, None)
        coarse = _eigs(build_radial_operator(params, problem), count=fine.size)
        m = coarse.size
        fine, vecs = fine[:m], (vecs[:, :m] if vectors else None)
        extrap = (4.0 * fine - coarse) / 3.0
        shift = np.abs(fine - coarse)
        if tolerance is not None and m:
            rel = shift / np.maximum(np.abs(fine), 1.0)
            if np.any(rel > tolerance):
                worst = int(np.argmax(rel))
                raise GridTooCoarse(f"mode k={problem.k}: eigenvalue {fine[worst]:.6g} moved by "
                                    f"{rel[worst]:.3g} relative under refinement")
        keep = extrap <= lambda_max
        out = ModeSolution(params, fine_problem, extrap[keep], shift[keep] / 3.0, fine[keep], fine_op,
                           vecs[:, keep] if vectors else None)
    if (check_truncation and problem.space is Space.YBAR and problem.outer_bc is OuterBC.NEUMANN and vectors
            and len(out)
            and _tail_mass(out.operator, out.vectors[:, 0]) > 1e-8):
        raise TruncationTooSmall(f"Ybar mode k={problem.k}: ground state has mass "
                                 f"{_tail_mass(out.operator, out.vectors[:, 0]):.3g} near R={problem.grid.r_end}")
    return out


@dataclass
class Spectrum:
    """Sorted eigenvalues with multiplicity, Fourier index, radial index and boundary tag.

    ``complete_below`` is the level up to which every eigenvalue is present.
    ``outside_mass`` (optional) is the fraction of each eigenfunction's mass
    outside ``{r <= localization_radius}``.
    """

    lam: np.ndarray
    mult: np.ndarray
    k: np.ndarray
    radial_index: np.ndarray
    bc: np.ndarray
    complete_below: float
    convergence: np.ndarray = field(default=None)
    outside_mass: np.ndarray | None = None
    localization_radius: float | None = None

    def __post_init__(self):
        order = np.lexsort((self.radial_index, self.bc, self.k, self.lam))
        for name in ("lam", "mult", "k", "radial_index", "bc", "convergence", "outside_mass"):
            value = getattr(self, name)
            if value is None:
                if name == "convergence":
                    self.convergence = np.zeros(self.lam.size)
                continue
            setattr(self, name, np.asarray(value)[order])
        if np.any(self.lam < -1e-9):
            raise InvalidParameter("negative eigenvalue in spectrum")
        if np.any(self.mult < 1):
            raise InvalidParameter("multiplicities must be positive")

    def __len__(self):
        return self.lam.size

    @property
    def total_count(self) -> int:
        return int(self.mult.sum())

    def counting(self, lam):
        """Multiplicity-weighted count of eigenvalues ``<= lam`` (vectorized)."""
        cum = np.concatenate([[0], np.cumsum(self.mult)])
        return cum[np.searchsorted(self.lam, lam, side="right")]

    def expanded(self) -> np.ndarray:
        return np.repeat(self.lam, self.mult)

    def rows(self):
        return zip(self.lam, self.mult, self.k, self.radial_index, self.bc)

    def restricted(self, upper: float) -> "Spectrum":
        keep = self.lam <= upper
        return Spectrum(self.lam[keep], self.mult[keep], self.k[keep], self.radial_index[keep], self.bc[keep],
                        min(upper, self.complete_below), self.convergence[keep],
                        None if self.outside_mass is None else self.outside_mass[keep], self.localization_radius)

    @classmethod
    def from_values(cls, lam, mult=None, complete_below=None) -> "Spectrum":
        lam = np.asarray(lam, dtype=float)
        mult = np.ones(lam.size, dtype=int) if mult is None else np.asarray(mult, dtype=int)
        zeros = np.zeros(lam.size, dtype=int)
        top = complete_below if complete_below is not None else (lam.max() if lam.size else 0.0)
        return cls(lam, mult, zeros, np.arange(lam.size), np.full(lam.size, "-"), top)


def counting_function(spec: Spectrum, lam: float) -> int:
    if lam < 0:
        raise InvalidParameter("counting function is defined for lambda >= 0")
    return int(spec.counting(lam))


def ideal_model_spectrum(lambda_max: float) -> Spectrum:
    """The model spectrum ``{4 k m : k, m >= 1}`` with multiplicity 2, up to ``lambda_max``."""
    values, ks, ms = [], [], []
    for k in range(1, int(lambda_max // 4) + 1):
        m = np.arange(1, int(lambda_max // (4 * k)) + 1)
        values.append(4.0 * k * m)
        ks.append(np.full(m.size, k))
        ms.append(m - 1)
    if not values:
        return Spectrum(np.empty(0), np.empty(0, int), np.empty(0, int), np.empty(0, int), np.empty(0, str), lambda_max)
    lam = np.concatenate(values)
    return Spectrum(lam, np.full(lam.size, 2), np.concatenate(ks), np.concatenate(ms),
                    np.full(lam.size, "model"), lambda_max)


def _mode_problems(params: GrushinParams, space: Space, k: int, lambda_max: float, spacing: float,
                   warp: WarpProfile | None, truncation: float | None):
    """Radial problems for Fourier index ``k`` with their boundary tags.

    On the warped cylinder a mode whose decay radius lies inside ``[0, 3]`` is
    cut there; both boundary conditions at ``r = 3`` then give the same
    eigenvalues, so one Dirichlet solve is reported under both tags.
    """
    if space is Space.YBAR:
        R = truncation if truncation is not None else ybar_truncation(params, max(k, 1), lambda_max)
        return [(ModeProblem(space, k, OuterBC.NEUMANN, RadialGrid(spacing, R), None, k == 0), ("Neumann",))]
    cut = decay_radius(params, k, lambda_max, warp) if k else math.inf
    tags = ("Neumann", "Dirichlet") if space is Space.XDOUBLE else ("Neumann",)
    if cut < warp.r_end:
        return [(ModeProblem(space, k, OuterBC.NONE, RadialGrid(spacing, cut), warp), tags)]
    return [(ModeProblem(space, k, OuterBC(tag), RadialGrid(spacing, warp.r_end), warp), (tag,)) for tag in tags]


def _solve_mode_group(params, space, k, lambda_max, spacing, warp, truncation, richardson, localization_radius):
    rows = []
    for problem, tags in _mode_problems(params, space, k, lambda_max, spacing, warp, truncation):
        want_vectors = localization_radius is not None or problem.space is Space.YBAR
        sol = solve_modes(params, problem, lambda_max, richardson=richardson, vectors=want_vectors)
        outside = None
        if localization_radius is not None and len(sol):
            inside = sol.masses_inside((0.0, localization_radius))
            outside = np.clip(1.0 - inside, 0.0, 1.0)
        for tag in tags:
            for i in range(len(sol)):
                rows.append((sol.eigenvalues[i], k, i, tag, sol.convergence[i],
                             None if outside is None else outside[i]))
    return rows


def assemble_spectrum(params: GrushinParams, space: Space | str, lambda_max: float, *,
                      spacing: float | None = None, warp: WarpProfile | None = None,
                      truncation: float | None = None, richardson: bool = True,
                      include_continuum_k0: bool = False, localization_radius: float | None = None,
                      workers: int = 1) -> Spectrum:
    """Every eigenvalue up to ``lambda_max`` over all Fourier modes.

    Modes are added in order of ``|k|`` until a mode has no eigenvalue below
    ``lambda_max``; the mode potential increases with ``|k|`` so no later mode
    can contribute. Indices ``+k`` and ``-k`` share eigenvalues and appear as
    one entry with multiplicity 2.
    """
    space = Space(space)
    if not (lambda_max > 0):
        raise InvalidParameter("lambda_max must be positive")
    if space is not Space.YBAR:
        if warp is None:
            warp = WarpProfile(params.alpha)
        params.require_integrable()
    spacing = spacing or default_spacing(lambda_max)
    first = 0 if (space is not Space.YBAR or include_continuum_k0) else 1
    if space is Space.YBAR and first == 0 and truncation is None:
        raise InvalidParameter("the truncated k = 0 sector of Ybar needs an explicit truncation")

    def job(k):
        return _solve_mode_group(params, space, k, lambda_max, spacing, warp, truncation, richardson,
                                 localization_radius)

    rows = []
    k = first
    batch = max(1, workers)
    with ThreadPoolExecutor(max_workers=batch) as pool:
        while True:
            results = list(pool.map(job, range(k, k + batch)))
            done = False
            for kk, res in zip(range(k, k + batch), results):
                if not res and kk > 0:
                    done = True
                    break
                rows.extend(res)
            if done:
                break
            k += batch
    lam = np.array([r[0] for r in rows])
    # extrapolation round-off around the constant mode
    lam = np.where(np.abs(lam) < 1e-8, 0.0, lam)
    ks = np.array([r[1] for r in rows], dtype=int)
    return Spectrum(
        lam,
        np.where(ks == 0, 1, 2),
        ks,
        np.array([r[2] for r in rows], dtype=int),
        np.array([r[3] for r in rows]),
        lambda_max,
        np.array([r[4] for r in rows]),
        None if localization_radius is None else np.array([r[5] for r in rows]),
        localization_radius,
    )


def eigenfunction_mass_outside(solution: ModeSolution, index: int, region: tuple[float, float] | None) -> float:
    """Weighted mass of a normalized eigenfunction outside the radial band ``region`` (``None`` is empty).

    The angular factor has unit norm, so the mass over ``band x circle`` is
    the radial integral alone. On the doubled space the symmetric and
    antisymmetric extensions put equal mass on both copies, so the fraction
    is the same as on one copy.
    """
    return solution.mass_outside(index, region)


def total_measure(params: GrushinParams, space: Space | str, warp: WarpProfile | None = None) -> float:
    """Measure of the compact space (``Ytilde`` or ``Xdouble``)."""
    space = Space(space)
    if space is Space.YBAR:
        raise InvalidParameter("Ybar has infinite measure")
    warp = warp or WarpProfile(params.alpha)
    one = params.c_m * params.period * float(warp.density_integral(0.0, warp.r_end, params.n))
    return 2.0 * one if space is Space.XDOUBLE else one


def interval_spectrum(a: float, b: float, lambda_max: float, *, weight: float = 1.0,
                      spacing: float | None = None, outer_bc: OuterBC = OuterBC.NEUMANN,
                      inner_bc: OuterBC = OuterBC.NEUMANN) -> Spectrum:
    """Richardson-extrapolated spectrum of ``-phi''`` on ``[a, b]`` with constant weight."""
    spacing = spacing or default_spacing(lambda_max)
    margin = 1.05 * lambda_max + 1.0
    fine = _eigs(interval_operator(a, b, spacing / 2, weight, outer_bc, inner_bc), upper=margin)
    coarse = _eigs(interval_operator(a, b, spacing, weight, outer_bc, inner_bc), count=fine.size)
    fine = fine[:coarse.size]
    lam = (4.0 * fine - coarse) / 3.0
    lam = np.where(np.abs(lam) < 1e-8, 0.0, lam)
    keep = lam <= lambda_max
    m = int(keep.sum())
    return Spectrum(lam[keep], np.ones(m, dtype=int), np.zeros(m, dtype=int), np.arange(m),
                    np.full(m, OuterBC(outer_bc).value), lambda_max, (np.abs(fine - coarse) / 3.0)[keep])
