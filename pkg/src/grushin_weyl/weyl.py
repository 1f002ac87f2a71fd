"""Weyl-law fits: power law, log-corrected law, the smooth-manifold law and localized counts.

All fits read the counting function on a window inside the computed range.
By default the window is the top decade below ``0.9 * complete_below``; the
last 10% are left out because the highest discrete eigenvalues carry the
largest discretization error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import gamma

from .errors import InvalidParameter, NoPlateau
from .geometry import GrushinParams
from .spectrum import Space, Spectrum, assemble_spectrum


class WeylLaw(str, Enum):
    POWER = "power"
    LOG_CORRECTED = "log_corrected"
    REGULAR = "regular"


@dataclass(frozen=True)
class FitResult:
    law: WeylLaw
    exponent: float | None
    leading_coefficient: float
    window: tuple[float, float]
    residual: float
    plateau_ok: bool
    variation: float
    subwindow_coefficients: tuple[float, ...]

    def report(self) -> dict:
        """JSON-ready summary; the coefficient is withheld when the plateau check failed."""
        out = {
            "law": self.law.value,
            "exponent": self.exponent,
            "window": list(self.window),
            "residual": self.residual,
            "variation": self.variation,
            "plateau_ok": self.plateau_ok,
            "subwindow_coefficients": list(self.subwindow_coefficients),
        }
        out["leading_coefficient"] = self.leading_coefficient if self.plateau_ok else None
        return out


def default_window(spec: Spectrum) -> tuple[float, float]:
    hi = 0.9 * spec.complete_below
    return hi / 10.0, hi


def _power_coefficient(lam, N, half):
    q = N / lam**half
    return float(q.mean()), float(np.max(np.abs(q - q.mean())))


def _log_coefficient(lam, N):
    A = np.stack([lam * np.log(lam), lam], axis=1)
    coef, *_ = np.linalg.lstsq(A, N, rcond=None)
    return float(coef[0]), float(np.max(np.abs(A @ coef - N)))


def weyl_fit(spec: Spectrum, law: WeylLaw | str, *, beta: float | None = None, dimension: int | None = None,
             window: tuple[float, float] | None = None, tolerance: float = 0.15, samples: int = 200,
             subwindows: int = 4, strict: bool = True) -> FitResult:
    """Leading Weyl coefficient over a window with a plateau check.

    Power law (exponent ``beta``, for the singular law ``beta = 2 alpha + 1``)
    and regular law (exponent ``dimension``) average ``N / lambda^(beta/2)``
    over ``samples`` log-spaced points; the variation is ``(max - min) /
    mean``. The log-corrected law fits ``N = a lambda log(lambda) + b
    lambda`` by least squares and returns ``a``; its variation is the spread
    of ``a`` over ``subwindows`` log-spaced pieces relative to their mean.
    """
    law = WeylLaw(law)
    if law is WeylLaw.POWER:
        if not (beta and beta > 0):
            raise InvalidParameter("power law needs beta > 0")
        exponent = float(beta)
    elif law is WeylLaw.REGULAR:
        if not (dimension and dimension >= 1):
            raise InvalidParameter("regular law needs dimension >= 1")
        exponent = float(dimension)
    else:
        exponent = None
    lo, hi = window or default_window(spec)
    if not (0 < lo < hi <= spec.complete_below):
        raise InvalidParameter(f"window ({lo}, {hi}) is not inside the computed range")
    lam = np.geomspace(lo, hi, samples)
    N = spec.counting(lam).astype(float)
    if law is WeylLaw.LOG_CORRECTED:
        coefficient, residual = _log_coefficient(lam, N)
        pieces = [_log_coefficient(lam[p], N[p])[0] for p in np.array_split(np.arange(samples), subwindows)]
        variation = float((max(pieces) - min(pieces)) / abs(np.mean(pieces)))
    else:
        coefficient, residual = _power_coefficient(lam, N, exponent / 2.0)
        q = N / lam ** (exponent / 2.0)
        pieces = [float(q[p].mean()) for p in np.array_split(np.arange(samples), subwindows)]
        variation = float((q.max() - q.min()) / q.mean()) if q.mean() > 0 else math.inf
    ok = bool(variation <= tolerance and coefficient > 0)
    if strict and not ok:
        raise NoPlateau(f"{law.value} fit varies by {variation:.3g} over [{lo:.4g}, {hi:.4g}] "
                        f"(tolerance {tolerance})")
    return FitResult(law, exponent, coefficient, (lo, hi), residual, ok, variation, tuple(pieces))


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / gamma(n / 2.0 + 1.0)


def regular_weyl_oracle(n: int, volume: float) -> float:
    """``omega_n (2 pi)^(-n) vol``, the smooth-manifold Weyl coefficient of ``N / lambda^(n/2)``."""
    if n < 1:
        raise InvalidParameter("dimension must be at least 1")
    return unit_ball_volume(n) / (2.0 * math.pi) ** n * volume


def flat_torus_spectrum(lengths, lambda_max: float) -> Spectrum:
    """Eigenvalues ``sum (2 pi m_i / L_i)^2`` of a flat torus up to ``lambda_max``, by lattice enumeration."""
    lengths = [float(x) for x in lengths]
    ranges = [np.arange(-int(math.sqrt(lambda_max) * L / (2 * math.pi)) - 1,
                        int(math.sqrt(lambda_max) * L / (2 * math.pi)) + 2) for L in lengths]
    total = np.zeros(1)
    for L, m in zip(lengths, ranges):
        total = (total[:, None] + (2.0 * math.pi * m / L)[None, :] ** 2).ravel()
        total = total[total <= lambda_max]
    values, counts = np.unique(np.round(total, 9), return_counts=True)
    return Spectrum(values, counts, np.zeros(values.size, dtype=int), np.arange(values.size),
                    np.full(values.size, "torus"), lambda_max)


def localized_counts(spec: Spectrum, epsilon: float, lam_values) -> np.ndarray:
    """``m_{A,eps}(lambda)``: eigenpairs with ``lambda_j <= lambda`` and mass outside ``A`` at least ``1 - eps``."""
    if not (0 < epsilon < 1):
        raise InvalidParameter("epsilon must lie in (0, 1)")
    if spec.outside_mass is None:
        raise InvalidParameter("spectrum was assembled without localization data")
    keep = spec.outside_mass >= 1.0 - epsilon
    weights = np.where(keep, spec.mult, 0)
    cum = np.concatenate([[0], np.cumsum(weights)])
    return cum[np.searchsorted(spec.lam, np.asarray(lam_values, dtype=float), side="right")]


def localized_count(params: GrushinParams, space: Space | str, radius: float | None, epsilon: float, lam: float,
                    *, spectrum: Spectrum | None = None, **assemble_kwargs) -> int:
    """``m_{A,eps}(lambda)`` for ``A = {r <= radius}`` (``None`` or 0 is the empty set)."""
    radius = radius or 0.0
    if spectrum is None or spectrum.localization_radius != radius or spectrum.complete_below < lam:
        spectrum = assemble_spectrum(params, space, lam, localization_radius=radius, **assemble_kwargs)
    return int(localized_counts(spectrum, epsilon, lam))


__all__ = [
    "FitResult", "WeylLaw", "default_window", "flat_torus_spectrum", "localized_count", "localized_counts",
    "regular_weyl_oracle", "unit_ball_volume", "weyl_fit",
]
