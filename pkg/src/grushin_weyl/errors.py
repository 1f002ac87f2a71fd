"""Exception hierarchy shared by all modules.

Every error carries a stable ``exit_code`` so the command line can map
failures to distinct process exit statuses.
"""

from __future__ import annotations


class GrushinError(Exception):
    """Base class for all package errors."""

    exit_code = 10


class ConfigError(GrushinError):
    """Malformed or unknown configuration key or value."""

    exit_code = 2


class NonPositiveAlpha(GrushinError, ValueError):
    exit_code = 11


class InvalidParameter(GrushinError, ValueError):
    exit_code = 11


class MeasureExponentNonIntegrable(GrushinError, ValueError):
    """The radial weight is not locally integrable at the axis (n + 1 <= 4 alpha)."""

    exit_code = 12


class SingularAxis(GrushinError, ValueError):
    """A quantity was requested at r = 0 where the metric degenerates."""

    exit_code = 13


class NonPositiveScale(GrushinError, ValueError):
    exit_code = 14


class GridTooCoarse(GrushinError):
    """One refinement step moved a result by more than the configured tolerance."""

    exit_code = 20


class NoConvergence(GrushinError):
    exit_code = 21


class TruncationTooSmall(GrushinError):
    exit_code = 22


class EigenSolveFailure(GrushinError):
    exit_code = 23


class TailDominates(GrushinError):
    """Requested time is below the spectral completeness threshold."""

    exit_code = 30


class QuadratureFailure(GrushinError):
    exit_code = 31


class NoPlateau(GrushinError):
    """Windowed asymptotic estimates vary by more than the plateau tolerance."""

    exit_code = 40


class AcceptanceFailure(GrushinError):
    """A pipeline ran to completion but one of its configured checks failed."""

    exit_code = 1
