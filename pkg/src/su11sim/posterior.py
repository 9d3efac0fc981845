"""Grid-based Bayesian posterior over the unknown interferometer phase.

Weights live in log space with a hard floor at -745 (just above the smallest
positive double), so a long run of vanishing likelihoods cannot produce NaN.
Normalization is in the Riemann sense: sum(density) * spacing = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateRowError

LOG_FLOOR = -745.0


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    """Uniform grid over a half-open phase interval [lo, hi)."""

    lo: float = 0.0
    hi: float = math.pi
    n_points: int = 4096

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.hi > self.lo):
            raise ValueError(f"need finite lo < hi, got [{self.lo!r}, {self.hi!r})")
        if not (isinstance(self.n_points, int) and self.n_points >= 64):
            raise ValueError(f"n_points must be an integer >= 64, got {self.n_points!r}")

    @cached_property
    def points(self) -> np.ndarray:
        pts = self.lo + self.spacing * np.arange(self.n_points, dtype=np.float64)
        pts.setflags(write=False)
        return pts

    @property
    def spacing(self) -> float:
        return (self.hi - self.lo) / self.n_points

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def index_of(self, phi: float) -> int:
        """Index of the nearest grid point; rejects phases outside the domain."""
        if not math.isfinite(phi):
            raise ValueError(f"phase must be finite, got {phi!r}")
        idx = int(round((phi - self.lo) / self.spacing))
        if idx == self.n_points and phi < self.hi + 0.5 * self.spacing:
            idx -= 1  # hi itself snaps down onto the last cell
        if not (0 <= idx < self.n_points):
            raise ValueError(
                f"phase {phi!r} lies outside the grid [{self.lo}, {self.hi})"
            )
        return idx

    def floor_index(self, phi: float) -> int:
        """Largest grid index whose point does not exceed phi."""
        idx = int(math.floor((phi - self.lo) / self.spacing + 1e-12))
        if not (0 <= idx < self.n_points):
            raise ValueError(
                f"phase {phi!r} lies outside the grid [{self.lo}, {self.hi})"
            )
        return idx

    def snap(self, phi: float) -> float:
        return float(self.points[self.index_of(phi)])


@dataclass
class Posterior:
    """Log-domain posterior over a PhaseGrid. log_weights is owned, length n_points."""

    grid: PhaseGrid
    log_weights: np.ndarray


def _normalized(grid: PhaseGrid, log_w: np.ndarray) -> np.ndarray:
    log_norm = logsumexp(log_w) + math.log(grid.spacing)
    out = log_w - log_norm
    np.maximum(out, LOG_FLOOR, out=out)
    return out


def uniform_posterior(grid: PhaseGrid) -> Posterior:
    log_w = np.full(grid.n_points, -math.log(grid.hi - grid.lo))
    return Posterior(grid=grid, log_weights=log_w)


def update_log(posterior: Posterior, log_row: np.ndarray, label: str | None = None) -> Posterior:
    """Bayes update with a log-likelihood row already evaluated on the grid."""
    log_w = posterior.log_weights + log_row
    if not np.isfinite(log_w.max()):
        what = f"outcome {label}" if label else "likelihood row"
        raise DegenerateRowError(f"{what} leaves zero posterior mass everywhere")
    return Posterior(grid=posterior.grid, log_weights=_normalized(posterior.grid, log_w))


def update(posterior: Posterior, likelihood_row: np.ndarray, label: str | None = None) -> Posterior:
    """Bayes update with a linear likelihood row evaluated on the grid."""
    row = np.asarray(likelihood_row, dtype=np.float64)
    if row.shape != (posterior.grid.n_points,):
        raise ValueError(
            f"row shape {row.shape} does not match grid ({posterior.grid.n_points},)"
        )
    if np.any(row < 0.0) or not np.all(np.isfinite(row)):
        raise ValueError("likelihood row must be finite and nonnegative")
    with np.errstate(divide="ignore"):
        log_row = np.maximum(np.log(row), LOG_FLOOR)
    if not row.any():
        what = f"outcome {label}" if label else "likelihood row"
        raise DegenerateRowError(f"{what} is identically zero on the grid")
    return update_log(posterior, log_row, label=label)


def density(posterior: Posterior) -> np.ndarray:
    """Normalized probability density on the grid points."""
    w = np.exp(_normalized(posterior.grid, posterior.log_weights))
    return w


def map_estimate(posterior: Posterior) -> float:
    # ties resolve to the lowest index by argmax convention
    return float(posterior.grid.points[int(np.argmax(posterior.log_weights))])


def posterior_mean(posterior: Posterior) -> float:
    d = density(posterior)
    return float(posterior.grid.spacing * np.dot(d, posterior.grid.points))


def posterior_variance(posterior: Posterior) -> float:
    d = density(posterior)
    mu = posterior.grid.spacing * np.dot(d, posterior.grid.points)
    dev = posterior.grid.points - mu
    return float(posterior.grid.spacing * np.dot(d, dev * dev))


@dataclass(frozen=True)
class Peak:
    location: float
    height: float
    mass: float


@dataclass(frozen=True)
class PeakReport:
    primary: Peak
    secondary: Peak | None
    separation: float | None


def detect_peaks(
    posterior: Posterior,
    min_separation: float = 0.02,
    height_ratio_floor: float = 0.10,
) -> PeakReport:
    """Locate the dominant posterior mode and, if present, a distinct rival.

    A rival counts only when it is a strict interior local maximum at least
    min_separation away from the primary with height at least
    height_ratio_floor of the primary's. Masses come from splitting the
    domain at the density minimum between the two peaks; with no rival the
    primary carries all the mass.
    """
    if min_separation <= 0.0 or not (0.0 < height_ratio_floor <= 1.0):
        raise ValueError("need min_separation > 0 and height_ratio_floor in (0, 1]")
    d = density(posterior)
    pts = posterior.grid.points
    h = posterior.grid.spacing
    p_idx = int(np.argmax(d))
    interior = np.flatnonzero((d[1:-1] > d[:-2]) & (d[1:-1] > d[2:])) + 1
    rivals = [
        i
        for i in interior
        if abs(pts[i] - pts[p_idx]) >= min_separation
        and d[i] >= height_ratio_floor * d[p_idx]
    ]
    if not rivals:
        primary = Peak(location=float(pts[p_idx]), height=float(d[p_idx]), mass=1.0)
        return PeakReport(primary=primary, secondary=None, separation=None)
    s_idx = min(rivals, key=lambda i: (-d[i], i))
    lo_i, hi_i = sorted((p_idx, s_idx))
    valley = lo_i + int(np.argmin(d[lo_i : hi_i + 1]))
    left_mass = float(d[: valley + 1].sum() * h)
    right_mass = float(d[valley + 1 :].sum() * h)
    p_mass, s_mass = (left_mass, right_mass) if p_idx <= valley else (right_mass, left_mass)
    primary = Peak(location=float(pts[p_idx]), height=float(d[p_idx]), mass=p_mass)
    secondary = Peak(location=float(pts[s_idx]), height=float(d[s_idx]), mass=s_mass)
    return PeakReport(
        primary=primary,
        secondary=secondary,
        separation=float(abs(pts[s_idx] - pts[p_idx])),
    )


def prune_secondary(posterior: Posterior, report: PeakReport) -> Posterior:
    """Remove the rival mode by flooring everything on its side of the valley.

    The report must contain a secondary peak; callers decide whether to
    prune, so a missing rival here means the caller skipped its own check.
    """
    if report.secondary is None:
        raise ValueError("no secondary peak to prune in this report")
    d = density(posterior)
    p_idx = posterior.grid.index_of(report.primary.location)
    s_idx = posterior.grid.index_of(report.secondary.location)
    lo_i, hi_i = sorted((p_idx, s_idx))
    valley = lo_i + int(np.argmin(d[lo_i : hi_i + 1]))
    log_w = posterior.log_weights.copy()
    if s_idx > valley:
        log_w[valley + 1 :] = LOG_FLOOR
    else:
        log_w[:valley] = LOG_FLOOR
    return Posterior(grid=posterior.grid, log_weights=_normalized(posterior.grid, log_w))
