"""Moment fields, Lyapunov exponents, weighted norms and growth indices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

MONTE_CARLO = "MonteCarlo"
ORACLE = "Oracle"

DEFAULT_WINDOW = 0.5
DEFAULT_DELTA = 0.02
# oracle values this far below the field's sup are at FFT roundoff level
ORACLE_FLOOR = 1e-11


class EstimateError(ValueError):
    pass


@dataclass
class MomentField:
    """Gridded estimates of ``E|u_t(x)|^nu``; row ``i`` is time ``times[i]``."""

    nu: float
    times: np.ndarray
    xs: np.ndarray
    values: np.ndarray
    ses: np.ndarray
    n_paths: int
    source: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.xs = np.asarray(self.xs, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.ses = np.asarray(self.ses, dtype=float)
        shape = (self.times.size, self.xs.size)
        if self.values.shape != shape or self.ses.shape != shape:
            raise EstimateError(f"values/ses must have shape {shape}")
        if self.source not in (MONTE_CARLO, ORACLE):
            raise EstimateError(f"unknown source {self.source!r}")
        if self.nu < 1:
            raise EstimateError("nu must be >= 1")
        if np.any(self.values < 0) or np.any(self.ses < 0):
            raise EstimateError("moment values and standard errors must be nonnegative")

    def at(self, t: float, x: float):
        """Value and SE at the grid point nearest ``(t, x)``."""
        i = int(np.argmin(np.abs(self.times - t)))
        j = int(np.argmin(np.abs(self.xs - x)))
        return float(self.values[i, j]), float(self.ses[i, j])

    def sup_x(self) -> np.ndarray:
        return self.values.max(axis=1)


class MomentAccumulator:
    """Order-independent sums of ``|u|^nu`` grouped into fixed path batches.

    Paths are assigned to batch ``b`` by index alone, so the reduction does
    not depend on how paths were scheduled.
    """

    def __init__(self, nus: Sequence[float], shape, n_paths: int):
        if n_paths < 2:
            raise EstimateError("need at least 2 paths")
        self.nus = tuple(float(v) for v in nus)
        self.n_paths = n_paths
        self.n_batches = min(32, n_paths)
        self.sums = np.zeros((self.n_batches, len(self.nus)) + tuple(shape))
        self.sumsq = np.zeros((len(self.nus),) + tuple(shape))
        self.counts = np.zeros(self.n_batches, dtype=np.int64)

    def batch_bounds(self, b: int):
        n, B = self.n_paths, self.n_batches
        return (b * n) // B, ((b + 1) * n) // B

    def batch_of(self, path: int) -> int:
        return int(((path + 1) * self.n_batches - 1) // self.n_paths)

    def add_batch(self, b: int, sums: np.ndarray, count: int, sumsq: np.ndarray):
        self.sums[b] += sums
        self.sumsq += sumsq
        self.counts[b] += count

    def add_path(self, path: int, values: np.ndarray):
        b = self.batch_of(path)
        w = np.stack([np.abs(values) ** nu for nu in self.nus])
        self.add_batch(b, w, 1, w * w)

    def fields(self, times, xs, meta: Optional[dict] = None) -> list:
        n = self.counts.sum()
        if n != self.n_paths:
            raise EstimateError(f"accumulated {n} paths, expected {self.n_paths}")
        total = self.sums.sum(axis=0)
        mean = total / n
        nb = self.counts.astype(float)
        bm = self.sums / nb[:, None, None, None]
        B = self.n_batches
        dev = (bm - mean) * nb[:, None, None, None]
        var = (dev**2).sum(axis=0) / (n * n) * B / (B - 1)
        se = np.sqrt(var)
        # weight-based effective sample size (sum w)^2 / sum w^2 with w = |u|^nu;
        # it collapses when a few intermittent paths dominate the mean
        with np.errstate(divide="ignore", invalid="ignore"):
            ess = np.where(self.sumsq > 0, total**2 / self.sumsq, float(n))
        out = []
        for i, nu in enumerate(self.nus):
            m = dict(meta or {})
            m["min_ess"] = float(ess[i].min())
            out.append(MomentField(nu, times, xs, mean[i], se[i], int(n), MONTE_CARLO, m))
        return out


def moment_field(paths: Iterable, nu: float) -> MomentField:
    """Pointwise mean of ``|u|^nu`` over paths, with batch-means standard errors."""
    paths = sorted(paths, key=lambda p: p.path_index)
    if len(paths) < 2:
        raise EstimateError("need at least 2 paths")
    first = paths[0]
    for p in paths[1:]:
        if p.config_hash != first.config_hash:
            raise EstimateError(
                f"path {p.path_index} has config {p.config_hash[:12]}, expected {first.config_hash[:12]}"
            )
    idx = [p.path_index for p in paths]
    acc = MomentAccumulator([nu], first.values.shape, len(paths))
    # batches follow the sorted path order
    for k, p in enumerate(paths):
        acc.add_path(k, p.values)
    out = acc.fields(first.times, first.xs, {"path_indices": [min(idx), max(idx)]})[0]
    return out


def _window_mask(times: np.ndarray, window: float) -> np.ndarray:
    if not 0 < window <= 1:
        raise EstimateError("window must lie in (0, 1]")
    T = times[-1]
    mask = times >= T * (1.0 - window) - 1e-12 * max(T, 1.0)
    if mask.sum() < 4:
        raise EstimateError(f"window holds {mask.sum()} time points; need at least 4")
    return mask


def _slope(t: np.ndarray, y: np.ndarray):
    """Least-squares slope and its standard error."""
    tc = t - t.mean()
    sxx = float(tc @ tc)
    b = float(tc @ (y - y.mean())) / sxx
    resid = y - y.mean() - b * tc
    dof = max(len(t) - 2, 1)
    se = math.sqrt(float(resid @ resid) / dof / sxx)
    return b, se


def lyapunov_estimate(field: MomentField, window: float = DEFAULT_WINDOW) -> float:
    """Trailing-window slope of ``t -> ln sup_x E|u_t(x)|^nu``."""
    mask = _window_mask(field.times, window)
    sup = field.sup_x()[mask]
    if np.any(sup <= 0):
        raise EstimateError("non-positive sup in the regression window")
    return _slope(field.times[mask], np.log(sup))[0]


GROW, DECAY, DEAD_BAND, UNAVAILABLE = "grow", "decay", "dead-band", "unavailable"


@dataclass
class GrowthIndexReport:
    lambda_lower_hat: float
    lambda_upper_hat: float
    gamma_bar_hat: float
    alpha_grid: np.ndarray
    slopes: np.ndarray
    slope_ses: np.ndarray
    classification: list
    window: float
    delta: float

    @property
    def band_width(self) -> float:
        ok = np.isfinite(self.slope_ses)
        return float(self.slope_ses[ok].max()) if ok.any() else 0.0


def region_sup(field: MomentField, alpha: float, center: float = 0.0) -> np.ndarray:
    """``sup_{|x - center| >= alpha t}`` of the field at every time (``nan`` if the region is empty)."""
    d = np.abs(field.xs - center)
    out = np.full(field.times.size, np.nan)
    for i, t in enumerate(field.times):
        sel = d >= alpha * t
        if sel.any():
            out[i] = field.values[i, sel].max()
    return out


def growth_index_estimate(
    field: MomentField,
    alpha_grid: Sequence[float],
    window: float = DEFAULT_WINDOW,
    delta: float = DEFAULT_DELTA,
    center: float = 0.0,
    floor: Optional[float] = None,
) -> GrowthIndexReport:
    """Per-speed trend of the far-region sup and the speeds where it changes sign.

    For each ``alpha`` the slope of ``t -> ln sup_{|x| >= alpha t}`` over the
    trailing window is classified as ``grow`` (> delta), ``decay`` (< -delta)
    or ``dead-band``. Regions that leave the grid are ``unavailable``, as are
    oracle regions whose values sink to roundoff level (``floor`` times the
    global sup). A region that becomes exactly zero decays with slope ``-inf``.

    ``lambda_upper_hat`` is the smallest decaying speed and
    ``lambda_lower_hat`` the largest growing one.
    """
    alphas = np.asarray(alpha_grid, dtype=float)
    if not delta > 0:
        raise EstimateError("delta must be positive")
    if floor is None:
        floor = ORACLE_FLOOR if field.source == ORACLE else 0.0
    mask = _window_mask(field.times, window)
    t = field.times[mask]
    glob = field.sup_x()[mask]
    slopes = np.full(alphas.size, np.nan)
    ses = np.full(alphas.size, np.nan)
    cls = []
    for k, a in enumerate(alphas):
        sup = region_sup(field, a, center)[mask]
        if np.any(np.isnan(sup)):
            cls.append(UNAVAILABLE)
            continue
        if sup[-1] == 0.0:
            slopes[k], ses[k] = -math.inf, 0.0
            cls.append(DECAY)
            continue
        if np.any(sup <= floor * glob):
            cls.append(UNAVAILABLE)
            continue
        slopes[k], ses[k] = _slope(t, np.log(sup))
        cls.append(GROW if slopes[k] > delta else DECAY if slopes[k] < -delta else DEAD_BAND)

    grow = [a for a, c in zip(alphas, cls) if c == GROW]
    decay = [a for a, c in zip(alphas, cls) if c == DECAY]
    lower = max(grow) if grow else 0.0
    upper = min(decay) if decay else math.inf
    try:
        gamma = lyapunov_estimate(field, window)
    except EstimateError:
        gamma = math.nan
    return GrowthIndexReport(lower, upper, gamma, alphas, slopes, ses, cls, window, delta)


def weighted_norm_N(field: MomentField, beta: float, c: float, full_output: bool = False):
    """``sqrt(max_{t,x} e^{-beta t} e^{cx} values^{2/nu})`` on the grid."""
    with np.errstate(over="ignore"):
        logv = np.where(field.values > 0, np.log(np.where(field.values > 0, field.values, 1.0)), -np.inf)
    lw = -beta * field.times[:, None] + c * field.xs[None, :] + (2.0 / field.nu) * logv
    i, j = np.unravel_index(int(np.argmax(lw)), lw.shape)
    val = math.exp(0.5 * lw[i, j]) if np.isfinite(lw[i, j]) else 0.0
    if full_output:
        return val, float(field.times[i]), float(field.xs[j])
    return val


def norm_M(field: MomentField, alpha_speed: float, beta: float) -> float:
    """Finite-horizon ``[int_0^T e^{-beta t} int_{|x| >= alpha t} E u_t(x)^2 dx dt]^{1/2}``.

    The integral is truncated at the last grid time, so this is a lower
    bound for the infinite-horizon norm.
    """
    if field.nu != 2:
        raise EstimateError("norm_M needs a second-moment field")
    dx = float(field.xs[1] - field.xs[0]) if field.xs.size > 1 else 1.0
    inner = np.array([
        field.values[i, np.abs(field.xs) >= alpha_speed * t].sum() * dx
        for i, t in enumerate(field.times)
    ])
    integrand = np.exp(-beta * field.times) * inner
    return math.sqrt(max(float(np.trapezoid(integrand, field.times)), 0.0))
