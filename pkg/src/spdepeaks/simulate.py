"""Monte Carlo paths of the stochastic heat and wave equations.

Schemes
-------
``HeatMildSpectral``
    Exponential Euler on the periodic cell grid: the semigroup step is exact
    per Fourier mode and the noise ``sigma(u_k) dW / dx`` is filtered mode by
    mode so its variance equals ``int_0^dt exp(-2 r Psi) dr``.
``HeatFiniteDifference``
    Explicit Euler with the three-point Laplacian (Brownian only).
``WaveConeMild``
    Characteristic grid ``dx = kappa dt``. The stochastic cone integral ``S``
    obeys ``S[n+1, j] = S[n, j+1] + S[n, j-1] - S[n-1, j] + (1/2) W(D[n, j])``
    where ``D[n, j]`` is the diamond between the four neighbouring nodes.
    The plane is tiled by small diamonds ``A[n, j]`` (centred at ``(n+1/2, j)``)
    and ``B[n, j]`` (centred at ``(n, j+1/2)``), each of area ``dt dx / 2``;
    ``D[n, j] = A[n-1, j] + A[n, j] + B[n, j-1] + B[n, j]``. The deterministic
    part is evaluated exactly.

Noise is keyed per grid row (see :mod:`rng`). With ``noise_refine = r`` the
cells of a grid refined ``2^r`` times are generated and summed into the coarse
cells, so runs at two resolutions see the same Brownian sheet.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import grid as gridmod
from .bounds import SigmaSpec, moment_threshold_general, moment_threshold_heat, moment_threshold_wave
from .estimate import MomentAccumulator
from .grid import Grid, GridError
from .kernels import KernelSpec, Wave
from .levy import Brownian, psi
from .oracle import wave_deterministic
from .profiles import InitialData
from .rng import normal_rows

HEAT_SPECTRAL = "HeatMildSpectral"
HEAT_FD = "HeatFiniteDifference"
WAVE_CONE = "WaveConeMild"
SCHEMES = (HEAT_SPECTRAL, HEAT_FD, WAVE_CONE)

# row streams of the keyed noise
_STREAM_CELL = 0
_STREAM_A = 0
_STREAM_B = 1


class SimulationError(FloatingPointError):
    """A path produced non-finite values."""


class PicardDivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    equation: KernelSpec
    sigma: SigmaSpec
    initial: InitialData
    grid: Grid
    n_paths: int
    seed: int = 0
    scheme: str = "auto"
    noise_refine: int = 0
    nus: Sequence[float] = (2.0,)

    def __post_init__(self):
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ValueError("n_paths must be a positive integer")
        if not 0 <= int(self.seed) < 1 << 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        scheme = self.scheme
        if scheme == "auto":
            scheme = WAVE_CONE if isinstance(self.equation, Wave) else HEAT_SPECTRAL
            object.__setattr__(self, "scheme", scheme)
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
        if isinstance(self.equation, Wave) != (scheme == WAVE_CONE):
            raise ValueError(f"scheme {scheme} does not match the {self.equation.name} equation")
        if self.noise_refine not in (0, 1, 2, 3) or (scheme == WAVE_CONE and self.noise_refine > 1):
            raise ValueError("noise_refine must be 0..3 (0 or 1 for the wave scheme)")
        object.__setattr__(self, "nus", tuple(float(v) for v in self.nus))
        g = gridmod.resolve(self.grid, self.equation, self.initial, self.sigma.lip, sampled=True)
        object.__setattr__(self, "grid", g)
        if scheme == HEAT_FD:
            model = self.equation.model
            if not isinstance(model, Brownian):
                raise ValueError("HeatFiniteDifference needs a Brownian generator")
            ratio = model.kappa * g.dt / g.dx**2
            if ratio > 0.5:
                raise GridError(f"explicit scheme unstable: kappa dt / dx^2 = {ratio:.3g} > 0.5")

    def to_dict(self) -> dict:
        from .config import sim_config_to_dict

        return sim_config_to_dict(self)

    @property
    def config_hash(self) -> str:
        from .io import canonical_hash

        d = self.to_dict()
        d["run"].pop("n_paths", None)
        return canonical_hash(d)

    def xs(self) -> np.ndarray:
        if self.scheme == WAVE_CONE:
            return gridmod.nodes(self.grid)
        return gridmod.cell_centres(self.grid)


@dataclass
class PathField:
    values: np.ndarray
    path_index: int
    config_hash: str
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    xs: np.ndarray = field(default_factory=lambda: np.zeros(0))


# ---------------------------------------------------------------------------
# Noise on the coarse grid, optionally summed from a finer one
# ---------------------------------------------------------------------------

def _heat_noise(cfg: SimConfig, k: int, paths: np.ndarray, n: int) -> np.ndarray:
    """Standard normals of the cells between steps ``k`` and ``k + 1``."""
    F = 1 << cfg.noise_refine
    if F == 1:
        return normal_rows(cfg.seed, k, _STREAM_CELL, paths, n)
    total = np.zeros((paths.size, n))
    for a in range(F):
        fine = normal_rows(cfg.seed, F * k + a, _STREAM_CELL, paths, n * F)
        total += fine.reshape(paths.size, n, F).sum(axis=2)
    return total / F


class _WaveNoise:
    """Tile normals ``Z_A[n]``, ``Z_B[n]`` (``Z_B[0]`` for the half tiles at ``t = 0``)."""

    def __init__(self, cfg: SimConfig, paths: np.ndarray, n: int):
        self.cfg, self.paths, self.n = cfg, paths, n
        self._fine_A = {}

    def _rows(self, t, stream, width):
        return normal_rows(self.cfg.seed, t, stream, self.paths, width)

    def _fA(self, t):
        # fine A rows are needed by two consecutive coarse steps
        if t not in self._fine_A:
            self._fine_A = {k: v for k, v in self._fine_A.items() if k >= t - 2}
            self._fine_A[t] = self._rows(t, _STREAM_A, 2 * self.n)
        return self._fine_A[t]

    def A(self, k: int) -> np.ndarray:
        if self.cfg.noise_refine == 0:
            return self._rows(k, _STREAM_A, self.n)
        a0, a1 = self._fA(2 * k), self._fA(2 * k + 1)
        b1 = self._rows(2 * k + 1, _STREAM_B, 2 * self.n)
        even = slice(0, None, 2)
        # coarse A[k, j] = fine A[2k, 2j] + A[2k+1, 2j] + B[2k+1, 2j-1] + B[2k+1, 2j]
        s = a0[:, even] + a1[:, even] + np.roll(b1, 1, axis=1)[:, even] + b1[:, even]
        return 0.5 * s

    def B(self, k: int) -> np.ndarray:
        if self.cfg.noise_refine == 0:
            return self._rows(k, _STREAM_B, self.n)
        odd, even = slice(1, None, 2), slice(0, None, 2)
        bk = self._rows(2 * k, _STREAM_B, 2 * self.n)
        if k == 0:
            # coarse half tile = fine A[0, 2j+1] + half tiles B0[2j], B0[2j+1]
            a = self._fA(0)
            return (a[:, odd] + (bk[:, even] + bk[:, odd]) / math.sqrt(2.0)) / math.sqrt(2.0)
        # coarse B[k, j] = fine A[2k-1, 2j+1] + A[2k, 2j+1] + B[2k, 2j] + B[2k, 2j+1]
        s = self._fA(2 * k - 1)[:, odd] + self._fA(2 * k)[:, odd] + bk[:, even] + bk[:, odd]
        return 0.5 * s


# ---------------------------------------------------------------------------
# Batched schemes: rows of `u` are paths
# ---------------------------------------------------------------------------

def _check_finite(u: np.ndarray, k: int, paths: np.ndarray, sup_hist: list):
    if not np.all(np.isfinite(u)):
        bad = paths[~np.all(np.isfinite(u), axis=1)]
        raise SimulationError(
            f"non-finite values at step {k} in paths {bad[:8].tolist()}; "
            f"recent sup-norms {[float(f'{v:.3g}') for v in sup_hist[-5:]]}"
        )


def _noise_filter(s: np.ndarray, dt: float) -> np.ndarray:
    """Per-mode noise amplitude: variance ``int_0^dt exp(-2 r Psi) dr / dt``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        a2 = np.where(s > 0, -np.expm1(-2.0 * dt * s) / (2.0 * s * dt), 1.0)
    return np.sqrt(a2)


def _heat_batch(cfg: SimConfig, paths: np.ndarray, emit, sigma_rows=None):
    """March the heat scheme; ``emit(k, u)`` receives every saved row.

    ``sigma_rows(k)`` overrides ``sigma(u_k)`` (used by the Picard solver).
    """
    g = cfg.grid
    xs = gridmod.cell_centres(g)
    n = xs.size
    u = np.tile(cfg.initial.u0(xs), (paths.size, 1))
    saved = set(g.saved_steps().tolist())
    if 0 in saved:
        emit(0, u)
    scale = math.sqrt(g.dt * g.dx) / g.dx
    sup_hist = []
    if cfg.scheme == HEAT_SPECTRAL:
        xi = 2.0 * math.pi * np.fft.rfftfreq(n, d=g.dx)
        s = psi(cfg.equation.model, xi)
        decay = np.exp(-g.dt * s)
        with np.errstate(divide="ignore", invalid="ignore"):
            filt = _noise_filter(s, g.dt)
    else:
        nu_fd = cfg.equation.model.kappa * g.dt / (2.0 * g.dx**2)
    for k in range(g.n_steps):
        z = _heat_noise(cfg, k, paths, n)
        sig = cfg.sigma(u) if sigma_rows is None else sigma_rows(k)
        noise = sig * z * scale
        if cfg.scheme == HEAT_SPECTRAL:
            u = np.fft.irfft(decay * np.fft.rfft(u, axis=1) + filt * np.fft.rfft(noise, axis=1), n=n, axis=1)
        else:
            lap = np.roll(u, 1, axis=1) - 2.0 * u + np.roll(u, -1, axis=1)
            u = u + nu_fd * lap + noise
        sup_hist.append(float(np.max(np.abs(u))) if u.size else 0.0)
        _check_finite(u, k + 1, paths, sup_hist)
        if k + 1 in saved:
            emit(k + 1, u)
    return u


def _wave_batch(cfg: SimConfig, paths: np.ndarray, emit, sigma_rows=None):
    g = cfg.grid
    kappa = cfg.equation.kappa
    xs = gridmod.nodes(g)
    n = xs.size
    saved = set(g.saved_steps().tolist())
    det = lambda k: wave_deterministic(kappa, cfg.initial, k * g.dt, xs)
    sig = (lambda k, u: cfg.sigma(u)) if sigma_rows is None else (lambda k, u: sigma_rows(k))
    noise = _WaveNoise(cfg, paths, n)
    tile = math.sqrt(g.dt * g.dx / 2.0)
    right = lambda a: np.roll(a, -1, axis=1)
    left = lambda a: np.roll(a, 1, axis=1)

    u = np.tile(det(0), (paths.size, 1))
    if 0 in saved:
        emit(0, u)
    if g.n_steps == 0:
        return u
    s0 = sig(0, u)
    A_prev = s0 * noise.A(0) * tile
    B0 = 0.5 * (s0 + right(s0)) * noise.B(0) * (tile / math.sqrt(2.0))
    S_prev = np.zeros_like(u)
    S = 0.5 * (A_prev + left(B0) + B0)
    u = det(1)[None, :] + S
    sup_hist = [float(np.max(np.abs(u)))]
    _check_finite(u, 1, paths, sup_hist)
    if 1 in saved:
        emit(1, u)
    for k in range(1, g.n_steps):
        sk = sig(k, u)
        A_k = sk * noise.A(k) * tile
        B_k = 0.5 * (sk + right(sk)) * noise.B(k) * tile
        S_next = right(S) + left(S) - S_prev + 0.5 * (A_prev + A_k + left(B_k) + B_k)
        S_prev, S, A_prev = S, S_next, A_k
        u = det(k + 1)[None, :] + S
        sup_hist.append(float(np.max(np.abs(u))))
        _check_finite(u, k + 1, paths, sup_hist)
        if k + 1 in saved:
            emit(k + 1, u)
    return u


def _run_batch(cfg: SimConfig, paths: np.ndarray, emit, sigma_rows=None):
    if cfg.scheme == WAVE_CONE:
        return _wave_batch(cfg, paths, emit, sigma_rows)
    return _heat_batch(cfg, paths, emit, sigma_rows)


def _path_field(cfg: SimConfig, path: int, sigma_rows=None) -> PathField:
    rows = []
    _run_batch(cfg, np.array([path]), lambda k, u: rows.append(u[0].copy()), sigma_rows)
    return PathField(np.array(rows), int(path), cfg.config_hash, cfg.grid.times(), cfg.xs())


def simulate_heat_path(config: SimConfig, path: int) -> PathField:
    if isinstance(config.equation, Wave):
        raise ValueError("simulate_heat_path needs a heat configuration")
    return _path_field(config, path)


def simulate_wave_path(config: SimConfig, path: int) -> PathField:
    if not isinstance(config.equation, Wave):
        raise ValueError("simulate_wave_path needs a wave configuration")
    return _path_field(config, path)


def simulate_path(config: SimConfig, path: int) -> PathField:
    return _path_field(config, path)


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------

def _batch_sums(cfg: SimConfig, b: int, lo: int, hi: int):
    paths = np.arange(lo, hi)
    n_t = cfg.grid.saved_steps().size
    n_x = cfg.xs().size
    sums = np.zeros((len(cfg.nus), n_t, n_x))
    sumsq = np.zeros_like(sums)
    index = {k: i for i, k in enumerate(cfg.grid.saved_steps().tolist())}

    def emit(k, u):
        a = np.abs(u)
        i = index[k]
        for m, nu in enumerate(cfg.nus):
            w = a**nu
            sums[m, i] = w.sum(axis=0)
            sumsq[m, i] = (w * w).sum(axis=0)

    _run_batch(cfg, paths, emit)
    return b, sums, sumsq, hi - lo


def _batch_task(args):
    return _batch_sums(*args)


def simulate_ensemble(config: SimConfig, workers: Optional[int] = 1) -> list:
    """Moment fields for every ``nu`` in ``config.nus``.

    Paths are split into fixed index batches and each batch is simulated as
    one vectorized array; batch sums are reduced in batch order, so results
    are bit-identical for any worker count.
    """
    if config.n_paths < 2:
        raise ValueError("an ensemble needs at least 2 paths")
    n_t = config.grid.saved_steps().size
    acc = MomentAccumulator(config.nus, (n_t, config.xs().size), config.n_paths)
    tasks = [(config, b, *acc.batch_bounds(b)) for b in range(acc.n_batches)]
    if workers is None or workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_batch_task, tasks))
    else:
        results = [_batch_task(t) for t in tasks]
    for b, sums, sumsq, count in sorted(results, key=lambda r: r[0]):
        acc.add_batch(b, sums, count, sumsq)
    meta = {"scheme": config.scheme, "config_hash": config.config_hash, "seed": int(config.seed)}
    fields = acc.fields(config.grid.times(), config.xs(), meta)
    if config.sigma.lip == 0:
        # every path is the deterministic evolution; batch means differ only by rounding
        for f in fields:
            f.ses[...] = 0.0
    return fields


# ---------------------------------------------------------------------------
# Picard iteration on a shared noise realization
# ---------------------------------------------------------------------------

@dataclass
class PicardResult:
    field: PathField
    diff_norms: list
    beta: float = 0.0


def picard_weight_rate(config: SimConfig) -> float:
    """Twice the second-moment threshold at ``c = 0``.

    Above the threshold the Picard map contracts in the norm
    ``sup_t e^{-beta t} sup_x |.|``; the factor 2 leaves margin for the
    pathwise (rather than mean-square) sup.
    """
    eq, lip = config.equation, config.sigma.lip
    if isinstance(eq, Wave):
        return 2.0 * moment_threshold_wave(eq.kappa, lip, 2, 0.0).derived
    if isinstance(eq.model, Brownian):
        return 2.0 * moment_threshold_heat(eq.model.kappa, lip, 0.0)
    return 2.0 * moment_threshold_general(eq.model, config.sigma, 2, 0.0)


def picard_solve(config: SimConfig, path: int, n_iter: int, beta: Optional[float] = None) -> PicardResult:
    """Iterate ``u^{(m+1)} = deterministic part + stochastic convolution of sigma(u^{(m)})``.

    The stochastic convolution is the scheme's own discretization driven by
    the path's keyed noise, so the fixed point is the direct path. ``u^{(0)}``
    is ``u0`` at every time. Successive differences are measured in
    ``sup_t e^{-beta t} sup_x |u^{(m+1)} - u^{(m)}|`` with ``beta`` from
    ``picard_weight_rate`` unless given.
    """
    if n_iter < 0:
        raise ValueError("n_iter must be nonnegative")
    g = config.grid
    if beta is None:
        beta = picard_weight_rate(config)
    full = SimConfig(config.equation, config.sigma, config.initial,
                     Grid(g.dt, g.dx, g.T, g.L, 1), config.n_paths, config.seed,
                     config.scheme, config.noise_refine, config.nus)
    xs = full.xs()
    if config.scheme == WAVE_CONE:
        u0_row = wave_deterministic(config.equation.kappa, config.initial, 0.0, xs)
    else:
        u0_row = config.initial.u0(xs)
    cur = np.tile(u0_row, (g.n_steps + 1, 1))
    weight = np.exp(-beta * g.dt * np.arange(g.n_steps + 1))
    diffs = []
    for m in range(n_iter):
        rows = []
        prev = cur
        _run_batch(full, np.array([path]), lambda k, u: rows.append(u[0].copy()),
                   sigma_rows=lambda k: config.sigma(prev[k])[None, :])
        cur = np.array(rows)
        diffs.append(float(np.max(weight * np.max(np.abs(cur - prev), axis=1))))
        if len(diffs) >= 4 and diffs[-1] > diffs[-2] > diffs[-3] > diffs[-4] and diffs[-1] > 1e-300:
            raise PicardDivergenceError(f"difference norms grew for 3 iterates: {diffs[-4:]}")
    steps = g.saved_steps()
    field_ = PathField(cur[steps], int(path), config.config_hash, g.times(), xs)
    return PicardResult(field_, diffs, float(beta))


def dump_path(pf: PathField, directory, grid: Grid) -> tuple:
    """Write ``values`` as raw little-endian float64 rows plus a JSON sidecar."""
    import json
    from pathlib import Path

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    stem = d / f"path_{pf.path_index:08d}"
    raw = stem.with_suffix(".f64")
    np.ascontiguousarray(pf.values, dtype="<f8").tofile(raw)
    side = stem.with_suffix(".json")
    side.write_text(json.dumps({
        "path_index": pf.path_index, "config_hash": pf.config_hash,
        "shape": list(pf.values.shape), "dtype": "<f8",
        "grid": {"dt": grid.dt, "dx": grid.dx, "T": grid.T, "L": grid.L},
        "times": pf.times.tolist(), "x0": float(pf.xs[0]) if pf.xs.size else None,
    }, indent=2))
    return raw, side


__all__ = [
    "SimConfig", "PathField", "SimulationError", "PicardDivergenceError", "PicardResult", "picard_weight_rate",
    "simulate_heat_path", "simulate_wave_path", "simulate_path", "simulate_ensemble",
    "picard_solve", "dump_path", "HEAT_SPECTRAL", "HEAT_FD", "WAVE_CONE", "SCHEMES",
]

