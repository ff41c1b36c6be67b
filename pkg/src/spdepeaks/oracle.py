"""Deterministic second-moment solver for linear noise ``sigma(u) = lam u``.

With linear noise the Itô isometry closes the second moment
``f_t(x) = E u_t(x)^2`` into a renewal (Volterra) equation

    f_t(x) = g_t(x) + lam^2 int_0^t int k_{t-s}(x - y)^2 f_s(y) dy ds,

with ``g`` the squared deterministic part. It is marched forward in time:

* heat: per Fourier mode of a periodic cell-centred grid, with product
  integration in time (``f`` linear on each step, kernel lag integrals exact,
  including the ``r^{-1/2}`` singularity at lag 0 in the Brownian case);
* wave: on the characteristic grid ``dx = kappa dt`` the cone integral obeys a
  four-point diamond recursion, and each new diamond is integrated by a rule
  that is exact for cubics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from . import grid as gridmod
from .estimate import ORACLE, MomentField, lyapunov_estimate, DEFAULT_WINDOW
from .grid import Grid
from .kernels import KernelSpec, Wave
from .levy import (
    FOURIER_CUTOFF, Brownian, LevyModel, QuadratureError, _upsilon_edges, _GL_NODES,
    _GL_WEIGHTS, lag_l2_integral, mgf_log, psi,
)
from .profiles import Bump, ExpDecay, Flat, InitialData, Zero


class DomainEscapeError(RuntimeError):
    """Too much mass reaches the edge of the spatial domain."""


class OracleOverflowError(FloatingPointError):
    pass


ESCAPE_TOL = 1e-6


@dataclass(frozen=True)
class RenewalProblem:
    equation: KernelSpec
    lam: float
    initial: InitialData
    grid: Grid

    def resolved(self) -> "RenewalProblem":
        g = gridmod.resolve(self.grid, self.equation, self.initial, abs(self.lam))
        return replace(self, grid=g)


@dataclass
class SpaceTimeField:
    times: np.ndarray
    xs: np.ndarray
    values: np.ndarray


# ---------------------------------------------------------------------------
# Deterministic parts
# ---------------------------------------------------------------------------

def semigroup(model: LevyModel, u0, t: float, xs: np.ndarray, grid: Grid) -> np.ndarray:
    """``(P_t u0)(x)`` on the cell-centred grid.

    Brownian generators use closed forms; otherwise the exact Fourier
    transform of the profile is damped by ``exp(-t Psi)`` and inverted on the
    periodic grid.
    """
    if t == 0:
        return u0(xs)
    if isinstance(u0, Flat):
        return np.full(xs.shape, float(u0.level))
    if isinstance(model, Brownian):
        s = math.sqrt(model.kappa * t)
        if isinstance(u0, Bump):
            lo = (xs - u0.center + u0.half_width) / s
            hi = (xs - u0.center - u0.half_width) / s
            # Phi(lo) - Phi(hi), written with erfc so both tails stay accurate
            return u0.height * 0.5 * (special.erfc(-lo / math.sqrt(2)) - special.erfc(-hi / math.sqrt(2)))
        if isinstance(u0, ExpDecay):
            r, v = u0.rho, model.kappa * t
            a = 0.5 * r * r * v
            left = np.exp(a - r * xs + special.log_ndtr((xs - r * v) / s))
            right = np.exp(a + r * xs + special.log_ndtr(-(xs + r * v) / s))
            return u0.height * (left + right)
    n = xs.size
    dx = grid.dx
    xi = 2.0 * math.pi * np.fft.rfftfreq(n, d=dx)
    if isinstance(u0, Bump):
        with np.errstate(invalid="ignore", divide="ignore"):
            sinc = np.where(xi > 0, np.sin(xi * u0.half_width) / np.where(xi > 0, xi, 1.0), u0.half_width)
        hat = u0.height * 2.0 * sinc * np.exp(-1j * xi * u0.center)
    elif isinstance(u0, ExpDecay):
        hat = u0.height * 2.0 * u0.rho / (u0.rho**2 + xi**2)
    else:
        raise TypeError(f"unsupported profile {u0!r}")
    hat = hat * np.exp(-t * psi(model, xi)) * np.exp(1j * xi * xs[0])
    return np.fft.irfft(hat, n=n) / dx


def wave_deterministic(kappa: float, initial: InitialData, t: float, xs: np.ndarray) -> np.ndarray:
    """``U0 + V0``: d'Alembert translates of ``u0`` and ``(1/2kappa) int v0``."""
    u0, v0 = initial.u0, initial.v0
    kt = kappa * t
    U = 0.5 * (u0(xs + kt) + u0(xs - kt))
    if isinstance(v0, Zero):
        return U
    V = (v0.antiderivative(xs + kt) - v0.antiderivative(xs - kt)) / (2.0 * kappa)
    return U + V


def _tail_prob(model: LevyModel, t: float, d: np.ndarray) -> np.ndarray:
    """``P(X_t > d)`` (Brownian) or a Chernoff bound on it (other models)."""
    if isinstance(model, Brownian):
        return 0.5 * special.erfc(d / math.sqrt(2.0 * model.kappa * t))
    cs = np.array([0.25, 0.5, 1.0, 2.0, 4.0, 8.0])
    ms = np.array([mgf_log(model, c) for c in cs])
    bound = np.exp(np.min(-cs[:, None] * np.maximum(d, 0)[None, :] + t * ms[:, None], axis=0))
    return np.minimum(bound, 1.0)


def escaped_fraction(model: LevyModel, u0, t: float, L: float) -> float:
    """Fraction of the mass of ``P_t u0`` outside ``[-L, L]``."""
    if isinstance(u0, Flat):
        return 0.0
    if isinstance(u0, Bump):
        lo, hi = u0.center - u0.half_width, u0.center + u0.half_width
    else:
        lo, hi = -L - 40.0 / u0.rho, L + 40.0 / u0.rho
    edges = np.linspace(lo, hi, 65)
    a, b = edges[:-1], edges[1:]
    y = (0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * _GL_NODES).ravel()
    w = (0.5 * (b - a)[:, None] * _GL_WEIGHTS).ravel()
    mass = u0(y) * w
    out = _tail_prob(model, t, L - y) + _tail_prob(model, t, L + y)
    if t == 0:
        out = (np.abs(y) > L).astype(float)
    total = mass.sum()
    return float((mass * out).sum() / total) if total > 0 else 0.0


def forcing_field(problem: RenewalProblem) -> SpaceTimeField:
    """Squared deterministic part on the saved grid times."""
    prob = problem.resolved()
    g = prob.grid
    eq = prob.equation
    if isinstance(eq, Wave):
        xs = gridmod.nodes(g)
        times = g.times()
        _check_wave_domain(eq, prob.initial, g)
        vals = np.array([wave_deterministic(eq.kappa, prob.initial, t, xs) ** 2 for t in times])
        return SpaceTimeField(times, xs, vals)
    xs = gridmod.cell_centres(g)
    times = g.times()
    _check_heat_domain(eq.model, prob.initial, g)
    vals = np.array([semigroup(eq.model, prob.initial.u0, t, xs, g) ** 2 for t in times])
    return SpaceTimeField(times, xs, vals)


def _check_heat_domain(model, initial, g: Grid):
    frac = escaped_fraction(model, initial.u0, g.T, g.L)
    if frac > ESCAPE_TOL:
        raise DomainEscapeError(
            f"{frac:.2e} of the mass of P_T u0 leaves [-L, L] with L={g.L:g}; increase L"
        )


def _check_wave_domain(eq: Wave, initial: InitialData, g: Grid):
    if initial.compact:
        reach = initial.support_radius + eq.kappa * g.T
        if reach > g.L - g.dx:
            raise DomainEscapeError(
                f"light cone of the initial support reaches {reach:g} > L - dx = {g.L - g.dx:g}; increase L"
            )
        return
    for p in (initial.u0, initial.v0):
        if isinstance(p, ExpDecay):
            frac = math.exp(-p.rho * max(g.L - eq.kappa * g.T, 0.0))
            if frac > ESCAPE_TOL:
                raise DomainEscapeError(f"initial tail mass {frac:.2e} enters the domain edge; increase L")


# ---------------------------------------------------------------------------
# Heat: product integration per Fourier mode
# ---------------------------------------------------------------------------

def _brownian_lag_weights(kappa: float, dt: float, n_steps: int, xi: np.ndarray):
    """Weights ``A[j, m]``, ``B[j, m]`` of ``f`` at the early/late end of lag interval ``j``.

    ``khat(r, xi) = exp(-kappa r xi^2 / 4) / (2 sqrt(pi kappa r))`` is the Fourier
    transform of ``p_r^2``. With ``f`` linear in time on each step,
    ``int_{(j-1)dt}^{j dt} khat(r) f(t_k - r) dr = A_j f_{k-j} + B_j f_{k-j+1}``.
    """
    p = kappa * xi * xi / 4.0 * dt  # decay per step, per mode
    pref = dt / (2.0 * math.sqrt(math.pi * kappa * dt))
    A = np.zeros((n_steps + 1, xi.size))
    B = np.zeros((n_steps + 1, xi.size))
    if n_steps == 0:
        return A, B

    # lag interval [0, dt]: tau^{-1/2} singularity, incomplete gamma closed forms
    # E0 = int_0^1 e^{-p tau} tau^{-1/2}, E1 = int_0^1 e^{-p tau} tau^{1/2}
    with np.errstate(divide="ignore", invalid="ignore"):
        E0 = np.where(p > 0, special.gammainc(0.5, p) * math.sqrt(math.pi) / np.sqrt(p), 2.0)
        E1 = np.where(p > 0, special.gammainc(1.5, p) * special.gamma(1.5) / p**1.5, 2.0 / 3.0)
    # s - t_{k-1} = dt (1 - tau): weight on f_k is (1 - tau), on f_{k-1} it is tau
    B[1] = pref * (E0 - E1)
    A[1] = pref * E1

    # later intervals are smooth: Gauss-Legendre in tau on [j-1, j]
    nodes = 0.5 * (_GL_NODES + 1.0)
    weights = 0.5 * _GL_WEIGHTS
    chunk = max(1, 2_000_000 // (xi.size * nodes.size))
    for j0 in range(2, n_steps + 1, chunk):
        j = np.arange(j0, min(j0 + chunk, n_steps + 1))
        tau = (j[:, None] - 1.0) + nodes[None, :]  # (J, q)
        base = weights / np.sqrt(tau)  # (J, q)
        ex = np.exp(-p[None, None, :] * tau[:, :, None])  # (J, q, M)
        late = 1.0 - nodes  # weight on f_{k-j+1} is j - tau
        B[j] = pref * np.einsum("jq,jqm->jm", base * late, ex)
        A[j] = pref * np.einsum("jq,jqm->jm", base * nodes, ex)
    return A, B


def _lag_integrals(model: LevyModel, dt: float, n_steps: int) -> np.ndarray:
    """``W[j] = int_{(j-1)dt}^{j dt} ||p_r||^2 dr`` for ``j = 1..n_steps`` (``W[0] = 0``)."""
    W = np.zeros(n_steps + 1)
    if n_steps == 0:
        return W
    W[1] = lag_l2_integral(model, 0.0, dt)
    # the same xi nodes serve every later lag; integrand e^{-2a Psi}(1 - e^{-2 dt Psi})/(2 Psi)
    edges = _upsilon_edges(model.xi_max, 1e-6)
    a, b = edges[:-1], edges[1:]
    x = (0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * _GL_NODES).ravel()
    w = (0.5 * (b - a)[:, None] * _GL_WEIGHTS).ravel()
    s = psi(model, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(s > 0, -np.expm1(-2.0 * dt * s) / (2.0 * s), dt)
    for j0 in range(2, n_steps + 1, 256):
        j = np.arange(j0, min(j0 + 256, n_steps + 1))
        lo = (j - 1.0) * dt
        W[j] = (np.exp(-2.0 * lo[:, None] * s[None, :]) * (w * step)[None, :]).sum(axis=1) / math.pi
    if 2.0 * dt * psi(model, model.xi_max) < FOURIER_CUTOFF:
        raise QuadratureError("dt too small for xi_max in the lag integrals; increase xi_max")
    return W


def _general_lag_weights(model: LevyModel, dt: float, n_steps: int, n: int, dx: float):
    """Midpoint-in-time weights normalized to the exact lag integrals.

    The spatial kernel of lag interval ``j`` is ``p^2`` at the midpoint lag on
    the grid, rescaled so its total mass equals ``int ||p_r||^2 dr`` over the
    interval; the time integral of ``f`` is the trapezoid average.
    """
    xi = 2.0 * math.pi * np.fft.rfftfreq(n, d=dx)
    s = psi(model, xi)
    W = _lag_integrals(model, dt, n_steps)
    A = np.zeros((n_steps + 1, xi.size))
    for j in range(1, n_steps + 1):
        r = (j - 0.5) * dt
        pr = np.fft.irfft(np.exp(-r * s), n=n) / dx
        khat = np.fft.rfft(pr * pr).real * dx
        A[j] = 0.5 * W[j] * khat / khat[0]
    return A, A.copy()


def _solve_heat(prob: RenewalProblem) -> MomentField:
    g = prob.grid
    model = prob.equation.model
    xs = gridmod.cell_centres(g)
    n, N = xs.size, g.n_steps
    _check_heat_domain(model, prob.initial, g)
    lam2 = prob.lam**2

    forcing = np.array([semigroup(model, prob.initial.u0, k * g.dt, xs, g) ** 2 for k in range(N + 1)])
    ghat = np.fft.rfft(forcing, axis=1)
    xi = 2.0 * math.pi * np.fft.rfftfreq(n, d=g.dx)
    if isinstance(model, Brownian):
        A, B = _brownian_lag_weights(model.kappa, g.dt, N, xi)
    else:
        A, B = _general_lag_weights(model, g.dt, N, n, g.dx)

    # f_k = g_k + lam^2 [B_1 f_k + sum_{i>=1} C_i f_{k-i}],  C_i = A_i + B_{i+1}
    C = A.copy()
    C[:-1] += B[1:]
    implicit = 1.0 - lam2 * B[1] if N > 0 else np.ones(xi.size)
    # history stored newest-last in reversed order so lags 1..k are a contiguous slice
    Hr = np.zeros((N + 1, xi.size))
    Hi = np.zeros((N + 1, xi.size))
    Hr[N], Hi[N] = ghat[0].real, ghat[0].imag
    saved = set(g.saved_steps().tolist())
    out = {0: forcing[0].copy()} if 0 in saved else {}
    for k in range(1, N + 1):
        lo = N - k + 1
        hist_r = np.einsum("im,im->m", C[1:k + 1], Hr[lo:N + 1])
        hist_i = np.einsum("im,im->m", C[1:k + 1], Hi[lo:N + 1])
        if k < N:
            # C_k carries B_{k+1}, which belongs to an interval before t = 0
            hist_r -= B[k + 1] * Hr[N]
            hist_i -= B[k + 1] * Hi[N]
        fr = (ghat[k].real + lam2 * hist_r) / implicit
        fi = (ghat[k].imag + lam2 * hist_i) / implicit
        Hr[N - k], Hi[N - k] = fr, fi
        if k in saved:
            row = np.fft.irfft(fr + 1j * fi, n=n)
            if not np.all(np.isfinite(row)):
                raise OracleOverflowError(f"second moment overflowed at step {k}")
            # the exact f is >= g; clip FFT roundoff below the forcing
            out[k] = np.maximum(row, forcing[k])
    steps = g.saved_steps()
    values = np.array([out[k] for k in steps])
    return MomentField(2, steps * g.dt, xs, values, np.zeros_like(values), 0, ORACLE,
                       {"equation": "heat", "L": g.L, "dx": g.dx, "dt": g.dt})


# ---------------------------------------------------------------------------
# Wave: diamond recursion on the characteristic grid
# ---------------------------------------------------------------------------

def _solve_wave(prob: RenewalProblem) -> MomentField:
    g = prob.grid
    eq = prob.equation
    xs = gridmod.nodes(g)
    _check_wave_domain(eq, prob.initial, g)
    N = g.n_steps
    c = prob.lam**2 / 4.0  # lam^2 Gamma^2
    dtdx = g.dt * g.dx
    saved = set(g.saved_steps().tolist())

    def forcing(k):
        return wave_deterministic(eq.kappa, prob.initial, k * g.dt, xs) ** 2

    f_prev = forcing(0)
    out = {0: f_prev} if 0 in saved else {}
    if N == 0:
        return _wave_field(prob, xs, out)
    right = lambda a: np.roll(a, -1)  # a[j+1]
    left = lambda a: np.roll(a, 1)  # a[j-1]

    # first step: the cone of (t_1, x_j) is the triangle (t_1, x_j), (0, x_{j-1}), (0, x_{j+1});
    # its vertex rule is exact for linear f
    w = c * dtdx / 3.0
    f_cur = (forcing(1) + w * (left(f_prev) + right(f_prev))) / (1.0 - w)
    I_prev = np.zeros_like(f_prev)
    I_cur = dtdx / 3.0 * (f_cur + left(f_prev) + right(f_prev))
    if 1 in saved:
        out[1] = f_cur

    area = 2.0 * dtdx
    w_vertex = area / 12.0
    implicit = 1.0 - c * w_vertex
    for k in range(1, N):
        known = (
            right(I_cur) + left(I_cur) - I_prev
            + area * (2.0 / 3.0) * f_cur
            + w_vertex * (f_prev + right(f_cur) + left(f_cur))
        )
        f_next = (forcing(k + 1) + c * known) / implicit
        I_next = known + w_vertex * f_next
        f_prev, f_cur = f_cur, f_next
        I_prev, I_cur = I_cur, I_next
        if not np.all(np.isfinite(f_cur)):
            raise OracleOverflowError(f"second moment overflowed at step {k + 1}")
        if k + 1 in saved:
            out[k + 1] = f_cur
    return _wave_field(prob, xs, out)


def _wave_field(prob, xs, out) -> MomentField:
    g = prob.grid
    steps = g.saved_steps()
    values = np.array([out[k] for k in steps])
    return MomentField(2, steps * g.dt, xs, values, np.zeros_like(values), 0, ORACLE,
                       {"equation": "wave", "L": g.L, "dx": g.dx, "dt": g.dt})


def solve_second_moment(problem: RenewalProblem) -> MomentField:
    """Exact-in-law second moment ``E u_t(x)^2`` for ``sigma(u) = lam u``."""
    prob = problem.resolved()
    if prob.lam == 0:
        # no noise: f is the forcing itself, without transform round-off
        g = forcing_field(prob)
        steps = prob.grid.saved_steps()
        meta = {"equation": prob.equation.name, "L": prob.grid.L, "dx": prob.grid.dx, "dt": prob.grid.dt}
        return MomentField(2, steps * prob.grid.dt, g.xs, g.values, np.zeros_like(g.values), 0, ORACLE, meta)
    if isinstance(prob.equation, Wave):
        return _solve_wave(prob)
    return _solve_heat(prob)


def oracle_growth_rate(field: MomentField, window: float = DEFAULT_WINDOW) -> float:
    """Trailing-window slope of ``ln sup_x f_t(x)``."""
    return lyapunov_estimate(field, window)


__all__ = [
    "RenewalProblem", "SpaceTimeField", "DomainEscapeError", "OracleOverflowError",
    "forcing_field", "solve_second_moment", "oracle_growth_rate", "semigroup",
    "wave_deterministic", "escaped_fraction",
]
