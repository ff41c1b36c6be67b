"""Space-time kernels of the heat and wave equations.

``Heat(model)`` uses the transition density ``p_t`` of the Lévy process;
``Wave(kappa)`` uses ``Gamma_t(x) = 1/2 on [-kappa t, kappa t]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import integrate, special

from .levy import (
    Brownian, LevyModel, QuadratureError, FOURIER_CUTOFF, _support_radius, lag_l2_integral, mgf_log, psi,
    transition_density,
)


@dataclass(frozen=True)
class Heat:
    model: LevyModel

    @property
    def name(self) -> str:
        return "heat"


@dataclass(frozen=True)
class Wave:
    kappa: float = 1.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")

    @property
    def name(self) -> str:
        return "wave"


KernelSpec = Union[Heat, Wave]


def gaussian_upper_tail(x):
    """``P(N(0,1) > x)``, accurate far into the tail."""
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def kernel_value(spec: KernelSpec, t: float, x):
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    if isinstance(spec, Wave):
        out = np.where(np.abs(x) <= spec.kappa * t, 0.5, 0.0)
    elif isinstance(spec.model, Brownian):
        v = spec.model.kappa * t
        out = np.exp(-x * x / (2.0 * v)) / math.sqrt(2.0 * math.pi * v)
    else:
        out = transition_density(spec.model, t, x)
    return float(out) if out.ndim == 0 else out


def log_weighted_l2_norm_sq(spec: KernelSpec, t: float, c: float) -> float:
    """Logarithm of ``int k_t(x)^2 e^{cx} dx``; finite where the value itself overflows."""
    if not t > 0:
        raise ValueError("t must be positive")
    if isinstance(spec, Wave):
        a = abs(c) * spec.kappa * t
        if a == 0.0:
            return math.log(spec.kappa * t / 2.0)
        if a < 1e-8:
            return math.log(spec.kappa * t / 2.0) + a * a / 6.0
        # sinh(a) / (2|c|) = e^a (1 - e^{-2a}) / (4|c|)
        return a + math.log(-math.expm1(-2.0 * a)) - math.log(4.0 * abs(c))
    model = spec.model
    if isinstance(model, Brownian):
        k = model.kappa
        return k * c * c * t / 4.0 - math.log(2.0 * math.sqrt(math.pi * k * t))
    return math.log(_weighted_norm_grid(model, t, c))


def weighted_l2_norm_sq(spec: KernelSpec, t: float, c: float) -> float:
    """``||k_t||^2`` in ``L^2(e^{cx} dx)``; ``inf`` on overflow (see the log version)."""
    lv = log_weighted_l2_norm_sq(spec, t, c)
    return math.exp(lv) if lv < 709.0 else math.inf


def _weighted_norm_grid(model: LevyModel, t: float, c: float) -> float:
    # p_t^2 e^{cx} integrated on a grid that is widened until the value settles
    radius = _support_radius(model, t) + abs(c) * model.variance(t)
    prev = None
    for _ in range(8):
        n = 4097
        xs = np.linspace(-radius, radius, n)
        p = transition_density(model, t, xs)
        val = integrate.simpson(p * p * np.exp(c * xs), x=xs)
        if prev is not None and abs(val - prev) <= 1e-9 * abs(val):
            return float(val)
        prev = val
        radius *= 1.5
    raise QuadratureError("weighted norm did not settle; c too large for this model")


def laplace_tail_T(spec: KernelSpec, alpha_speed: float, beta: float) -> float:
    """``int_0^inf e^{-beta r} int_{z >= alpha r} k_r(z)^2 dz dr``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    if alpha_speed < 0:
        raise ValueError("alpha_speed must be nonnegative")
    a = alpha_speed
    if isinstance(spec, Wave):
        k = spec.kappa
        return (k - a) / (4.0 * beta * beta) if a <= k else 0.0

    model = spec.model
    if isinstance(model, Brownian):
        k = model.kappa
        # r = s^2 removes the r^{-1/2} singularity:
        # int_0^inf e^{-beta s^2} Q(alpha s sqrt(2/k)) ds / sqrt(pi k)
        f = lambda s: math.exp(-beta * s * s) * gaussian_upper_tail(a * s * math.sqrt(2.0 / k))
        val, err = integrate.quad(f, 0.0, np.inf, epsabs=0.0, epsrel=1e-11, limit=200)
        if err > 1e-8 * max(val, 1e-300):
            raise QuadratureError(f"laplace_tail_T: achieved error {err:.2e}")
        return val / math.sqrt(math.pi * k)

    # below r0 the density is not resolved by xi_max; there the kernel sits at
    # the origin and the half-line carries half of the exact lag integral
    r0 = 1.01 * FOURIER_CUTOFF / psi(model, model.xi_max)
    total = 0.5 * lag_l2_integral(model, 0.0, r0)
    # r = s^2 on Gauss-Legendre panels; each node needs one FFT density grid
    s0, s_max = math.sqrt(r0), math.sqrt(60.0 / beta)
    edges = np.geomspace(s0, s_max, 13)
    nodes, weights = np.polynomial.legendre.leggauss(16)
    for lo, hi in zip(edges[:-1], edges[1:]):
        ss = 0.5 * (hi + lo) + 0.5 * (hi - lo) * nodes
        vals = [2.0 * s * math.exp(-beta * s * s) * _half_line_sq_mass(model, s * s, a * s * s)
                for s in ss]
        total += 0.5 * (hi - lo) * float(np.dot(weights, vals))
    return total


def _chernoff_radius(model: LevyModel, r: float) -> float:
    # P(X_r > x) <= exp(-c x + r M(c)); the best of a few c values
    cs = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
    return min((FOURIER_CUTOFF + r * mgf_log(model, c)) / c for c in cs)


def _half_line_sq_mass(model: LevyModel, r: float, z0: float) -> float:
    """``int_{z >= z0} p_r(z)^2 dz`` from a periodic FFT density grid."""
    radius = _chernoff_radius(model, r)
    if z0 >= radius:
        return 0.0
    lo, hi = 0.0, model.xi_max
    if r * psi(model, hi) > FOURIER_CUTOFF:
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if r * psi(model, mid) < FOURIER_CUTOFF else (lo, mid)
    dx = math.pi / hi
    n = int(2 ** math.ceil(math.log2(4.0 * radius / dx)))
    xi = 2.0 * math.pi * np.fft.rfftfreq(n, d=dx)
    p = np.fft.irfft(np.exp(-r * psi(model, xi)), n=n) / dx
    x = dx * np.arange(n)
    x[x >= n * dx / 2] -= n * dx
    w = np.where(x > z0, dx, np.where(x == z0, 0.5 * dx, 0.0))
    return float(np.dot(w, p * p))
