"""Closed-form thresholds and growth-index bounds.

Everything here is a calculator: thresholds on the exponential rate ``beta``
above which weighted moment norms stay finite, and the intervals that contain
the growth indices (the speeds of the farthest high peaks).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import integrate

from .kernels import Heat, KernelSpec, Wave, log_weighted_l2_norm_sq
from .levy import Brownian, LevyModel, legendre, mgf_log, upsilon, upsilon_inverse


@dataclass(frozen=True)
class Linear:
    """``sigma(u) = lam * u``."""

    lam: float = 1.0

    def __call__(self, u):
        return self.lam * u

    @property
    def lip(self) -> float:
        return abs(self.lam)

    @property
    def lower_slope(self) -> float:
        return abs(self.lam)


@dataclass(frozen=True)
class SaturatingLinear:
    """``sigma(u) = lam * sign(u) * min(|u|, cap)``; Lipschitz but with ``L_sigma = 0``."""

    lam: float = 1.0
    cap: float = 1.0

    def __post_init__(self):
        if not self.cap > 0:
            raise ValueError("cap must be positive")

    def __call__(self, u):
        return self.lam * np.clip(u, -self.cap, self.cap)

    @property
    def lip(self) -> float:
        return abs(self.lam)

    @property
    def lower_slope(self) -> float:
        return 0.0


SigmaSpec = Union[Linear, SaturatingLinear]


def sigma_from_dict(d: dict) -> SigmaSpec:
    d = dict(d)
    form = d.pop("form", None)
    if form == "linear":
        return Linear(lam=float(d.pop("lambda")), **d)
    if form == "saturating_linear":
        return SaturatingLinear(lam=float(d.pop("lambda")), **d)
    raise ValueError(f"unknown sigma form {form!r}; expected 'linear' or 'saturating_linear'")


def sigma_to_dict(s: SigmaSpec) -> dict:
    if isinstance(s, Linear):
        return {"form": "linear", "lambda": s.lam}
    return {"form": "saturating_linear", "lambda": s.lam, "cap": s.cap}


@dataclass(frozen=True)
class BurkholderConstant:
    nu: int
    z_nu: float


def burkholder_constant(nu: int) -> BurkholderConstant:
    """``z_2 = 1`` (Itô isometry); the bound ``2 sqrt(nu)`` for larger even ``nu``."""
    if int(nu) != nu or nu < 2 or nu % 2:
        raise ValueError(f"nu must be an even integer >= 2, got {nu}")
    nu = int(nu)
    return BurkholderConstant(nu, 1.0 if nu == 2 else 2.0 * math.sqrt(nu))


def _z(nu: int) -> float:
    return burkholder_constant(nu).z_nu


def moment_threshold_general(model: LevyModel, sigma: SigmaSpec, nu: int, c: float) -> float:
    """``M(c) + upsilon^{-1}((2 z_nu Lip)^{-2}) / 2``."""
    lip = sigma.lip
    base = mgf_log(model, c)
    if lip == 0:
        return base
    return base + 0.5 * upsilon_inverse(model, (2.0 * _z(nu) * lip) ** -2)


def moment_threshold_heat(kappa: float, lip: float, c: float) -> float:
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    return kappa * c * c / 4.0 + lip**4 / (4.0 * kappa)


@dataclass(frozen=True)
class WaveThreshold:
    kappa_free: float
    derived: float


def moment_threshold_wave(kappa: float, lip: float, nu: int, c: float) -> WaveThreshold:
    """Both forms of the wave threshold.

    ``kappa_free`` is ``sqrt(kappa^2 c^2 + z^2 Lip^2 / 2)``, with no speed factor
    on the noise term; it agrees with ``derived`` only at ``kappa = 1``. ``derived`` comes from
    the Laplace transform ``kappa / (2 (beta^2 - kappa^2 c^2))`` of the weighted
    kernel norm and carries an extra factor ``kappa`` on the noise term.
    """
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    z2 = _z(nu) ** 2
    base = kappa * kappa * c * c
    return WaveThreshold(
        kappa_free=math.sqrt(base + z2 * lip * lip / 2.0),
        derived=math.sqrt(base + kappa * z2 * lip * lip / 2.0),
    )


_ALPHA_TOL = 1e-8


def lambda_upper_general(model: LevyModel, sigma: SigmaSpec, nu: int) -> float:
    """Smallest speed ``a`` with ``Lambda(a)`` above the noise threshold."""
    if sigma.lip == 0:
        return 0.0
    level = 0.5 * upsilon_inverse(model, (2.0 * _z(nu) * sigma.lip) ** -2)
    f = lambda a: legendre(model, a) - level
    hi = 1.0
    while f(hi) <= 0:
        hi *= 2.0
    lo = 0.0
    while hi - lo > _ALPHA_TOL:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class Interval:
    lower: Optional[float]
    upper: float


def lambda_bounds_heat(sigma: SigmaSpec) -> Interval:
    """``[L^2 / (2 pi), Lip^2 / 2]``, the same for every ``kappa``.

    With ``L_sigma = 0`` the lower endpoint is unavailable (``None``), except
    in the noiseless case where both endpoints are zero.
    """
    upper = sigma.lip**2 / 2.0
    if sigma.lower_slope > 0:
        return Interval(sigma.lower_slope**2 / (2.0 * math.pi), upper)
    return Interval(0.0 if sigma.lip == 0 else None, upper)


def lambda_exact_wave(kappa: float) -> float:
    if not kappa >= 0:
        raise ValueError("kappa must be nonnegative")
    return float(kappa)


def lower_condition(equation: KernelSpec, sigma: SigmaSpec, alpha_speed: float, beta: float) -> bool:
    """True when ``(alpha, beta)`` certifies that the lower growth index is at least ``alpha``."""
    L = sigma.lower_slope
    if not L > 0:
        raise ValueError("the lower condition needs a positive lower slope L_sigma")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    a = alpha_speed
    if isinstance(equation, Wave):
        return 0.0 < a < equation.kappa - 4.0 * beta * beta / (L * L)
    if not isinstance(equation.model, Brownian):
        raise ValueError("the heat lower condition is stated for Brownian generators")
    k = equation.model.kappa
    return (a - L * L / (4.0 * math.pi)) ** 2 < L**4 / (16.0 * math.pi**2) - k * beta


def laplace_kernel_norm(equation: KernelSpec, beta: float, c: float = 0.0) -> float:
    """``int_0^inf e^{-beta t} ||k_t||^2_{L^2(e^{cx})} dt`` by quadrature (``inf`` if divergent)."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    if isinstance(equation, Wave):
        if beta <= equation.kappa * abs(c):
            return math.inf
    elif isinstance(equation.model, Brownian):
        if beta <= equation.model.kappa * c * c / 4.0:
            return math.inf
    elif c == 0.0:
        return upsilon(equation.model, beta)
    else:
        raise ValueError("weighted kernel norms with c != 0 need a Brownian generator")
    # t = s^2 removes the t^{-1/2} singularity of the heat kernel norm
    def f(s):
        if s == 0.0:
            return 1.0 / math.sqrt(math.pi * equation.model.kappa) if isinstance(equation, Heat) else 0.0
        return 2.0 * s * math.exp(-beta * s * s + log_weighted_l2_norm_sq(equation, s * s, c))

    val, _ = integrate.quad(f, 0.0, np.inf, epsabs=0.0, epsrel=1e-10, limit=400)
    return val


def contraction_factor(equation: KernelSpec, sigma: SigmaSpec, nu: int, beta: float, c: float = 0.0) -> float:
    """``z_nu^2 Lip^2 int e^{-beta t} ||k_t||^2_{theta_c} dt``; the Picard map contracts when < 1."""
    return _z(nu) ** 2 * sigma.lip**2 * laplace_kernel_norm(equation, beta, c)


def lower_condition_region(equation: KernelSpec, sigma: SigmaSpec, alphas, betas) -> np.ndarray:
    """Boolean grid ``[i, j] = lower_condition(alpha_i, beta_j)``."""
    return np.array([[lower_condition(equation, sigma, a, b) for b in betas] for a in alphas])


def heat_lower_sup(kappa: float, L: float, beta: float) -> float:
    """Supremum of the ``alpha`` interval allowed by the heat lower condition (0 if empty)."""
    disc = L**4 / (16.0 * math.pi**2) - kappa * beta
    if disc <= 0:
        return 0.0
    return L * L / (4.0 * math.pi) + math.sqrt(disc)


__all__ = [
    "Linear", "SaturatingLinear", "SigmaSpec", "BurkholderConstant", "burkholder_constant",
    "moment_threshold_general", "moment_threshold_heat", "moment_threshold_wave",
    "WaveThreshold", "lambda_upper_general", "Interval", "lambda_bounds_heat",
    "lambda_exact_wave", "lower_condition", "laplace_kernel_norm", "contraction_factor",
    "lower_condition_region", "heat_lower_sup", "sigma_from_dict", "sigma_to_dict",
]
