"""Symmetric Lévy generators: exponents, Dalang integral, exponential moments.

Two families are supported:

* ``Brownian(kappa)`` -- generator ``kappa/2 f''``, exponent ``kappa xi^2 / 2``.
* ``TruncatedStable(alpha)`` -- pure-jump process with Lévy measure
  ``|z|^{-1-alpha} 1_{(-1,1)}(z) dz``, ``1 < alpha < 2``.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from scipy import integrate, optimize, special

ArrayLike = Union[float, np.ndarray]

# e^{-46} < 1e-20: truncation level for Fourier integrals
FOURIER_CUTOFF = 46.0


class QuadratureError(RuntimeError):
    """Numerical integration did not reach the requested tolerance."""


class AliasingError(RuntimeError):
    """Fourier inversion images overlap the evaluation grid."""


class DensityClampWarning(UserWarning):
    """Negative values from Fourier inversion were clamped to zero."""


@dataclass(frozen=True)
class Brownian:
    kappa: float = 1.0
    xi_max: float = 1.0e4
    n_xi: int = 1 << 16

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        _check_quadrature(self)

    @property
    def name(self) -> str:
        return "brownian"

    def variance(self, t: float) -> float:
        return self.kappa * t


@dataclass(frozen=True)
class TruncatedStable:
    alpha: float = 1.5
    xi_max: float = 1.0e3
    n_xi: int = 1 << 16

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise ValueError(f"alpha must lie in (1, 2), got {self.alpha}")
        _check_quadrature(self)

    @property
    def name(self) -> str:
        return "truncated_stable"

    @property
    def tail_constant(self) -> float:
        """``C`` in ``Psi(xi) ~ C |xi|^alpha``, i.e. ``2 int_0^inf (1-cos r) r^{-1-alpha} dr``."""
        a = self.alpha
        return -2.0 * special.gamma(-a) * math.cos(math.pi * a / 2.0)

    def variance(self, t: float) -> float:
        # t * M''(0) = t * 2 int_0^1 z^{1-alpha} dz
        return 2.0 * t / (2.0 - self.alpha)


LevyModel = Union[Brownian, TruncatedStable]


def _check_quadrature(model) -> None:
    if not model.xi_max > 0:
        raise ValueError("xi_max must be positive")
    if int(model.n_xi) < 1:
        raise ValueError("n_xi must be a positive integer")


# ---------------------------------------------------------------------------
# Lévy exponent
# ---------------------------------------------------------------------------

_SERIES_TERMS = 24
_ASYMPTOTIC_FROM = 30.0


def _cos_series_coeffs(alpha: float, n: int = _SERIES_TERMS) -> np.ndarray:
    k = np.arange(1, n + 1)
    sign = np.where(k % 2 == 1, 1.0, -1.0)
    return sign / (special.factorial(2 * k) * (2 * k - alpha))


def _psi_ts_small(xi: np.ndarray, alpha: float) -> np.ndarray:
    # |xi| <= 1: termwise integration of the cosine series over [0, 1]
    coeffs = _cos_series_coeffs(alpha)
    powers = xi[..., None] ** (2 * np.arange(1, len(coeffs) + 1))
    return 2.0 * powers @ coeffs


def _cos_tail_asymptotic(xi: np.ndarray, s: float, n_terms: int = 40) -> np.ndarray:
    """``int_xi^inf cos(w) w^{-s} dw`` from the integration-by-parts series (xi >= 30)."""
    total = np.zeros(xi.shape, dtype=complex)
    poch = 1.0
    for n in range(n_terms):
        term = (-1j) ** n * poch * xi ** (-s - n)
        total += term
        poch *= s + n
    return (1j * np.exp(1j * xi) * total).real


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _gauss_cos(a: np.ndarray, b: np.ndarray, s: float) -> np.ndarray:
    """``int_a^b cos(w) w^{-s} dw`` for short intervals (length <= 1, a >= 1)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    w = mid[..., None] + half[..., None] * _GL_NODES
    return half * ((np.cos(w) * w ** (-s)) @ _GL_WEIGHTS)


@lru_cache(maxsize=16)
def _cos_tail_table(s: float) -> np.ndarray:
    """``table[m] = int_m^30 cos(w) w^{-s} dw`` for integer ``m`` in ``[0, 30]``."""
    top = int(_ASYMPTOTIC_FROM)
    table = np.zeros(top + 1)
    m = np.arange(1, top, dtype=float)
    pieces = _gauss_cos(m, m + 1.0, s)
    table[1:top] = np.cumsum(pieces[::-1])[::-1]
    return table


def _cos_tail_mid(x: np.ndarray, s: float) -> np.ndarray:
    # 1 < x < 30: tabulated integer nodes plus one short Gauss-Legendre panel
    table = _cos_tail_table(s)
    m = np.floor(x)
    upper = m + 1.0
    near = _gauss_cos(x, upper, s)
    far = _cos_tail_asymptotic(np.array([_ASYMPTOTIC_FROM]), s)[0]
    return near + table[upper.astype(int)] + far


def _psi_ts(xi: np.ndarray, model: TruncatedStable) -> np.ndarray:
    a = model.alpha
    xi = np.abs(np.asarray(xi, dtype=float))
    out = np.empty_like(xi)
    small = xi <= 1.0
    out[small] = _psi_ts_small(xi[small], a)
    big = ~small
    if np.any(big):
        x = xi[big]
        tail = np.empty_like(x)
        far = x >= _ASYMPTOTIC_FROM
        tail[far] = _cos_tail_asymptotic(x[far], 1.0 + a)
        tail[~far] = _cos_tail_mid(x[~far], 1.0 + a)
        # Psi = C xi^a - 2/a + 2 xi^a * int_xi^inf cos(w) w^{-1-a} dw
        xa = x**a
        out[big] = model.tail_constant * xa - 2.0 / a + 2.0 * xa * tail
    return out


def psi(model: LevyModel, xi: ArrayLike) -> ArrayLike:
    """Lévy exponent ``Psi(xi)`` with ``E exp(i xi X_1) = exp(-Psi(xi))``."""
    scalar = np.ndim(xi) == 0
    x = np.atleast_1d(np.asarray(xi, dtype=float))
    if not np.all(np.isfinite(x)):
        raise ValueError("xi must be finite")
    if isinstance(model, Brownian):
        out = 0.5 * model.kappa * x * x
    elif isinstance(model, TruncatedStable):
        out = _psi_ts(x, model)
    else:
        raise TypeError(f"unsupported model {model!r}")
    out = np.maximum(out, 0.0)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Dalang integral
# ---------------------------------------------------------------------------

_UPSILON_RTOL = 1e-12


def upsilon(model: LevyModel, beta: float) -> float:
    """Dalang integral ``(1/2pi) int dxi / (beta + 2 Psi(xi))``."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if isinstance(model, Brownian):
        val, err = integrate.quad(
            lambda x: 1.0 / (beta + model.kappa * x * x),
            0.0, np.inf, epsabs=0.0, epsrel=_UPSILON_RTOL, limit=200,
        )
        if err > 1e-9 * val:
            raise QuadratureError(f"upsilon: achieved abs error {err:.2e}")
        return val / math.pi

    if isinstance(model, TruncatedStable):
        a = model.alpha
        cut = model.xi_max
        f = lambda x: 1.0 / (beta + 2.0 * psi(model, x))
        body, err = _panel_quad(f, _upsilon_edges(cut, beta))
        C = model.tail_constant
        g = lambda x: 1.0 / (beta + 2.0 * C * x**a - 4.0 / a)
        tail, terr = integrate.quad(g, cut, np.inf, epsabs=0.0, epsrel=_UPSILON_RTOL)
        # neglected oscillatory part of Psi is bounded by 2 xi^a |int cos w^{-1-a}| <= 4/xi
        trunc = 4.0 / (4.0 * C * C * 2.0 * a * cut ** (2.0 * a))
        total = body + tail
        achieved = err + terr + trunc
        if achieved > 1e-8 * total:
            raise QuadratureError(
                f"upsilon: error estimate {achieved:.2e} too large; "
                f"increase xi_max beyond {cut:g}"
            )
        return total / math.pi
    raise TypeError(f"unsupported model {model!r}")


def _upsilon_edges(cut: float, beta: float) -> np.ndarray:
    inner = np.arange(1.0, min(cut, _ASYMPTOTIC_FROM) + 0.5, 1.0)
    inner = inner[inner < cut]
    # the integrand has width ~sqrt(beta) around the origin
    width = min(1.0, math.sqrt(beta))
    n_near = max(4, int(math.ceil(4 * math.log2(64.0 / width))))
    near = np.concatenate([[0.0], np.geomspace(width / 64.0, 1.0, n_near)[:-1]])
    inner = np.concatenate([near, inner])
    if cut > _ASYMPTOTIC_FROM:
        n_log = max(8, int(math.ceil(8 * math.log(cut / _ASYMPTOTIC_FROM))))
        outer = np.geomspace(_ASYMPTOTIC_FROM, cut, n_log + 1)[1:]
    else:
        outer = np.array([cut])
    return np.concatenate([inner, outer])


def _panel_quad(f, edges: np.ndarray):
    """Composite Gauss-Legendre; the error estimate is the 24- vs 12-point gap."""
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)

    def rule(nodes, weights):
        x = (mid[:, None] + half[:, None] * nodes).ravel()
        vals = f(x).reshape(len(a), -1)
        return float(np.sum(half * (vals @ weights)))

    fine = rule(_GL_NODES, _GL_WEIGHTS)
    coarse = rule(*np.polynomial.legendre.leggauss(12))
    return fine, abs(fine - coarse)


def upsilon_inverse(model: LevyModel, y: float) -> float:
    """Solve ``upsilon(model, beta) = y`` for ``beta``.

    Both supported processes are recurrent, so ``upsilon(0+) = inf`` and every
    ``y > 0`` is attainable.
    """
    if not y > 0:
        raise ValueError(f"y must be positive, got {y}")
    h = lambda b: upsilon(model, b) - y
    lo, hi = 1.0, 1.0
    while h(lo) < 0:
        lo /= 4.0
        if lo < 1e-300:
            raise QuadratureError("upsilon_inverse: could not bracket from below")
    while h(hi) > 0:
        hi *= 4.0
        if hi > 1e300:
            raise QuadratureError("upsilon_inverse: could not bracket from above")
    if lo == hi:
        return lo
    beta = optimize.brentq(h, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return beta


# ---------------------------------------------------------------------------
# Exponential moments and their Legendre transform
# ---------------------------------------------------------------------------

def mgf_log(model: LevyModel, c: float) -> float:
    """``M(c) = ln E exp(c X_1)``."""
    if isinstance(model, Brownian):
        return 0.5 * model.kappa * c * c
    if isinstance(model, TruncatedStable):
        # 2 int_0^1 (cosh(cz) - 1) z^{-1-a} dz, summed termwise; all terms positive
        a = model.alpha
        c2 = c * c
        term = 1.0  # c^{2k} / (2k)!
        total = 0.0
        k = 0
        while True:
            k += 1
            term *= c2 / ((2 * k - 1) * (2 * k))
            inc = term / (2 * k - a)
            total += inc
            if inc <= 1e-17 * total or term == 0.0:
                break
            if not math.isfinite(total) or k > 10_000:
                raise QuadratureError(f"mgf_log: series failed at c={c}")
        return 2.0 * total
    raise TypeError(f"unsupported model {model!r}")


def legendre(model: LevyModel, alpha_speed: float) -> float:
    """``Lambda(a) = sup_c (a c - M(c))``."""
    if alpha_speed < 0:
        raise ValueError("alpha_speed must be nonnegative")
    if alpha_speed == 0:
        return 0.0
    obj = lambda c: alpha_speed * c - mgf_log(model, c)
    c_max = 1.0
    for _ in range(200):
        grid = np.linspace(-c_max, c_max, 201)
        vals = np.array([obj(c) for c in grid])
        i = int(np.argmax(vals))
        if 0 < i < len(grid) - 1:
            break
        c_max *= 2.0
    else:
        raise QuadratureError("legendre: maximizer not bracketed")
    # bounded search: a peak midway between nodes ties its neighbours, which a
    # strict three-point bracket rejects
    res = optimize.minimize_scalar(
        lambda c: -obj(c), bounds=(grid[i - 1], grid[i + 1]),
        method="bounded", options={"xatol": 1e-12 * max(1.0, c_max)},
    )
    return max(float(-res.fun), float(vals[i]))


# ---------------------------------------------------------------------------
# Transition densities
# ---------------------------------------------------------------------------

def _xi_cutoff(model: LevyModel, t: float) -> float:
    """Smallest xi (to 1%) with ``t Psi(xi) >= FOURIER_CUTOFF``."""
    if isinstance(model, Brownian):
        xi = math.sqrt(2.0 * FOURIER_CUTOFF / (model.kappa * t))
    else:
        lo, hi = 0.0, 1.0
        while t * psi(model, hi) < FOURIER_CUTOFF:
            lo, hi = hi, 2.0 * hi
            if hi > 1e12:
                raise QuadratureError("xi cutoff not found")
        while hi - lo > 0.01 * hi:
            mid = 0.5 * (lo + hi)
            if t * psi(model, mid) < FOURIER_CUTOFF:
                lo = mid
            else:
                hi = mid
        xi = hi
    if xi > model.xi_max:
        raise QuadratureError(
            f"t={t:g} needs xi up to {xi:.3g} > xi_max={model.xi_max:g}; increase xi_max"
        )
    return xi


def _support_radius(model: LevyModel, t: float) -> float:
    """Distance beyond which ``p_t`` is below ~e^{-46} of its mass (Chernoff)."""
    if isinstance(model, Brownian):
        return math.sqrt(2.0 * FOURIER_CUTOFF * model.kappa * t)
    # t * Lambda(r / t) >= 46
    r = math.sqrt(2.0 * FOURIER_CUTOFF * model.variance(t))
    while t * legendre(model, r / t) < FOURIER_CUTOFF:
        r *= 1.25
    return r


def _xi_nodes(model: LevyModel, t: float, xs: np.ndarray):
    xi_cut = _xi_cutoff(model, t)
    reach = float(np.max(np.abs(xs))) if xs.size else 0.0
    radius = _support_radius(model, t)
    period = 2.0 * (reach + radius)
    dxi = 2.0 * math.pi / period
    n = int(math.ceil(xi_cut / dxi)) + 1
    if n > model.n_xi:
        n = int(model.n_xi)
        dxi = xi_cut / (n - 1)
    xi = dxi * np.arange(n)
    w = np.full(n, dxi)
    w[0] *= 0.5
    return xi, w, 2.0 * math.pi / dxi, reach


def _fourier_sum(xs, xi, weights, kernel, fn, chunk=2048):
    out = np.empty(xs.shape)
    flat = xs.ravel()
    res = out.ravel()
    wk = weights * kernel
    for s in range(0, flat.size, chunk):
        block = flat[s:s + chunk]
        res[s:s + chunk] = fn(np.outer(block, xi)) @ wk
    return out


def transition_density(model: LevyModel, t: float, xs: ArrayLike, *, full_output: bool = False):
    """Density ``p_t`` at points ``xs`` by Fourier inversion.

    ``p_t(x) = (1/pi) int_0^inf cos(xi x) exp(-t Psi(xi)) dxi``, evaluated with
    the trapezoidal rule on a uniform xi-grid (a direct discrete Fourier sum).
    The xi-step is chosen so that periodic images of ``p_t`` stay off the
    evaluation points, and the cutoff so that ``t Psi(xi_max) >= 46``.

    With ``full_output`` also returns a dict with the clamped negative mass
    and the quadrature parameters.
    """
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    xs = np.asarray(xs, dtype=float)
    xi, w, period, reach = _xi_nodes(model, t, xs)
    kern = np.exp(-t * psi(model, xi))
    p = _fourier_sum(xs, xi, w, kern, np.cos) / math.pi

    # images of p_t sit at distance `period`; at the half period the density and
    # its first image are equal, so the sum there bounds what leaks onto the grid
    if 0.5 * period <= reach:
        raise AliasingError(
            f"Fourier period {period:.3g} is shorter than the evaluation grid "
            f"[-{reach:g}, {reach:g}]; raise n_xi or narrow the grid"
        )
    leak_at = np.array([0.5 * period])
    leak = float(_fourier_sum(leak_at, xi, w, kern, np.cos)[0] / math.pi)
    peak = float(np.sum(w * kern) / math.pi)
    if abs(leak) > 1e-6 * peak:
        raise AliasingError(
            f"image mass {leak:.2e} reaches the evaluation grid; "
            "raise n_xi or narrow the grid"
        )

    neg = p < 0
    clamped = float(-p[neg].min()) if np.any(neg) else 0.0
    p = np.where(neg, 0.0, p)
    if clamped > 1e-12 * peak:
        warnings.warn(
            f"clamped negative density values of magnitude up to {clamped:.2e}",
            DensityClampWarning, stacklevel=2,
        )
    if full_output:
        info = {"clamped": clamped, "n_xi": xi.size, "xi_max": float(xi[-1]),
                "dxi": float(xi[1] - xi[0]) if xi.size > 1 else 0.0}
        return p, info
    return p


def transition_cdf(model: LevyModel, t: float, xs: ArrayLike) -> np.ndarray:
    """``P(X_t <= x)`` by Fourier inversion of ``sin(xi x)/xi``."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    xs = np.asarray(xs, dtype=float)
    xi, w, _, _ = _xi_nodes(model, t, xs)
    kern = np.exp(-t * psi(model, xi))

    def sinc_x(arg):
        # sin(xi x) / xi, with the xi = 0 column equal to x
        out = np.empty_like(arg)
        out[:, 1:] = np.sin(arg[:, 1:]) / xi[1:]
        out[:, 0] = arg[:, 1] / xi[1] if xi.size > 1 else 0.0
        return out

    val = 0.5 + _fourier_sum(xs, xi, w, kern, sinc_x) / math.pi
    return np.clip(val, 0.0, 1.0)


# ---------------------------------------------------------------------------
# Time integrals of ||p_r||^2
# ---------------------------------------------------------------------------

def _spectral_integral(model: LevyModel, h, tail: float = 0.0) -> float:
    """``(1/pi) int_0^inf h(Psi(xi)) dxi`` for the truncated stable model.

    ``h`` maps exponent values to integrand values and must be vectorized;
    ``tail`` is the caller's value of the integral beyond ``xi_max``.
    """
    body, _ = _panel_quad(lambda x: h(psi(model, x)), _upsilon_edges(model.xi_max, 1e-6))
    return (body + tail) / math.pi


def _check_tail(model: TruncatedStable, t: float) -> None:
    if t * psi(model, model.xi_max) < FOURIER_CUTOFF:
        raise QuadratureError(
            f"t={t:g} too small for xi_max={model.xi_max:g}; increase xi_max"
        )


def l2_norm_sq(model: LevyModel, t: float) -> float:
    """``||p_t||^2_{L^2} = (1/2pi) int exp(-2 t Psi(xi)) dxi``."""
    if not t > 0:
        raise ValueError("t must be positive")
    if isinstance(model, Brownian):
        return 1.0 / (2.0 * math.sqrt(math.pi * model.kappa * t))
    _check_tail(model, 2.0 * t)
    return _spectral_integral(model, lambda s: np.exp(-2.0 * t * s))


def lag_l2_integral(model: LevyModel, a: float, b: float) -> float:
    """``int_a^b ||p_r||^2 dr``, exact through the singularity at ``r = 0``."""
    if not 0 <= a <= b:
        raise ValueError("need 0 <= a <= b")
    if isinstance(model, Brownian):
        return (math.sqrt(b) - math.sqrt(a)) / math.sqrt(math.pi * model.kappa)
    d = b - a

    def h(s):
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.exp(-2.0 * a * s) * -np.expm1(-2.0 * d * s) / (2.0 * s)
        return np.where(s > 0, out, d)

    tail = 0.0
    if a == 0.0:
        # beyond xi_max the integrand is 1/(2 Psi) up to e^{-2 b Psi}
        _check_tail(model, 2.0 * b)
        al, C = model.alpha, model.tail_constant
        tail = model.xi_max ** (1.0 - al) / (2.0 * C * (al - 1.0))
    else:
        _check_tail(model, 2.0 * a)
    return _spectral_integral(model, h, tail)
