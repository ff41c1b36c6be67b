"""Strict JSON run configurations.

A configuration is one JSON object with exactly the sections ``model``,
``sigma``, ``initial``, ``grid`` and ``run``. Unknown keys anywhere are
errors, reported with their dotted path.

Example::

    {
      "model":   {"equation": "heat", "generator": "brownian", "kappa": 1.0},
      "sigma":   {"form": "linear", "lambda": 1.0},
      "initial": {"u0": {"profile": "bump", "center": 0.0, "half_width": 1.0, "height": 1.0}},
      "grid":    {"dt": 0.015625, "dx": 0.0625, "T": 2.0},
      "run":     {"n_paths": 1000, "seed": 7}
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .bounds import Linear, SaturatingLinear, SigmaSpec, sigma_to_dict
from .estimate import DEFAULT_DELTA, DEFAULT_WINDOW
from .grid import Grid
from .kernels import Heat, KernelSpec, Wave
from .levy import Brownian, TruncatedStable
from .profiles import Bump, ExpDecay, Flat, InitialData, Zero, profile_to_dict


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


SECTIONS = ("model", "sigma", "initial", "grid", "run")


@dataclass(frozen=True)
class RunSettings:
    n_paths: int = 1000
    seed: int = 0
    scheme: str = "auto"
    noise_refine: int = 0
    nus: Sequence[float] = (2.0,)
    window: float = DEFAULT_WINDOW
    delta: float = DEFAULT_DELTA
    alpha_grid: Optional[Sequence[float]] = None
    center: float = 0.0
    bounds_nu: int = 2


@dataclass(frozen=True)
class RunConfig:
    equation: KernelSpec
    sigma: SigmaSpec
    initial: InitialData
    grid: Grid
    run: RunSettings = field(default_factory=RunSettings)

    def alphas(self) -> np.ndarray:
        """Speeds probed by the growth-index estimate."""
        if self.run.alpha_grid is not None:
            return np.asarray(self.run.alpha_grid, dtype=float)
        if isinstance(self.equation, Wave):
            scale = self.equation.kappa
        else:
            scale = max(self.sigma.lip**2, 1e-3)
        return scale * np.linspace(0.0, 1.5, 76)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, run=replace(self.run, seed=_u64(seed, "run.seed")))

    def to_dict(self) -> dict:
        return {
            "model": model_to_dict(self.equation),
            "sigma": sigma_to_dict(self.sigma),
            "initial": initial_to_dict(self.initial),
            "grid": grid_to_dict(self.grid),
            "run": {
                "n_paths": self.run.n_paths, "seed": self.run.seed, "scheme": self.run.scheme,
                "noise_refine": self.run.noise_refine, "nus": list(self.run.nus),
                "window": self.run.window, "delta": self.run.delta,
                "alpha_grid": None if self.run.alpha_grid is None else list(self.run.alpha_grid),
                "center": self.run.center, "bounds_nu": self.run.bounds_nu,
            },
        }

    def sim_config(self):
        from .simulate import SimConfig

        try:
            return SimConfig(self.equation, self.sigma, self.initial, self.grid, self.run.n_paths,
                             self.run.seed, self.run.scheme, self.run.noise_refine, self.run.nus)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def renewal_problem(self):
        from .oracle import RenewalProblem

        if not isinstance(self.sigma, Linear):
            raise ConfigError("sigma.form: the second-moment oracle needs a linear sigma")
        try:
            return RenewalProblem(self.equation, self.sigma.lam, self.initial, self.grid).resolved()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Field-level parsing helpers
# ---------------------------------------------------------------------------

def _take(d: Any, where: str, required: Sequence[str], optional: dict) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(d) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    missing = [k for k in required if k not in d]
    if missing:
        raise ConfigError(f"{where}: missing key(s) {', '.join(missing)}")
    out = dict(optional)
    out.update(d)
    return out


def _num(v, where: str, positive: bool = False, nonneg: bool = False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(f"{where}: must be finite")
    if positive and not v > 0:
        raise ConfigError(f"{where}: must be positive")
    if nonneg and v < 0:
        raise ConfigError(f"{where}: must be nonnegative")
    return v


def _int(v, where: str, minimum: int = 0) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}: expected an integer, got {v!r}")
    if v < minimum:
        raise ConfigError(f"{where}: must be >= {minimum}")
    return v


def _u64(v, where: str) -> int:
    v = _int(v, where)
    if v >= 1 << 64:
        raise ConfigError(f"{where}: must fit in 64 bits")
    return v


def _model(d) -> KernelSpec:
    eq = d.get("equation") if isinstance(d, dict) else None
    if eq == "wave":
        d = _take(d, "model", ["equation"], {"kappa": 1.0})
        return Wave(_num(d["kappa"], "model.kappa", positive=True))
    if eq != "heat":
        raise ConfigError(f"model.equation: expected 'heat' or 'wave', got {eq!r}")
    gen = d.get("generator", "brownian")
    if gen == "brownian":
        d = _take(d, "model", ["equation"], {"generator": gen, "kappa": 1.0, "xi_max": 1.0e4, "n_xi": 1 << 16})
        m = Brownian(_num(d["kappa"], "model.kappa", positive=True),
                     _num(d["xi_max"], "model.xi_max", positive=True), _int(d["n_xi"], "model.n_xi", 16))
    elif gen == "truncated_stable":
        d = _take(d, "model", ["equation"], {"generator": gen, "alpha": 1.5, "xi_max": 1.0e3, "n_xi": 1 << 16})
        a = _num(d["alpha"], "model.alpha")
        if not 1.0 < a < 2.0:
            raise ConfigError("model.alpha: must lie in (1, 2)")
        m = TruncatedStable(a, _num(d["xi_max"], "model.xi_max", positive=True), _int(d["n_xi"], "model.n_xi", 16))
    else:
        raise ConfigError(f"model.generator: expected 'brownian' or 'truncated_stable', got {gen!r}")
    return Heat(m)


def _sigma(d) -> SigmaSpec:
    form = d.get("form") if isinstance(d, dict) else None
    if form == "linear":
        d = _take(d, "sigma", ["form", "lambda"], {})
        return Linear(_num(d["lambda"], "sigma.lambda"))
    if form == "saturating_linear":
        d = _take(d, "sigma", ["form", "lambda", "cap"], {})
        try:
            return SaturatingLinear(_num(d["lambda"], "sigma.lambda"), _num(d["cap"], "sigma.cap"))
        except ValueError as exc:
            raise ConfigError(f"sigma: {exc}") from exc
    raise ConfigError(f"sigma.form: expected 'linear' or 'saturating_linear', got {form!r}")


def _profile(d, where: str):
    name = d.get("profile") if isinstance(d, dict) else None
    spec = {
        "flat": (Flat, {"level": 1.0}),
        "bump": (Bump, {"center": 0.0, "half_width": 1.0, "height": 1.0}),
        "exp_decay": (ExpDecay, {"height": 1.0, "rho": 1.0}),
        "zero": (Zero, {}),
    }
    if name not in spec:
        raise ConfigError(f"{where}.profile: expected one of {sorted(spec)}, got {name!r}")
    cls, defaults = spec[name]
    d = _take(d, where, ["profile"], defaults)
    kwargs = {k: _num(d[k], f"{where}.{k}") for k in defaults}
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _initial(d, equation) -> InitialData:
    d = _take(d, "initial", ["u0"], {"v0": {"profile": "zero"}})
    u0 = _profile(d["u0"], "initial.u0")
    v0 = _profile(d["v0"], "initial.v0")
    if not isinstance(v0, Zero) and not isinstance(equation, Wave):
        raise ConfigError("initial.v0: only the wave equation takes an initial velocity")
    try:
        return InitialData(u0, v0)
    except ValueError as exc:
        raise ConfigError(f"initial.u0: {exc}") from exc


def _grid(d) -> Grid:
    d = _take(d, "grid", ["dt", "dx", "T"], {"L": None, "save_every": 1})
    L = None if d["L"] is None else _num(d["L"], "grid.L", positive=True)
    try:
        return Grid(_num(d["dt"], "grid.dt", positive=True), _num(d["dx"], "grid.dx", positive=True),
                    _num(d["T"], "grid.T", nonneg=True), L, _int(d["save_every"], "grid.save_every", 1))
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc


def _run(d) -> RunSettings:
    base = RunSettings()
    d = _take(d, "run", [], {k: getattr(base, k) for k in base.__dataclass_fields__})
    nus = d["nus"]
    if not isinstance(nus, (list, tuple)) or not nus:
        raise ConfigError("run.nus: expected a nonempty list")
    nus = tuple(_num(v, "run.nus[]") for v in nus)
    if any(v < 1 for v in nus):
        raise ConfigError("run.nus: every nu must be >= 1")
    grid = d["alpha_grid"]
    if grid is not None:
        if isinstance(grid, dict):
            g = _take(grid, "run.alpha_grid", ["stop", "step"], {"start": 0.0})
            start, stop, step = (_num(g[k], f"run.alpha_grid.{k}") for k in ("start", "stop", "step"))
            if step <= 0 or stop < start:
                raise ConfigError("run.alpha_grid: need step > 0 and stop >= start")
            grid = tuple(start + step * np.arange(int(math.floor((stop - start) / step + 1e-9)) + 1))
        elif isinstance(grid, list) and grid:
            grid = tuple(_num(v, "run.alpha_grid[]", nonneg=True) for v in grid)
        else:
            raise ConfigError("run.alpha_grid: expected a nonempty list or {start, stop, step}")
    scheme = d["scheme"]
    if not isinstance(scheme, str):
        raise ConfigError("run.scheme: expected a string")
    window = _num(d["window"], "run.window")
    if not 0 < window <= 1:
        raise ConfigError("run.window: must lie in (0, 1]")
    return RunSettings(
        n_paths=_int(d["n_paths"], "run.n_paths", 1), seed=_u64(d["seed"], "run.seed"), scheme=scheme,
        noise_refine=_int(d["noise_refine"], "run.noise_refine"), nus=nus, window=window,
        delta=_num(d["delta"], "run.delta", positive=True), alpha_grid=grid,
        center=_num(d["center"], "run.center"), bounds_nu=_int(d["bounds_nu"], "run.bounds_nu", 2),
    )


def config_from_dict(d: dict) -> RunConfig:
    if not isinstance(d, dict):
        raise ConfigError("configuration must be a JSON object")
    unknown = sorted(set(d) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s) {', '.join(unknown)}; expected {', '.join(SECTIONS)}")
    missing = [s for s in ("model", "sigma", "initial", "grid") if s not in d]
    if missing:
        raise ConfigError(f"missing section(s) {', '.join(missing)}")
    eq = _model(d["model"])
    return RunConfig(eq, _sigma(d["sigma"]), _initial(d["initial"], eq), _grid(d["grid"]), _run(d.get("run", {})))


def load_config(path) -> RunConfig:
    """Read a configuration, or the ``config`` block of a run manifest."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if isinstance(d, dict) and "tool_version" in d and "config" in d:
        d = d["config"]
    return config_from_dict(d)


# ---------------------------------------------------------------------------
# Serialization of the parts (also used for hashing simulation configs)
# ---------------------------------------------------------------------------

def model_to_dict(eq: KernelSpec) -> dict:
    if isinstance(eq, Wave):
        return {"equation": "wave", "kappa": eq.kappa}
    m = eq.model
    if isinstance(m, Brownian):
        return {"equation": "heat", "generator": "brownian", "kappa": m.kappa, "xi_max": m.xi_max, "n_xi": m.n_xi}
    return {"equation": "heat", "generator": "truncated_stable", "alpha": m.alpha, "xi_max": m.xi_max, "n_xi": m.n_xi}


def initial_to_dict(init: InitialData) -> dict:
    return {"u0": profile_to_dict(init.u0), "v0": profile_to_dict(init.v0)}


def grid_to_dict(g: Grid) -> dict:
    return {"dt": g.dt, "dx": g.dx, "T": g.T, "L": g.L, "save_every": g.save_every}


def sim_config_to_dict(cfg) -> dict:
    return {
        "model": model_to_dict(cfg.equation),
        "sigma": sigma_to_dict(cfg.sigma),
        "initial": initial_to_dict(cfg.initial),
        "grid": grid_to_dict(cfg.grid),
        "run": {"n_paths": cfg.n_paths, "seed": cfg.seed, "scheme": cfg.scheme,
                "noise_refine": cfg.noise_refine, "nus": list(cfg.nus)},
    }
