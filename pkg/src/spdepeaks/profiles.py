"""Initial profiles ``u0`` (and ``v0`` for the wave equation)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np


@dataclass(frozen=True)
class Flat:
    level: float = 1.0

    def __post_init__(self):
        if not self.level >= 0:
            raise ValueError("Flat level must be nonnegative")

    def __call__(self, x):
        return np.full(np.shape(x), float(self.level))

    @property
    def support_radius(self) -> float:
        return math.inf

    def antiderivative(self, x):
        return self.level * np.asarray(x, dtype=float)

    def is_positive(self) -> bool:
        return self.level > 0


@dataclass(frozen=True)
class Bump:
    """``height`` on the open interval ``(center - half_width, center + half_width)``."""

    center: float = 0.0
    half_width: float = 1.0
    height: float = 1.0

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("Bump half_width must be positive")
        if not self.height >= 0:
            raise ValueError("Bump height must be nonnegative")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.abs(x - self.center) < self.half_width
        return np.where(inside, float(self.height), 0.0)

    @property
    def support_radius(self) -> float:
        return abs(self.center) + self.half_width

    def antiderivative(self, x):
        x = np.asarray(x, dtype=float)
        lo = self.center - self.half_width
        return self.height * np.clip(x - lo, 0.0, 2.0 * self.half_width)

    def is_positive(self) -> bool:
        return self.height > 0


@dataclass(frozen=True)
class ExpDecay:
    """``height * exp(-rho |x|)``."""

    height: float = 1.0
    rho: float = 1.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("ExpDecay rho must be positive")
        if not self.height >= 0:
            raise ValueError("ExpDecay height must be nonnegative")

    def __call__(self, x):
        return self.height * np.exp(-self.rho * np.abs(np.asarray(x, dtype=float)))

    @property
    def support_radius(self) -> float:
        # where the profile drops below 1e-16 of its height
        return 37.0 / self.rho

    def antiderivative(self, x):
        x = np.asarray(x, dtype=float)
        h, r = self.height, self.rho
        return np.where(x < 0, h / r * np.exp(r * x), 2.0 * h / r - h / r * np.exp(-r * x))

    def is_positive(self) -> bool:
        return self.height > 0


@dataclass(frozen=True)
class Zero:
    def __call__(self, x):
        return np.zeros(np.shape(x))

    @property
    def support_radius(self) -> float:
        return 0.0

    def antiderivative(self, x):
        return np.zeros(np.shape(x))

    def is_positive(self) -> bool:
        return False


Profile = Union[Flat, Bump, ExpDecay, Zero]


@dataclass(frozen=True)
class InitialData:
    u0: Profile = field(default_factory=Bump)
    v0: Profile = field(default_factory=Zero)

    def __post_init__(self):
        if isinstance(self.u0, Zero) or not self.u0.is_positive():
            raise ValueError("u0 must be positive on a set of positive measure")

    @property
    def support_radius(self) -> float:
        return max(self.u0.support_radius, self.v0.support_radius)

    @property
    def compact(self) -> bool:
        return all(isinstance(p, (Bump, Zero)) for p in (self.u0, self.v0))


def profile_from_dict(d: dict) -> Profile:
    kinds = {"flat": Flat, "bump": Bump, "exp_decay": ExpDecay, "zero": Zero}
    d = dict(d)
    name = d.pop("profile", None)
    if name not in kinds:
        raise ValueError(f"unknown profile {name!r}; expected one of {sorted(kinds)}")
    return kinds[name](**d)


def profile_to_dict(p: Profile) -> dict:
    names = {Flat: "flat", Bump: "bump", ExpDecay: "exp_decay", Zero: "zero"}
    out = {"profile": names[type(p)]}
    out.update({k: getattr(p, k) for k in p.__dataclass_fields__})
    return out
