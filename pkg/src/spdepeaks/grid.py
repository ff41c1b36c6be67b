"""Space-time grids shared by the oracle and the Monte Carlo schemes.

Heat runs live on a periodic cell-centred grid ``x_j = -L + (j + 1/2) dx``;
wave runs on the periodic node grid ``x_j = -L + j dx`` with ``dx = kappa dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .kernels import Heat, KernelSpec, Wave
from .profiles import InitialData


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    dt: float
    dx: float
    T: float
    L: Optional[float] = None
    save_every: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and self.dx > 0):
            raise GridError("dt and dx must be positive")
        if not self.T >= 0:
            raise GridError("T must be nonnegative")
        if self.L is not None and not self.L > 0:
            raise GridError("L must be positive")
        if int(self.save_every) != self.save_every or self.save_every < 1:
            raise GridError("save_every must be a positive integer")
        n = self.T / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise GridError(f"T={self.T} is not a whole number of steps dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def n_cells(self) -> int:
        if self.L is None:
            raise GridError("grid half-width L is unresolved")
        return int(round(2.0 * self.L / self.dx))

    def saved_steps(self) -> np.ndarray:
        steps = np.arange(0, self.n_steps + 1, self.save_every)
        if steps[-1] != self.n_steps:
            steps = np.append(steps, self.n_steps)
        return steps

    def times(self) -> np.ndarray:
        return self.saved_steps() * self.dt

    def refined(self, factor: int = 2) -> "Grid":
        """Same domain with ``dt`` and ``dx`` divided by ``factor``; saved times unchanged."""
        return replace(self, dt=self.dt / factor, dx=self.dx / factor,
                       save_every=self.save_every * factor)


def cell_centres(grid: Grid) -> np.ndarray:
    return -grid.L + (np.arange(grid.n_cells) + 0.5) * grid.dx


def nodes(grid: Grid) -> np.ndarray:
    return -grid.L + np.arange(grid.n_cells) * grid.dx


def kernel_reach(equation: KernelSpec, T: float) -> float:
    """Half-width of the region the kernel couples by time ``T``."""
    if isinstance(equation, Wave):
        return equation.kappa * T
    return 6.0 * math.sqrt(equation.model.variance(T)) if T > 0 else 0.0


def default_half_width(equation: KernelSpec, initial: InitialData, lip: float, T: float,
                       sampled: bool = False) -> float:
    """Domain half-width that keeps boundary effects below tolerance.

    Heat: support + (Lip^2 / 2) T + 6 sqrt(Var X_T); wave: support + kappa T.
    Spatially flat second moments are translation invariant, so any width
    serves the oracle. Sampled noise is different: a kernel wider than the
    period would meet the same noise cells twice, so ``sampled`` grids also
    cover the kernel reach.
    """
    R = initial.support_radius
    if math.isinf(R):
        return max(4.0, kernel_reach(equation, T)) if sampled else 4.0
    if isinstance(equation, Wave):
        return R + equation.kappa * T
    return R + 0.5 * lip * lip * T + kernel_reach(equation, T)


def resolve(grid: Grid, equation: KernelSpec, initial: InitialData, lip: float,
            sampled: bool = False) -> Grid:
    """Fill in ``L`` and round it so the domain holds a whole, even number of cells.

    Wave grids must satisfy ``dx = kappa dt`` so the light cone moves one
    cell per step. With ``sampled`` (Monte Carlo runs) an explicit wave ``L``
    must also keep the light cone shorter than the period.
    """
    if isinstance(equation, Wave):
        if abs(grid.dx - equation.kappa * grid.dt) > 1e-12 * grid.dx:
            raise GridError(f"wave grids need dx = kappa dt; got dx={grid.dx}, kappa dt={equation.kappa * grid.dt}")
        if sampled and grid.L is not None and equation.kappa * grid.T >= grid.L:
            raise GridError(
                f"light cone half-width kappa T = {equation.kappa * grid.T:g} reaches L = {grid.L:g}; "
                "the periodic domain would reuse noise cells"
            )
    L = grid.L
    if L is None:
        L = default_half_width(equation, initial, lip, grid.T, sampled)
        # a couple of spare cells past the reach of the solution
        L += 2.0 * grid.dx
    n = int(math.ceil(2.0 * L / grid.dx - 1e-9))
    n += n % 2
    return replace(grid, L=0.5 * n * grid.dx)


def is_heat(equation: KernelSpec) -> bool:
    return isinstance(equation, Heat)
