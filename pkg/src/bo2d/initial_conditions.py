"""Gaussian pulse initial conditions and their exact rescalings.

The pulse family is a*exp(-(x-x0)^2/(2*sx^2) - (y-y0)^2/(2*sy^2)) with
aspect ratio alpha = sy/sx.  The evolution equation is invariant under
A -> c*A, (x, y) -> (x, y)/c, t -> t/c^2, which scale_by exploits to
produce desk-scale equivalents of production-size runs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from bo2d.spectral import Grid2D, SpectralField2D

__all__ = ["GaussianIC", "realize", "scale_by", "bo_soliton_1d"]


@dataclass(frozen=True)
class GaussianIC:
    """Gaussian pulse parameters: amplitude, half-widths and center."""

    a: float
    sigma_x: float
    sigma_y: float
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self):
        if self.a == 0 or not np.isfinite(self.a):
            raise ValueError("amplitude must be nonzero and finite")
        if not (self.sigma_x > 0 and self.sigma_y > 0):
            raise ValueError("half-widths must be positive")
        if not np.isfinite(self.sigma_x + self.sigma_y + self.x0 + self.y0):
            raise ValueError("pulse parameters must be finite")

    @property
    def alpha(self) -> float:
        """Aspect ratio sigma_y / sigma_x."""
        return self.sigma_y / self.sigma_x


def realize(ic: GaussianIC, grid: Grid2D) -> SpectralField2D:
    """Sample the pulse on the grid.

    Warns when 6 sigma does not fit inside the box in either direction;
    periodic images then contaminate the tails.
    """
    if 6 * ic.sigma_x > grid.Lx or 6 * ic.sigma_y > grid.Ly:
        warnings.warn(
            "Gaussian wider than box/6: periodic images will contaminate the field",
            stacklevel=2,
        )
    dx2 = ((grid.x - ic.x0) ** 2)[:, None] / (2 * ic.sigma_x**2)
    dy2 = ((grid.y - ic.y0) ** 2)[None, :] / (2 * ic.sigma_y**2)
    return SpectralField2D.from_real(grid, ic.a * np.exp(-(dx2 + dy2)))


def scale_by(ic: GaussianIC, c: float) -> GaussianIC:
    """Rescaled pulse (c*a, sigma/c, center/c); alpha is unchanged.

    Evolving the result for time T/c^2 on a box shrunk by c reproduces
    the original run exactly (same grid indices), so every dimensionless
    diagnostic, including the blow-up exponent, is invariant.
    """
    if not (c > 0) or not np.isfinite(c):
        raise ValueError("scale factor must be positive and finite")
    return replace(
        ic,
        a=ic.a * c,
        sigma_x=ic.sigma_x / c,
        sigma_y=ic.sigma_y / c,
        x0=ic.x0 / c,
        y0=ic.y0 / c,
    )


def default_center(grid: Grid2D) -> tuple[float, float]:
    """Upstream launch point (-Lx/4, 0): collapsing pulses travel in +x."""
    return (-grid.Lx / 4, 0.0)


def bo_soliton_1d(grid: Grid2D, speed: float = 1.0, x0: float = 0.0) -> SpectralField2D:
    """y-independent Benjamin-Ono soliton 4V/(1 + V^2 (x - x0)^2).

    The 2D equation restricted to y-independent fields is the classical
    1D BO equation, for which this profile translates at exactly `speed`;
    it serves as a regression oracle for the time stepper.
    """
    if not (speed > 0):
        raise ValueError("soliton speed must be positive")
    row = 4 * speed / (1 + speed**2 * (grid.x - x0) ** 2)
    return SpectralField2D.from_real(grid, np.repeat(row[:, None], grid.ny, axis=1))
