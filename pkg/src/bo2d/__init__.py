"""Numerical laboratory for wave collapse in the 2D Benjamin-Ono equation.

The package simulates A_t + A A_x - G[A_x] = 0 on a periodic rectangle,
where G is the nonlocal |k| dispersion operator, tracks conserved
integrals, fits the self-similar blow-up exponent, and solves the
axisymmetric steady profile equation with a hypersingular radial kernel.
"""

from bo2d.spectral import Grid2D, SpectralField2D, make_grid, apply_dispersion, ddx, dealias_23
from bo2d.initial_conditions import GaussianIC, realize, scale_by
from bo2d.diagnostics import ConservedSet, PeakState, CollapseTrace, conserved, collapse_predictor, locate_peak
from bo2d.integrator import SimConfig, StepResult, Snapshot, rhs, rk4_step, run
from bo2d.selfsim import SelfSimFit, RescaledProfile, fit_exponent, rescale_snapshots, collapse_quality
from bo2d.elliptic import ellip_e, kernel_modulus
from bo2d.radial import RadialGrid, RadialProfile, make_radial_grid, g1_direct, g1_hankel, solve_ground_state, bo_fit

__version__ = "0.1.0"
