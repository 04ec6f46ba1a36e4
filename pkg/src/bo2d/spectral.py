"""Periodic 2D spectral core: grid, transforms, |k| dispersion, x-derivative, dealiasing.

Fields live on a rectangle [-Lx/2, Lx/2) x [-Ly/2, Ly/2) sampled on an
nx-by-ny grid (axis 0 is x, axis 1 is y).  Spectral coefficients follow
the plain numpy fft2 layout with signed wavenumbers in standard FFT
ordering, so a real field has a Hermitian-symmetric coefficient array.

All arithmetic is float64/complex128; collapse runs amplify the solution
by orders of magnitude and single precision drift shows up directly in
the conservation diagnostics.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as _fft

__all__ = [
    "Grid2D",
    "SpectralField2D",
    "make_grid",
    "apply_dispersion",
    "ddx",
    "dealias_23",
    "grid_inner",
    "fft_workers",
]


def fft_workers() -> int:
    """Worker count for scipy's pocketfft, capped by the BO2D_THREADS env var."""
    cap = os.environ.get("BO2D_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


@dataclass(frozen=True)
class Grid2D:
    """Periodic rectangular grid with precomputed spectral helpers.

    Attributes
    ----------
    nx, ny : int
        Grid points per direction (even, >= 8).
    Lx, Ly : float
        Box lengths; the paper-scale production box is 512*pi x 128*pi.
    x, y : ndarray
        Node coordinates, x[i] = -Lx/2 + i*dx.
    kx, ky : ndarray
        Signed wavenumbers 2*pi*n/L in standard FFT ordering.
    """

    nx: int
    ny: int
    Lx: float
    Ly: float
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    kx: np.ndarray = field(repr=False)
    ky: np.ndarray = field(repr=False)
    kmag: np.ndarray = field(repr=False)          # |k| on the 2D mesh
    dealias_mask: np.ndarray = field(repr=False)  # True where the 2/3 rule keeps a mode
    kx_deriv: np.ndarray = field(repr=False)      # kx with the Nyquist column zeroed

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def dy(self) -> float:
        return self.Ly / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)


def make_grid(nx: int, ny: int, Lx: float, Ly: float) -> Grid2D:
    """Build a Grid2D with wavenumber arrays and the 2/3 dealias mask.

    The dealias mask keeps modes with |kx| <= (2/3)*kx_max and
    |ky| <= (2/3)*ky_max where k_max is the Nyquist magnitude; Nyquist
    modes always fall outside the retained band.

    Raises
    ------
    ValueError
        For odd or too-small sizes, or non-positive box lengths.
    """
    if nx != int(nx) or ny != int(ny):
        raise ValueError("grid sizes must be integers")
    nx, ny = int(nx), int(ny)
    if nx < 8 or ny < 8:
        raise ValueError(f"grid sizes must be >= 8, got {nx} x {ny}")
    if nx % 2 or ny % 2:
        raise ValueError(f"grid sizes must be even, got {nx} x {ny}")
    if not (Lx > 0 and Ly > 0) or not np.isfinite(Lx + Ly):
        raise ValueError("box lengths must be positive and finite")

    dx, dy = Lx / nx, Ly / ny
    x = -Lx / 2 + dx * np.arange(nx)
    y = -Ly / 2 + dy * np.arange(ny)
    kx = 2 * np.pi * np.fft.fftfreq(nx, d=dx)
    ky = 2 * np.pi * np.fft.fftfreq(ny, d=dy)

    KX = kx[:, None]
    KY = ky[None, :]
    kmag = np.sqrt(KX * KX + KY * KY)
    mask = (np.abs(KX) <= (2.0 / 3.0) * np.abs(kx).max()) & (
        np.abs(KY) <= (2.0 / 3.0) * np.abs(ky).max()
    )
    kx_deriv = kx.copy()
    kx_deriv[nx // 2] = 0.0  # keep i*kx multiplication reality-preserving

    return Grid2D(nx, ny, float(Lx), float(Ly), x, y, kx, ky, kmag, mask, kx_deriv)


class SpectralField2D:
    """Real field with a lazily synchronized spectral representation.

    Exactly one representation may be present ("clean") at a time, or
    both; accessing the missing one triggers a transform and caches the
    result.  The flags `real_clean` / `spectral_clean` expose the cache
    state.  Instances are treated as immutable by all operations in this
    package: operators return new fields.
    """

    __slots__ = ("grid", "_real", "_spec")

    def __init__(self, grid: Grid2D, real=None, spectral=None):
        if real is None and spectral is None:
            raise ValueError("field needs a real or a spectral representation")
        self.grid = grid
        self._real = None
        self._spec = None
        if real is not None:
            real = np.asarray(real, dtype=float)
            if real.shape != grid.shape:
                raise ValueError(f"field shape {real.shape} != grid shape {grid.shape}")
            self._real = real
        if spectral is not None:
            spectral = np.asarray(spectral, dtype=complex)
            if spectral.shape != grid.shape:
                raise ValueError(f"coefficient shape {spectral.shape} != grid shape {grid.shape}")
            self._spec = spectral

    @classmethod
    def from_real(cls, grid: Grid2D, values) -> "SpectralField2D":
        return cls(grid, real=values)

    @classmethod
    def from_spectral(cls, grid: Grid2D, coeffs) -> "SpectralField2D":
        return cls(grid, spectral=coeffs)

    @classmethod
    def zeros(cls, grid: Grid2D) -> "SpectralField2D":
        return cls(grid, real=np.zeros(grid.shape))

    @property
    def real_clean(self) -> bool:
        return self._real is not None

    @property
    def spectral_clean(self) -> bool:
        return self._spec is not None

    @property
    def values(self) -> np.ndarray:
        """Real-space samples (nx, ny); transforms from spectral if needed."""
        if self._real is None:
            self._real = _fft.ifft2(self._spec, workers=fft_workers()).real
        return self._real

    @property
    def spectral(self) -> np.ndarray:
        """Complex fft2 coefficients (nx, ny); transforms from real if needed."""
        if self._spec is None:
            self._spec = _fft.fft2(self._real, workers=fft_workers())
        return self._spec

    def copy(self) -> "SpectralField2D":
        out = SpectralField2D.__new__(SpectralField2D)
        out.grid = self.grid
        out._real = None if self._real is None else self._real.copy()
        out._spec = None if self._spec is None else self._spec.copy()
        return out

    def __repr__(self) -> str:
        reps = [r for r, ok in (("real", self.real_clean), ("spectral", self.spectral_clean)) if ok]
        return f"SpectralField2D({self.grid.nx}x{self.grid.ny}, clean={'+'.join(reps)})"


def _require_finite(A: SpectralField2D, op: str) -> None:
    arr = A._real if A._real is not None else A._spec
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{op}: input field contains non-finite values")


def apply_dispersion(A: SpectralField2D) -> SpectralField2D:
    """Nonlocal dispersion G[A]: multiply coefficients by |k|.

    |k| vanishes at k = 0, so constants map to zero; the multiplier is
    even in k and therefore preserves Hermitian symmetry (real output).
    Nyquist modes are multiplied as-is; the solver's dealiasing removes
    them before they can matter.
    """
    _require_finite(A, "apply_dispersion")
    return SpectralField2D.from_spectral(A.grid, A.grid.kmag * A.spectral)


def ddx(A: SpectralField2D) -> SpectralField2D:
    """Spectral x-derivative: multiply by i*kx (Nyquist column zeroed).

    Zeroing the kx Nyquist keeps the output exactly Hermitian; a Nyquist
    cosine has no well-defined odd derivative on the grid anyway.
    """
    _require_finite(A, "ddx")
    g = A.grid
    return SpectralField2D.from_spectral(g, (1j * g.kx_deriv)[:, None] * A.spectral)


def dealias_23(A: SpectralField2D) -> SpectralField2D:
    """Zero all modes outside the 2/3 band (|kx| or |ky| above 2/3 of Nyquist)."""
    g = A.grid
    return SpectralField2D.from_spectral(g, np.where(g.dealias_mask, A.spectral, 0.0))


def grid_inner(f: SpectralField2D, g: SpectralField2D) -> float:
    """Grid inner product <f, g> = sum f*g*dx*dy (exact periodic quadrature)."""
    if f.grid is not g.grid and f.grid.shape != g.grid.shape:
        raise ValueError("fields live on different grids")
    return float(np.sum(f.values * g.values) * f.grid.cell_area)
