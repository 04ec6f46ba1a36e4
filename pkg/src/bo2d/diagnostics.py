"""Conserved integrals, collapse criterion, peak tracking and symmetry metrics.

The equation conserves the mass flux M = int A, the momenta
Px = (1/2) int A^2 and Py = (1/2) int A phi_y (phi_x = A), and the
Hamiltonian H = I1/2 - I2/6 with I1 = int A G[A] and I2 = int A^3.
H < 0 is a sufficient (one-sided) collapse criterion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from bo2d.spectral import SpectralField2D

__all__ = [
    "ConservedSet",
    "PeakState",
    "CollapseTrace",
    "AmbiguousPeakError",
    "conserved",
    "collapse_predictor",
    "locate_peak",
    "symmetry_ratio_history",
]

# relative kx=0 spectral content above which the Py antiderivative
# convention is considered unreliable
PY_MEAN_TOL = 1e-12


class AmbiguousPeakError(ValueError):
    """The field attains its maximum at two or more non-adjacent grid points."""


@dataclass(frozen=True)
class ConservedSet:
    """Values of the conserved integrals at one time level.

    `py_reliable` is False when the field carries kx = 0 content above
    PY_MEAN_TOL (relative), in which case Py depends on the zero-mean
    antiderivative convention used here.
    """

    M: float
    Px: float
    Py: float
    I1: float
    I2: float
    py_reliable: bool = True

    @property
    def H(self) -> float:
        """Hamiltonian, identically I1/2 - I2/6."""
        return 0.5 * self.I1 - self.I2 / 6.0


@dataclass(frozen=True)
class PeakState:
    """Sub-grid peak location and near-peak anisotropy at one instant."""

    tau: float
    amax: float
    xm: float
    ym: float
    sigma_ratio: float


@dataclass
class CollapseTrace:
    """Per-step peak history plus conserved history and snapshot bookkeeping.

    `snapshots` holds (tau, field) pairs recorded on the snapshot
    schedule; `snapshot_rows` maps each to its trace row index.
    """

    peaks: list[PeakState] = field(default_factory=list)
    conserved: list[ConservedSet] = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    snapshot_rows: list[int] = field(default_factory=list)

    def append(self, peak: PeakState, cons: ConservedSet) -> None:
        if self.peaks and not (peak.tau > self.peaks[-1].tau):
            raise ValueError("trace times must be strictly increasing")
        self.peaks.append(peak)
        self.conserved.append(cons)

    def __len__(self) -> int:
        return len(self.peaks)

    @property
    def tau(self) -> np.ndarray:
        return np.array([p.tau for p in self.peaks])

    @property
    def amax(self) -> np.ndarray:
        return np.array([p.amax for p in self.peaks])

    @property
    def xm(self) -> np.ndarray:
        return np.array([p.xm for p in self.peaks])

    @property
    def ym(self) -> np.ndarray:
        return np.array([p.ym for p in self.peaks])

    @property
    def sigma_ratio(self) -> np.ndarray:
        return np.array([p.sigma_ratio for p in self.peaks])


def conserved(A: SpectralField2D) -> ConservedSet:
    """Evaluate all conserved integrals of a field.

    M, Px and I1 come from exact spectral quadrature (Parseval), I2 from
    the grid sum, and Py from the spectral antiderivative of A in x with
    kx = 0 modes set to zero (the constant of integration the continuum
    definition leaves open).
    """
    vals = A.values
    if not np.all(np.isfinite(vals)):
        raise ValueError("conserved: field contains non-finite values")
    g = A.grid
    ah = A.spectral
    e2 = np.abs(ah) ** 2
    norm = g.cell_area / (g.nx * g.ny)

    M = float(ah[0, 0].real) * g.cell_area  # ah[0,0] = sum over samples
    Px = 0.5 * norm * float(e2.sum())
    I1 = norm * float((g.kmag * e2).sum())
    I2 = float((vals**3).sum()) * g.cell_area

    # Py = (1/2) <A, phi_y> with phi_hat = A_hat/(i kx): multiplier ky/kx
    with np.errstate(divide="ignore", invalid="ignore"):
        mult = g.ky[None, :] / g.kx[:, None]
    mult[0, :] = 0.0
    Py = 0.5 * norm * float((mult * e2).sum())

    mean_content = float(e2[0, :].sum())
    total = float(e2.sum())
    reliable = mean_content <= PY_MEAN_TOL * total if total > 0 else True

    return ConservedSet(M=M, Px=Px, Py=Py, I1=I1, I2=I2, py_reliable=reliable)


def collapse_predictor(cs: ConservedSet) -> bool:
    """True iff H < 0.

    A negative Hamiltonian is sufficient for collapse of a localized
    field; H >= 0 makes no claim either way, although simulations show
    decay for Gaussians below the H = 0 threshold.
    """
    return cs.H < 0.0


def _wrap(delta: np.ndarray, L: float) -> np.ndarray:
    """Minimal-image displacement on a periodic interval of length L."""
    return (delta + L / 2) % L - L / 2


def locate_peak(A: SpectralField2D, tau: float = 0.0) -> PeakState:
    """Grid argmax refined by a quadratic fit over the 3x3 neighborhood.

    The interpolation is O(dx^2) accurate, which is enough for trace
    fitting.  sigma_ratio is the transverse/longitudinal rms ratio of
    the A-weighted second moments over the half-maximum region
    {A > amax/2}, measured with periodic minimal-image displacements.

    Raises
    ------
    AmbiguousPeakError
        If the maximum is attained at two non-adjacent grid points.
    """
    vals = A.values
    if not np.all(np.isfinite(vals)):
        raise ValueError("locate_peak: field contains non-finite values")
    g = A.grid
    vmax = vals.max()
    if vals.min() == vmax:
        # flat field: no strict maximum
        raise AmbiguousPeakError("field is constant; no strict maximum")
    locs = np.argwhere(vals == vmax)
    if len(locs) > 1:
        i0, j0 = locs[0]
        for i, j in locs[1:]:
            di = abs(int(i) - int(i0))
            dj = abs(int(j) - int(j0))
            if min(di, g.nx - di) > 1 or min(dj, g.ny - dj) > 1:
                raise AmbiguousPeakError("maximum attained at non-adjacent grid points")
    i, j = (int(v) for v in locs[0])

    # quadratic model c0 + c1 u + c2 v + c3 u^2 + c4 u v + c5 v^2 on the 3x3 patch
    patch = vals[np.ix_((np.arange(i - 1, i + 2)) % g.nx, (np.arange(j - 1, j + 2)) % g.ny)]
    u = np.array([-1, 0, 1], dtype=float)
    U, V = np.meshgrid(u, u, indexing="ij")
    Amat = np.column_stack(
        [np.ones(9), U.ravel(), V.ravel(), U.ravel() ** 2, (U * V).ravel(), V.ravel() ** 2]
    )
    c = np.linalg.lstsq(Amat, patch.ravel(), rcond=None)[0]
    Hmat = np.array([[2 * c[3], c[4]], [c[4], 2 * c[5]]])
    rhs_v = -np.array([c[1], c[2]])
    try:
        off = np.linalg.solve(Hmat, rhs_v)
    except np.linalg.LinAlgError:
        off = np.zeros(2)
    if not np.all(np.abs(off) <= 1.0):
        off = np.clip(off, -1.0, 1.0)
    du, dv = off
    amax = float(
        c[0] + c[1] * du + c[2] * dv + c[3] * du**2 + c[4] * du * dv + c[5] * dv**2
    )
    amax = max(amax, float(vmax))
    xm = g.x[i] + du * g.dx
    ym = g.y[j] + dv * g.dy

    # near-peak second moments over the half-maximum region
    mask = vals > 0.5 * vmax
    w = vals[mask]
    dxp = _wrap(g.x[:, None] - xm, g.Lx)
    dyp = _wrap(g.y[None, :] - ym, g.Ly)
    DX = np.broadcast_to(dxp, vals.shape)[mask]
    DY = np.broadcast_to(dyp, vals.shape)[mask]
    wsum = w.sum()
    mxx = float((w * DX**2).sum() / wsum)
    myy = float((w * DY**2).sum() / wsum)
    sigma_ratio = float(np.sqrt(myy / mxx)) if mxx > 0 else np.nan

    return PeakState(tau=float(tau), amax=amax, xm=float(xm), ym=float(ym), sigma_ratio=sigma_ratio)


def symmetry_ratio_history(trace: CollapseTrace) -> list[tuple[float, float]]:
    """(tau, sigma_ratio) series; collapsing pulses drive the ratio toward 1."""
    return [(p.tau, p.sigma_ratio) for p in trace.peaks]
