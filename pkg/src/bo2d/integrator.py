"""Time advancement of the collapse equation in conservation-law form.

The equation is stepped as A_t + F_x = 0 with flux F = -G[A] + A^2/2,
using fixed-step classic RK4.  The nonlinear product is formed from a
dealiased copy and the full right-hand side is dealiased again, so a
band-limited state stays band-limited and the semi-discrete scheme
conserves M, Px and H exactly; observed drift is pure time-integration
error.

Runs never adapt: they abort on an amplitude threshold, on spectral
tail energy (under-resolution), or on NaN, whichever comes first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.fft as _fft

from bo2d.diagnostics import (
    AmbiguousPeakError,
    CollapseTrace,
    ConservedSet,
    PeakState,
    locate_peak,
)
from bo2d.spectral import Grid2D, SpectralField2D, fft_workers

__all__ = [
    "SimConfig",
    "StepResult",
    "Snapshot",
    "SinkWriteError",
    "rhs",
    "rk4_step",
    "run",
    "default_dt",
    "max_stable_dt",
]

RUNNING = "running"
BLOWN_UP = "blown_up"
UNDER_RESOLVED = "under_resolved"
COMPLETED = "completed"

# amplitude growth below which a tail-energy trip is classified as
# numerical instability rather than an approached singularity
_GROWTH_FOR_BLOWUP = 3.0


class SinkWriteError(RuntimeError):
    """An output hook failed; distinct from physics aborts."""


class Snapshot(NamedTuple):
    tau: float
    field: SpectralField2D


@dataclass
class SimConfig:
    """Fixed-step run policy.

    dt = None selects 0.25*dx/max(1, A_max(0)) at run start; blowup_amp =
    None selects 50x the initial peak.  tail_frac is the spectral-energy
    fraction allowed in the outer third of the active band before the
    run aborts as unresolved.  `nonlinear` exists purely as a
    verification hook for the linear dispersion dynamics.
    """

    t_end: float
    dt: float | None = None
    blowup_amp: float | None = None
    tail_frac: float = 0.05
    snapshot_every: int = 50
    dealias: bool = True
    nonlinear: bool = True

    def __post_init__(self):
        if not (self.t_end > 0):
            raise ValueError("t_end must be positive")
        if self.dt is not None and not (self.dt > 0):
            raise ValueError("dt must be positive")
        if self.blowup_amp is not None and not (self.blowup_amp > 0):
            raise ValueError("blowup_amp must be positive")
        if not (0 < self.tail_frac < 1):
            raise ValueError("tail_frac must lie in (0, 1)")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")


@dataclass(frozen=True)
class StepResult:
    """Terminal state of a run: time, final field, status and abort reason."""

    tau: float
    field: SpectralField2D
    status: str
    reason: str = ""


def default_dt(grid: Grid2D, amax0: float) -> float:
    """Default step 0.25*dx/max(1, initial peak amplitude)."""
    return 0.25 * grid.dx / max(1.0, abs(amax0))


def max_stable_dt(grid: Grid2D, amax: float = 0.0, dealias: bool = True) -> float:
    """RK4 imaginary-axis stability bound for the (dealiased) band.

    The linear symbol is kx*|k|; advection by an amplitude-`amax` pulse
    adds amax*kx.  Useful for choosing explicit dt values in configs.
    """
    f = 2.0 / 3.0 if dealias else 1.0
    kx = f * np.abs(grid.kx).max()
    ky = f * np.abs(grid.ky).max()
    lam = kx * np.hypot(kx, ky) + abs(amax) * kx
    return 2.828 / lam


def _rhs_hat(grid: Grid2D, a_hat: np.ndarray, dealias: bool, nonlinear: bool) -> np.ndarray:
    """Spectral right-hand side -d/dx (A^2/2 - G[A]) on fft2 coefficients."""
    workers = fft_workers()
    if nonlinear:
        w_hat = np.where(grid.dealias_mask, a_hat, 0.0) if dealias else a_hat
        w = _fft.ifft2(w_hat, workers=workers).real
        n_hat = _fft.fft2(0.5 * w * w, workers=workers)
    else:
        n_hat = 0.0
    out = (-1j * grid.kx_deriv)[:, None] * (n_hat - grid.kmag * a_hat)
    if dealias:
        out = np.where(grid.dealias_mask, out, 0.0)
    return out


def _rk4_hat(grid: Grid2D, a_hat: np.ndarray, dt: float, dealias: bool, nonlinear: bool) -> np.ndarray:
    k1 = _rhs_hat(grid, a_hat, dealias, nonlinear)
    k2 = _rhs_hat(grid, a_hat + 0.5 * dt * k1, dealias, nonlinear)
    k3 = _rhs_hat(grid, a_hat + 0.5 * dt * k2, dealias, nonlinear)
    k4 = _rhs_hat(grid, a_hat + dt * k3, dealias, nonlinear)
    return a_hat + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


class _HalfSpectrumEngine:
    """rfft2-based stepper: numerically identical dynamics to the public
    fft2 operators (the half spectrum is the same Hermitian data), at
    roughly half the transform and arithmetic cost.  Used by run()."""

    def __init__(self, grid: Grid2D, dealias: bool, nonlinear: bool):
        self.grid = grid
        self.dealias = dealias
        self.nonlinear = nonlinear
        nx, ny = grid.nx, grid.ny
        kx = grid.kx
        ky = 2 * np.pi * np.fft.rfftfreq(ny, d=grid.dy)
        KX, KY = kx[:, None], ky[None, :]
        self.kmag = np.sqrt(KX * KX + KY * KY)
        self.mask = (np.abs(KX) <= (2 / 3) * np.abs(kx).max()) & (
            KY <= (2 / 3) * (np.pi * ny / grid.Ly)
        )
        self.ikx = 1j * grid.kx_deriv[:, None]
        # Parseval ring weights: every interior ky column counts twice
        wring = np.full(ny // 2 + 1, 2.0)
        wring[0] = 1.0
        if ny % 2 == 0:
            wring[-1] = 1.0
        self.wring = wring[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            mult = KY / KX
        mult[0, :] = 0.0
        self.py_mult = mult
        kx_cut = np.abs(kx).max() * ((2.0 / 3.0) if dealias else 1.0)
        ky_cut = (np.pi * ny / grid.Ly) * ((2.0 / 3.0) if dealias else 1.0)
        outer = (np.abs(KX) > (2.0 / 3.0) * kx_cut) | (KY > (2.0 / 3.0) * ky_cut)
        self.tail = outer & self.mask if dealias else outer

    def from_field(self, f: SpectralField2D) -> np.ndarray:
        h = _fft.rfft2(f.values, workers=fft_workers())
        if self.dealias:
            h *= self.mask
        return h

    def to_real(self, h: np.ndarray) -> np.ndarray:
        return _fft.irfft2(h, s=self.grid.shape, workers=fft_workers())

    def rhs(self, h: np.ndarray) -> np.ndarray:
        workers = fft_workers()
        if self.nonlinear:
            wh = h * self.mask if self.dealias else h
            w = _fft.irfft2(wh, s=self.grid.shape, workers=workers)
            n_hat = _fft.rfft2(0.5 * w * w, workers=workers)
        else:
            n_hat = 0.0
        out = self.ikx * (self.kmag * h - n_hat)
        if self.dealias:
            out *= self.mask
        return out

    def step(self, h: np.ndarray, dt: float) -> np.ndarray:
        k1 = self.rhs(h)
        k2 = self.rhs(h + (0.5 * dt) * k1)
        k3 = self.rhs(h + (0.5 * dt) * k2)
        k4 = self.rhs(h + dt * k3)
        return h + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    def conserved(self, h: np.ndarray, vals: np.ndarray) -> ConservedSet:
        g = self.grid
        norm = g.cell_area / (g.nx * g.ny)
        e2 = self.wring * (h.real**2 + h.imag**2)
        M = float(h[0, 0].real) * g.cell_area
        Px = 0.5 * norm * float(e2.sum())
        I1 = norm * float((self.kmag * e2).sum())
        I2 = float((vals * vals * vals).sum()) * g.cell_area
        Py = 0.5 * norm * float((self.py_mult * e2).sum())
        mean_content = float(e2[0, :].sum())
        total = float(e2.sum())
        from bo2d.diagnostics import PY_MEAN_TOL

        reliable = mean_content <= PY_MEAN_TOL * total if total > 0 else True
        return ConservedSet(M=M, Px=Px, Py=Py, I1=I1, I2=I2, py_reliable=reliable)

    def tail_fraction(self, h: np.ndarray) -> float:
        e2 = self.wring * (h.real**2 + h.imag**2)
        total = e2.sum()
        return float(e2[self.tail].sum() / total) if total > 0 else 0.0


def rhs(A: SpectralField2D, dealias: bool = True, nonlinear: bool = True) -> SpectralField2D:
    """Right-hand side -d/dx(A^2/2 - G[A]) of the evolution equation.

    With dealiasing on, the quadratic product is formed from a dealiased
    copy of A and the full result is dealiased again.
    """
    if not np.all(np.isfinite(A.spectral)):
        raise ValueError("rhs: input field contains non-finite values")
    return SpectralField2D.from_spectral(A.grid, _rhs_hat(A.grid, A.spectral, dealias, nonlinear))


def rk4_step(A: SpectralField2D, dt: float, dealias: bool = True, nonlinear: bool = True) -> SpectralField2D:
    """One classic 4-stage Runge-Kutta step of size dt.

    dt must be nonzero; negative values are permitted so the linear
    time-reversal check (+dt then -dt) can be expressed directly.
    """
    if dt == 0 or not np.isfinite(dt):
        raise ValueError("dt must be nonzero and finite")
    out = _rk4_hat(A.grid, A.spectral, dt, dealias, nonlinear)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("rk4_step produced non-finite values (unstable or under-resolved)")
    return SpectralField2D.from_spectral(A.grid, out)


def run(
    ic: SpectralField2D,
    cfg: SimConfig,
    sinks=None,
) -> tuple[CollapseTrace, StepResult]:
    """Advance an initial field until t_end or an abort condition.

    Records a trace row (peak state + conserved set) every step and a
    field snapshot every `snapshot_every` steps plus the final state.
    `sinks`, when given, is an object with optional callbacks
    on_step(peak, conserved) and on_snapshot(tau, field, conserved);
    exceptions they raise are wrapped in SinkWriteError.

    Returns the trace and a StepResult whose status is `completed`,
    `blown_up` (amplitude threshold, or tail energy after clear growth)
    or `under_resolved` (NaN, or tail energy without growth).
    """
    grid = ic.grid
    vals0 = ic.values
    if not np.all(np.isfinite(vals0)):
        raise ValueError("run: initial condition contains non-finite values")

    engine = _HalfSpectrumEngine(grid, cfg.dealias, cfg.nonlinear)
    h = engine.from_field(ic)
    vals = engine.to_real(h)

    amax0 = float(vals0.max())
    dt = cfg.dt if cfg.dt is not None else default_dt(grid, amax0)
    blowup_amp = cfg.blowup_amp if cfg.blowup_amp is not None else (
        50.0 * amax0 if amax0 > 0 else np.inf
    )
    if blowup_amp <= amax0:
        raise ValueError(
            f"blowup_amp {blowup_amp:.6g} is not above the initial peak {amax0:.6g}"
        )

    trace = CollapseTrace()

    def record(step: int, tau: float, vals: np.ndarray) -> float:
        fld = SpectralField2D.from_real(grid, vals)
        cs = engine.conserved(h, vals)
        try:
            pk = locate_peak(fld, tau=tau)
        except AmbiguousPeakError:
            pk = PeakState(tau=tau, amax=float(vals.max()), xm=np.nan, ym=np.nan, sigma_ratio=np.nan)
        # unwrap xm/ym into a continuous trajectory
        if trace.peaks and np.isfinite(pk.xm) and np.isfinite(trace.peaks[-1].xm):
            prev = trace.peaks[-1]
            dxm = (pk.xm - prev.xm + grid.Lx / 2) % grid.Lx - grid.Lx / 2
            dym = (pk.ym - prev.ym + grid.Ly / 2) % grid.Ly - grid.Ly / 2
            pk = PeakState(tau, pk.amax, prev.xm + dxm, prev.ym + dym, pk.sigma_ratio)
        trace.append(pk, cs)
        if sinks is not None and hasattr(sinks, "on_step"):
            try:
                sinks.on_step(pk, cs)
            except Exception as exc:  # noqa: BLE001 - sink failures are one abort class
                raise SinkWriteError(f"on_step sink failed: {exc}") from exc
        if step % cfg.snapshot_every == 0:
            trace.snapshot_rows.append(len(trace) - 1)
            trace.snapshots.append(Snapshot(tau, fld.copy()))
            if sinks is not None and hasattr(sinks, "on_snapshot"):
                try:
                    sinks.on_snapshot(tau, fld, cs)
                except Exception as exc:  # noqa: BLE001
                    raise SinkWriteError(f"on_snapshot sink failed: {exc}") from exc
        return pk.amax

    record(0, 0.0, vals)

    n_steps = int(np.ceil(cfg.t_end / dt - 1e-9))
    status, reason = COMPLETED, f"reached t_end={cfg.t_end}"
    prev_tf = 0.0
    for n in range(1, n_steps + 1):
        h = engine.step(h, dt)
        tau = n * dt
        vals = engine.to_real(h)
        if not np.all(np.isfinite(vals)):
            status, reason = UNDER_RESOLVED, f"non-finite field at tau={tau:.6g}"
            vals = np.where(np.isfinite(vals), vals, 0.0)
            break

        amax = record(n, tau, vals)

        if amax > blowup_amp:
            status, reason = BLOWN_UP, f"amplitude {amax:.6g} exceeded {blowup_amp:.6g}"
            break
        tf = engine.tail_fraction(h)
        if tf > cfg.tail_frac:
            # a collapsing pulse fills the tail gradually while its peak
            # grows; a numerical instability floods it within a step or
            # two at whatever amplitude it happens to reach
            explosive = prev_tf < 0.1 * cfg.tail_frac
            grown = amax0 > 0 and amax >= _GROWTH_FOR_BLOWUP * amax0
            if grown and not explosive:
                status, reason = BLOWN_UP, f"tail energy fraction {tf:.3g} after {amax/amax0:.2f}x growth"
            else:
                status, reason = UNDER_RESOLVED, f"tail energy fraction {tf:.3g} (jump from {prev_tf:.3g})"
            break
        prev_tf = tf

    fld = SpectralField2D.from_real(grid, vals)
    # make sure the final state is snapshotted for post-processing
    if trace.snapshot_rows and trace.snapshot_rows[-1] != len(trace) - 1:
        trace.snapshot_rows.append(len(trace) - 1)
        trace.snapshots.append(Snapshot(trace.peaks[-1].tau, fld.copy()))

    return trace, StepResult(tau=trace.peaks[-1].tau, field=fld, status=status, reason=reason)
