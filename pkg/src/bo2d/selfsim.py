"""Blow-up exponent fitting and self-similar profile rescaling.

Near collapse the peak follows A_max ~ C*(tau_c - tau)^(-lambda).  The
exponent, singularity time and prefactor are fitted jointly in log-log
space; tau_c correlates strongly with lambda, so a two-stage fit (tau_c
first) would bias the exponent.  The complete-balance similarity
analysis would force lambda = 1/2; that value is carried along in
reports purely as a reference line, since fitted collapses land far
from it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from bo2d.diagnostics import CollapseTrace, locate_peak
from bo2d.spectral import SpectralField2D

__all__ = [
    "SelfSimFit",
    "RescaledProfile",
    "FitRejectedError",
    "COMPLETE_BALANCE_LAMBDA",
    "fit_exponent",
    "rescale_snapshots",
    "collapse_quality",
]

# exponent forced by the complete-balance similarity ansatz; reported as
# a reference only, never fitted
COMPLETE_BALANCE_LAMBDA = 0.5


class FitRejectedError(RuntimeError):
    """The trace window is unusable (non-monotone growth or degenerate)."""


@dataclass(frozen=True)
class SelfSimFit:
    """Fitted blow-up law A_max = prefactor * (tau_c - tau)^(-lam).

    `window` is the (tau_lo, tau_hi) interval actually used, `rms_residual`
    the log-space root-mean-square misfit, and `ci95` the half-width of
    the 95% confidence interval on lam from the linearized covariance.
    """

    lam: float
    tau_c: float
    prefactor: float
    window: tuple[float, float]
    rms_residual: float
    ci95: float
    n_points: int

    def __post_init__(self):
        if not (self.lam > 0):
            raise ValueError("fitted exponent must be positive")
        if self.window[1] > self.tau_c:
            raise ValueError("fit window must end before the singularity time")


@dataclass(frozen=True)
class RescaledProfile:
    """Longitudinal/transverse peak sections in self-similar variables.

    xi1/h1: section along x through the peak, xi = (x - xm)/tcheck^lam,
    h = A * tcheck^lam; xi2/h2: transverse analog along y.
    """

    tau: float
    xi1: np.ndarray
    h1: np.ndarray
    xi2: np.ndarray
    h2: np.ndarray


def _as_tau_amax(trace) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(trace, CollapseTrace):
        return trace.tau, trace.amax
    tau, amax = trace
    return np.asarray(tau, dtype=float), np.asarray(amax, dtype=float)


def _default_window(tau, amax, growth_factor, drop_last):
    """Rows where A_max has grown by `growth_factor`, minus the last few steps."""
    target = growth_factor * amax[0]
    grown = np.nonzero(amax >= target)[0]
    if len(grown) == 0:
        raise FitRejectedError(
            f"amplitude never reached {growth_factor}x its initial value; nothing to fit"
        )
    i0 = int(grown[0])
    i1 = len(tau) - 1 - drop_last
    return i0, i1


def fit_exponent(
    trace,
    window: tuple[float, float] | None = None,
    growth_factor: float = 3.0,
    drop_last: int = 5,
    min_points: int = 30,
    monotone_tol: float = 0.05,
) -> SelfSimFit:
    """Fit (lam, tau_c, prefactor) to the peak-amplitude history.

    Parameters
    ----------
    trace
        A CollapseTrace or a (tau, amax) pair of arrays.
    window
        Explicit (tau_lo, tau_hi) to fit over.  Defaults to the interval
        where A_max has grown from `growth_factor` times its initial
        value to the final resolved value, excluding the last
        `drop_last` steps where resolution degrades.

    The solver is joint nonlinear least squares in
    (lam, log(tau_c - tau_last), log prefactor) with multistart over the
    singularity-time offset, spanning (0, 10x] the terminal growth
    timescale of the data.

    Monotone growth inside the window is required up to a relative
    drawdown of `monotone_tol` (default 5%), which admits measurement
    jitter of an interpolated moving peak while rejecting plateaued or
    decaying traces.

    Raises
    ------
    FitRejectedError
        For non-monotone amplitude inside the window or a window with
        fewer than `min_points` rows.
    """
    tau, amax = _as_tau_amax(trace)
    if len(tau) != len(amax) or len(tau) < 2:
        raise FitRejectedError("trace too short to fit")

    if window is not None:
        lo, hi = window
        sel = (tau >= lo) & (tau <= hi)
        idx = np.nonzero(sel)[0]
        if len(idx) == 0:
            raise FitRejectedError("explicit window contains no trace rows")
        i0, i1 = int(idx[0]), int(idx[-1])
    else:
        i0, i1 = _default_window(tau, amax, growth_factor, drop_last)

    if i1 - i0 + 1 < min_points:
        raise FitRejectedError(
            f"fit window has {max(0, i1 - i0 + 1)} points; need at least {min_points}"
        )
    tt = tau[i0 : i1 + 1]
    aa = amax[i0 : i1 + 1]
    if np.any(aa <= 0):
        raise FitRejectedError("nonpositive amplitudes in fit window")
    running = np.maximum.accumulate(aa)
    if np.any(aa < (1.0 - monotone_tol) * running) or aa[-1] <= aa[0]:
        raise FitRejectedError("A_max is not monotonically growing in the fit window")

    t_last = float(tau[-1])
    log_a = np.log(aa)

    # terminal growth timescale a/(da/dtau) estimated from the last rows
    da = aa[-1] - aa[-2]
    dt_grow = (tt[-1] - tt[-2]) * aa[-1] / da if da > 0 else (tt[-1] - tt[0])

    def residuals(p):
        lam, s, log_c = p
        tau_c = t_last + np.exp(s)
        return log_a - (log_c - lam * np.log(tau_c - tt))

    best = None
    for s0 in np.log(np.geomspace(1e-3 * dt_grow, 10.0 * dt_grow, 16)):
        sol = least_squares(residuals, x0=np.array([0.9, s0, np.log(aa[-1])]), method="lm")
        if best is None or sol.cost < best.cost:
            best = sol
    lam, s, log_c = best.x
    tau_c = t_last + np.exp(s)

    res = best.fun
    n = len(res)
    dof = max(n - 3, 1)
    rms = float(np.sqrt(np.mean(res**2)))
    try:
        cov = np.linalg.inv(best.jac.T @ best.jac) * (res @ res) / dof
        ci95 = float(1.96 * np.sqrt(cov[0, 0]))
    except np.linalg.LinAlgError:
        ci95 = np.inf

    return SelfSimFit(
        lam=float(lam),
        tau_c=float(tau_c),
        prefactor=float(np.exp(log_c)),
        window=(float(tt[0]), float(tt[-1])),
        rms_residual=rms,
        ci95=ci95,
        n_points=n,
    )


def rescale_snapshots(snapshots, fit: SelfSimFit, tau_min: float | None = None):
    """Peak sections of each snapshot in self-similar variables.

    Snapshots outside [tau_min, tau_c) are skipped with a warning
    (tau_min defaults to the fit window's start).  Sections pass through
    the grid row/column nearest the interpolated peak, so the
    longitudinal and transverse curves share their value at xi = 0.
    """
    out: list[RescaledProfile] = []
    lo = fit.window[0] if tau_min is None else tau_min
    for snap in snapshots:
        tau, field = snap
        if not (lo <= tau < fit.tau_c):
            warnings.warn(f"snapshot at tau={tau:.6g} outside fit window; skipped", stacklevel=2)
            continue
        out.append(_rescale_one(tau, field, fit))
    return out


def _rescale_one(tau: float, field: SpectralField2D, fit: SelfSimFit) -> RescaledProfile:
    g = field.grid
    pk = locate_peak(field, tau=tau)
    tcheck = fit.tau_c - tau
    scale = tcheck**fit.lam
    i = int(np.argmin(np.abs((g.x - pk.xm + g.Lx / 2) % g.Lx - g.Lx / 2)))
    j = int(np.argmin(np.abs((g.y - pk.ym + g.Ly / 2) % g.Ly - g.Ly / 2)))
    vals = field.values
    dxp = (g.x - pk.xm + g.Lx / 2) % g.Lx - g.Lx / 2
    dyp = (g.y - pk.ym + g.Ly / 2) % g.Ly - g.Ly / 2
    order1 = np.argsort(dxp)
    order2 = np.argsort(dyp)
    return RescaledProfile(
        tau=float(tau),
        xi1=dxp[order1] / scale,
        h1=vals[order1, j] * scale,
        xi2=dyp[order2] / scale,
        h2=vals[i, order2] * scale,
    )


def collapse_quality(profiles, xi_max: float = 2.0, n_samples: int = 201) -> float:
    """Worst pairwise relative L2 distance between rescaled sections.

    All longitudinal and transverse sections of all profiles are
    compared pairwise on their common xi-support restricted to
    |xi| <= xi_max; each distance is ||p - q||_2 / ||(p + q)/2||_2.
    0 means perfect self-similar collapse of the curves.

    Raises
    ------
    ValueError
        With fewer than two sections or an empty common support.
    """
    curves = []
    for p in profiles:
        if isinstance(p, RescaledProfile):
            curves.append((p.xi1, p.h1))
            curves.append((p.xi2, p.h2))
        else:
            xi, h = p
            curves.append((np.asarray(xi, dtype=float), np.asarray(h, dtype=float)))
    if len(curves) < 2:
        raise ValueError("need at least two profiles")

    lo = max(max(xi.min() for xi, _ in curves), -xi_max)
    hi = min(min(xi.max() for xi, _ in curves), xi_max)
    if not (hi > lo):
        raise ValueError("profiles have no common xi support")
    xi_common = np.linspace(lo, hi, n_samples)

    sampled = [np.interp(xi_common, xi, h) for xi, h in curves]
    worst = 0.0
    for ia in range(len(sampled)):
        for ib in range(ia + 1, len(sampled)):
            p, q = sampled[ia], sampled[ib]
            ref = np.linalg.norm(0.5 * (p + q))
            if ref == 0:
                continue
            worst = max(worst, float(np.linalg.norm(p - q) / ref))
    return worst
