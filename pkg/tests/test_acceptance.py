"""Acceptance gate: one test per criterion, one PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -s -q`.  The collapse
simulations dominate the wall time (tens of minutes on a multicore
laptop; a couple of hours on two cores).  Simulation products are cached
at module scope and shared between criteria.

Production pulses are desk-scaled by c = 4 (box 128pi x 32pi); scaling
is an exact symmetry, so all dimensionless results are those of the
512pi x 128pi originals.  Grids are chosen per criterion: criterion 1
pins 512x128; the exponent fits use 1536x384, the finest CI-affordable
mesh (the collapsing core obeys width*amplitude ~ 4, so a grid resolves
peak growth only up to ~4/(1.8 dx) whatever the scale factor).
"""

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.interpolate import make_interp_spline
from scipy.special import j0

from bo2d.diagnostics import conserved
from bo2d.elliptic import ellip_e
from bo2d.initial_conditions import GaussianIC, bo_soliton_1d, realize, scale_by
from bo2d.integrator import SimConfig, run
from bo2d.radial import (
    RadialProfile,
    bo_fit,
    g1_direct,
    g1_hankel,
    make_radial_grid,
    solve_ground_state,
)
from bo2d.selfsim import FitRejectedError, fit_exponent, rescale_snapshots, collapse_quality
from bo2d.spectral import SpectralField2D, apply_dispersion, make_grid

C_SCALE = 4.0
BOX_X, BOX_Y = 512 * np.pi / C_SCALE, 128 * np.pi / C_SCALE

# Table rows: (label, a, sigma_x, sigma_y, band center, band halfwidth)
TABLE_ROWS = [
    ("alpha_half_a0.1353", 0.1353, 50.0, 25.0, 0.9211, 0.05),
    ("alpha2_a0.1353", 0.1353, 25.0, 50.0, 0.9211, 0.05),
    ("alpha2_a0.2706", 0.2706, 25.0, 50.0, 0.8980, 0.05),
    ("alpha2_a0.4059", 0.4059, 25.0, 50.0, 0.9040, 0.05),
]

_cache: dict = {}


def resolved_window(grid, trace, span: float = 2.0, width_cells: float = 3.0):
    """Deepest resolution-clean fit window of a collapse trace.

    The collapsing core obeys width*amplitude ~ 4, so amplitudes above
    A_hi = 4/(width_cells*dx) are resolution-degraded; the window is the
    final octave (factor `span`) of resolved growth, [A_hi/span, A_hi].
    Fitting there instantiates the stated policy of fitting the resolved
    approach to the singularity: windowed exponents converge from above
    (marginal pulses) or below (strong pulses) as the window deepens,
    and this is the deepest window the grid supports.
    """
    a_hi = 4.0 / (width_cells * grid.dx)
    a = trace.amax
    t = trace.tau
    above = np.nonzero(a >= a_hi)[0]
    i_hi = int(above[0]) if len(above) else len(a) - 1
    i_lo = int(np.nonzero(a >= a_hi / span)[0][0])
    return (float(t[i_lo]), float(t[i_hi]))


def report(name: str, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}  {detail}")


def collapse_run(label, a, sx, sy, nx, ny, dt, t_end, snapshot_every=250):
    """Scaled production run, cached across criteria."""
    key = (label, nx, ny)
    if key in _cache:
        return _cache[key]
    grid = make_grid(nx, ny, BOX_X, BOX_Y)
    ic = scale_by(GaussianIC(a, sx, sy, x0=-512 * np.pi / 4), C_SCALE)
    field = realize(ic, grid)
    cfg = SimConfig(
        t_end=t_end,
        dt=dt,
        blowup_amp=4.0 / (1.8 * grid.dx),  # stop while the core is ~2 cells wide
        tail_frac=0.05,
        snapshot_every=snapshot_every,
    )
    trace, result = run(field, cfg)
    _cache[key] = (grid, trace, result)
    return _cache[key]


def marginal_run(label):
    a, sx, sy = {r[0]: r[1:4] for r in TABLE_ROWS}[label]
    return collapse_run(label, a, sx, sy, nx=1536, ny=384, dt=0.014, t_end=420.0)


def test_criterion_1_conservation():
    """Drift of M, Px, H stays within 1e-4 on the pinned 512x128 run."""
    grid, trace, result = collapse_run(
        "crit1_alpha2_a0.1353", 0.1353, 25.0, 50.0, nx=512, ny=128, dt=0.02, t_end=420.0
    )
    assert result.status == "blown_up", result.reason
    c0 = trace.conserved[0]
    drift = 0.0
    for cs in trace.conserved[1:]:
        drift = max(
            drift,
            abs(cs.M / c0.M - 1.0),
            abs(cs.Px / c0.Px - 1.0),
            abs(cs.H / c0.H - 1.0),
        )
    ok = drift <= 1e-4
    report("1-conservation", ok, f"max relative drift of M, Px, H = {drift:.3e} (tol 1e-4), "
                                 f"run ended {result.status} at tau={result.tau:.2f}")
    assert ok


def test_criterion_2_soliton_regression():
    """1D algebraic soliton transits a quarter box with < 1e-3 error."""
    g = make_grid(1024, 8, 256.0, 2 * np.pi)
    ic = bo_soliton_1d(g, speed=1.0, x0=-g.Lx / 4)
    T = g.Lx / 4
    dt = 0.008
    cfg = SimConfig(
        t_end=int(round(T / dt)) * dt, dt=dt, blowup_amp=100.0, snapshot_every=10**9, dealias=False
    )
    _, res = run(ic, cfg)
    expected = np.roll(ic.values, int(round(T / g.dx)), axis=0)
    err = float(np.abs(res.field.values - expected).max())
    ok = err < 1e-3
    report("2-soliton", ok, f"max pointwise error after quarter-box transit = {err:.3e} (tol 1e-3)")
    assert ok


@pytest.mark.parametrize("row", TABLE_ROWS, ids=[r[0] for r in TABLE_ROWS])
def test_criterion_3_exponents(row):
    """Fitted blow-up exponents against the reported per-pulse bands.

    Fits use the deepest resolution-clean octave of each trace.  The two
    marginal pulses (1.1x critical) enter the universal regime inside
    that window and land in-band.  The 2.2x/3.3x pulses are still
    pre-asymptotic when they exit resolution (windowed exponents ~0.5 to
    0.7, rising with depth); reproducing their asymptotic exponents
    needs production-size grids (~6k x 1.5k, hours), so failures there
    are the expected, documented outcome at CI scale.
    """
    label, a, sx, sy, center, half = row
    grid, trace, result = marginal_run(label)
    try:
        window = resolved_window(grid, trace)
        fit = fit_exponent(trace, window=window)
        lam, ci = fit.lam, fit.ci95
        in_band = abs(lam - center) <= half
        rejects_half = abs(lam - 0.5) > 0.3
        detail = (
            f"lambda = {lam:.4f} +- {ci:.4f} vs {center} +- {half}; "
            f"|lambda - 0.5| = {abs(lam - 0.5):.3f} (> 0.3 required); "
            f"fit window tau {window[0]:.1f}..{window[1]:.1f}, "
            f"amax growth {trace.amax[0]:.2f} -> {result.field.values.max():.2f}, "
            f"status {result.status}"
        )
        ok = in_band and rejects_half
    except FitRejectedError as exc:
        ok, detail = False, f"fit rejected: {exc}"
    report(f"3-exponent[{label}]", ok, detail)
    assert ok


@pytest.mark.parametrize("label", ["alpha2_a0.1353", "alpha_half_a0.1353"])
def test_criterion_4_axial_symmetrization(label):
    """sigma_ratio enters [0.9, 1.1] and rescaled sections coincide to 10%."""
    grid, trace, result = marginal_run(label)
    ratios = trace.sigma_ratio
    inside = (ratios >= 0.9) & (ratios <= 1.1)
    ratio_ok = bool(inside.any())
    entered_at = float(trace.tau[np.argmax(inside)]) if ratio_ok else np.nan

    try:
        fit = fit_exponent(trace, window=resolved_window(grid, trace))
        late = [s for s in trace.snapshots if fit.window[0] <= s.tau < fit.tau_c]
        late = late[-4:]
        profiles = rescale_snapshots(late, fit)
        worst = 0.0
        for p in profiles:
            worst = max(worst, collapse_quality([(p.xi1, p.h1), (p.xi2, p.h2)], xi_max=2.0))
        prof_ok = worst < 0.10
        mutual = collapse_quality(profiles, xi_max=2.0)  # all sections, all times
        detail = (
            f"sigma_ratio entered [0.9, 1.1] at tau={entered_at:.1f} "
            f"(start {ratios[0]:.2f}, end {ratios[-1]:.3f}); "
            f"worst xi1-vs-xi2 relative L2 over |xi|<=2 across {len(profiles)} late snapshots = {worst:.3f}; "
            f"mutual coincidence of all rescaled sections = {mutual:.3f}"
        )
    except FitRejectedError as exc:
        prof_ok, detail = False, f"sigma_ratio(end)={ratios[-1]:.3f}; fit rejected: {exc}"
    ok = ratio_ok and prof_ok
    report(f"4-symmetrization[{label}]", ok, detail)
    assert ok


def test_criterion_5_ground_state():
    """Residual, Lorentzian fit and misfit of the steady radial profile.

    The a0 = 2.8876-at-vstar=2.8876 clause encodes the source's claim
    that the fitted Lorentzian parameter equals the equation parameter.
    The equation's actual ground mode (confirmed by an independent 2D
    solve) has a0 = 2.845 * vstar, so that clause fails by construction;
    the unit-velocity shape constant does land within 1.5% of 2.8876,
    which is reported alongside.
    """
    vstar = 2.8876
    gs = solve_ground_state(vstar)
    fit = bo_fit(gs)
    res_ok = gs.residual <= 1e-10
    a0_ok = abs(fit.a0 - vstar) <= fit.ci95
    misfit_ok = fit.rms_misfit < 0.10
    shape_const = fit.a0 / vstar
    detail = (
        f"residual = {gs.residual:.2e} (tol 1e-10, {'ok' if res_ok else 'FAIL'}); "
        f"a0 = {fit.a0:.4f} +- {fit.ci95:.4f} vs vstar = {vstar} "
        f"({'ok' if a0_ok else 'FAIL: a0/vstar = %.4f; unit-velocity shape constant %.4f is within %.1f%% of 2.8876' % (shape_const, shape_const, abs(shape_const - 2.8876) / 2.8876 * 100)}); "
        f"core rms misfit = {fit.rms_misfit:.4f} (tol 0.10, {'ok' if misfit_ok else 'FAIL'})"
    )
    report("5-ground-state", res_ok and a0_ok and misfit_ok, detail)
    assert res_ok and misfit_ok
    assert a0_ok, (
        "bo_fit(solve_ground_state(2.8876)) returned a0 = "
        f"{fit.a0:.4f}, not 2.8876: the ground mode's fitted Lorentzian "
        "parameter is 2.845 * vstar (verified against an independent 2D "
        "solve); the quoted value matches the unit-velocity shape "
        "constant instead"
    )


def test_criterion_6_operator_oracles():
    """Cross-route operator checks and elliptic-integral accuracy."""
    failures = []

    # (a) direct vs Hankel route on three decaying profiles
    grid = make_radial_grid(n=1001, r_max=40.0)
    profiles = {
        "gaussian": np.exp(-grid.r**2),
        "lorentzian": 4.0 / (1.0 + grid.r**2),
        "r2_gaussian": grid.r**2 * np.exp(-grid.r**2),
    }
    worst_pair = 0.0
    for name, h in profiles.items():
        p = RadialProfile.from_samples(grid, h)
        gh = g1_hankel(p)
        sup = float(np.abs(gh.h).max())
        for rr in np.linspace(0.0, 6.0, 9):
            i = int(np.argmin(np.abs(grid.r - rr)))
            diff = abs(g1_direct(p, float(grid.r[i])) - gh.h[i]) / sup
            worst_pair = max(worst_pair, diff)
    if worst_pair > 1e-6:
        failures.append(f"direct-vs-hankel {worst_pair:.2e} > 1e-6")

    # (b) 2D operator on an embedded radial profile along a ray
    gs = solve_ground_state(0.5, grid=make_radial_grid(n=1201, r_max=64.0))
    gh = g1_hankel(gs)
    g2d = make_grid(1024, 1024, 128.0, 128.0)
    rr2 = np.hypot(g2d.x[:, None], g2d.y[None, :])
    prof = make_interp_spline(gs.grid.r, gs.h, k=5)
    beta = gs.h[-1] * gs.grid.r_max**3
    vals = np.where(
        rr2 <= gs.grid.r_max,
        prof(np.minimum(rr2, gs.grid.r_max)),
        beta / np.maximum(rr2, gs.grid.r_max) ** 3,
    )
    out2d = apply_dispersion(SpectralField2D.from_real(g2d, vals)).values
    i0 = int(np.argmin(np.abs(g2d.x)))
    ref = make_interp_spline(gh.grid.r, gh.h, k=5)
    sel = g2d.y[i0:] <= 32.0
    ray_err = float(
        np.abs(out2d[i0, i0:][sel] - ref(g2d.y[i0:][sel])).max() / np.abs(gh.h).max()
    )
    if ray_err > 1e-4:
        failures.append(f"2D-embedding {ray_err:.2e} > 1e-4")

    # (c) elliptic endpoints exactly, 1000 random moduli vs quadrature
    e0, e1 = ellip_e(0.0), ellip_e(1.0)
    if e0 != np.pi / 2 or e1 != 1.0:
        failures.append(f"elliptic endpoints E(0)={e0!r}, E(1)={e1!r}")
    rng = np.random.default_rng(2024)
    worst_e = 0.0
    for m in rng.uniform(0.0, 1.0, 1000):
        ref_e = quad(
            lambda t: np.sqrt(1 - m**2 * np.sin(t) ** 2), 0, np.pi / 2, epsabs=1e-14, epsrel=1e-13
        )[0]
        worst_e = max(worst_e, abs(ellip_e(m) - ref_e))
    if worst_e > 1e-12:
        failures.append(f"elliptic vs quadrature {worst_e:.2e} > 1e-12")

    ok = not failures
    report(
        "6-operator-oracles",
        ok,
        f"direct-vs-hankel worst {worst_pair:.2e} (tol 1e-6); 2D ray {ray_err:.2e} (tol 1e-4); "
        f"E endpoints exact; E vs quadrature worst {worst_e:.2e} (tol 1e-12)"
        + ("" if ok else f"; failures: {failures}"),
    )
    assert ok


def test_criterion_7_scaling_symmetry():
    """A run and its c = 2 scaled twin: lambda within joint confidence,
    sigma_ratio trajectories matching, conserved integrals transforming
    with their analytic exponents to 1e-6."""
    base_ic = GaussianIC(0.4059, 25.0, 50.0, x0=-512 * np.pi / 4)
    ic4 = scale_by(base_ic, 4.0)
    ic8 = scale_by(base_ic, 8.0)

    # conserved-exponent check on the realized fields (c = 2 between them)
    g4 = make_grid(768, 192, 512 * np.pi / 4, 128 * np.pi / 4)
    g8 = make_grid(768, 192, 512 * np.pi / 8, 128 * np.pi / 8)
    cs4, cs8 = conserved(realize(ic4, g4)), conserved(realize(ic8, g8))
    c = 2.0
    exps = {"M": -1.0, "Px": 0.0, "I1": 1.0, "I2": 1.0}
    worst_exp = 0.0
    for name, p in exps.items():
        v4, v8 = getattr(cs4, name), getattr(cs8, name)
        worst_exp = max(worst_exp, abs(v8 / (v4 * c**p) - 1.0))
    worst_exp = max(worst_exp, abs(cs8.H / (cs4.H * c) - 1.0))
    exp_ok = worst_exp <= 1e-6

    # twin runs related by c = 2: same relative resolution, boxes and
    # times scaled exactly (this is the symmetry under test)
    grid_a, trace_a, res_a = collapse_run("crit7_c4", 0.4059, 25.0, 50.0, nx=1280, ny=320, dt=0.012, t_end=40.0, snapshot_every=200)
    key = ("crit7_c8", 1280, 320)
    if key not in _cache:
        grid_b = make_grid(1280, 320, 512 * np.pi / 8, 128 * np.pi / 8)
        cfg_b = SimConfig(
            t_end=10.0, dt=0.003, blowup_amp=4.0 / (1.8 * grid_b.dx), tail_frac=0.05, snapshot_every=200
        )
        _cache[key] = (grid_b,) + tuple(run(realize(ic8, grid_b), cfg_b))
    grid_b, trace_b, res_b = _cache[key]

    fit_a = fit_exponent(trace_a, window=resolved_window(grid_a, trace_a))
    fit_b = fit_exponent(trace_b, window=resolved_window(grid_b, trace_b))
    lam_ok = abs(fit_a.lam - fit_b.lam) <= (fit_a.ci95 + fit_b.ci95 + 0.02)

    # sigma_ratio trajectories at matched scaled times (tau_b = tau_a/4)
    tb = trace_b.tau * 4.0
    sb = np.interp(trace_a.tau, tb, trace_b.sigma_ratio)
    sel = trace_a.tau <= min(trace_a.tau[-1], tb[-1]) * 0.95
    ratio_err = float(np.abs(trace_a.sigma_ratio[sel] - sb[sel]).max())
    ratio_ok = ratio_err < 0.05

    ok = exp_ok and lam_ok and ratio_ok
    report(
        "7-scaling",
        ok,
        f"conserved exponents worst rel dev {worst_exp:.2e} (tol 1e-6); "
        f"lambda {fit_a.lam:.4f}+-{fit_a.ci95:.4f} vs twin {fit_b.lam:.4f}+-{fit_b.ci95:.4f}; "
        f"sigma_ratio trajectory max dev {ratio_err:.3f} (tol 0.05)",
    )
    assert ok
