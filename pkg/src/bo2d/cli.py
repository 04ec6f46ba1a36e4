"""Command-line front end: simulate, fit, groundstate, check.

Exit codes: 0 success, 2 config/input parse error, 3 runtime abort
(under-resolved run, rejected fit, non-convergence), 4 I/O failure.
A simulate run that ends in blow-up is a successful collapse experiment,
not an abort.  BO2D_THREADS caps internal FFT parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_RUNTIME = 3
EXIT_IO = 4

COMPLETE_BALANCE_NOTE = "reference exponent from the complete-balance similarity family: 0.5"


def _fmt(x) -> str:
    return format(float(x), ".17g")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bo2d",
        description="Wave-collapse laboratory for the 2D Benjamin-Ono equation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a collapse simulation from a config file")
    p_sim.add_argument("--config", required=True, help="run configuration file")
    p_sim.add_argument("--out", help="output directory (overrides [output] dir)")

    p_fit = sub.add_parser("fit", help="fit the blow-up exponent from a trace CSV")
    p_fit.add_argument("--trace", required=True, help="trace CSV from simulate")
    p_fit.add_argument("--window", help="explicit fit window lo:hi in tau")
    p_fit.add_argument("--snapshots", help="snapshot directory for rescaled profiles")
    p_fit.add_argument("--out", help="output directory (default: alongside the trace)")

    p_gs = sub.add_parser("groundstate", help="solve the radial steady profile equation")
    p_gs.add_argument("--vstar", type=float, required=True)
    p_gs.add_argument("--rmax", type=float, help="radial domain (default 40/vstar)")
    p_gs.add_argument("--nodes", type=int, default=801)
    p_gs.add_argument("--out", default="out_groundstate")

    p_chk = sub.add_parser("check", help="run operator cross-check suites")
    p_chk.add_argument(
        "--suite",
        choices=["all", "spectral", "elliptic", "radial", "soliton", "conservation"],
        default="all",
    )

    args = parser.parse_args(argv)

    cap = os.environ.get("BO2D_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)

    handler = {
        "simulate": cmd_simulate,
        "fit": cmd_fit,
        "groundstate": cmd_groundstate,
        "check": cmd_check,
    }[args.command]
    return handler(args)


class _RunSinks:
    """File-writing hooks for the integrator: trace CSV + snapshots."""

    def __init__(self, out_dir: Path, snapshot_format: str):
        from bo2d.config_io import TRACE_COLUMNS

        self.out_dir = out_dir
        self.snapshot_format = snapshot_format
        self.trace_path = out_dir / "trace.csv"
        self._fh = open(self.trace_path, "w")
        self._fh.write(",".join(TRACE_COLUMNS) + "\n")
        self.n_snapshots = 0

    def on_step(self, peak, cons):
        from bo2d.config_io import format_trace_row

        self._fh.write(format_trace_row(peak, cons) + "\n")

    def on_snapshot(self, tau, field, cons):
        from bo2d.config_io import write_snapshot

        if self.snapshot_format == "none":
            return
        path = self.out_dir / f"snap_{self.n_snapshots:06d}.bo2d"
        write_snapshot(path, field, tau, cons)
        self.n_snapshots += 1

    def close(self):
        self._fh.close()


def cmd_simulate(args) -> int:
    try:
        from bo2d.config_io import parse_config

        cfg = parse_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    import numpy as np

    from bo2d.initial_conditions import GaussianIC, realize
    from bo2d.integrator import SimConfig, SinkWriteError, run
    from bo2d.spectral import SpectralField2D, make_grid

    grid = make_grid(cfg.nx, cfg.ny, cfg.lx, cfg.ly)
    x0 = cfg.x0 if cfg.x0 is not None else -cfg.lx / 4
    ic_field = realize(GaussianIC(cfg.a, cfg.sigma_x, cfg.sigma_y, x0=x0, y0=cfg.y0), grid)
    if cfg.noise_amp > 0:
        rng = np.random.default_rng(cfg.seed)
        noisy = ic_field.values * (1.0 + cfg.noise_amp * rng.standard_normal(grid.shape))
        ic_field = SpectralField2D.from_real(grid, noisy)

    sim = SimConfig(
        t_end=cfg.t_end,
        dt=cfg.dt,
        blowup_amp=cfg.blowup_amp,
        tail_frac=cfg.tail_frac,
        snapshot_every=cfg.snapshot_every,
        dealias=cfg.dealias,
        nonlinear=cfg.nonlinear,
    )

    out_dir = Path(args.out if args.out else cfg.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        sinks = _RunSinks(out_dir, cfg.snapshot_format)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        trace, result = run(ic_field, sim, sinks=sinks)
    except SinkWriteError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    finally:
        sinks.close()

    status = {
        "status": result.status,
        "reason": result.reason,
        "tau_end": result.tau,
        "steps": len(trace) - 1,
        "snapshots": sinks.n_snapshots,
    }
    (out_dir / "status.json").write_text(json.dumps(status, indent=1))
    print(f"status: {result.status} ({result.reason}); trace rows: {len(trace)}")
    return EXIT_RUNTIME if result.status == "under_resolved" else EXIT_OK


def cmd_fit(args) -> int:
    try:
        from bo2d.config_io import read_trace

        cols = read_trace(args.trace)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    window = None
    if args.window:
        try:
            lo, hi = (float(v) for v in args.window.split(":"))
            window = (lo, hi)
        except ValueError:
            print(f"error: bad --window {args.window!r}, expected lo:hi", file=sys.stderr)
            return EXIT_PARSE

    from bo2d.selfsim import COMPLETE_BALANCE_LAMBDA, FitRejectedError, fit_exponent

    try:
        fit = fit_exponent((cols["tau"], cols["amax"]), window=window)
    except FitRejectedError as exc:
        print(f"fit rejected: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    out_dir = Path(args.out) if args.out else Path(args.trace).parent
    out_dir.mkdir(parents=True, exist_ok=True)

    print(f"lambda      = {fit.lam:.6f} +- {fit.ci95:.6f} (95%)")
    print(f"tau_c       = {fit.tau_c:.6f}")
    print(f"prefactor   = {fit.prefactor:.6f}")
    print(f"window      = {fit.window[0]:.6f} .. {fit.window[1]:.6f}  ({fit.n_points} points)")
    print(f"rms (log)   = {fit.rms_residual:.3e}")
    print(f"note: {COMPLETE_BALANCE_NOTE}")

    with open(out_dir / "fit.csv", "w") as fh:
        fh.write("lambda,ci95,tau_c,prefactor,rms_residual,window_lo,window_hi,n_points,lambda_ref\n")
        fh.write(
            ",".join(
                _fmt(v)
                for v in (
                    fit.lam,
                    fit.ci95,
                    fit.tau_c,
                    fit.prefactor,
                    fit.rms_residual,
                    fit.window[0],
                    fit.window[1],
                    fit.n_points,
                    COMPLETE_BALANCE_LAMBDA,
                )
            )
            + "\n"
        )

    sel = (cols["tau"] >= fit.window[0]) & (cols["tau"] <= fit.window[1])
    tcheck = fit.tau_c - cols["tau"][sel]
    fitted = fit.prefactor * tcheck ** (-fit.lam)
    with open(out_dir / "loglog.csv", "w") as fh:
        fh.write("tau_check,amax,fitted\n")
        for row in zip(tcheck, cols["amax"][sel], fitted):
            fh.write(",".join(_fmt(v) for v in row) + "\n")

    if args.snapshots:
        n = _emit_rescaled_profiles(Path(args.snapshots), fit, out_dir)
        print(f"rescaled profiles written: {n}")
    return EXIT_OK


def _emit_rescaled_profiles(snap_dir: Path, fit, out_dir: Path) -> int:
    import warnings

    from bo2d.config_io import read_snapshot
    from bo2d.selfsim import rescale_snapshots

    snaps = []
    for path in sorted(snap_dir.glob("snap_*.bo2d")):
        tau, field = read_snapshot(path)
        if fit.window[0] <= tau < fit.tau_c:
            snaps.append((tau, field))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        profiles = rescale_snapshots(snaps, fit)
    for p in profiles:
        tag = f"{p.tau:.6f}".replace(".", "p")
        for suffix, xi, h in (("x", p.xi1, p.h1), ("y", p.xi2, p.h2)):
            with open(out_dir / f"rescaled_{tag}_{suffix}.csv", "w") as fh:
                fh.write("xi,h\n")
                for row in zip(xi, h):
                    fh.write(",".join(_fmt(v) for v in row) + "\n")
    return len(profiles)


def cmd_groundstate(args) -> int:
    if not (args.vstar > 0):
        print("error: --vstar must be positive", file=sys.stderr)
        return EXIT_PARSE

    from bo2d.radial import ConvergenceError, bo_fit, make_radial_grid, solve_ground_state

    r_max = args.rmax if args.rmax else 40.0 / args.vstar
    try:
        grid = make_radial_grid(n=args.nodes, r_max=r_max)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    try:
        profile = solve_ground_state(args.vstar, grid)
    except ConvergenceError as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        for i, res in enumerate(exc.history[-10:], start=max(0, len(exc.history) - 10)):
            print(f"  iter {i}: residual {res:.3e}", file=sys.stderr)
        return EXIT_RUNTIME

    fit = bo_fit(profile)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    model = 4 * fit.a0 / (1 + fit.a0**2 * grid.r**2)
    with open(out_dir / "profile.csv", "w") as fh:
        fh.write("r,h\n")
        for r, h in zip(grid.r, profile.h):
            fh.write(f"{_fmt(r)},{_fmt(h)}\n")
    with open(out_dir / "profile_vs_fit.csv", "w") as fh:
        fh.write("r,h,lorentzian_fit\n")
        for r, h, m in zip(grid.r, profile.h, model):
            fh.write(f"{_fmt(r)},{_fmt(h)},{_fmt(m)}\n")
    with open(out_dir / "bofit.csv", "w") as fh:
        fh.write("vstar,a0,ci95,rms_misfit,residual,iterations,decay_exponent\n")
        fh.write(
            ",".join(
                _fmt(v)
                for v in (
                    args.vstar,
                    fit.a0,
                    fit.ci95,
                    fit.rms_misfit,
                    profile.residual,
                    profile.iterations,
                    profile.decay_exponent,
                )
            )
            + "\n"
        )

    print(f"converged: residual {profile.residual:.3e} in {profile.iterations} iterations")
    print(f"h(0)       = {profile.h[0]:.6f}")
    print(f"a0 (fit)   = {fit.a0:.6f} +- {fit.ci95:.6f}")
    print(f"rms misfit = {fit.rms_misfit:.4f} over r <= 3/a0")
    return EXIT_OK


def _check_lines(suite: str):
    import numpy as np
    from scipy.integrate import quad
    from scipy.special import j0

    if suite in ("all", "spectral"):
        from bo2d.integrator import rhs
        from bo2d.spectral import SpectralField2D, make_grid

        g = make_grid(64, 64, 2 * np.pi, 2 * np.pi)
        f = SpectralField2D.from_real(g, np.cos(g.x)[:, None] * np.ones(g.ny))
        lin = rhs(f, nonlinear=False).values
        err = float(np.abs(lin - (-np.sin(g.x))[:, None]).max())
        yield ("spectral.single_mode_dispersion", err, 1e-12)

        rng = np.random.default_rng(7)
        w = SpectralField2D.from_real(g, rng.standard_normal(g.shape))
        rt = SpectralField2D.from_spectral(g, w.spectral).values
        yield ("spectral.round_trip", float(np.abs(rt - w.values).max()), 1e-12)

    if suite in ("all", "elliptic"):
        from bo2d.elliptic import ellip_e

        yield ("elliptic.E_at_0", abs(ellip_e(0.0) - np.pi / 2), 0.0)
        yield ("elliptic.E_at_1", abs(ellip_e(1.0) - 1.0), 0.0)
        rng = np.random.default_rng(11)
        ms = rng.uniform(0, 1, 100)
        worst = 0.0
        for m in ms:
            ref = quad(lambda t: np.sqrt(1 - m**2 * np.sin(t) ** 2), 0, np.pi / 2)[0]
            worst = max(worst, abs(ellip_e(m) - ref))
        yield ("elliptic.random_moduli_vs_quadrature", worst, 1e-12)

    if suite in ("all", "radial"):
        from bo2d.radial import RadialProfile, g1_direct, g1_hankel, make_radial_grid

        grid = make_radial_grid(n=601, r_max=30.0)
        p = RadialProfile.from_samples(grid, np.exp(-grid.r**2))
        gh = g1_hankel(p)
        worst = 0.0
        for rr in (0.0, 0.7, 1.8):
            i = int(np.argmin(np.abs(grid.r - rr)))
            oracle = quad(lambda k: 0.5 * k**2 * np.exp(-(k**2) / 4) * j0(k * grid.r[i]), 0, 60)[0]
            worst = max(worst, abs(gh.h[i] - oracle), abs(g1_direct(p, float(grid.r[i])) - oracle))
        yield ("radial.gaussian_vs_hankel_oracle", worst, 1e-7)

        grid2 = make_radial_grid(n=801, r_max=60.0)
        p2 = RadialProfile.from_samples(grid2, 4 / (1 + grid2.r**2))
        gh2 = g1_hankel(p2)
        sup = float(np.abs(gh2.h).max())
        worst = 0.0
        for rr in (0.0, 0.9, 2.7):
            i = int(np.argmin(np.abs(grid2.r - rr)))
            worst = max(worst, abs(g1_direct(p2, float(grid2.r[i])) - gh2.h[i]) / sup)
        yield ("radial.direct_vs_hankel_lorentzian", worst, 1e-6)

    if suite in ("all", "soliton"):
        from bo2d.initial_conditions import bo_soliton_1d
        from bo2d.integrator import SimConfig, run
        from bo2d.spectral import make_grid

        g = make_grid(1024, 8, 256.0, 2 * np.pi)
        ic = bo_soliton_1d(g, speed=1.0, x0=-g.Lx / 4)
        T = g.Lx / 8  # shortened transit; the acceptance suite runs the full quarter box
        dt = 0.008
        steps = int(round(T / dt))
        cfg = SimConfig(t_end=steps * dt, dt=dt, snapshot_every=10**9, blowup_amp=1e9, dealias=False)
        _, res = run(ic, cfg)
        shift = int(round(T / g.dx))
        expected = np.roll(ic.values, shift, axis=0)
        yield ("soliton.transit_error", float(np.abs(res.field.values - expected).max()), 1e-3)

    if suite in ("all", "conservation"):
        from bo2d.initial_conditions import GaussianIC, realize
        from bo2d.integrator import SimConfig, run
        from bo2d.spectral import make_grid

        g = make_grid(256, 64, 64 * np.pi, 16 * np.pi)
        ic = realize(GaussianIC(1.0824, 3.125, 6.25, x0=-g.Lx / 4), g)
        cfg = SimConfig(t_end=3.0, dt=0.02, snapshot_every=10**9)
        trace, _ = run(ic, cfg)
        c0, c1 = trace.conserved[0], trace.conserved[-1]
        drift = max(
            abs(c1.M / c0.M - 1),
            abs(c1.Px / c0.Px - 1),
            abs(c1.H / c0.H - 1),
        )
        yield ("conservation.short_run_drift", drift, 1e-4)


def cmd_check(args) -> int:
    failures = 0
    for name, measured, tol in _check_lines(args.suite):
        ok = measured <= tol
        failures += 0 if ok else 1
        print(f"CHECK {name}: {'PASS' if ok else 'FAIL'} measured={measured:.3e} tol={tol:.0e}")
    if failures:
        print(f"{failures} check(s) failed", file=sys.stderr)
        return EXIT_RUNTIME
    print("all checks passed")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
