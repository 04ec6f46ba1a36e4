import numpy as np
import pytest
from scipy.integrate import quad

from bo2d.spectral import (
    SpectralField2D,
    apply_dispersion,
    ddx,
    dealias_23,
    grid_inner,
    make_grid,
)


class TestMakeGrid:
    def test_fft_ordering_8x8(self):
        g = make_grid(8, 8, 2 * np.pi, 2 * np.pi)
        assert np.array_equal(g.kx, np.array([0, 1, 2, 3, -4, -3, -2, -1], dtype=float))
        assert np.array_equal(g.ky, g.kx)

    def test_paper_production_grid(self):
        g = make_grid(1024, 256, 512 * np.pi, 128 * np.pi)
        assert g.dx == pytest.approx(np.pi / 2)
        assert g.dx * g.nx == g.Lx
        assert g.kx[0] == 0.0 and g.ky[0] == 0.0

    def test_desk_scale_grid(self):
        g = make_grid(256, 64, 128 * np.pi, 32 * np.pi)
        assert g.dx == pytest.approx(np.pi / 2)

    def test_wavenumbers_signed_pairs(self):
        g = make_grid(16, 16, 3.0, 5.0)
        # every nonzero non-Nyquist kx has its negative present
        for v in g.kx[1:8]:
            assert -v in g.kx

    @pytest.mark.parametrize(
        "nx,ny,lx,ly",
        [(7, 8, 1, 1), (8, 10.5, 1, 1), (4, 8, 1, 1), (8, 8, 0, 1), (8, 8, 1, -2)],
    )
    def test_rejects_bad_sizes(self, nx, ny, lx, ly):
        with pytest.raises(ValueError):
            make_grid(nx, ny, lx, ly)


class TestSpectralField:
    def test_round_trip(self):
        g = make_grid(64, 32, 7.0, 3.0)
        rng = np.random.default_rng(0)
        vals = rng.standard_normal(g.shape)
        f = SpectralField2D.from_real(g, vals)
        back = SpectralField2D.from_spectral(g, f.spectral).values
        assert np.abs(back - vals).max() < 1e-12 * np.abs(vals).max()

    def test_dirty_flags(self):
        g = make_grid(16, 16, 1.0, 1.0)
        f = SpectralField2D.from_real(g, np.ones(g.shape))
        assert f.real_clean and not f.spectral_clean
        _ = f.spectral
        assert f.spectral_clean

    def test_hermitian_symmetry(self):
        g = make_grid(16, 16, 1.0, 1.0)
        rng = np.random.default_rng(1)
        f = SpectralField2D.from_real(g, rng.standard_normal(g.shape))
        s = f.spectral
        flipped = np.conj(s[(-np.arange(16)) % 16][:, (-np.arange(16)) % 16])
        assert np.abs(s - flipped).max() < 1e-9 * np.abs(s).max()

    def test_requires_representation(self):
        g = make_grid(8, 8, 1.0, 1.0)
        with pytest.raises(ValueError):
            SpectralField2D(g)


class TestDispersion:
    def test_constant_maps_to_zero(self):
        g = make_grid(32, 32, 2 * np.pi, 2 * np.pi)
        f = SpectralField2D.from_real(g, np.full(g.shape, 3.7))
        assert np.abs(apply_dispersion(f).values).max() < 1e-14

    def test_single_mode_multiplier(self):
        g = make_grid(64, 8, 2 * np.pi, 2 * np.pi)
        f = SpectralField2D.from_real(g, np.cos(3 * g.x)[:, None] * np.ones(g.ny))
        out = apply_dispersion(f).values
        assert np.abs(out - 3 * np.cos(3 * g.x)[:, None]).max() < 1e-12

    def test_gaussian_against_hankel_quadrature(self):
        # The grid operator is the periodization of the free-space one,
        # so its center value is sum over the image lattice of the
        # radial free-space profile G[exp(-r^2)](r) - evaluated by an
        # independent 1D Hankel quadrature.  Images beyond |n| = 6 use
        # the exact -(M/2pi) r^-3 far field of the output.
        from scipy.special import hyp1f1, zeta

        L = 40.0
        g = make_grid(512, 512, L, L)
        r2 = g.x[:, None] ** 2 + g.y[None, :] ** 2
        f = SpectralField2D.from_real(g, np.exp(-r2))
        out = apply_dispersion(f).values
        i0 = np.argmin(np.abs(g.x))

        oracle = quad(lambda k: k**2 * 0.5 * np.exp(-(k**2) / 4.0), 0, 60)[0]
        # inner image ring via the exact free-space output profile
        # sqrt(pi) 1F1(3/2; 1; -r^2); the rest of the lattice via the
        # cubic far field with the exact Epstein sum 4 zeta(3/2) beta(3/2)
        near = 0.0
        for n1 in range(-6, 7):
            for n2 in range(-6, 7):
                if n1 or n2:
                    d2n = n1 * n1 + n2 * n2
                    oracle += np.sqrt(np.pi) * hyp1f1(1.5, 1.0, -(L**2) * d2n)
                    near += d2n**-1.5
        beta32 = (zeta(1.5, 0.25) - zeta(1.5, 0.75)) / 8.0
        oracle += -0.5 * (4 * zeta(1.5) * beta32 - near) / L**3
        assert abs(out[i0, i0] - oracle) < 1e-8

    def test_linearity(self):
        g = make_grid(32, 16, 3.0, 2.0)
        rng = np.random.default_rng(2)
        a = SpectralField2D.from_real(g, rng.standard_normal(g.shape))
        b = SpectralField2D.from_real(g, rng.standard_normal(g.shape))
        combo = SpectralField2D.from_real(g, 1.3 * a.values - 0.7 * b.values)
        lhs = apply_dispersion(combo).values
        rhs = 1.3 * apply_dispersion(a).values - 0.7 * apply_dispersion(b).values
        assert np.abs(lhs - rhs).max() < 1e-12 * np.abs(lhs).max()

    def test_self_adjoint(self):
        g = make_grid(32, 32, 5.0, 5.0)
        rng = np.random.default_rng(3)
        a = SpectralField2D.from_real(g, rng.standard_normal(g.shape))
        b = SpectralField2D.from_real(g, rng.standard_normal(g.shape))
        lhs = grid_inner(a, apply_dispersion(b))
        rhs = grid_inner(apply_dispersion(a), b)
        assert abs(lhs - rhs) < 1e-10 * max(abs(lhs), 1.0)

    def test_rejects_nan(self):
        g = make_grid(8, 8, 1.0, 1.0)
        vals = np.zeros(g.shape)
        vals[3, 3] = np.nan
        with pytest.raises(ValueError):
            apply_dispersion(SpectralField2D.from_real(g, vals))


class TestDdx:
    def test_sin_2x(self):
        g = make_grid(64, 8, 2 * np.pi, 1.0)
        f = SpectralField2D.from_real(g, np.sin(2 * g.x)[:, None] * np.ones(g.ny))
        out = ddx(f).values
        assert np.abs(out - 2 * np.cos(2 * g.x)[:, None]).max() < 1e-12

    def test_constant(self):
        g = make_grid(16, 8, 1.0, 1.0)
        f = SpectralField2D.from_real(g, np.full(g.shape, 2.0))
        assert np.abs(ddx(f).values).max() < 1e-13

    def test_gaussian_vs_finite_differences(self):
        g = make_grid(1024, 8, 100 * np.pi, 1.0)
        prof = 0.1353 * np.exp(-(g.x**2) / (2 * 25.0**2))
        f = SpectralField2D.from_real(g, prof[:, None] * np.ones(g.ny))
        out = ddx(f).values[:, 0]
        fd = (np.roll(prof, -1) - np.roll(prof, 1)) / (2 * g.dx)
        assert np.abs(out - fd).max() / np.abs(out).max() < 1e-4

    def test_ddx_twice_is_minus_kx_squared(self):
        g = make_grid(32, 8, 2 * np.pi, 1.0)
        f = SpectralField2D.from_real(g, np.cos(5 * g.x)[:, None] * np.ones(g.ny))
        twice = ddx(ddx(f)).values
        assert np.abs(twice - (-25.0) * f.values).max() < 1e-11


class TestDealias:
    def test_nyquist_mode_removed(self):
        g = make_grid(16, 16, 2 * np.pi, 2 * np.pi)
        spec = np.zeros(g.shape, dtype=complex)
        spec[8, 0] = 1.0  # kx Nyquist
        out = dealias_23(SpectralField2D.from_spectral(g, spec))
        assert np.abs(out.spectral).max() == 0.0

    def test_low_mode_untouched(self):
        for n in (8, 16, 64):
            g = make_grid(n, n, 2 * np.pi, 2 * np.pi)
            spec = np.zeros(g.shape, dtype=complex)
            spec[1, 0] = 1.0
            out = dealias_23(SpectralField2D.from_spectral(g, spec))
            assert np.array_equal(out.spectral, spec)

    def test_retained_count_matches_enumeration(self):
        g = make_grid(32, 24, 4.0, 3.0)
        rng = np.random.default_rng(5)
        f = SpectralField2D.from_real(g, rng.standard_normal(g.shape))
        out = dealias_23(f)
        retained = np.count_nonzero(np.abs(out.spectral) > 0)
        # independent index-set enumeration of the 2/3 rule
        kx_keep = np.abs(g.kx) <= (2 / 3) * np.abs(g.kx).max()
        ky_keep = np.abs(g.ky) <= (2 / 3) * np.abs(g.ky).max()
        expected = int(kx_keep.sum()) * int(ky_keep.sum())
        assert retained == expected

    def test_idempotent(self):
        g = make_grid(32, 16, 1.0, 1.0)
        rng = np.random.default_rng(6)
        f = SpectralField2D.from_real(g, rng.standard_normal(g.shape))
        once = dealias_23(f)
        twice = dealias_23(once)
        assert np.array_equal(once.spectral, twice.spectral)
