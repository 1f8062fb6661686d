import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from qcreg.domains import Disk, DomainMask
from qcreg.grid import Field, d, d_bar, lp_norm, make_grid, sample
from qcreg.transforms import (
    BEURLING,
    CAUCHY,
    CZKernelSpec,
    bessel_potential,
    beurling,
    beurling_eta,
    beurling_iter,
    beurling_kernel,
    cauchy,
    cos2_kernel,
    cz_constant,
    fractional_laplacian,
    iterated_beurling_kernel,
    kernel_quadrature,
    lattice_moment,
    riesz_potential,
)

from conftest import random_field


def plane(g, axis):
    return sample(g, lambda x, y: np.exp(2j * np.pi * (x if axis == 0 else y)))


def rel(a, b):
    return lp_norm(a - b, 2) / lp_norm(b, 2)


class TestBeurling:
    def test_plane_waves(self):
        g = make_grid(16, 1.0)
        f1, f2 = plane(g, 0), plane(g, 1)
        np.testing.assert_allclose(beurling(f1).samples, f1.samples, atol=1e-12)
        np.testing.assert_allclose(beurling(f2).samples, -f2.samples, atol=1e-12)

    def test_mean_removed(self, rng):
        g = make_grid(32, 2.0)
        assert abs(beurling(random_field(g, rng) + 5.0).mean()) < 1e-13

    def test_isometry_full_spectrum(self, rng):
        g = make_grid(64, 4.0)
        f = random_field(g, rng)
        lhs = lp_norm(beurling(f), 2)
        assert abs(lhs - lp_norm(f - f.mean(), 2)) <= 1e-12 * lhs

    def test_symbol_bounds(self):
        g = make_grid(32, 3.0)
        assert np.abs(BEURLING.evaluate(g)).max() <= 1 + 1e-15
        c = np.abs(CAUCHY.evaluate(g))
        live = g.xi_abs > 0
        assert np.all(c[live] <= 1 / (np.pi * g.xi_abs[live]) * (1 + 1e-14))

    def test_translation(self, rng):
        g = make_grid(32, 2.0)
        f = random_field(g, rng)
        shift = Field(g, np.roll(f.samples, (3, -5), axis=(0, 1)))
        a = beurling(shift).samples
        b = np.roll(beurling(f).samples, (3, -5), axis=(0, 1))
        assert np.abs(a - b).max() <= 1e-10 * np.abs(b).max()

    def test_disk_oracle(self):
        # cell-averaged indicator; exact B chi_D is 0 inside and -1/z^2 outside
        g = make_grid(512, 8.0)
        chi = DomainMask(g, Disk(0j, 1.0)).weights
        out = beurling(Field(g, chi)).samples
        r = np.abs(g.z)
        z_safe = np.where(r == 0, 1.0, g.z)
        exact = np.where(r < 1, 0.0, -1.0 / z_safe**2)
        keep = (np.abs(r - 1) > 4 * g.L / g.N) & (r < g.L / 4)
        assert np.abs(out - exact)[keep].max() <= 0.05

    def test_disk_oracle_against_quadrature(self):
        g = make_grid(256, 8.0)
        chi = Field(g, DomainMask(g, Disk(0j, 1.0)).weights)
        probes = np.array([1.5, 1.6j, -1.7 - 0.2j, 0.3 + 0.2j, -0.4j, 1.2 + 1.1j, -1.5 + 1.0j, 0.1, 1.9, -0.6 + 0.3j])
        spectral = np.array([beurling(chi).samples[g.index_of(p)] for p in probes])
        direct = kernel_quadrature(beurling_kernel(), chi, probes)
        assert np.abs(spectral - direct).max() <= 0.05


class TestCauchy:
    def test_plane_wave(self):
        g = make_grid(16, 1.0)
        f = plane(g, 0)
        np.testing.assert_allclose(cauchy(f).samples, f.samples / (np.pi * 1j), atol=1e-12)

    def test_factorization_bandlimited(self, rng):
        g = make_grid(64, 4.0)
        f = random_field(g, rng, bandlimit=31)
        assert rel(d(cauchy(f)), beurling(f)) <= 1e-10
        assert rel(d_bar(cauchy(f)), f - f.mean()) <= 1e-10

    def test_disk_oracle(self):
        # torus Cauchy transform of chi_D: zbar inside, 1/z outside, plus the
        # term -(pi/L^2) zbar from removing the mean, up to a constant
        g = make_grid(512, 8.0)
        chi = Field(g, DomainMask(g, Disk(0j, 1.0)).weights)
        out = cauchy(chi).samples
        z, r = g.z, np.abs(g.z)
        z_safe = np.where(r == 0, 1.0, z)
        exact = np.where(r < 1, np.conj(z), 1.0 / z_safe) - np.pi / g.L**2 * np.conj(z)
        keep = (np.abs(r - 1) > 4 * g.h) & (r < g.L / 4)
        diff = (out - exact)[keep]
        assert np.abs(diff - diff.mean()).max() <= 0.05


class TestIterated:
    def test_m1_is_beurling(self, rng):
        f = random_field(make_grid(32, 2.0), rng)
        np.testing.assert_array_equal(beurling_iter(f, 1).samples, beurling(f).samples)

    def test_m2_plane_wave(self):
        g = make_grid(16, 1.0)
        f = plane(g, 1)
        np.testing.assert_allclose(beurling_iter(f, 2).samples, f.samples, atol=1e-12)

    @pytest.mark.parametrize("m", [2, 3, 4, 5])
    def test_composition(self, rng, m):
        f = random_field(make_grid(64, 4.0), rng)
        comp = f
        for _ in range(m):
            comp = beurling(comp)
        assert rel(beurling_iter(f, m), comp) <= 1e-10

    @pytest.mark.parametrize("m", [0, -1, 1.5])
    def test_rejects(self, rng, m):
        with pytest.raises(ValueError):
            beurling_iter(Field(make_grid(8, 1.0), 1.0), m)


class TestBeurlingEta:
    def test_constant(self):
        g = make_grid(128, 4.0)
        assert beurling_eta(Field(g, 1.0), 0.2).sup() < 1e-12

    def test_rejects_small_eta(self):
        g = make_grid(64, 4.0)
        with pytest.raises(ValueError):
            beurling_eta(Field(g, 1.0), 3 * g.h)

    def test_disk_far_from_boundary(self):
        g = make_grid(512, 8.0)
        chi = Field(g, DomainMask(g, Disk(0j, 1.0)).weights)
        a = beurling_eta(chi, 0.1).samples
        b = beurling(chi).samples
        r = np.abs(g.z)
        keep = (np.abs(r - 1) > 0.3) & (r < 2)
        assert np.abs(a - b)[keep].max() <= 0.05

    def test_monotone_in_eta(self):
        g = make_grid(512, 8.0)
        f = sample(g, lambda x, y: np.exp(-(x * x + y * y)))
        errs = [(beurling_eta(f, eta) - beurling(f)).sup() for eta in (0.4, 0.2, 0.1)]
        assert errs[0] > errs[1] > errs[2]


class TestPotentials:
    def test_bessel_zero(self):
        assert bessel_potential(Field(make_grid(16, 1.0), 0.0), 1.0).sup() == 0

    def test_bessel_plane_wave(self):
        g = make_grid(16, 1.0)
        f = plane(g, 0)
        np.testing.assert_allclose(bessel_potential(f, 2).samples, f.samples / (1 + 4 * np.pi**2), atol=1e-14)

    def test_bessel_of_dbar_symbol(self):
        g = make_grid(16, 1.0)
        f = plane(g, 1)
        expected = (np.pi * 1j * 1j) * (1 + 4 * np.pi**2) ** -0.5 * f.samples
        np.testing.assert_allclose(bessel_potential(d_bar(f), 1.0).samples, expected, atol=1e-12)

    def test_riesz_inverse(self, rng):
        f = random_field(make_grid(64, 2.0), rng)
        f = f - f.mean()
        assert rel(riesz_potential(fractional_laplacian(f, 0.7), 0.7), f) <= 1e-10

    @pytest.mark.parametrize("bad", [0.0, 2.0, -0.5])
    def test_riesz_rejects(self, bad):
        with pytest.raises(ValueError):
            riesz_potential(Field(make_grid(8, 1.0), 1.0), bad)

    def test_bessel_rejects(self):
        with pytest.raises(ValueError):
            bessel_potential(Field(make_grid(8, 1.0), 1.0), 0.0)


def _sympy_cz_constant(expr_of_z, zs, zbar):
    """Closed-form sup on the unit circle via symbolic Wirtinger derivatives."""
    th = sp.symbols("theta", real=True)
    on_circle = {zs: sp.exp(sp.I * th), zbar: sp.exp(-sp.I * th)}
    K = expr_of_z
    Kz = sp.diff(K, zs).subs(on_circle)
    Kzb = sp.diff(K, zbar).subs(on_circle)
    # real Jacobian operator norm of K: |Kz| + |Kzbar|
    grad = sp.simplify(sp.Abs(sp.simplify(Kz)) + sp.Abs(sp.simplify(Kzb)))
    val = sp.simplify(sp.Abs(sp.simplify(K.subs(on_circle))))
    samples = [float((val + grad).subs(th, t)) for t in np.linspace(0, 2 * np.pi, 7)]
    assert max(samples) - min(samples) < 1e-12  # constant on the circle for these kernels
    return sp.simplify((val + grad).subs(th, 0))


class TestCZConstant:
    def test_beurling_symbolic(self):
        zs, zb = sp.symbols("z zbar")
        expected = _sympy_cz_constant(-1 / (sp.pi * zs**2), zs, zb)
        assert sp.simplify(expected - 3 / sp.pi) == 0
        assert cz_constant(beurling_kernel()) == pytest.approx(float(expected), rel=1e-12)

    @pytest.mark.parametrize("m", [1, 2, 3, 4])
    def test_iterated_symbolic(self, m):
        zs, zb = sp.symbols("z zbar")
        K = (-1) ** m * m * zb ** (m - 1) / (sp.pi * zs ** (m + 1))
        expected = _sympy_cz_constant(K, zs, zb)
        assert cz_constant(iterated_beurling_kernel(m)) == pytest.approx(float(expected), rel=1e-12)

    def test_rejects_nonzero_mean(self):
        with pytest.raises(ValueError):
            cz_constant(CZKernelSpec((0,), (1.0,), "one"))

    def test_growth_exponent(self):
        m = np.arange(1, 9)
        c = np.array([cz_constant(iterated_beurling_kernel(k)) for k in m])
        slope = np.polyfit(np.log(m), np.log(c), 1)[0]
        assert 1.5 <= slope <= 2.2

    def test_cos2(self):
        # omega = cos(2t)/pi: sup|omega| = 1/pi, Jacobian norm sup = 2/pi
        assert cz_constant(cos2_kernel()) == pytest.approx(3 / np.pi, rel=1e-6)


class TestKernelSpec:
    def test_evenness(self):
        assert beurling_kernel().even and cos2_kernel().even
        assert not CZKernelSpec((-1,), (1.0,)).even

    def test_from_omega(self):
        K = CZKernelSpec.from_omega(lambda t: np.cos(2 * t) / np.pi, name="c2")
        assert abs(K.circle_mean) < 1e-14
        w = np.exp(1j * np.linspace(0, 6, 13)) * 1.7
        np.testing.assert_allclose(K(w), cos2_kernel()(w), atol=1e-14)

    def test_values(self):
        w = np.array([0.5 + 0.2j, -1.0j])
        np.testing.assert_allclose(beurling_kernel()(w), -1 / (np.pi * w**2), rtol=1e-14)
        np.testing.assert_allclose(iterated_beurling_kernel(3)(w),
                                   -3 * np.conj(w) ** 2 / (np.pi * w**4), rtol=1e-13)
        assert beurling_kernel()(np.array([0j]))[0] == 0

    def test_reflection_of_even_kernel(self):
        K = cos2_kernel()
        w = np.array([0.3 + 0.4j, -2 + 1j])
        np.testing.assert_allclose(K.reflected()(w), K(w))

    @given(st.floats(0, 2 * np.pi), st.floats(0.1, 10))
    def test_homogeneity(self, t, r):
        K = iterated_beurling_kernel(2)
        u = np.exp(1j * t)
        assert K(np.array([r * u]))[0] == pytest.approx(K(np.array([u]))[0] / r**2, rel=1e-12)


class TestLatticeMoment:
    def test_quarter_turn_antisymmetric_vanish(self):
        assert abs(lattice_moment(beurling_kernel(), 16.0)) < 1e-14
        assert abs(lattice_moment(iterated_beurling_kernel(3), 16.0)) < 1e-14

    def test_frozen_values(self):
        # independent re-summation, frozen from a float64 run
        assert lattice_moment(iterated_beurling_kernel(2), 16.0).real == pytest.approx(1.5964, abs=5e-4)


class TestKernelQuadrature:
    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_matches_spectral(self, m):
        g = make_grid(256, 8.0)
        f = sample(g, lambda x, y: np.exp(-2 * ((x - 0.2) ** 2 + y * y)))
        probes = [0.0, 0.3 + 0.1j, -0.5j, 0.8, -0.7 + 0.4j, 1.2j, -1.0 - 1.0j, 0.5 + 0.5j, 1.5, -0.2 + 0.9j]
        spectral = np.array([beurling_iter(f, m).samples[g.index_of(p)] for p in probes])
        direct = kernel_quadrature(iterated_beurling_kernel(m), f, probes)
        assert np.abs(spectral - direct).max() <= 0.05
