import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qcreg.domains import (
    BallBump,
    DomainMask,
    Disk,
    Rectangle,
    SmoothedSquare,
    apply_T_omega,
    bump_bound,
    commutator,
    corner_scan,
    gradient_magnitude,
    holder_constant,
    log_lipschitz_constant,
    meyer_cutoff,
    meyer_decomposition,
    shape_from_json,
    t_chi,
)
from qcreg.grid import Field, lp_norm, make_grid
from qcreg.transforms import CZKernelSpec, beurling, beurling_kernel, cos2_kernel

from conftest import random_field

K = beurling_kernel()


def gaussian_mix(grid, rng, n=5, width=1.0):
    v = np.zeros((grid.N, grid.N), complex)
    for _ in range(n):
        c = complex(*rng.uniform(-1, 1, 2))
        v += complex(*rng.normal(size=2)) * np.exp(-np.abs(grid.z - c) ** 2 / width**2)
    return Field(grid, v)


# --- shapes and masks ---------------------------------------------------------

class TestMask:
    @pytest.mark.parametrize("shape", [Disk(0.2j, 1.0), Rectangle(-1, -0.5, 0.5, 1), SmoothedSquare(0.1, 2.0)])
    def test_chi_and_weights(self, shape):
        g = make_grid(128, 4.0)
        m = DomainMask(g, shape)
        sd = shape.signed_distance(g.z)
        assert np.array_equal(m.chi, sd < 0)
        deep = sd < -g.h
        far = sd > g.h
        assert np.all(m.weights[deep] == 1) and np.all(m.weights[far] == 0)
        assert np.all((0 <= m.weights) & (m.weights <= 1))
        assert m.ring(1).any() and not (m.ring(1) & (deep | far)).any()

    def test_disk_area(self):
        g = make_grid(256, 4.0)
        m = DomainMask(g, Disk(0.1 + 0.1j, 1.0))
        assert m.weights.sum() * g.cell_area == pytest.approx(math.pi, rel=1e-4)

    def test_smoothed_square_area(self):
        s = SmoothedSquare(0j, 2.0)
        m = DomainMask(make_grid(256, 4.0), s)
        area = 4 - (4 - math.pi) * s.rounding**2
        assert m.weights.sum() * m.grid.cell_area == pytest.approx(area, rel=1e-4)

    def test_diameters(self):
        assert Disk(0j, 1.5).diameter == 3.0
        assert Rectangle(0, 0, 3, 4).diameter == 5.0
        s = SmoothedSquare(0j, 2.0, rounding=0.2)
        z = s.boundary(np.arange(4096) / 4096)[0]
        assert s.diameter == pytest.approx(np.abs(z[:, None] - z[None, :]).max(), rel=1e-5)

    @pytest.mark.parametrize("shape", [Disk(0.3, 0.8), SmoothedSquare(0.2j, 1.5, rounding=0.3)])
    def test_boundary_parametrization(self, shape):
        t = np.arange(1000) / 1000
        p, n = shape.boundary(t)
        assert np.abs(shape.signed_distance(p)).max() < 1e-12
        assert np.allclose(np.abs(n), 1)
        # outward: stepping along the normal leaves the domain
        assert np.all(shape.signed_distance(p + 1e-3 * n) > 0)
        length = np.abs(np.diff(np.append(p, p[0]))).sum()
        assert length == pytest.approx(shape.perimeter, rel=1e-4)

    def test_normal_holder(self):
        g = make_grid(64, 4.0)
        q1 = DomainMask(g, SmoothedSquare(0j, 2.0, epsilon=0.5)).normal_holder_quotient(n=1024)
        q2 = DomainMask(g, SmoothedSquare(0j, 2.0, epsilon=0.5)).normal_holder_quotient(n=2048)
        assert np.isfinite(q1) and q2 <= 1.05 * q1
        # Lipschitz constant of the unit normal on a disk is 1/radius
        assert DomainMask(g, Disk(0j, 0.5)).normal_holder_quotient(1.0) == pytest.approx(2.0, rel=1e-3)
        with pytest.raises(ValueError):
            DomainMask(g, Rectangle(-1, -1, 1, 1)).normal_holder_quotient()

    @pytest.mark.parametrize("shape", [Disk(0.2j, 1.0), Rectangle(-1, -0.5, 0.5, 1),
                                       SmoothedSquare(0.1, 2.0, rounding=0.3, epsilon=0.5)])
    def test_json_roundtrip(self, shape):
        text = json.dumps(shape.to_json())
        assert shape_from_json(json.loads(text)) == shape

    def test_json_rejects(self):
        with pytest.raises(ValueError):
            shape_from_json({"type": "triangle"})

    def test_bad_shapes(self):
        with pytest.raises(ValueError):
            Rectangle(1, 0, 0, 1)
        with pytest.raises(ValueError):
            SmoothedSquare(0j, 1.0, rounding=0.6)


class TestBallBump:
    @pytest.mark.parametrize("r", [0.05, 0.2, 1.0])
    def test_bounds(self, r):
        g = make_grid(512, 4.0)
        b = BallBump(0.1 + 0.05j, r)
        v = b.sample(g).samples.real
        assert v.max() <= 1 and v.min() >= 0
        assert np.all(v[np.abs(g.z - b.center) >= r] == 0)
        gx, gy = np.gradient(v, g.h)
        assert np.hypot(gx, gy).max() <= 1 / r


# --- restricted operators -----------------------------------------------------

class TestApply:
    def test_odd_kernel_rejected(self):
        odd = CZKernelSpec((1, -1), (0.5, 0.5), name="cos")
        m = DomainMask(make_grid(32, 4.0), Disk(0j, 1.0))
        with pytest.raises(ValueError):
            t_chi(odd, m)

    def test_nonzero_mean_rejected(self):
        m = DomainMask(make_grid(32, 4.0), Disk(0j, 1.0))
        with pytest.raises(ValueError):
            t_chi(CZKernelSpec((0,), (1.0,)), m)

    @pytest.mark.parametrize("kernel", [beurling_kernel(), cos2_kernel()])
    def test_even_cancellation_bound(self, kernel):
        for N in (128, 256, 512):
            g = make_grid(N, 4.0)
            for shape in (Disk(0j, 1.0), Disk(0.3 + 0.2j, 0.6)):
                m = DomainMask(g, shape)
                T = t_chi(kernel, m).samples
                assert np.abs(T[m.interior(2)]).max() <= 5 * g.h

    def test_even_cancellation_decreases(self):
        # on a fixed physical interior region; near the boundary the error
        # sits at a fixed distance in cells and does not shrink
        vals = []
        for N in (128, 256, 512):
            m = DomainMask(make_grid(N, 4.0), Disk(0j, 1.0))
            vals.append(np.abs(t_chi(K, m).samples[m.interior(width=0.1)]).max())
        assert vals[0] > vals[1] > vals[2]
        assert vals[2] <= 0.25 * vals[1]

    def test_disk_example(self):
        m = DomainMask(make_grid(512, 4.0), Disk(0j, 1.0))
        assert np.abs(t_chi(K, m).samples[m.interior(2)]).max() <= 0.02

    def test_exterior(self):
        m = DomainMask(make_grid(512, 4.0), Disk(0j, 1.0))
        rng = np.random.default_rng(2)
        z = rng.uniform(1.5, 2.0, 12) * np.exp(2j * np.pi * rng.random(12))
        zs = np.array([m.grid.z[m.grid.index_of(p)] for p in z])
        vals = t_chi(K, m, points=z)
        assert np.abs(vals + 1 / zs**2).max() <= 0.05
        full = t_chi(K, m).samples
        assert np.allclose(vals, [full[m.grid.index_of(p)] for p in z], atol=1e-10)

    def test_zero(self):
        m = DomainMask(make_grid(64, 4.0), Disk(0j, 1.0))
        assert apply_T_omega(K, 0.0, m).sup() == 0
        assert np.all(apply_T_omega(K, np.zeros((64, 64)), m, points=[0.1, 0.2j]) == 0)

    @pytest.mark.parametrize("kernel", [beurling_kernel(), cos2_kernel()])
    def test_reflected_kernel(self, kernel, rng):
        m = DomainMask(make_grid(64, 4.0), SmoothedSquare(0.1j, 2.0))
        f = random_field(m.grid, rng)
        a = apply_T_omega(kernel, f, m).samples
        b = apply_T_omega(kernel.reflected(), f, m).samples
        assert np.array_equal(kernel.modes_c, kernel.reflected().modes_c)
        assert np.abs(a - b).max() <= 1e-12 * np.abs(a).max()

    def test_consistency_with_spectral(self):
        g = make_grid(512, 8.0)
        m = DomainMask(g, Rectangle(-2, -2, 2, 2))
        f = Field(g, np.exp(-4 * np.abs(g.z) ** 2))
        A, B = apply_T_omega(K, f, m).samples, beurling(f).samples
        probes = [0.1 + 0.2j, -0.5, 0.3j, 1 - 1j, 0.7 + 0.4j, -1.2 + 0.6j]
        for p in probes:
            idx = g.index_of(p)
            assert abs(A[idx] - B[idx]) <= 0.05

    def test_direct_matches_fft(self, rng):
        m = DomainMask(make_grid(64, 4.0), Disk(0.2, 1.2))
        f = random_field(m.grid, rng)
        pts = [0.1, -0.4 + 0.3j, 0.9j]
        full = apply_T_omega(cos2_kernel(), f, m).samples
        direct = apply_T_omega(cos2_kernel(), f, m, points=pts)
        ref = [full[m.grid.index_of(p)] for p in pts]
        assert np.allclose(direct, ref, rtol=1e-10, atol=1e-12)

    def test_square_log_growth(self):
        # the values grow like log N at the vertices; the gradient like 1/h
        sups, grads = [], []
        for N in (128, 256, 512):
            m = DomainMask(make_grid(N, 1.25), Rectangle(-0.5, -0.5, 0.5, 0.5))
            T = t_chi(K, m)
            assert np.all(np.isfinite(T.samples))
            sups.append(np.abs(T.samples[m.chi]).max())
            grads.append(gradient_magnitude(T)[m.interior(2)].max())
        steps = np.diff(sups)
        assert np.all((0.02 < steps) & (steps < 0.5))
        assert np.all(np.array(grads[1:]) / grads[:-1] > 1.5)

    def test_smoothed_square_holder_stable(self):
        consts = []
        for N in (128, 256, 512):
            m = DomainMask(make_grid(N, 4.0), SmoothedSquare(0j, 2.0, epsilon=0.5))
            consts.append(holder_constant(t_chi(K, m), m.interior(width=0.1), 0.4, 0.5))
        assert max(consts) <= 1.05 * min(consts)


# --- Meyer decomposition ------------------------------------------------------

class TestMeyer:
    def test_cutoff(self):
        v = np.array([0, 1.9, 2.0, 3.0, 4.0, 5.0])
        c = meyer_cutoff(v)
        assert c[0] == c[1] == c[2] == 1 and 0 < c[3] < 1 and c[4] == c[5] == 0

    def test_identity(self):
        g = make_grid(128, 4.0)
        m = DomainMask(g, Disk(0j, 1.0))
        rng = np.random.default_rng(3)
        f = gaussian_mix(g, rng)
        T = apply_T_omega(K, f, m, correct=False).samples
        for _ in range(20):
            x = complex(*rng.uniform(-0.6, 0.6, 2))
            y = complex(*rng.uniform(-0.6, 0.6, 2))
            if g.index_of(x) == g.index_of(y):
                continue
            t = meyer_decomposition(K, f, m, x, y)
            assert t.reconstruction_error <= 1e-6 * f.sup()
            assert abs(t.difference - (T[g.index_of(y)] - T[g.index_of(x)])) <= 1e-10 * f.sup()

    def test_constant_f(self):
        m = DomainMask(make_grid(64, 4.0), Disk(0j, 1.0))
        t = meyer_decomposition(K, 2.5, m, 0.1, 0.3j)
        assert t.g1 == t.g2 == t.g3 == t.g4 == 0
        assert t.chi_term == pytest.approx(t.difference, abs=1e-13)

    def test_same_sample_rejected(self):
        m = DomainMask(make_grid(64, 4.0), Disk(0j, 1.0))
        with pytest.raises(ValueError):
            meyer_decomposition(K, 1.0, m, 0.1, 0.1 + 1e-6)

    def test_g4_bounded_by_bump_constant(self):
        g = make_grid(256, 4.0)
        m = DomainMask(g, Disk(0j, 1.0))
        rng = np.random.default_rng(0)
        f = gaussian_mix(g, rng)
        pairs, balls = [], []
        for _ in range(20):
            x = complex(*rng.uniform(-0.6, 0.6, 2))
            sep = 10 ** rng.uniform(-1.5, -0.5)
            y = x + sep * np.exp(2j * np.pi * rng.random())
            df = f.samples[g.index_of(y)] - f.samples[g.index_of(x)]
            pairs.append((meyer_decomposition(K, f, m, x, y), df))
            balls.append(BallBump(g.z[g.index_of(x)], 4 * sep))
        # the cutoff is a bump of height 1, BallBump has height 8/15
        C = 15 / 8 * bump_bound(K, m, balls).overall
        for t, df in pairs:
            assert abs(t.g4) <= C * abs(df)


# --- bump bound ---------------------------------------------------------------

def boundary_balls(shape, radii, rng, n=4):
    out = []
    for r in radii:
        p, nrm = shape.boundary(rng.random(n))
        out += [BallBump(c, r) for c in p]
        out += [BallBump(c - 0.5 * r * d, r) for c, d in zip(p, nrm)]
    return out


class TestBumpBound:
    @pytest.mark.parametrize("shape", [Disk(0j, 1.0), SmoothedSquare(0j, 2.0)])
    def test_no_upward_trend(self, shape):
        m = DomainMask(make_grid(256, 4.0), shape)
        rep = bump_bound(K, m, boundary_balls(shape, [0.4, 0.2, 0.1, 0.05], np.random.default_rng(1)))
        assert not rep.upward_trend
        assert np.isfinite(rep.overall) and rep.overall > 0
        assert set(rep.per_radius) == {0.4, 0.2, 0.1, 0.05}

    def test_interior_ball(self):
        # far from the boundary T phi_B is the whole-plane transform, bounded
        # by a multiple of r ||grad phi_B|| = O(1)
        m = DomainMask(make_grid(256, 4.0), Disk(0j, 1.0))
        rep = bump_bound(K, m, [BallBump(0j, r) for r in (0.2, 0.1, 0.05)])
        vals = list(rep.per_radius.values())
        assert max(vals) <= 1.1 * min(vals)

    def test_rectangle_rejected(self):
        m = DomainMask(make_grid(64, 4.0), Rectangle(-1, -1, 1, 1))
        with pytest.raises(ValueError):
            bump_bound(K, m, [BallBump(0j, 0.2)])

    def test_zero_bump(self):
        m = DomainMask(make_grid(64, 4.0), Disk(0j, 1.0))
        rep = bump_bound(K, m, [BallBump(3.0 + 0j, 0.1)])  # support outside the grid window
        assert rep.overall == 0


# --- commutator and moduli of continuity --------------------------------------

class TestCommutator:
    def test_constant_mu(self, rng):
        g = make_grid(64, 4.0)
        f = random_field(g, rng)
        assert commutator(Field(g, 0.7 - 0.2j), f).sup() <= 1e-12 * f.sup()

    def test_definition(self, rng):
        g = make_grid(64, 4.0)
        mu, f = random_field(g, rng), random_field(g, rng)
        expected = mu * beurling(f) - beurling(mu * f)
        assert np.array_equal(commutator(mu, f).samples, expected.samples)

    def test_log_lipschitz_stable(self):
        from qcreg.beltrami import bump_coefficient

        consts = []
        for N in (128, 256, 512):
            g = make_grid(N, 8.0)
            mu = bump_coefficient(g, 0.5, radius=1.5, center=0.3).field
            m = DomainMask(g, Disk(0j, 1.0))
            F = commutator(mu, Field(g, m.weights))
            consts.append(log_lipschitz_constant(F, np.ones((N, N), bool), m.diameter))
        assert max(consts) <= 1.15 * min(consts)

    def test_pair_quotient_linear(self):
        g = make_grid(64, 4.0)
        F = Field(g, 2 * g.z.real + 0j)
        mask = np.ones((64, 64), bool)
        assert holder_constant(F, mask, 1.0, 1.0) == pytest.approx(2.0)
        assert log_lipschitz_constant(F, mask, 4.0) <= 2.0


# --- corner scan ---------------------------------------------------------------

class TestCornerScan:
    def test_classification_and_ordering(self):
        scan = corner_scan(Rectangle(-0.5, -0.5, 0.5, 0.5), [1.5, 2.0, 2.5], Ns=(128, 256, 512))
        assert scan.classification[2.0] == "diverging" and scan.classification[2.5] == "diverging"
        assert scan.last_ratio[2.5] > scan.last_ratio[2.0] > scan.last_ratio[1.5]
        assert len(scan.as_rows()) == 9

    @pytest.mark.parametrize("p_list", [[], [1.0], [3.0], [0.5, 2.0]])
    def test_rejects(self, p_list):
        with pytest.raises(ValueError):
            corner_scan(Rectangle(-0.5, -0.5, 0.5, 0.5), p_list, Ns=(32,))


@given(st.floats(0.3, 1.2), st.floats(-0.4, 0.4), st.floats(-0.4, 0.4))
def test_disk_mask_area(radius, cx, cy):
    m = DomainMask(make_grid(128, 4.0), Disk(complex(cx, cy), radius))
    assert m.weights.sum() * m.grid.cell_area == pytest.approx(math.pi * radius**2, rel=2e-3)
