from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qwalk_topo import analytics
from qwalk_topo.errors import GaplessBand, NonPlanar, OnCriticalLine, SymmetryBroken
from qwalk_topo.lattice import Line, Open, Piecewise, Table, TanhStep
from qwalk_topo.protocols import (
    Conventional1D,
    SplitStep1D,
    TwoDSimple,
    TwoDSixOp,
    WalkProtocol,
    ZRotate,
    build_protocol,
    one_step_unitary,
)
from qwalk_topo.spectral import bloch_band, diagonalize
from qwalk_topo.topology import (
    band_eigenvectors,
    chern_number_berry_plaquette,
    chern_number_solid_angle,
    chern_plaquette_value,
    chern_solid_angle_value,
    chiral_frame,
    bound_state_charges,
    gapless_lines_sixop,
    min_gap,
    on_critical_line_1d,
    phase_diagram_1d,
    phase_diagram_2d,
    sixop_line_distance,
    verify_chiral_symmetry,
    winding_closed_form,
    winding_number,
)

PI = np.pi
SX = np.array([[0, 1], [1, 0]])
angles = st.floats(-2 * PI, 2 * PI, allow_nan=False)


def domain_wall_ring(half_width: int = 60):
    g = Line.centered(half_width)
    return build_protocol(SplitStep1D(-PI / 2, TanhStep(3 * PI / 4, PI / 4)), g)


class TestChiralFrame:
    def test_theta_zero_is_sigma_x(self):
        f = chiral_frame(0.0)
        np.testing.assert_allclose(f.A, [1, 0, 0], atol=1e-15)
        np.testing.assert_allclose(f.gamma, -1j * SX, atol=1e-15)
        np.testing.assert_allclose(f.charge, SX, atol=1e-15)

    def test_theta_pi_axis(self):
        np.testing.assert_allclose(chiral_frame(PI).A, [0, 0, 1], atol=1e-15)

    @given(angles)
    @settings(max_examples=30, deadline=None)
    def test_unit_axis_and_squares(self, t):
        f = chiral_frame(t)
        assert abs(np.linalg.norm(f.A) - 1) < 1e-15
        np.testing.assert_allclose(f.gamma @ f.gamma, -np.eye(2), atol=1e-14)
        np.testing.assert_allclose(f.charge @ f.charge, np.eye(2), atol=1e-14)


class TestChiralSymmetry:
    @given(angles, st.lists(st.floats(-PI, PI), min_size=14, max_size=14))
    @settings(max_examples=30, deadline=None)
    def test_split_step_inhomogeneous(self, t1, t2):
        p = build_protocol(SplitStep1D(t1, Table(tuple(t2), start=-7)), Line(14))
        assert verify_chiral_symmetry(one_step_unitary(p), chiral_frame(t1)) < 1e-12

    @pytest.mark.parametrize("phi", [0.0, PI])
    @pytest.mark.parametrize("theta", [PI / 2, 1.1, 5.0])
    def test_reflecting_symmetric(self, theta, phi):
        u = one_step_unitary(analytics.reflecting_chain(theta, phi, 30))
        assert verify_chiral_symmetry(u, chiral_frame(theta)) < 1e-12

    def test_reflecting_phase_breaks_symmetry(self):
        u = one_step_unitary(analytics.reflecting_chain(PI / 2, PI / 3, 30))
        assert verify_chiral_symmetry(u, chiral_frame(PI / 2)) > 0.5


class TestWinding:
    def test_conventional_quarter_turn(self):
        w = winding_number(bloch_band(Conventional1D(PI / 2)), chiral_frame(PI / 2))
        assert abs(w) == 1

    @pytest.mark.parametrize("t2,expected", [(3 * PI / 4, 0), (PI / 4, 1)])
    def test_domain_wall_sides(self, t2, expected):
        band = bloch_band(SplitStep1D(-PI / 2, t2))
        assert abs(winding_number(band, chiral_frame(-PI / 2))) == expected
        assert winding_closed_form(-PI / 2, t2) == expected

    @pytest.mark.parametrize("t1", [0.4, -1.3, 2.2])
    def test_critical_lines_raise(self, t1):
        for t2 in (t1, -t1, 2 * PI - t1, 2 * PI + t1):
            assert on_critical_line_1d(t1, t2)
            with pytest.raises(OnCriticalLine):
                winding_closed_form(t1, t2)

    def test_gapless_band_raises(self):
        with pytest.raises(GaplessBand):
            winding_number(bloch_band(SplitStep1D(0.8, -0.8), n_k=256), chiral_frame(0.8))

    def test_wrong_axis_is_nonplanar(self):
        with pytest.raises(NonPlanar):
            winding_number(bloch_band(SplitStep1D(0.8, 0.3)), chiral_frame(1.7))

    @given(angles, angles)
    @settings(max_examples=60, deadline=None)
    def test_matches_closed_form(self, t1, t2):
        if min(abs(np.sin((t2 - t1) / 2)), abs(np.sin((t2 + t1) / 2))) < 1e-2:
            return
        w = winding_number(bloch_band(SplitStep1D(t1, t2), n_k=512), chiral_frame(t1))
        assert abs(w) == winding_closed_form(t1, t2)

    def test_winding_sign_follows_theta1(self):
        # the orientation of the planar loop flips with theta1, |W| does not
        a = winding_number(bloch_band(SplitStep1D(0.9, 0.2)), chiral_frame(0.9))
        b = winding_number(bloch_band(SplitStep1D(-0.9, 0.2)), chiral_frame(-0.9))
        assert a == -b and abs(a) == 1


def _random_gapped_sixop(n: int, seed: int):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        t1, t2 = rng.uniform(0, 2 * PI), rng.uniform(-2 * PI, 2 * PI)
        if sixop_line_distance(t1, t2) > 0.1:
            out.append((t1, t2))
    return out


class TestChern:
    def test_methods_agree_on_random_points(self):
        seen = set()
        for t1, t2 in _random_gapped_sixop(20, 3):
            band = bloch_band(TwoDSixOp(t1, t2), n_k=96)
            plaq = chern_plaquette_value(band_eigenvectors(band))
            solid = chern_solid_angle_value(band)
            assert abs(solid - round(solid)) < 1e-3
            assert abs(plaq - round(plaq)) < 1e-9
            assert round(solid) == round(plaq)
            seen.add(int(round(plaq)))
        assert seen <= {-1, 0, 1}
        assert len(seen) > 1

    @pytest.mark.parametrize("pt", [(0.3, 0.2), (3 * PI / 2, 3 * PI / 2), (1.0, 2.5)])
    def test_sum_rule(self, pt):
        band = bloch_band(TwoDSixOp(*pt), n_k=64)
        assert chern_number_berry_plaquette(band) + chern_number_berry_plaquette(band, upper=False) == 0

    def test_constant_field(self):
        field = np.zeros((16, 16, 2), dtype=complex)
        field[..., 0] = 1
        assert chern_number_berry_plaquette(field) == 0

    def test_sixop_diagonal_phases_differ(self):
        a = chern_number_solid_angle(bloch_band(TwoDSixOp(7 * PI / 6, 7 * PI / 6), n_k=256))
        b = chern_number_solid_angle(bloch_band(TwoDSixOp(3 * PI / 2, 3 * PI / 2), n_k=256))
        assert a != b
        assert {a, b} <= {-1, 0, 1}
        # frozen from the plaquette oracle at 256^2
        assert (a, b) == (0, 1)

    @pytest.mark.parametrize("pt", [(7 * PI / 6, 7 * PI / 6), (0.3, 0.2)])
    def test_refinement_stable(self, pt):
        vals = {chern_number_berry_plaquette(bloch_band(TwoDSixOp(*pt), n_k=n)) for n in (128, 256)}
        assert len(vals) == 1

    @given(st.floats(0, 2 * PI), st.floats(0, 2 * PI))
    @settings(max_examples=10, deadline=None)
    def test_simple_family_trivial(self, t1, t2):
        fam = TwoDSimple(t1, t2)
        if min(min_gap(fam, 0.0, 64), min_gap(fam, PI, 64)) < 0.05:
            return
        band = bloch_band(fam, n_k=64)
        assert chern_number_berry_plaquette(band) == 0
        assert chern_number_solid_angle(band) == 0


class TestGaplessLines:
    @pytest.mark.parametrize("t1", [0.4, 1.9, 3.0])
    def test_plus_line_closes_zero_gap(self, t1):
        t2 = 2 * (2 * PI - t1)
        c = gapless_lines_sixop(t1, t2)
        assert "t1+t2/2=2n*pi" in c.at_0
        assert min_gap(TwoDSixOp(t1, t2), 0.0) < 1e-6

    @pytest.mark.parametrize("t1", [0.4, 1.9, 3.0, 5.5])
    def test_even_theta2_closes_both(self, t1):
        for t2 in (0.0, 2 * PI, -2 * PI):
            assert gapless_lines_sixop(t1, t2).status == "GaplessAt0AndPi"
            fam = TwoDSixOp(t1, t2)
            assert min_gap(fam, 0.0) < 1e-6 and min_gap(fam, PI) < 1e-6

    @pytest.mark.parametrize("t1", [0.4, 1.0, 2.5, 4.0])
    def test_odd_theta2_is_not_a_line(self, t1):
        # theta2 = pi only closes a gap where it meets the t1 +- t2/2 families
        assert gapless_lines_sixop(t1, PI).gapped
        fam = TwoDSixOp(t1, PI)
        assert min(min_gap(fam, 0.0), min_gap(fam, PI)) > 0.1

    def test_sixop_diagonal_point_gapped(self):
        assert gapless_lines_sixop(7 * PI / 6, 7 * PI / 6).status == "Gapped"
        fam = TwoDSixOp(7 * PI / 6, 7 * PI / 6)
        assert min(min_gap(fam, 0.0, 512), min_gap(fam, PI, 512)) > 0.1

    @given(st.floats(0, 2 * PI), st.floats(-2 * PI, 2 * PI))
    @settings(max_examples=40, deadline=None)
    def test_classification_matches_min_gap(self, t1, t2):
        fam = TwoDSixOp(t1, t2)
        g0, gpi = min_gap(fam, 0.0, 64), min_gap(fam, PI, 64)
        if sixop_line_distance(t1, t2) > 0.05:
            assert min(g0, gpi) > 1e-3
        c = gapless_lines_sixop(t1, t2, tol=1e-12)
        if c.at_0:
            assert g0 < 1e-6
        if c.at_pi:
            assert gpi < 1e-6


class TestMinGap:
    @pytest.mark.parametrize("t1", [0.5, -1.2, 2.8])
    def test_split_step_zero_line(self, t1):
        assert min_gap(SplitStep1D(t1, -t1), 0.0) < 1e-6

    @pytest.mark.parametrize("t1", [0.5, -1.2, 2.8])
    def test_split_step_pi_lines(self, t1):
        assert min_gap(SplitStep1D(t1, t1), PI) < 1e-6
        assert min_gap(SplitStep1D(t1, 2 * PI - t1), PI) < 1e-6

    def test_conventional_quarter(self):
        assert min_gap(Conventional1D(PI / 2), 0.0) == pytest.approx(PI / 4, abs=1e-12)


class TestPhaseDiagrams:
    def test_1d_values(self):
        t = np.linspace(-PI, PI, 9)[:-1] + 0.05
        cells = phase_diagram_1d(t, t, n_k=256)
        assert {c.invariant for c in cells} <= {0, 1, None}
        for c in cells:
            if c.invariant is not None:
                assert c.invariant == winding_closed_form(c.theta1, c.theta2)

    def test_1d_diagonal_is_critical(self):
        cells = phase_diagram_1d([0.7, 1.4], [0.7, 1.4], n_k=256)
        diag = [c for c in cells if c.theta1 == c.theta2]
        assert all(c.invariant is None and c.min_gap_pi < 1e-6 for c in diag)

    def test_workers_deterministic(self):
        t = np.linspace(0.1, 3.0, 4)
        assert phase_diagram_1d(t, t, 128, workers=1) == phase_diagram_1d(t, t, 128, workers=3)

    def test_2d_simple_all_zero(self):
        t = np.linspace(0.2, 2 * PI - 0.2, 4)
        cells = phase_diagram_2d("simple2d", t, t, n_k=32)
        assert {c.invariant for c in cells} <= {0, None}


class TestCharges:
    def test_zero_pi_pair(self):
        p = analytics.zero_pi_protocol(40)
        q = bound_state_charges(diagonalize(one_step_unitary(p), p.geometry), chiral_frame(0.0))
        assert (q.Q0, q.Qpi) == (1, -1)
        assert q.q0_states == (1,) and q.qpi_states == (-1,)

    def test_empty_subspaces(self):
        p = build_protocol(SplitStep1D(-PI / 2, PI / 4), Line(30))
        q = bound_state_charges(diagonalize(one_step_unitary(p), p.geometry), chiral_frame(-PI / 2))
        assert (q.Q0, q.Qpi, q.q0_states, q.qpi_states) == (0, 0, (), ())

    def test_domain_wall_single_charge(self):
        p = domain_wall_ring()
        spec = diagonalize(one_step_unitary(p), p.geometry)
        frame = chiral_frame(-PI / 2)
        # the ring has a second wall at the seam; the two charges cancel
        full = bound_state_charges(spec, frame)
        assert full.Q0 == 0 and sorted(full.q0_states) == [-1, 1]
        q = bound_state_charges(spec, frame, region=lambda x: np.abs(x) < 30)
        assert sorted([abs(q.Q0), abs(q.Qpi)]) == [0, 1]

    def test_wrong_frame_detected(self):
        p = analytics.zero_pi_protocol(40)
        with pytest.raises(SymmetryBroken):
            bound_state_charges(diagonalize(one_step_unitary(p), p.geometry), chiral_frame(PI / 2))

    def test_robust_to_chiral_perturbations(self):
        p0 = analytics.zero_pi_protocol(40)
        g = p0.geometry
        base = Piecewise(1, -PI, PI)(g.coords())
        rng = np.random.default_rng(2024)
        for _ in range(100):
            bump = rng.uniform(-0.2, 0.2, g.length)
            # the open window stays unitary only if the end sites keep exact flips
            bump[[0, -1]] = 0.0
            prof = Table(tuple(base + bump), start=int(g.coords()[0]))
            p = build_protocol(SplitStep1D(0.0, prof, boundary=Open()), g)
            u = one_step_unitary(p)
            assert verify_chiral_symmetry(u, chiral_frame(0.0)) < 1e-12
            q = bound_state_charges(diagonalize(u, g), chiral_frame(0.0))
            assert (q.Q0, q.Qpi) == (1, -1)

    def test_sigma_z_rotation_moves_state(self):
        p = domain_wall_ring()
        broken = WalkProtocol(p.steps + (ZRotate(0.1),), p.geometry)
        spec = diagonalize(one_step_unitary(broken), p.geometry)
        x = p.geometry.coords()
        prob = np.abs(spec.vectors.reshape(len(x), 2, -1)) ** 2
        mean_abs_x = np.einsum("x,xsm->m", np.abs(x), prob)
        central = np.argmin(mean_abs_x)
        E = spec.energies[central]
        assert mean_abs_x[central] < 5
        assert 1e-6 < abs(E) < 0.3
        assert not spec.select(0.0, 1e-6).size
