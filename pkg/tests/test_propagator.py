"""Flow integration, phase tables, W application and Egorov pullback."""

import math
import warnings

import numpy as np
import pytest

from qmlab.grid import Field2D, GridSpec
from qmlab.propagator import (
    CausticError,
    analytic_phase_table,
    apply_w,
    apply_w_star,
    build_phase,
    conjugated_symbol,
    eikonal_residual,
    integrate_flow,
    quasimode_pushforward,
)
from qmlab.quasimodes import build_graph_adapted_quasimode, defect, plane_wave
from qmlab.symbols import (
    GraphFn,
    contact_order,
    graph_circle,
    graph_monomial,
    graph_parabola,
    graph_shear,
    graph_sum,
    graph_tilted_circle,
    xi1_symbol,
)


def mesh(y, xi):
    return np.meshgrid(y, xi, indexing="ij")


class TestFlow:
    def test_free_motion_closed_form(self):
        g = graph_parabola(0.5)  # a = xi^2/2
        y0 = np.linspace(-2, 2, 9)
        xi0 = np.linspace(-0.5, 0.5, 7)
        fl = integrate_flow(g, y0, xi0, 1.0, dt=1e-3)
        Y, XI = mesh(y0, xi0)
        assert np.max(np.abs(fl.y_of[-1] - (Y + XI))) <= 1e-10
        assert np.max(np.abs(fl.xi_of[-1] - XI)) <= 1e-14
        assert fl.x1_values[0] == 0.0
        np.testing.assert_array_equal(fl.y_of[0], Y)

    def test_circle_drift_closed_form(self):
        g = graph_circle()
        y0 = np.linspace(-1, 1, 5)
        xi0 = np.linspace(-0.6, 0.6, 7)
        t = 0.4
        fl = integrate_flow(g, y0, xi0, t, dt=1e-3)
        Y, XI = mesh(y0, xi0)
        drift = -XI / np.sqrt(1 - XI ** 2)
        assert np.max(np.abs(fl.xi_of[-1] - XI)) <= 1e-14  # conserved exactly
        assert np.max(np.abs(fl.y_of[-1] - (Y + t * drift))) <= 1e-10
        assert fl.energy_drift <= 1e-12

    def test_shear_exponential_flow(self):
        g = graph_shear()
        y0 = np.linspace(-2, 2, 9)
        xi0 = np.linspace(-0.5, 0.5, 7)
        t = 0.5
        fl = integrate_flow(g, y0, xi0, t, dt=1e-3)
        Y, XI = mesh(y0, xi0)
        rel = np.max(np.abs(fl.y_of[-1] - Y * math.exp(t))) / math.exp(t) / 2.0
        assert rel <= 1e-8
        assert np.max(np.abs(fl.xi_of[-1] - XI * math.exp(-t))) <= 1e-8

    def test_symplectic_jacobian(self):
        fl = integrate_flow(graph_shear(), np.linspace(-2, 2, 9),
                            np.linspace(-0.5, 0.5, 7), 0.5, dt=1e-3)
        det = np.linalg.det(fl.jac[-1])
        assert np.max(np.abs(det - 1.0)) <= 1e-12

    def test_box_exit_flagged(self):
        with pytest.warns(UserWarning, match="left the box"):
            fl = integrate_flow(graph_shear(), np.linspace(-4, 4, 9),
                                np.array([0.5]), 0.5, dt=1e-3, box_half_width=4.0)
        assert fl.exited_box is not None and fl.exited_box.any()

    def test_evaluate_matches_snapshots(self):
        g = graph_tilted_circle()
        y0 = np.linspace(-1, 1, 5)
        xi0 = np.linspace(-0.4, 0.4, 5)
        fl = integrate_flow(g, y0, xi0, 0.3, dt=1e-3, save_at=[0.3])
        Y, XI = mesh(y0, xi0)
        y, xi = fl.evaluate(Y, XI, 0.3)
        assert np.max(np.abs(y - fl.y_of[-1])) <= 1e-12
        assert np.max(np.abs(xi - fl.xi_of[-1])) <= 1e-12


class TestPhase:
    def test_constant_coefficient_closed_form(self):
        g = GridSpec(8.0, 128, 0.1)
        tab = analytic_phase_table(graph_circle(), g)
        phi, amp = tab.slice_arrays(0.7)
        Y, XI = mesh(g.x_coords, g.xi_coords)
        from qmlab.symbols import _circle_sqrt

        np.testing.assert_allclose(phi, Y * XI - 0.7 * _circle_sqrt(XI, 0), atol=1e-12)
        assert np.all(amp == 1.0)

    def test_quadratic_phase_residual(self):
        # a = xi^2/2: phi = y xi - x1 xi^2/2; FD residual vanishes identically
        g = GridSpec(8.0, 128, 0.1)
        base = analytic_phase_table(graph_parabola(0.5), g)
        tab = type(base)(**{**base.__dict__, "x1_values": np.arange(0.1, 0.2, 0.01)})
        assert eikonal_residual(tab) <= 1e-10

    def test_shear_table_matches_closed_form(self):
        gsh = graph_shear()
        g = GridSpec(8.0, 128, 0.05)
        y = np.linspace(-2, 2, 129)
        xi = np.linspace(-1, 1, 33)
        fl = integrate_flow(gsh, y, xi, 0.2, dt=1e-3, save_at=[0.1, 0.2])
        tab = build_phase(fl, g)
        Y, XI = mesh(y, xi)
        for x1 in (0.1, 0.2):
            i = tab.slice_index(x1)
            np.testing.assert_allclose(tab.phi[i], Y * math.exp(-x1) * XI, atol=1e-12)

    def test_shear_residual_small_on_window(self):
        gsh = graph_shear()
        g = GridSpec(8.0, 256, 0.05)
        y = np.linspace(-2, 2, 256)
        xi = np.linspace(-1, 1, 65)
        save = np.arange(0.196, 0.2041, 1e-3)
        fl = integrate_flow(gsh, y, xi, 0.204, dt=1e-3, save_at=save)
        assert eikonal_residual(build_phase(fl, g)) <= 1e-6

    def test_second_order_convergence(self):
        gtc = graph_tilted_circle()
        g = GridSpec(8.0, 256, 0.05)

        def residual(ny, ds):
            yv = np.linspace(-2, 2, ny)
            xiv = np.linspace(-0.8, 0.8, 33)
            sv = np.arange(0.2 - 2 * ds, 0.2 + 2.0001 * ds, ds)
            fl = integrate_flow(gtc, yv, xiv, sv[-1], dt=2.5e-4, save_at=sv)
            return eikonal_residual(build_phase(fl, g))

        r1 = residual(129, 4e-3)
        r2 = residual(257, 2e-3)
        assert r1 / r2 >= 3.9  # second order, with higher-order slack

    def test_caustic_shortens_horizon(self):
        # rotational generator: dy/dy0 = cos(t) crosses the threshold before pi/2
        zero = lambda x1, x2, xi2: np.zeros(np.broadcast(x1, x2, xi2).shape)
        one = lambda x1, x2, xi2: np.ones(np.broadcast(x1, x2, xi2).shape)
        osc = GraphFn(
            name="oscillator",
            value=lambda x1, x2, xi2: (np.asarray(x2) ** 2 + np.asarray(xi2) ** 2) / 2.0,
            d_xi2=lambda x1, x2, xi2: np.asarray(xi2) + 0.0 * np.asarray(x2),
            d_x2=lambda x1, x2, xi2: np.asarray(x2) + 0.0 * np.asarray(xi2),
            d2_xi2_xi2=one, d2_x2_xi2=zero, d2_x2_x2=one,
            x_dependent=True,
            xi2_derivative=lambda x1, x2, xi2, order: None,
        )
        g = GridSpec(8.0, 64, 0.1)
        y = np.linspace(-2, 2, 65)
        xi = np.linspace(-1, 1, 17)
        fl = integrate_flow(osc, y, xi, 1.55, dt=1e-3, save_at=[0.5, 1.0, 1.52])
        with pytest.warns(UserWarning, match="caustic"):
            tab = build_phase(fl, g)
        assert tab.caustic_limited
        assert tab.x1_max <= 1.0 + 1e-12
        gv = np.exp(-g.x_coords ** 2)
        with pytest.raises(CausticError):
            apply_w(tab, gv.astype(complex), 1.52, g)


class TestApplyW:
    def setup_method(self):
        self.g = GridSpec(8.0, 256, 0.05)
        x = self.g.x_coords
        self.gv = np.exp(-x ** 2 / (2 * 0.4 ** 2)) * np.exp(1j * 0.3 * x / self.g.h)

    def test_identity_at_zero(self):
        tab = analytic_phase_table(graph_circle(), self.g)
        out = apply_w(tab, self.gv, 0.0, self.g, path="quadrature")
        assert np.max(np.abs(out - self.gv)) <= 1e-10

    def test_unitary_constant_coefficient(self):
        tab = analytic_phase_table(graph_circle(), self.g)
        out = apply_w(tab, self.gv, 0.3, self.g)
        n0 = np.sqrt(np.sum(np.abs(self.gv) ** 2))
        assert abs(np.sqrt(np.sum(np.abs(out) ** 2)) - n0) / n0 <= 1e-10

    def test_multiplier_matches_quadrature(self):
        tab = analytic_phase_table(graph_circle(), self.g)
        w1 = apply_w(tab, self.gv, 0.25, self.g, path="multiplier")
        w2 = apply_w(tab, self.gv, 0.25, self.g, path="quadrature")
        assert np.max(np.abs(w1 - w2)) <= 1e-12

    def test_adjoint_exact(self):
        tab = analytic_phase_table(graph_circle(), self.g)
        x = self.g.x_coords
        u2 = np.exp(-(x - 0.3) ** 2) * np.exp(1j * 0.2 * x / self.g.h)
        lhs = np.sum(apply_w(tab, self.gv, 0.2, self.g, path="quadrature") * np.conj(u2)) * self.g.dx
        rhs = np.sum(self.gv * np.conj(apply_w_star(tab, u2, 0.2, self.g, path="quadrature"))) * self.g.dx
        assert abs(lhs - rhs) <= 1e-10

    def test_star_solves_transposed_equation(self):
        # x-independent circle: W* is the inverse multiplier
        tab = analytic_phase_table(graph_circle(), self.g)
        w = apply_w(tab, self.gv, 0.2, self.g)
        back = apply_w_star(tab, w, 0.2, self.g)
        assert np.max(np.abs(back - self.gv)) <= 1e-10

    def test_variable_coefficient_w_star_w(self):
        gsh = graph_shear()
        y0 = np.linspace(-8.0, 8.0, 257)
        fl = integrate_flow(gsh, y0, self.g.xi_coords, 0.2, dt=1e-3, save_at=[0.2])
        tab = build_phase(fl, self.g, transport_correction=True, y_out=self.g.x_coords)
        w = apply_w(tab, self.gv, 0.2, self.g)
        back = apply_w_star(tab, w, 0.2, self.g)
        rel = np.sqrt(np.sum(np.abs(back - self.gv) ** 2) / np.sum(np.abs(self.gv) ** 2))
        assert rel <= self.g.h  # identity to O(h) on localized data


class TestConjugation:
    def test_identity_at_zero_time(self):
        a_g = graph_tilted_circle(0.1)
        q_g = graph_sum(a_g, graph_monomial(1, 1.0))
        fl = integrate_flow(a_g, np.linspace(-1, 1, 17), np.linspace(-0.4, 0.4, 9),
                            0.1, dt=1e-3, save_at=[0.1])
        _, q_t, _ = conjugated_symbol(a_g, q_g, fl, 0.0)
        t = np.linspace(-0.3, 0.3, 7)
        np.testing.assert_allclose(q_t.graph(x=(0.0, 0.2))(t),
                                   q_g.value(0.0, 0.2, t), atol=1e-12)

    def test_constant_coefficient_conserved(self):
        a_g = graph_circle()
        q_g = graph_sum(a_g, graph_monomial(1, 1.0))
        fl = integrate_flow(a_g, np.linspace(-1, 1, 17), np.linspace(-0.4, 0.4, 9),
                            0.3, dt=1e-3, save_at=[0.3])
        _, q_t, _ = conjugated_symbol(a_g, q_g, fl, 0.3)
        t = np.linspace(-0.3, 0.3, 7)
        # xi2 conserved for x-independent a: pullback equals the original graph
        np.testing.assert_allclose(q_t.graph(x=(0.3, 0.0))(t),
                                   q_g.value(0.0, 0.0, t), atol=1e-10)

    @pytest.mark.parametrize("k", [1, 2])
    def test_contact_preserved(self, k):
        a_g = graph_tilted_circle(0.1)
        q_g = graph_sum(a_g, graph_monomial(k, 1.0))
        x1 = 0.1
        fl = integrate_flow(a_g, np.linspace(-1.5, 1.5, 33), np.linspace(-0.5, 0.5, 17),
                            x1, dt=1e-3, save_at=[x1])
        a_t, q_t, _ = conjugated_symbol(a_g, q_g, fl, x1)
        xi0 = (float(a_t.graph(x=(x1, 0.0))(0.0)), 0.0)
        rep = contact_order(a_t, q_t, xi0, max_order=k + 2, x=(x1, 0.0))
        assert rep.order == k
        assert not rep.inconclusive


class TestPushforward:
    def test_plane_wave_on_graph_becomes_x1_constant(self):
        g = GridSpec(8.0, 256, 0.05)
        xi2_0 = g.xi_coords[160]
        a_val = float(np.sqrt(1 - xi2_0 ** 2))
        x1, x2 = g.x_mesh()
        window = np.exp(-(x1 ** 2 + x2 ** 2) / (2 * 1.0 ** 2))
        u = Field2D(g, np.exp(1j * (a_val * x1 + xi2_0 * x2) / g.h) * window)
        tab = analytic_phase_table(graph_circle(), g)
        v = quasimode_pushforward(tab, u)
        # v should be a near-null field of hD_x1: windowed plane wave sheared to xi1 ~ 0
        rep = defect(xi1_symbol(), v, 1)
        assert rep.defect <= 3 * g.h  # window bandwidth dominates
        # exact-null variant: unwindowed wave is constant in x1 after W
        u2 = Field2D(g, np.exp(1j * (a_val * x1 + xi2_0 * x2) / g.h))
        v2 = quasimode_pushforward(tab, u2, localization_tol=1.1)
        col = v2.values[0]
        assert np.max(np.abs(v2.values - col[None, :])) <= 1e-8

    def test_norm_preserved(self):
        g = GridSpec(8.0, 256, 0.05)
        u = build_graph_adapted_quasimode(g, graph_circle(), 1)
        v = quasimode_pushforward(analytic_phase_table(graph_circle(), g), u)
        assert v.l2_norm() == pytest.approx(u.l2_norm(), rel=1e-10)

    def test_zero_field(self):
        g = GridSpec(8.0, 64, 0.1)
        u = Field2D(g, np.zeros((64, 64), complex))
        v = quasimode_pushforward(analytic_phase_table(graph_circle(), g), u)
        assert np.all(v.values == 0.0)

    def test_delocalized_input_rejected(self):
        g = GridSpec(8.0, 64, 0.1)
        u = plane_wave(g, (g.xi_coords[40], 0.0))
        with pytest.raises(ValueError, match="not localized"):
            quasimode_pushforward(analytic_phase_table(graph_circle(), g), u)

    def test_zero_band_captures_pushforward_mass(self):
        # straightened model field concentrates in the lowest dyadic band
        import warnings

        from qmlab.grid import semiclassical_fft
        from qmlab.quasimodes import TAlphaSpec, build_t_alpha, grid_for_t_alpha
        from qmlab.wavelets import make_partition

        h, k = 2.0 ** -6, 1
        g = grid_for_t_alpha(h)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            u = build_t_alpha(TAlphaSpec(h=h, alpha=1.0 / (k + 1)), g)
        v = quasimode_pushforward(analytic_phase_table(graph_circle(), g), u,
                                  localization_tol=0.5)
        spec = semiclassical_fft(v).values
        part = make_partition(h, k)
        chi0 = part.band_multiplier(g.xi_coords, 0)
        mass = np.sum(np.abs(spec * chi0[None, :]) ** 2) / np.sum(np.abs(spec) ** 2)
        assert mass >= 0.9

    @pytest.mark.parametrize("k", [1, 2])
    def test_strong_joint_quasimode_after_pushforward(self, k):
        from qmlab.symbols import xi2_power_symbol

        ratios1, ratios2 = [], []
        for e in (4, 5, 6, 7, 8):
            h = 2.0 ** -e
            n = 64
            while np.pi * h * n / 16.0 < 1.3:
                n *= 2
            g = GridSpec(8.0, n, h)
            u = build_graph_adapted_quasimode(g, graph_circle(), k)
            v = quasimode_pushforward(analytic_phase_table(graph_circle(), g), u)
            ratios1.append(defect(xi1_symbol(), v, 1).ratio_to_power)
            ratios2.append(defect(xi2_power_symbol(k + 1), v, 1).ratio_to_power)
        assert max(ratios1) / min(ratios1) <= 3.0
        assert max(ratios2) / min(ratios2) <= 3.0
