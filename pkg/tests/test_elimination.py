"""Elimination conditions: residuals, 1-D and 2-D solvers, feasibility, sweeps."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_config
from nmzi.elimination import (
    DegenerateAmplitude,
    DependentConditions,
    EliminationTarget,
    NoSolution,
    _residual,
    condition_residual,
    feasibility,
    prefactor,
    solve_phases,
    sweep_curve,
)
from nmzi.optics import (
    Ratios,
    SignConvention,
    SplitRatio,
    detector_power_exact,
    first_order_coefficients,
    path_amplitudes,
)

T = EliminationTarget
AS, EM = SignConvention.AS_WRITTEN, SignConvention.EXPERIMENT_MATCHED
PI = math.pi


def component(target, config):
    w = first_order_coefficients(config)
    mirror = "E" if target.mirror == "EF" else target.mirror
    return (w.d_re if target.channel == "re" else w.d_im)[mirror]


def periodic_distance(p, q):
    return math.hypot(math.remainder(p[0] - q[0], 2 * PI), math.remainder(p[1] - q[1], 2 * PI))


def random_pair(rng):
    """Two distinct targets, skipping the A_RE/EF_RE pair whose zeros form a curve."""
    while True:
        pair = list(rng.choice(list(T), 2, replace=False))
        if {pair[0], pair[1]} != {T.A_RE, T.EF_RE}:
            return pair


def max_residual(targets, config):
    return max(abs(condition_residual(t, config).value) for t in targets)


class TestTarget:
    def test_eight_rows(self):
        assert len(T) == 8
        assert {t.mirror for t in T} == {"A", "B", "C", "EF"}

    @pytest.mark.parametrize("text", ["a_re", "A_RE", " ef_im "])
    def test_parse(self, text):
        assert T.parse(text).value == text.strip().lower()

    def test_parse_unknown(self):
        with pytest.raises(ValueError):
            T.parse("d_re")


class TestResidual:
    def test_extremum(self, rng):
        for _ in range(20):
            cfg = random_config(rng).with_phases(0.0, 0.0)
            assert condition_residual(T.A_RE, cfg).value == 0.0

    def test_mirror_a_anchor(self, balanced):
        assert abs(condition_residual(T.A_RE, balanced.configure(0.22, 0.11, EM)).value) <= 1e-3

    def test_matches_coefficients(self, rng):
        for _ in range(1000):
            cfg = random_config(rng)
            for t in T:
                p = prefactor(t, cfg.ratios)
                if p > 1e-6:
                    expect = component(t, cfg) / (2 * p)
                    assert abs(condition_residual(t, cfg).value - expect) <= 1e-12

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0),
           st.floats(-PI, PI), st.floats(-PI, PI), st.sampled_from(list(SignConvention)),
           st.sampled_from(list(T)))
    def test_zero_iff_component_zero(self, t1, t2, t3, t4, phi, chi, conv, target):
        cfg = Ratios.from_t(t1, t2, t3, t4).configure(phi, chi, conv)
        p = prefactor(target, cfg.ratios)
        if p > 1e-6:
            assert condition_residual(target, cfg).value * 2 * p == pytest.approx(
                component(target, cfg), abs=1e-12)

    @pytest.mark.parametrize("target", list(T))
    @pytest.mark.parametrize("s", [-1, 1])
    def test_phase_derivatives(self, target, s, rng):
        a, b, c = rng.uniform(0.05, 0.6, size=3)
        for _ in range(20):
            phi, chi = rng.uniform(-PI, PI, size=2)
            h = 1e-6
            _, (d_phi, d_chi) = _residual(target, a, b, c, s, phi, chi)
            fd_phi = (_residual(target, a, b, c, s, phi + h, chi)[0]
                      - _residual(target, a, b, c, s, phi - h, chi)[0]) / (2 * h)
            fd_chi = (_residual(target, a, b, c, s, phi, chi + h)[0]
                      - _residual(target, a, b, c, s, phi, chi - h)[0]) / (2 * h)
            assert d_phi == pytest.approx(fd_phi, abs=1e-8)
            assert d_chi == pytest.approx(fd_chi, abs=1e-8)


class TestSolve1D:
    def test_mirror_a_anchor(self, balanced):
        roots = solve_phases([T.A_RE], balanced, pin=("chi", 0.11), convention=EM)
        # with b = c the condition reads sin(chi) = sin(phi - chi), root phi = 2 chi
        assert min(abs(s.phi - 0.22) for s in roots) <= 1e-9
        assert min(abs(s.phi - 0.223) for s in roots) <= 0.01

    def test_chi_zero_gives_phi_zero(self, rng):
        for _ in range(10):
            ratios = random_config(rng).ratios
            for conv in SignConvention:
                roots = solve_phases([T.A_RE], ratios, pin=("chi", 0.0), convention=conv)
                assert min(abs(s.phi) for s in roots) <= 1e-12

    def test_sorted_and_valid(self, rng):
        for _ in range(30):
            cfg = random_config(rng)
            target = list(T)[int(rng.integers(8))]
            pin = ("chi", cfg.chi) if rng.random() < 0.5 else ("phi", cfg.phi)
            roots = solve_phases([target], cfg.ratios, pin=pin, convention=cfg.convention)
            free = [s.phi if pin[0] == "chi" else s.chi for s in roots]
            assert free == sorted(free)
            for s in roots:
                assert s.residual_after <= 1e-10
                probe = cfg.ratios.configure(s.phi, s.chi, cfg.convention)
                assert abs(condition_residual(target, probe).value) <= 1e-10
                assert -PI <= s.phi < PI + 1e-12 and -PI <= s.chi < PI + 1e-12

    def test_every_sign_change_brackets_one_root(self, rng):
        """Independent 2000-point scan, offset by half a step from the solver's."""
        n = 2000
        h = 2 * PI / n
        grid = -PI + h / 2 + h * np.arange(n)
        for _ in range(40):
            cfg = random_config(rng)
            target = list(T)[int(rng.integers(8))]
            a, b, c = path_amplitudes(cfg)
            s = cfg.convention.c_sign
            values = _residual(target, a, b, c, s, grid, cfg.chi)[0]
            roots = [r.phi for r in solve_phases([target], cfg.ratios, pin=("chi", cfg.chi),
                                                 convention=cfg.convention)]
            for k in range(n - 1):
                if np.sign(values[k]) * np.sign(values[k + 1]) < 0:
                    inside = [r for r in roots if grid[k] <= r <= grid[k + 1]]
                    assert len(inside) == 1

    def test_needs_pin(self, balanced):
        with pytest.raises(NoSolution):
            solve_phases([T.A_RE], balanced)

    @pytest.mark.parametrize("pin", [("theta", 0.1), ("chi", float("nan"))])
    def test_invalid_pin(self, balanced, pin):
        with pytest.raises(NoSolution):
            solve_phases([T.A_RE], balanced, pin=pin)

    def test_pin_with_two_targets(self, balanced):
        with pytest.raises(NoSolution):
            solve_phases([T.A_RE, T.B_RE], balanced, pin=("chi", 0.1))

    def test_too_many_targets(self, balanced):
        with pytest.raises(ValueError):
            solve_phases([T.A_RE, T.B_RE, T.C_RE], balanced)

    @pytest.mark.parametrize("target", [T.B_RE, T.C_IM, T.EF_RE])
    def test_vacuous_condition(self, target):
        upper_only = Ratios.from_t(1.0, 0.5, 0.5, 0.5)
        with pytest.raises(DegenerateAmplitude):
            solve_phases([target], upper_only, pin=("chi", 0.2))

    def test_empty_is_success(self):
        # |b sin chi| > c leaves sin(phi - chi) out of range
        ratios = Ratios(SplitRatio(0.5), SplitRatio.from_r(0.1), SplitRatio(0.5), SplitRatio(0.5))
        assert solve_phases([T.A_RE], ratios, pin=("chi", PI / 2), convention=EM) == []

    @pytest.mark.parametrize("chi", [0.3, 1.0, 2.2])
    def test_root_at_seam_reported_once(self, balanced, chi):
        # phi = pi is an EF_RE root for every chi at balanced ratios
        phis = [s.phi for s in solve_phases([T.EF_RE], balanced, pin=("chi", chi))]
        assert phis.count(-PI) == 1
        assert all(-PI <= p < PI for p in phis)
        assert len(phis) == len(set(round(p, 9) for p in phis))


class TestSolve2D:
    @pytest.mark.parametrize("conv", list(SignConvention))
    def test_a_re_b_re_closed_form(self, balanced, conv):
        # b = c: the sine conditions factor into sin(chi)(a + 2c cos chi) = 0 with a = 2c
        roots = solve_phases([T.A_RE, T.B_RE], balanced, convention=conv)
        expect = [(0.0, 0.0), (0.0, PI), (PI, 0.0), (PI, PI)]
        assert len(roots) == 4
        for e in expect:
            assert min(periodic_distance(e, (s.phi, s.chi)) for s in roots) <= 1e-6
        for s in roots:
            assert max_residual([T.A_RE, T.B_RE], balanced.configure(s.phi, s.chi, conv)) <= 1e-10

    def test_every_root_valid(self, rng):
        for _ in range(12):
            cfg = random_config(rng)
            pair = random_pair(rng)
            for s in solve_phases(pair, cfg.ratios, convention=cfg.convention):
                probe = cfg.ratios.configure(s.phi, s.chi, cfg.convention)
                assert max_residual(pair, probe) <= 1e-10

    @pytest.mark.parametrize("conv", list(SignConvention))
    def test_a_re_ef_re_dependent(self, rng, conv):
        for _ in range(5):
            ratios = random_config(rng).ratios
            with pytest.raises(DependentConditions):
                solve_phases([T.EF_RE, T.A_RE], ratios, convention=conv)

    def test_a_re_ef_re_proportional(self, rng):
        for _ in range(50):
            cfg = random_config(rng)
            a = path_amplitudes(cfg).a
            assert condition_residual(T.EF_RE, cfg).value == pytest.approx(
                -a * condition_residual(T.A_RE, cfg).value, abs=1e-15)

    def test_roots_distinct(self, rng):
        for _ in range(12):
            cfg = random_config(rng)
            pair = random_pair(rng)
            roots = solve_phases(pair, cfg.ratios, convention=cfg.convention)
            for i, p in enumerate(roots):
                for q in roots[i + 1:]:
                    assert periodic_distance((p.phi, p.chi), (q.phi, q.chi)) > 1e-6

    @pytest.mark.parametrize("seed", range(6))
    def test_brute_force_grid(self, seed):
        """Every near-zero of a brute-force lattice, polished by local grid
        zooming, lies on a returned root."""
        rng = np.random.default_rng(1000 + seed)
        cfg = random_config(rng, t_range=(0.1, 0.9))
        pair = random_pair(rng)
        a, b, c = path_amplitudes(cfg)
        s = cfg.convention.c_sign

        def norm(phi, chi):
            return np.maximum(*(np.abs(_residual(t, a, b, c, s, phi, chi)[0]) for t in pair))

        n = 1000
        axis = -PI + 2 * PI * np.arange(n) / n
        P, C = np.meshgrid(axis, axis, indexing="ij")
        grid = norm(P, C)
        nb = np.min([np.roll(np.roll(grid, i, 0), j, 1)
                     for i in (-1, 0, 1) for j in (-1, 0, 1) if (i, j) != (0, 0)], axis=0)
        seeds = [(axis[i], axis[j]) for i, j in zip(*np.nonzero((grid <= nb) & (grid < 0.05)))]

        roots = solve_phases(pair, cfg.ratios, convention=cfg.convention)
        for phi, chi in seeds:
            span = 4 * PI / n
            for _ in range(8):
                xs = np.linspace(phi - span, phi + span, 81)
                ys = np.linspace(chi - span, chi + span, 81)
                zoom = norm(*np.meshgrid(xs, ys, indexing="ij"))
                i, j = np.unravel_index(zoom.argmin(), zoom.shape)
                phi, chi, span = xs[i], ys[j], span / 10
            if zoom.min() <= 1e-12:
                assert min(periodic_distance((phi, chi), (r.phi, r.chi)) for r in roots) <= 1e-6


class TestFeasibility:
    def test_single_sine_condition(self, rng):
        for _ in range(5):
            ratios = random_config(rng).ratios
            assert feasibility([T.A_RE], ratios).feasible

    @pytest.mark.parametrize("mirror", ["A", "B", "C"])
    @pytest.mark.parametrize("conv", list(SignConvention))
    def test_dark_output(self, balanced, mirror, conv):
        targets = [T[f"{mirror}_RE"], T[f"{mirror}_IM"]]
        result = feasibility(targets, balanced, conv)
        if result.feasible:
            w = result.witness
            assert detector_power_exact(balanced.configure(w.phi, w.chi, conv)) <= 1e-12
        for s in solve_phases(targets, balanced, convention=conv):
            assert detector_power_exact(balanced.configure(s.phi, s.chi, conv)) <= 1e-12

    def test_dark_output_random(self, rng):
        for _ in range(10):
            cfg = random_config(rng)
            for mirror in "ABC":
                targets = [T[f"{mirror}_RE"], T[f"{mirror}_IM"]]
                result = feasibility(targets, cfg.ratios, cfg.convention)
                if result.feasible:
                    w = result.witness
                    probe = cfg.ratios.configure(w.phi, w.chi, cfg.convention)
                    assert detector_power_exact(probe) <= 1e-12

    def test_three_sine_conditions(self, balanced):
        targets = [T.A_RE, T.B_RE, T.C_RE]
        for conv in SignConvention:
            result = feasibility(targets, balanced, conv)
            # a A_RE + b B_RE + c C_RE = 0 identically, so two conditions imply the third
            assert result.feasible
            w = result.witness
            assert max_residual(targets, balanced.configure(w.phi, w.chi, conv)) <= 1e-8

    def test_three_conditions_against_grid(self, balanced):
        """Brute-force lattice at 2 pi / 2000 agrees with the feasibility flag."""
        targets = [T.A_IM, T.B_IM, T.EF_RE]
        n = 2000
        axis = -PI + 2 * PI * np.arange(n) / n
        P, C = np.meshgrid(axis, axis, indexing="ij")
        a, b, c = path_amplitudes(balanced)
        for conv in SignConvention:
            s = conv.c_sign
            grid = np.maximum.reduce(
                [np.abs(_residual(t, a, b, c, s, P, C)[0]) for t in targets])
            result = feasibility(targets, balanced, conv)
            # residuals move by at most ~h per cell, so a common root shows below 2h
            assert result.feasible == bool(grid.min() <= 2 * 2 * PI / n)
            if result.feasible:
                w = result.witness
                assert max_residual(targets, balanced.configure(w.phi, w.chi, conv)) <= 1e-8

    def test_dependent_pair_feasible(self, balanced):
        result = feasibility([T.A_RE, T.EF_RE], balanced)
        assert result.feasible
        w = result.witness
        assert max_residual([T.A_RE, T.EF_RE], balanced.configure(w.phi, w.chi)) <= 1e-8

    def test_too_many_targets(self, balanced):
        with pytest.raises(ValueError):
            feasibility([T.A_RE, T.B_RE, T.C_RE, T.A_IM], balanced)


class TestSweep:
    def test_balanced_inner_gives_double_angle(self, balanced):
        chis = [0.0, 0.01, 0.05, 0.11, 0.2, 0.3]
        rows = sweep_curve(T.A_RE, balanced, [math.sqrt(0.5)], chis, EM)
        for row in rows:
            assert row.phi == pytest.approx(2 * row.chi, abs=1e-9)

    def test_chi_zero_row(self, balanced):
        rows = sweep_curve(T.A_RE, balanced, [0.3, 0.5, 0.7, 0.9], [0.0], EM)
        assert all(abs(row.phi) <= 1e-12 for row in rows)

    @pytest.mark.parametrize("r2", [0.5, 0.6, 0.7, 0.8])
    def test_origin_slope(self, balanced, r2):
        chi = 1e-4
        (row,) = sweep_curve(T.A_RE, balanced, [r2], [chi], EM)
        _, b, c = path_amplitudes(balanced._replace(bs2=SplitRatio.from_r(r2)))
        assert row.phi / chi == pytest.approx(1 + b / c, abs=1e-3)

    def test_missing_root_marked(self):
        ratios = Ratios(SplitRatio(0.5), SplitRatio(0.5), SplitRatio(0.5), SplitRatio(0.5))
        rows = sweep_curve(T.A_RE, ratios, [0.1], [0.0, PI / 2], EM)
        assert len(rows) == 2
        assert rows[0].phi is not None and rows[1].phi is None

    @pytest.mark.parametrize("r2", [0.0, 1.0, -0.2])
    def test_r2_range(self, balanced, r2):
        with pytest.raises(ValueError):
            sweep_curve(T.A_RE, balanced, [r2], [0.1])
