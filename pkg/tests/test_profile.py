"""Reduced profile systems and their decay bookkeeping.

The 1-d and 2-d right-hand sides are checked against literal
transcriptions of the reduced systems, the flux splitting against the
spectral source, and the streaming trackers against direct recomputation.
"""

import numpy as np
import pytest

from nsas import FluidParams, SolverConfig, StateField, profile_run, run
from nsas.errors import ShapeError
from nsas.profile import (
    EnergyTracker,
    ProfileState,
    _grad_weighted_sq,
    decay_functional_m0,
    dissipation_integrand,
    divergence_of_flux,
    energy_N,
    profile_nonlinearity_flux,
    profile_nonlinearity_spectral,
    profile_rhs_1d,
    profile_rhs_2d,
    sup_tracker_for,
)
from nsas.spectral import (
    derivative_l2,
    forward_transform,
    inverse_transform,
    lebesgue_norm,
    sobolev_norm,
    spectral_derivative,
)


def _profile(grid, params, seed=0, scale=5e-3, q_sq_max=1.0):
    # band limited below the dealias cutoff, so masking inputs is a no-op
    rng = np.random.default_rng(seed)
    fields = scale * rng.standard_normal((4,) + grid.shape)
    coeffs = np.where(grid.q_sq <= q_sq_max,
                      forward_transform(fields, grid), 0.0)
    fields = inverse_transform(coeffs, grid)
    return ProfileState(grid, params, fields[0], fields[1:])


def _cut(field, grid):
    return inverse_transform(forward_transform(field, grid) * grid.dealias_mask,
                             grid)


def _trajectory(grid, params, n=6, dt=0.05):
    eta = _profile(grid, params, seed=6, scale=2e-2)
    states = [eta]
    cfg = SolverConfig(dt=dt)
    for k in range(1, n):
        out = run(states[-1], k * 4 * dt, cfg,
                  source=profile_nonlinearity_spectral)
        states.append(ProfileState(grid, params, out.phi, out.m, out.time))
    return states


class TestProfileState:
    def test_rejects_periodic_grids(self, mixed_grid, quad_params):
        with pytest.raises(ShapeError):
            ProfileState(mixed_grid, quad_params, np.zeros(mixed_grid.shape),
                         np.zeros((3,) + mixed_grid.shape))

    def test_momentum_split(self, open_grid, line_grid, quad_params):
        eta2 = ProfileState(open_grid, quad_params, np.zeros(open_grid.shape),
                            np.arange(3.0)[:, None, None]
                            * np.ones((3,) + open_grid.shape))
        assert eta2.w_parallel.shape == (1,) + open_grid.shape
        assert eta2.w_prime.shape == (2,) + open_grid.shape
        assert np.all(eta2.w_parallel == 0.0)
        assert np.all(eta2.w_prime[1] == 2.0)
        eta1 = ProfileState(line_grid, quad_params, np.zeros(line_grid.shape),
                            np.zeros((3,) + line_grid.shape))
        assert eta1.w_parallel.shape == (2,) + line_grid.shape
        assert eta1.w_prime.shape == (1,) + line_grid.shape

    def test_from_average(self, mixed_grid, quad_params):
        rng = np.random.default_rng(41)
        state = StateField(mixed_grid, quad_params,
                           rng.standard_normal(mixed_grid.shape),
                           rng.standard_normal((3,) + mixed_grid.shape),
                           time=2.5)
        eta = ProfileState.from_average(state)
        assert eta.grid.ell == 0
        assert eta.grid.shape == mixed_grid.shape[1:]
        assert eta.time == 2.5
        assert np.allclose(eta.sigma, state.phi.mean(axis=0), atol=1e-14)
        assert np.allclose(eta.w, state.m.mean(axis=1), atol=1e-14)


class TestProfileRhs:
    def test_1d_system_literal(self, line_grid):
        # d_t sigma = -gamma d_y w3
        # d_t wj    = nu1 d_y^2 wj - d_y(wj w3)          (j = 1, 2)
        # d_t w3    = (nu1+nu2) d_y^2 w3 - gamma d_y sigma
        #             - d_y(w3^2) - alpha d_y(sigma^2)
        params = FluidParams(nu1=0.7, nu2=1.9)
        eta = _profile(line_grid, params, seed=1)
        g = line_grid

        def dy(f, order=1):
            return spectral_derivative(f, g, 0, order)

        sigma, w = eta.sigma, eta.w
        want = np.zeros((4,) + g.shape)
        want[0] = -params.gamma * dy(w[2])
        for j in (0, 1):
            want[1 + j] = params.nu1 * dy(w[j], 2) - dy(_cut(w[j] * w[2], g))
        want[3] = ((params.nu1 + params.nu2) * dy(w[2], 2)
                   - params.gamma * dy(sigma)
                   - dy(_cut(w[2] * w[2], g))
                   - params.alpha * dy(_cut(sigma * sigma, g)))
        got = profile_rhs_1d(eta)
        assert np.max(np.abs(got - want)) <= 1e-12 * np.max(np.abs(want))

    def test_2d_system_literal(self, open_grid, quad_params):
        # d_t sigma = -gamma Div' w'
        # d_t w1    = nu1 Lap' w1 - Div'(w1 w')
        # d_t w'    = nu1 Lap' w' + nu2 Grad' Div' w' - gamma Grad' sigma
        #             - Div'(w' (x) w') - alpha Grad'(sigma^2)
        eta = _profile(open_grid, quad_params, seed=2)
        g = open_grid
        p = quad_params

        def dx(f, ax, order=1):
            return spectral_derivative(f, g, ax, order)

        def lap(f):
            return dx(f, 0, 2) + dx(f, 1, 2)

        sigma, w = eta.sigma, eta.w
        wp = w[1:]
        want = np.zeros((4,) + g.shape)
        want[0] = -p.gamma * (dx(wp[0], 0) + dx(wp[1], 1))
        want[1] = (p.nu1 * lap(w[0])
                   - dx(_cut(wp[0] * w[0], g), 0)
                   - dx(_cut(wp[1] * w[0], g), 1))
        for i in (0, 1):
            div_wp_i = dx(dx(wp[0], 0) + dx(wp[1], 1), i)
            want[2 + i] = (p.nu1 * lap(wp[i]) + p.nu2 * div_wp_i
                           - p.gamma * dx(sigma, i)
                           - dx(_cut(wp[0] * wp[i], g), 0)
                           - dx(_cut(wp[1] * wp[i], g), 1)
                           - p.alpha * dx(_cut(sigma * sigma, g), i))
        got = profile_rhs_2d(eta)
        assert np.max(np.abs(got - want)) <= 1e-12 * np.max(np.abs(want))

    def test_rank_guards(self, open_grid, line_grid, mixed_grid, quad_params):
        with pytest.raises(ShapeError):
            profile_rhs_1d(_profile(open_grid, quad_params))
        with pytest.raises(ShapeError):
            profile_rhs_2d(_profile(line_grid, quad_params))
        with pytest.raises(ShapeError):
            profile_nonlinearity_spectral(
                np.zeros((4,) + mixed_grid.shape, complex), mixed_grid,
                quad_params)

    def test_sigma_row_has_no_source(self, open_grid, quad_params):
        eta = _profile(open_grid, quad_params, seed=3)
        out = profile_nonlinearity_spectral(eta.spectral(), open_grid,
                                            quad_params)
        assert np.all(out[0] == 0.0)

    def test_source_zero_mode_vanishes(self, open_grid, quad_params):
        eta = _profile(open_grid, quad_params, seed=4)
        out = profile_nonlinearity_spectral(eta.spectral(), open_grid,
                                            quad_params)
        assert np.all(out[(slice(None),) + (0,) * open_grid.ndim] == 0.0)


class TestFluxForm:
    def test_divergence_matches_spectral_source(self, open_grid, quad_params):
        eta = _profile(open_grid, quad_params, seed=5)
        got = divergence_of_flux(profile_nonlinearity_flux(eta), open_grid)
        want = inverse_transform(
            profile_nonlinearity_spectral(eta.spectral(), open_grid,
                                          quad_params), open_grid)[1:]
        assert np.max(np.abs(got - want)) <= 1e-12 * np.max(np.abs(want))

    def test_flux_needs_rank_two(self, line_grid, quad_params):
        with pytest.raises(ShapeError):
            profile_nonlinearity_flux(_profile(line_grid, quad_params))


class TestEnergyBookkeeping:
    def test_gradient_weight_is_sum_of_derivative_norms(self, open_grid,
                                                        quad_params):
        eta = _profile(open_grid, quad_params, seed=12)
        for s in (1, 2):
            want = sum(
                sobolev_norm(spectral_derivative(eta.sigma, open_grid, ax, 1),
                             open_grid, s) ** 2
                for ax in range(open_grid.ndim))
            got = _grad_weighted_sq(eta.sigma, open_grid, s)
            assert got == pytest.approx(want, rel=1e-12)

    def test_tracker_matches_trapezoid_oracle(self, line_grid, quad_params):
        states = _trajectory(line_grid, quad_params)
        records = energy_N(states)
        assert len(records) == len(states)
        acc = 0.0
        fs = [dissipation_integrand(s) for s in states]
        for k, rec in enumerate(records):
            if k > 0:
                acc += 0.5 * (states[k].time - states[k - 1].time) \
                    * (fs[k] + fs[k - 1])
            want_h2 = sobolev_norm(states[k].stacked(), line_grid, 2) ** 2
            assert rec.t == states[k].time
            assert rec.eta_H2_sq == pytest.approx(want_h2, rel=1e-12)
            assert rec.accumulated_dissipation == pytest.approx(acc, rel=1e-12)
            assert rec.N_t == pytest.approx(rec.eta_H2_sq + acc, rel=1e-12)

    def test_duplicate_times_skipped(self, line_grid, quad_params):
        eta = _profile(line_grid, quad_params, seed=7)
        tracker = EnergyTracker()
        tracker(eta)
        tracker(eta)
        assert len(tracker.records) == 1

    def test_dissipation_nonnegative(self, open_grid, quad_params):
        eta = _profile(open_grid, quad_params, seed=8)
        assert dissipation_integrand(eta) >= 0.0


class TestSupFunctionals:
    def test_kind_selection(self, open_grid, line_grid):
        assert sup_tracker_for(open_grid).kind == "M0"
        assert sup_tracker_for(line_grid).kind == "M0_tilde"
        assert sup_tracker_for(line_grid, variant="M1").kind == "M1"

    def test_m0_matches_direct_recomputation(self, line_grid, quad_params):
        states = _trajectory(line_grid, quad_params)
        series = decay_functional_m0(states)
        best = 0.0
        for (t, sup), eta in zip(series, states):
            value = ((1.0 + eta.time) ** 0.25
                     * lebesgue_norm(eta.stacked(), line_grid, 2)
                     + (1.0 + eta.time) ** 0.75
                     * derivative_l2(eta.stacked(), line_grid, 1))
            best = max(best, value)
            assert t == eta.time
            assert sup == pytest.approx(best, rel=1e-12)

    def test_running_sup_monotone(self, line_grid, quad_params):
        states = _trajectory(line_grid, quad_params)
        sups = [s for _, s in decay_functional_m0(states)]
        assert all(b >= a for a, b in zip(sups, sups[1:]))


class TestProfileRun:
    def test_collects_records_and_final_state(self, line_grid, quad_params):
        eta0 = _profile(line_grid, quad_params, seed=9, scale=2e-2)
        result = profile_run(eta0, 0.6, SolverConfig(dt=0.05),
                             diagnostics_stride=4)
        assert isinstance(result.final, ProfileState)
        assert result.final.time == pytest.approx(0.6)
        assert [r.t for r in result.energy] == pytest.approx(
            [0.0, 0.2, 0.4, 0.6])
        assert [t for t, _ in result.m0] == pytest.approx(
            [0.0, 0.2, 0.4, 0.6])

    def test_matches_plain_run(self, line_grid, quad_params):
        eta0 = _profile(line_grid, quad_params, seed=10, scale=2e-2)
        result = profile_run(eta0, 0.5, SolverConfig(dt=0.05))
        direct = run(eta0, 0.5, SolverConfig(dt=0.05),
                     source=profile_nonlinearity_spectral)
        assert np.array_equal(result.final.stacked(), direct.stacked())

    def test_means_conserved(self, line_grid, quad_params):
        eta0 = _profile(line_grid, quad_params, seed=11, scale=2e-2)
        result = profile_run(eta0, 0.5, SolverConfig(dt=0.05))
        assert np.mean(result.final.sigma) == pytest.approx(
            np.mean(eta0.sigma), abs=1e-15)
        for j in range(3):
            assert np.mean(result.final.w[j]) == pytest.approx(
                np.mean(eta0.w[j]), abs=1e-15)
