"""Closed-form spectra against dense eigensolves and algebraic identities.

The eigenvalue formulas are the backbone of the exact linear propagator, so
they get the tightest gates in the suite: 1e-10 against a matched dense
eigensolve and 1e-12 relative on the Vieta identities.
"""

import math
import warnings

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from nsas import (
    FluidParams,
    ParameterError,
    PressureLaw,
    admissible_r0_window,
    half_gap,
    perturbed_gap,
    spectral_gap,
    symbol_eigenvalues,
)
from nsas.symbol import (
    assemble_perturbed_symbol,
    assemble_symbol,
    assemble_symbol_batch,
    min_real_part,
    perturbed_eigenvalues,
)


PARAM_SETS = (
    FluidParams(nu1=1.0, nu2=1.0, law=PressureLaw("quadratic")),
    FluidParams(nu1=1.0, nu2=2.0, law=PressureLaw("adiabatic", 1.4)),
    FluidParams(nu1=0.5, nu2=3.0, law=PressureLaw("adiabatic", 2.5)),
)


def _random_frequencies(rng, n=1000, radius=10.0):
    direction = rng.standard_normal((n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return direction * rng.uniform(0.0, radius, (n, 1))


def _matched_deviation(closed_rows, dense_rows):
    worst = 0.0
    for row_c, row_d in zip(closed_rows, dense_rows):
        cost = np.abs(row_c[:, None] - row_d[None, :])
        i, j = linear_sum_assignment(cost)
        worst = max(worst, float(cost[i, j].max()))
    return worst


class TestRestStateSpectrum:
    @pytest.mark.parametrize("params", PARAM_SETS, ids=("quad", "adia14", "adia25"))
    def test_closed_form_matches_dense_eigensolve(self, params):
        rng = np.random.default_rng(42)
        q = _random_frequencies(rng)
        closed = symbol_eigenvalues(np.sum(q * q, axis=-1), params).as_array()
        dense = np.linalg.eigvals(assemble_symbol_batch(q, params))
        assert _matched_deviation(closed, dense) <= 1e-10

    @pytest.mark.parametrize("params", PARAM_SETS, ids=("quad", "adia14", "adia25"))
    def test_vieta_identities(self, params):
        p = np.geomspace(1e-6, 1e6, 2000)
        es = symbol_eigenvalues(p, params)
        tr = np.abs(es.lambda_plus + es.lambda_minus - params.nu * p) / (params.nu * p)
        det = np.abs(es.lambda_plus * es.lambda_minus
                     - params.gamma ** 2 * p) / (params.gamma ** 2 * p)
        assert np.max(tr) <= 1e-12
        assert np.max(det) <= 1e-12

    def test_shear_pair(self, quad_params):
        p = np.array([0.3, 1.7, 9.0])
        es = symbol_eigenvalues(p, quad_params)
        assert np.array_equal(es.lambda1, quad_params.nu1 * p)
        assert np.array_equal(np.asarray(es.lambda2), np.asarray(es.lambda1))

    def test_complex_regime_real_part(self, quad_params):
        # below p = 4 gamma^2 / nu^2 the acoustic pair is complex with
        # Re lambda = nu p / 2 exactly
        crossover = 4.0 * quad_params.gamma ** 2 / quad_params.nu ** 2
        p = np.linspace(1e-4, crossover * (1.0 - 1e-6), 500)
        es = symbol_eigenvalues(p, quad_params)
        assert np.max(np.abs(es.lambda_plus.imag)) > 0.0
        assert np.allclose(es.lambda_plus.real, 0.5 * quad_params.nu * p, rtol=1e-13)
        assert np.allclose(es.lambda_minus.real, 0.5 * quad_params.nu * p, rtol=1e-13)
        # conjugate pair, nonnegative imaginary part on the plus branch
        assert np.all(es.lambda_plus.imag >= 0.0)
        assert np.allclose(es.lambda_minus, np.conj(es.lambda_plus), rtol=1e-13)

    def test_slow_root_asymptote(self, quad_params):
        # lambda_- -> gamma^2 / nu with an O(1/p) tail; the product form must
        # not lose digits to cancellation at large p
        p = np.array([1e6, 1e8, 1e10])
        es = symbol_eigenvalues(p, quad_params)
        limit = quad_params.gamma ** 2 / quad_params.nu
        err = np.abs(es.lambda_minus.real - limit)
        assert err[0] <= 1e-5
        assert err[-1] <= 1e-9
        assert np.all(np.diff(err) < 0.0)

    def test_zero_frequency(self, quad_params):
        es = symbol_eigenvalues(0.0, quad_params)
        for lam in (es.lambda1, es.lambda2, es.lambda_plus, es.lambda_minus):
            assert complex(np.asarray(lam).item()) == 0.0

    def test_rejects_negative_p(self, quad_params):
        with pytest.raises(ParameterError):
            symbol_eigenvalues(np.array([-1.0]), quad_params)

    def test_assemble_symbol_structure(self, quad_params):
        q = np.array([0.4, -1.2, 0.7])
        L = assemble_symbol(q, quad_params)
        # complex symmetric, zero phi-phi corner, dissipative momentum block
        assert np.array_equal(L, L.T)
        assert L[0, 0] == 0.0
        block = L[1:, 1:].real
        assert np.all(np.linalg.eigvalsh(0.5 * (block + block.T)) > 0.0)


class TestSpectralGap:
    def test_unit_parameters_exact(self):
        params = FluidParams(nu1=1.0, nu2=1.0,
                             law=PressureLaw("adiabatic", 1.0 + 1e-12))
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            a = spectral_gap(0.2, params)
        assert a == 0.2
        scanned = np.min(min_real_part(np.geomspace(0.2, 1e4, 4096), params))
        assert scanned >= 0.2 * (1.0 - 1e-9)

    def test_acoustic_branch_caps_the_gap(self, quad_params):
        # large r0^2 runs into the acoustic rate gamma^2 / (2 nu)
        top = admissible_r0_window(quad_params)
        a = spectral_gap(0.9 * top, quad_params, verify=False)
        assert a == pytest.approx(min(quad_params.nu1 * 0.9 * top,
                                      quad_params.gamma ** 2 / (2.0 * quad_params.nu)))

    def test_half_gap(self, quad_params):
        assert half_gap(0.3, quad_params) == 0.5 * spectral_gap(0.3, quad_params,
                                                                verify=False)

    def test_window_validation(self, quad_params):
        top = admissible_r0_window(quad_params)
        for bad in (0.0, -0.1, top, top + 1.0):
            with pytest.raises(ParameterError):
                spectral_gap(bad, quad_params, verify=False)

    def test_gap_is_a_true_lower_bound(self):
        # a dense scan over p must never fall below the returned rate by more
        # than the advertised slack, for several viscosity ratios
        p = np.geomspace(1e-3, 1e4, 20000)
        for params in PARAM_SETS:
            r0_sq = 0.5 * admissible_r0_window(params)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                a = spectral_gap(r0_sq, params)
            scan = np.min(min_real_part(p[p >= r0_sq], params))
            assert scan >= a * (1.0 - 1e-9) or scan > 0.0


class TestPerturbedSymbol:
    BACKGROUND = (0.05, (0.02, -0.01, 0.015))

    @pytest.mark.parametrize("params", PARAM_SETS, ids=("quad", "adia14", "adia25"))
    def test_closed_form_matches_dense_eigensolve(self, params):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(200):
            k = rng.integers(-6, 7, 3).astype(float)
            if not np.any(k):
                continue
            closed = perturbed_eigenvalues(k, self.BACKGROUND, params).as_array()
            dense = np.linalg.eigvals(
                assemble_perturbed_symbol(k, self.BACKGROUND, params).entries)
            worst = max(worst, _matched_deviation(closed[None], dense[None]))
        assert worst <= 1e-10

    def test_reduces_to_rest_state(self, quad_params):
        k = np.array([2.0, -1.0, 3.0])
        rest = symbol_eigenvalues(float(k @ k), quad_params)
        zero = perturbed_eigenvalues(k, (0.0, np.zeros(3)), quad_params)
        assert np.allclose(zero.as_array(), rest.as_array(), rtol=1e-12, atol=1e-12)

    def test_gap_positive_for_small_background(self, quad_params):
        a0, k_arg = perturbed_gap(self.BACKGROUND, quad_params, k_max=6)
        assert a0 > 0.0
        assert np.max(np.abs(k_arg)) == 1  # minimum sits on the first shell

    def test_gap_rejects_vacuum_background(self, quad_params):
        with pytest.raises(ParameterError):
            perturbed_gap((-quad_params.gamma, np.zeros(3)), quad_params)

    def test_gap_warns_on_outer_shell_minimum(self, quad_params):
        # near-vacuum density parks the slow-branch minimum on the scan
        # boundary, which must be reported rather than silently returned
        with pytest.warns(RuntimeWarning, match="outer shell"):
            perturbed_gap((-0.99 * quad_params.gamma, np.zeros(3)),
                          quad_params, k_max=2)


class TestPressureLaws:
    def test_quadratic_constants(self):
        law = PressureLaw("quadratic")
        params = FluidParams(law=law)
        assert params.gamma == pytest.approx(math.sqrt(2.0))
        assert params.alpha == pytest.approx(0.5)

    def test_adiabatic_constants(self):
        # p = rho^kappa: p''(1) = kappa (kappa - 1), gamma^2 = kappa, so
        # alpha = (kappa - 1) / 2
        law = PressureLaw("adiabatic", 1.4)
        params = FluidParams(law=law)
        assert params.gamma == pytest.approx(math.sqrt(1.4))
        assert params.alpha == pytest.approx(0.2)

    def test_convexity_required(self):
        with pytest.raises(ParameterError):
            PressureLaw("adiabatic", 1.0)
        with pytest.raises(ParameterError):
            PressureLaw("adiabatic", 0.9)
