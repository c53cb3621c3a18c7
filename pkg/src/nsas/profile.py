"""Reduced profile systems on the open directions.

After averaging over the torus directions, small solutions approach a
profile eta = (sigma, w) depending only on the open coordinates.  The
profile obeys a lower dimensional system whose linear part is exactly the
full symbol evaluated at zero torus wavenumber, so the same exponential
integrator drives it; only the quadratic source differs:

    2-d case (one torus axis averaged out, y = (y2, y3), w' = (w2, w3)):
        d_t sigma = -gamma Div' w'
        d_t w1    = nu1 Lap' w1 - Div'(w1 w')
        d_t w'    = nu1 Lap' w' + nu2 Grad' Div' w' - gamma Grad' sigma
                    - Div'(w' (x) w') - alpha Grad'(sigma^2)

    1-d case (two torus axes averaged out, y = y3):
        d_t sigma = -gamma d_y w3
        d_t wj    = nu1 d_y^2 wj - d_y(wj w3)              (j = 1, 2)
        d_t w3    = (nu1 + nu2) d_y^2 w3 - gamma d_y sigma
                    - d_y(w3^2) - alpha d_y(sigma^2)

Both quadratic sources are the single formula

    B_j = -sum_i d_i(w_i w_j) - alpha d_j(sigma^2)

with the sum over open axes and the momentum index embedded as in
Grid.qvec3; the sigma component has no source, so the sigma mean is
conserved exactly.  The decay bookkeeping lives here as streaming trackers:
the energy functional

    N(t) = ||eta||_H2^2
           + int_0^t ( ||d_tau eta||_H1^2 + ||d_y w||_H2^2 + ||d_y sigma||_H1^2 ) dtau

and the running weighted suprema

    M0(t)  = sup_tau (1+tau)^(1/2) ||eta||_2 + (1+tau) ||d_y eta||_2
    M0~(t) = sup_tau (1+tau)^(1/4) ||eta||_2 + (1+tau)^(3/4) ||d_y eta||_2

whose boundedness encodes the expected 2-d and 1-d decay rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diagnostics import SupFunctionalTracker
from .errors import ShapeError
from .nonlinear import q_embedded
from .solver import SolverConfig, run
from .spectral import (forward_transform, inverse_transform, sobolev_norm,
                       torus_average)
from .state import StateField
from .symbol import assemble_symbol_batch

_CHUNK = 65536


class ProfileState(StateField):
    """Reduced unknown eta = (sigma, w) on a grid with no periodic axes.

    The momentum keeps all three components; the leading 3 - ndim of them
    point along the averaged-out directions (``w_parallel``) and the rest
    along the open coordinates (``w_prime``).
    """

    def __init__(self, grid, params, sigma, w, time=0.0):
        if grid.ell != 0:
            raise ShapeError("profile states live on grids with no periodic axes")
        super().__init__(grid, params, sigma, w, time)

    @property
    def w_parallel(self):
        return self.m[: 3 - self.grid.ndim]

    @property
    def w_prime(self):
        return self.m[3 - self.grid.ndim:]

    @classmethod
    def from_average(cls, state):
        """Torus average of a full state, the natural profile initial data."""
        grid = state.grid.reduced()
        avg = torus_average(state.stacked(), state.grid)
        return cls(grid, state.params, avg[0], avg[1:], state.time)


def profile_nonlinearity_spectral(coeffs, grid, params, dealias=True):
    """Quadratic source B(eta) in spectral form, same shape as the input."""
    if grid.ell != 0:
        raise ShapeError("profile source expects a reduced grid")
    if dealias:
        coeffs = coeffs * grid.dealias_mask
    fields = inverse_transform(coeffs, grid)
    sigma, w = fields[0], fields[1:]
    qj = q_embedded(grid)
    sig_sq_hat = forward_transform(sigma * sigma, grid)
    out = np.zeros_like(coeffs)
    for j in range(3):
        gj = np.zeros(grid.shape, dtype=complex)
        for i in range(3):
            if qj[i] is None:
                continue
            gj -= 1j * qj[i] * forward_transform(w[i] * w[j], grid)
        if qj[j] is not None:
            gj -= params.alpha * 1j * qj[j] * sig_sq_hat
        out[1 + j] = gj
    if dealias:
        out *= grid.dealias_mask
    return out


def _apply_symbol(coeffs, grid, params):
    """-L eta in spectral form (the linear right-hand side)."""
    qv = grid.qvec3()
    flat = coeffs.reshape(4, grid.size)
    out = np.empty_like(flat)
    for lo in range(0, grid.size, _CHUNK):
        L = assemble_symbol_batch(qv[lo:lo + _CHUNK], params)
        out[:, lo:lo + _CHUNK] = -np.einsum("mij,jm->im", L, flat[:, lo:lo + _CHUNK])
    return out.reshape(coeffs.shape)


def profile_rhs(eta, dealias=True):
    """Full time derivative of a profile state, physical space, shape (4, ...)."""
    coeffs = eta.spectral()
    rhs = _apply_symbol(coeffs, eta.grid, eta.params)
    rhs += profile_nonlinearity_spectral(coeffs, eta.grid, eta.params, dealias)
    return inverse_transform(rhs, eta.grid)


def profile_rhs_2d(eta, dealias=True):
    """Time derivative of the 2-d profile system (one averaged axis)."""
    if eta.grid.ndim != 2:
        raise ShapeError("2-d profile system needs a rank-2 grid")
    return profile_rhs(eta, dealias)


def profile_rhs_1d(eta, dealias=True):
    """Time derivative of the 1-d profile system (two averaged axes)."""
    if eta.grid.ndim != 1:
        raise ShapeError("1-d profile system needs a rank-1 grid")
    return profile_rhs(eta, dealias)


def profile_nonlinearity_flux(eta, dealias=True):
    """Quadratic flux b with B(eta) = Div' b, 2-d case, shape (2, 3, ...).

    b[i, j] = -w_{i+1} w_j - alpha sigma^2 (when open axis i carries momentum
    component j); the columns j cover all three momentum components.
    """
    grid = eta.grid
    if grid.ndim != 2 or grid.ell != 0:
        raise ShapeError("flux form is defined for the 2-d profile system")
    coeffs = eta.spectral()
    if dealias:
        coeffs = coeffs * grid.dealias_mask
    fields = inverse_transform(coeffs, grid)
    sigma, w = fields[0], fields[1:]
    off = 3 - grid.ndim
    b = np.zeros((grid.ndim, 3) + grid.shape)
    for i in range(grid.ndim):
        for j in range(3):
            b[i, j] = -w[off + i] * w[j]
            if off + i == j:
                b[i, j] -= eta.params.alpha * sigma * sigma
    return b


def divergence_of_flux(b, grid, dealias=True):
    """Div' b evaluated spectrally; returns the momentum source, shape (3, ...)."""
    out = np.zeros((3,) + grid.shape, dtype=complex)
    for i in range(grid.ndim):
        c = forward_transform(b[i], grid)
        out += 1j * grid.q_axis(i) * c
    if dealias:
        out *= grid.dealias_mask
    return inverse_transform(out, grid)


# ---------------------------------------------------------------------------
# decay bookkeeping
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyRecord:
    """One sample of the profile energy functional."""

    t: float
    eta_H2_sq: float
    accumulated_dissipation: float

    @property
    def N_t(self):
        return self.eta_H2_sq + self.accumulated_dissipation


def _grad_weighted_sq(field, grid, s):
    """V * sum |q|^2 (1 + |q|^2)^s |c|^2, i.e. ||grad field||_{H^s}^2."""
    c = forward_transform(np.asarray(field), grid)
    weight = grid.q_sq * (1.0 + grid.q_sq) ** s
    if c.ndim > grid.ndim:
        total = sum(float(np.sum(weight * np.abs(comp) ** 2))
                    for comp in c.reshape((-1,) + grid.shape))
    else:
        total = float(np.sum(weight * np.abs(c) ** 2))
    return grid.volume * total


def dissipation_integrand(eta, dealias=True):
    """||d_t eta||_H1^2 + ||d_y w||_H2^2 + ||d_y sigma||_H1^2 at one time."""
    rhs = profile_rhs(eta, dealias)
    return (sobolev_norm(rhs, eta.grid, 1) ** 2
            + _grad_weighted_sq(eta.m, eta.grid, 2)
            + _grad_weighted_sq(eta.phi, eta.grid, 1))


class EnergyTracker:
    """Streaming N(t) accumulator; trapezoid rule between samples."""

    def __init__(self, dealias=True):
        self.dealias = dealias
        self.records = []
        self._last = None

    def __call__(self, state, step=None):
        t = state.time
        if self.records and t <= self.records[-1].t:
            return
        integrand = dissipation_integrand(state, self.dealias)
        acc = 0.0
        if self._last is not None:
            t0, f0, acc0 = self._last
            acc = acc0 + 0.5 * (t - t0) * (f0 + integrand)
        self._last = (t, integrand, acc)
        self.records.append(EnergyRecord(t, sobolev_norm(state.stacked(), state.grid, 2) ** 2, acc))


def sup_tracker_for(grid, variant=None):
    """M0 tracker for the 2-d system, M0_tilde for the 1-d one."""
    kind = variant or ("M0" if grid.ndim == 2 else "M0_tilde")
    return SupFunctionalTracker(kind)


def energy_N(states, dealias=True):
    """EnergyRecord series for an in-memory trajectory (see EnergyTracker)."""
    tracker = EnergyTracker(dealias)
    for eta in states:
        tracker(eta)
    return tracker.records


def decay_functional_m0(states, variant=None):
    """Running-sup series [(t, M0(t))] for a trajectory of profile states."""
    tracker = None
    for eta in states:
        tracker = tracker or sup_tracker_for(eta.grid, variant)
        tracker(eta)
    return tracker.series if tracker else []


@dataclass
class ProfileRunResult:
    final: ProfileState
    energy: list
    m0: list


def profile_run(eta0, t_end, config=None, diagnostics_stride=1, sinks=(),
                out_dir=None, checkpoint_stride=None):
    """Advance a profile state, collecting N(t) and M0(t) along the way."""
    energy = EnergyTracker()
    sup = sup_tracker_for(eta0.grid)
    final = run(eta0, t_end, config or SolverConfig(),
                diagnostics_stride=diagnostics_stride,
                sinks=(energy, sup) + tuple(sinks),
                checkpoint_stride=checkpoint_stride, out_dir=out_dir,
                source=profile_nonlinearity_spectral)
    final = ProfileState(final.grid, final.params, final.phi, final.m, final.time)
    return ProfileRunResult(final, energy.records, sup.series)
