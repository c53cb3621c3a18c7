"""Quadratic source terms of the momentum equation.

In the (phi, m) variables the full system reads

    phi_t + gamma Div m = 0
    m_t - nu1 Lap m - nu2 grad Div m + gamma grad phi = G(phi, m)

with

    G = - Div( gamma/(phi+gamma) m (x) m )
        - nu1 Lap( phi/(phi+gamma) m )
        - nu2 grad Div( phi/(phi+gamma) m )
        - grad F(phi),

where F is the pressure Taylor remainder

    F(phi) = p(1 + phi/gamma) - p(1) - gamma phi
           = (phi^2/gamma^2) * int_0^1 (1-theta) p''(1 + theta phi/gamma) dtheta,

so F(phi) = alpha phi^2 + O(phi^3) with alpha = p''(1)/(2 gamma^2); for the
quadratic law F(phi) = alpha phi^2 exactly.  G vanishes at least
quadratically at the rest state and splits exactly into flux form
G = Div(Gt) + grad(gs) with

    Gt = -gamma/(phi+gamma) m (x) m - nu1 grad (x) (phi/(phi+gamma) m)
    gs = -nu2 Div(phi/(phi+gamma) m) - F(phi),

which keeps every torus average of G at zero on the periodic lattice.

Rational factors are evaluated pointwise in physical space; all products are
dealiased with the 2/3 rule before returning to spectral space.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import StateError
from .spectral import forward_transform, inverse_transform
from .state import VACUUM_MARGIN


def pressure_remainder(phi, params):
    """F(phi) in closed form; phi may be any array.

    Evaluated without subtracting near-equal terms: the naive
    p(1 + phi/gamma) - p(1) - gamma phi leaves O(1e-16) absolute noise that
    swamps the quadratic signal for small phi and leaks a spurious linear
    term into the source.
    """
    phi = np.asarray(phi, dtype=float)
    delta = phi / params.gamma
    law = params.law
    if law.kind == "quadratic":
        return delta * delta
    k = law.kappa
    # adiabatic: F = (1+d)^k - 1 - k d.  The direct expm1 form still cancels
    # one order at small d, so switch to the Taylor tail below 1e-3 (both
    # branches agree to ~1e-9 relative at the crossover).
    small = np.abs(delta) < 1e-3
    d = np.where(small, 0.0, delta)
    direct = np.expm1(k * np.log1p(d)) - k * d
    ds = np.where(small, delta, 0.0)
    c2 = 0.5 * k * (k - 1.0)
    taylor = c2 * (ds * ds) * (1.0 + (k - 2.0) / 3.0 * ds
                               + (k - 2.0) * (k - 3.0) / 12.0 * (ds * ds))
    return np.where(small, taylor, direct)


def pressure_remainder_quadrature(phi, params, nodes=16):
    """F(phi) by Gauss-Legendre quadrature of the remainder integral."""
    x, w = leggauss(nodes)
    theta = 0.5 * (x + 1.0)
    weight = 0.5 * w * (1.0 - theta)
    phi = np.asarray(phi, dtype=float)
    g = params.gamma
    acc = np.zeros_like(phi)
    for th, wt in zip(theta, weight):
        acc = acc + wt * params.law.d2p(1.0 + th * phi / g)
    return (phi * phi / (g * g)) * acc


def q_embedded(grid):
    """Broadcastable frequency arrays for the three momentum components.

    Momentum components whose direction was averaged away on a reduced grid
    carry no derivative; their entry is None.
    """
    off = 3 - grid.ndim
    return [grid.q_axis(j - off) if j >= off else None for j in range(3)]


def _physical_fields(coeffs, grid, params, dealias):
    if dealias:
        coeffs = coeffs * grid.dealias_mask
    fields = inverse_transform(coeffs, grid)
    phi, m = fields[0], fields[1:]
    rho = 1.0 + phi / params.gamma
    if float(rho.min()) < VACUUM_MARGIN:
        raise StateError(f"density margin violated: min rho = {float(rho.min()):.4g}")
    return phi, m


def nonlinearity_spectral(coeffs, grid, params, dealias=True):
    """Spectral coefficients of (0, G); input is the stacked state (4, ...)."""
    phi, m = _physical_fields(coeffs, grid, params, dealias)
    g = params.gamma
    inv = 1.0 / (phi + g)
    A = (phi * inv) * m                      # phi/(phi+gamma) m, shape (3, ...)
    F = pressure_remainder(phi, params)

    mask = grid.dealias_mask if dealias else 1.0
    A_hat = forward_transform(A, grid) * mask
    F_hat = forward_transform(F, grid) * mask
    qj = q_embedded(grid)

    div_A_hat = np.zeros(grid.shape, dtype=complex)
    for i in range(3):
        if qj[i] is not None:
            div_A_hat = div_A_hat + 1j * qj[i] * A_hat[i]

    gm = (g * inv) * m                       # gamma/(phi+gamma) m
    out = np.zeros((4,) + grid.shape, dtype=complex)
    for j in range(3):
        gj = params.nu1 * grid.q_sq * A_hat[j]          # -nu1 Lap(A)
        for i in range(3):
            if qj[i] is None:
                continue
            B_hat = forward_transform(gm[i] * m[j], grid) * mask
            gj = gj - 1j * qj[i] * B_hat                # -Div(B . e_j)
        if qj[j] is not None:
            gj = gj - params.nu2 * 1j * qj[j] * div_A_hat   # -nu2 grad Div(A)
            gj = gj - 1j * qj[j] * F_hat                    # -grad F
        out[1 + j] = gj
    return out


def momentum_source(state, dealias=True):
    """G(phi, m) as a physical 3-vector field."""
    grid = state.grid
    coeffs = forward_transform(state.stacked(), grid)
    out = nonlinearity_spectral(coeffs, grid, state.params, dealias=dealias)
    return inverse_transform(out[1:], grid)


def flux_decomposition(state, dealias=True):
    """The exact splitting G = Div(Gt) + grad(gs).

    Returns (Gt, gs): a (3, 3, ...) tensor whose first index is the
    divergence direction, and a scalar field.  Reassembling the divergence
    and gradient spectrally reproduces momentum_source to roundoff.
    """
    grid = state.grid
    params = state.params
    coeffs = forward_transform(state.stacked(), grid)
    phi, m = _physical_fields(coeffs, grid, params, dealias)
    g = params.gamma
    inv = 1.0 / (phi + g)
    A = (phi * inv) * m
    gm = (g * inv) * m

    mask = grid.dealias_mask if dealias else 1.0
    A_hat = forward_transform(A, grid) * mask
    qj = q_embedded(grid)

    Gt = np.zeros((3, 3) + grid.shape)
    for i in range(3):
        for j in range(3):
            prod_hat = forward_transform(gm[i] * m[j], grid) * mask
            Gt[i, j] = -inverse_transform(prod_hat, grid)
            if qj[i] is not None:
                Gt[i, j] -= inverse_transform(1j * qj[i] * A_hat[j], grid)

    div_A_hat = np.zeros(grid.shape, dtype=complex)
    for i in range(3):
        if qj[i] is not None:
            div_A_hat = div_A_hat + 1j * qj[i] * A_hat[i]
    F_hat = forward_transform(pressure_remainder(phi, params), grid) * mask
    gs = inverse_transform(-params.nu2 * div_A_hat - F_hat, grid)
    return Gt, gs


def reassemble_flux(Gt, gs, grid):
    """Div(Gt) + grad(gs) evaluated spectrally, returned as (3, ...)."""
    qj = q_embedded(grid)
    Gt_hat = forward_transform(Gt, grid)
    gs_hat = forward_transform(gs, grid)
    out = np.zeros((3,) + grid.shape, dtype=complex)
    for j in range(3):
        for i in range(3):
            if qj[i] is not None:
                out[j] = out[j] + 1j * qj[i] * Gt_hat[i, j]
        if qj[j] is not None:
            out[j] = out[j] + 1j * qj[j] * gs_hat
    return inverse_transform(out, grid)
