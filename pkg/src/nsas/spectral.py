"""Spectral transforms, derivatives, averages, and norms.

Coefficient convention: ``forward_transform`` returns Fourier series
coefficients c_q with f(z) = sum_q c_q exp(i q . z), i.e. the raw FFT divided
by the number of grid points.  A constant field c therefore transforms to a
single zero-frequency coefficient of value c.  Under this convention

    ||f||_L2^2      = V * sum_q |c_q|^2            (Parseval)
    ||D^k f||_L2^2  = V * sum_q |q|^(2k) |c_q|^2
    ||f||_Hs^2      = V * sum_q (1 + |q|^2)^s |c_q|^2

with V the box volume.  Physical-space integrals use the rectangle rule,
which is spectrally accurate for smooth periodic integrands and agrees with
the Parseval route to machine precision.

All reductions use numpy's fixed pairwise summation, so results are
bit-identical regardless of the FFT worker count (``NSAS_THREADS``).
"""

from __future__ import annotations

import math
import os

import numpy as np
import scipy.fft

from .errors import ParameterError, ShapeError

_ALLOWED_LEBESGUE = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 10.0 / 3.0, math.inf)


def fft_workers():
    """Worker count for FFT calls, capped by the NSAS_THREADS env var."""
    raw = os.environ.get("NSAS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def forward_transform(field, grid):
    """Physical field -> Fourier series coefficients on the lattice."""
    field = grid.check_field(field)
    axes = tuple(range(-grid.ndim, 0))
    return scipy.fft.fftn(field, axes=axes, workers=fft_workers()) / grid.size


def inverse_transform(coeffs, grid, real=True):
    """Fourier series coefficients -> physical field.

    With ``real`` set (the default) the imaginary residue of a Hermitian
    coefficient array is discarded.
    """
    coeffs = grid.check_field(coeffs)
    axes = tuple(range(-grid.ndim, 0))
    out = scipy.fft.ifftn(coeffs * grid.size, axes=axes, workers=fft_workers())
    return out.real if real else out


def spectral_derivative(field, grid, axis, order=1):
    """Differentiate along one axis by multiplying with (i q_axis)**order."""
    if not 0 <= axis < grid.ndim:
        raise ShapeError(f"axis {axis} outside 0..{grid.ndim - 1}")
    if order < 0:
        raise ParameterError("derivative order must be nonnegative")
    c = forward_transform(field, grid)
    c = c * (1j * grid.q_axis(axis)) ** order
    return inverse_transform(c, grid)


def hermitian_defect(coeffs, grid):
    """Max |c(q) - conj(c(-q))| over the lattice (0 for real fields)."""
    coeffs = grid.check_field(coeffs)
    axes = tuple(range(-grid.ndim, 0))
    flipped = coeffs
    for ax in axes:
        flipped = np.roll(np.flip(flipped, axis=ax), 1, axis=ax)
    return float(np.max(np.abs(coeffs - np.conj(flipped))))


def torus_average(field, grid):
    """Mean over the periodic axes; result lives on the reduced grid."""
    field = grid.check_field(field)
    if grid.ell == 0:
        return field
    axes = tuple(range(-grid.ndim, -grid.ndim + grid.ell))
    return field.mean(axis=axes)


def lift_average(avg, grid):
    """Constant extension of a reduced-grid field back to the full grid."""
    shape = avg.shape[:-(grid.ndim - grid.ell)] if grid.ell < grid.ndim else avg.shape
    target = shape + grid.shape
    expand = avg.reshape(shape + (1,) * grid.ell + grid.shape[grid.ell:]) \
        if grid.ell < grid.ndim else avg.reshape(shape + (1,) * grid.ndim)
    return np.broadcast_to(expand, target)


def _magnitude(field, grid):
    """Pointwise Euclidean magnitude; leading axes are vector components."""
    field = grid.check_field(np.asarray(field, dtype=float))
    if field.ndim == grid.ndim:
        return np.abs(field)
    comps = field.reshape((-1,) + grid.shape)
    return np.sqrt(np.sum(comps * comps, axis=0))


def lebesgue_norm(field, grid, p=2.0):
    """Rectangle-rule L^p norm; vector fields use the Euclidean magnitude."""
    p = float(p)
    if not any(abs(p - a) < 1e-12 or (p == a) for a in _ALLOWED_LEBESGUE):
        raise ParameterError(f"unsupported Lebesgue exponent {p}")
    mag = _magnitude(field, grid)
    if math.isinf(p):
        return float(np.max(mag))
    return float((np.sum(mag ** p) * grid.cell_volume) ** (1.0 / p))


def _coeff_weighted_norm(field, grid, weight):
    field = grid.check_field(np.asarray(field))
    c = forward_transform(field, grid)
    if c.ndim > grid.ndim:
        c = c.reshape((-1,) + grid.shape)
        total = sum(float(np.sum(weight * np.abs(comp) ** 2)) for comp in c)
    else:
        total = float(np.sum(weight * np.abs(c) ** 2))
    return math.sqrt(grid.volume * total)


def sobolev_norm(field, grid, s):
    """H^s norm via (1 + |q|^2)^s spectral weights, s = 0..4."""
    if int(s) != s or not 0 <= s <= 4:
        raise ParameterError("Sobolev order must be an integer in 0..4")
    weight = (1.0 + grid.q_sq) ** int(s)
    return _coeff_weighted_norm(field, grid, weight)


def derivative_l2(field, grid, order, open_only=False):
    """L2 norm of the order-th full gradient, |q|^(2*order) weights.

    With ``open_only`` the weight uses only the open-direction frequencies,
    giving the norm of derivatives along the truncated axes.
    """
    if int(order) != order or order < 0:
        raise ParameterError("derivative order must be a nonnegative integer")
    base = grid.xi_sq if open_only else grid.q_sq
    weight = base ** int(order) if order else np.ones(grid.shape)
    return _coeff_weighted_norm(field, grid, weight)


def parseval_l2(field, grid):
    """L2 norm via the spectral route (equals lebesgue_norm(p=2))."""
    return derivative_l2(field, grid, 0)


def embed_coefficients(coeffs, coarse, fine):
    """Copy lattice coefficients onto a finer grid of the same box.

    Every coarse mode keeps its integer index (hence its frequency); new fine
    modes start at zero, so the embedded array represents the same
    trigonometric polynomial.  The coarse Nyquist rows must be empty: they
    have no conjugate partner on the coarse lattice and would change meaning.
    """
    if coarse.lengths != fine.lengths or coarse.ell != fine.ell:
        raise ShapeError("grids must share box lengths and ell")
    coeffs = coarse.check_field(np.asarray(coeffs))
    lead = coeffs.shape[:-coarse.ndim]
    scale = float(np.max(np.abs(coeffs))) or 1.0
    src, idx = [], []
    for ax, (nc, nf) in enumerate(zip(coarse.resolution, fine.resolution)):
        if nf < nc:
            raise ShapeError("fine resolution must dominate the coarse one")
        modes = np.rint(np.fft.fftfreq(nc) * nc).astype(int)
        take = np.arange(nc)
        if nf > nc:
            nyq = np.take(coeffs, nc // 2, axis=len(lead) + ax)
            if np.max(np.abs(nyq)) > 1e-13 * scale:
                raise ShapeError(f"axis {ax}: significant Nyquist row cannot be embedded")
            take = take[np.abs(modes) < nc // 2]   # drop the residue with the row
        src.append(take)
        idx.append(modes[take] % nf)
    out = np.zeros(lead + fine.shape, dtype=complex)
    out[(...,) + np.ix_(*idx)] = coeffs[(...,) + np.ix_(*src)]
    return out
