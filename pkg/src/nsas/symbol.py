"""Fourier symbol of the linearized system and its spectrum.

For a lattice frequency q the linearization about the rest state acts mode
by mode through the 4x4 matrix

    L(q) = [ 0          i gamma q^T                       ]
           [ i gamma q  nu1 |q|^2 I_3 + nu2 q q^T         ]

(the sign convention is u_t + L u = nonlinear terms).  With p = |q|^2 its
eigenvalues are

    lambda_1 = lambda_2 = nu1 p                      (shear pair, m _|_ q)
    lambda_pm = ((nu1+nu2) p +- sqrt((nu1+nu2)^2 p^2 - 4 gamma^2 p)) / 2

so Vieta gives lambda_+ + lambda_- = (nu1+nu2) p and
lambda_+ lambda_- = gamma^2 p; as p -> infinity the slow acoustic root tends
to gamma^2/(nu1+nu2).  For the real-discriminant branch lambda_- is
evaluated through the product identity to avoid cancellation, and the
complex branch puts the nonnegative imaginary part on lambda_+.

The constant-background linearization (relevant on the full torus) is also
assembled here; its eigenvalues admit the closed forms

    lambda_1 = lambda_2 = g/(phib+g) * (nu1 |k|^2 + i mb.k)
    lambda_pm = ( g/(phib+g) * ((nu1+nu2)|k|^2 + 2 i mb.k)
                  +- sqrt(g^2 (nu1+nu2)^2 |k|^4/(phib+g)^2 - 4 c |k|^2) )/2

with c = p'((phib + g)/g), which reduce to the rest-state spectrum at zero
background.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .domain import FluidParams, FrequencyVector
from .errors import ParameterError, StabilityError


# ---------------------------------------------------------------------------
# rest-state symbol
# ---------------------------------------------------------------------------

def assemble_symbol_batch(qvecs, params):
    """L(q) for an (..., 3) array of frequencies; returns (..., 4, 4)."""
    q = np.asarray(qvecs, dtype=float)
    if q.shape[-1] != 3:
        raise ParameterError("frequency vectors must have three components")
    g = params.gamma
    p = np.sum(q * q, axis=-1)
    out = np.zeros(q.shape[:-1] + (4, 4), dtype=complex)
    out[..., 0, 1:] = 1j * g * q
    out[..., 1:, 0] = 1j * g * q
    out[..., 1:, 1:] = params.nu1 * p[..., None, None] * np.eye(3)
    out[..., 1:, 1:] += params.nu2 * q[..., :, None] * q[..., None, :]
    return out


def assemble_symbol(freq, params):
    """L(q) for a single frequency (FrequencyVector or length-3 array)."""
    q = freq.q if isinstance(freq, FrequencyVector) else np.asarray(freq, dtype=float)
    return assemble_symbol_batch(q, params)


@dataclass
class EigenSet:
    """Spectrum of L(q) at p = |q|^2 (entries may be arrays)."""

    p: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray

    @property
    def discriminant(self):
        return self.lambda_plus * self.lambda_plus - 2.0 * self.lambda_plus * self.lambda_minus \
            + self.lambda_minus * self.lambda_minus

    def as_array(self):
        """Stacked eigenvalues, shape (..., 4)."""
        return np.stack([np.asarray(self.lambda1, dtype=complex),
                         np.asarray(self.lambda2, dtype=complex),
                         self.lambda_plus, self.lambda_minus], axis=-1)


def symbol_eigenvalues(p, params):
    """Closed-form spectrum at p = |q|^2 >= 0 (scalar or array p)."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise ParameterError("p = |q|^2 must be nonnegative")
    nu = params.nu
    g2 = params.gamma ** 2
    disc = nu * nu * p * p - 4.0 * g2 * p
    sqrt_disc = np.sqrt(disc.astype(complex))
    lam_p = 0.5 * (nu * p + sqrt_disc)
    # product form gamma^2 p / lambda_+ avoids cancellation when disc >= 0
    safe = np.where(np.abs(lam_p) > 0, lam_p, 1.0)
    lam_m = np.where(disc >= 0, np.where(p > 0, g2 * p / safe, 0.0),
                     0.5 * (nu * p - sqrt_disc))
    lam1 = params.nu1 * p
    return EigenSet(p=p, lambda1=lam1, lambda2=lam1.copy() if hasattr(lam1, "copy") else lam1,
                    lambda_plus=lam_p, lambda_minus=lam_m)


def min_real_part(p, params):
    """min over the four branches of Re lambda at p (scalar or array)."""
    es = symbol_eigenvalues(p, params)
    return np.minimum(np.asarray(es.lambda1, dtype=float), es.lambda_minus.real)


def admissible_r0_window(params):
    """Upper bound of the admissible r0^2 range: min(1, gamma^2/nu^2)."""
    return min(1.0, params.gamma ** 2 / params.nu ** 2)


def spectral_gap(r0_sq, params, verify=True, samples=4096):
    """Low-frequency decay rate a = min(nu1 r0^2, gamma^2/(2(nu1+nu2))).

    Takes the squared split radius directly (it is the quantity every
    formula uses, and passing it avoids a lossy sqrt round trip).  Requires
    0 < r0^2 < min(1, gamma^2/(nu1+nu2)^2).  When ``verify`` is set the
    sampled minimum of min Re lambda over p in [r0^2, 1e4] is compared
    against a*(1 - 1e-9); some admissible viscosity ratios genuinely dip
    below a near p = r0^2 (the shear rate scales with nu1 but the acoustic
    rate with (nu1+nu2)/2), in which case a warning reports the scanned
    minimum instead of failing.
    """
    r0_sq = float(r0_sq)
    top = admissible_r0_window(params)
    if not 0.0 < r0_sq < top:
        raise ParameterError(f"r0^2 = {r0_sq:.6g} outside the window (0, {top:.6g})")
    a = min(params.nu1 * r0_sq, params.gamma ** 2 / (2.0 * params.nu))
    if verify:
        p = np.geomspace(r0_sq, 1e4, samples)
        scanned = float(np.min(min_real_part(p, params)))
        if scanned < a * (1.0 - 1e-9):
            warnings.warn(
                f"sampled min Re lambda = {scanned:.6g} dips below a = {a:.6g} "
                "for this viscosity ratio", RuntimeWarning, stacklevel=2)
    return a


def half_gap(r0_sq, params):
    """The exponential rate a0 = a/2 used for high-frequency bounds."""
    return 0.5 * spectral_gap(r0_sq, params, verify=False)


# ---------------------------------------------------------------------------
# constant-background symbol (fully periodic case)
# ---------------------------------------------------------------------------

@dataclass
class PerturbedSymbol:
    """Linearization matrix about a constant state (phib, mb)."""

    entries: np.ndarray
    k: np.ndarray
    background: tuple
    c: float


def _background_arrays(background, params):
    phib = float(background[0])
    mb = np.asarray(background[1], dtype=float).reshape(3)
    if phib + params.gamma <= 0:
        raise ParameterError("background density must stay positive")
    c = float(params.law.dp((phib + params.gamma) / params.gamma))
    return phib, mb, c


def assemble_perturbed_symbol(k, background, params):
    """4x4 matrix of the constant-background linearization at frequency k."""
    phib, mb, c = _background_arrays(background, params)
    k = np.asarray(k, dtype=float).reshape(3)
    g = params.gamma
    G2 = phib + g
    kk = float(k @ k)
    mk = float(mb @ k)
    M = np.zeros((4, 4), dtype=complex)
    M[0, 1:] = 1j * g * k
    M[1:, 0] = (-1j * g * mk * mb / G2 ** 2 + 1j * c * k / g
                - params.nu1 * g * kk * mb / G2 ** 2 - params.nu2 * g * mk * k / G2 ** 2)
    M[1:, 1:] = (g / G2) * (1j * np.outer(mb, k) + 1j * mk * np.eye(3)
                            + params.nu1 * kk * np.eye(3) + params.nu2 * np.outer(k, k))
    return PerturbedSymbol(entries=M, k=k, background=(phib, tuple(mb)), c=c)


def perturbed_eigenvalues(k, background, params):
    """Closed-form spectrum of the constant-background symbol.

    ``k`` may be a single 3-vector or an (..., 3) array; returns an EigenSet
    in the same shape with p = |k|^2.
    """
    phib, mb, c = _background_arrays(background, params)
    k = np.asarray(k, dtype=float)
    g = params.gamma
    G2 = phib + g
    kk = np.sum(k * k, axis=-1)
    mk = k @ mb
    lam1 = (g / G2) * (params.nu1 * kk + 1j * mk)
    base = (g / G2) * (params.nu * kk + 2j * mk)
    disc = (g * params.nu / G2) ** 2 * kk * kk - 4.0 * c * kk
    sqrt_disc = np.sqrt(disc.astype(complex) if hasattr(disc, "astype") else complex(disc))
    lam_p = 0.5 * (base + sqrt_disc)
    lam_m = 0.5 * (base - sqrt_disc)
    return EigenSet(p=kk, lambda1=lam1, lambda2=np.copy(lam1), lambda_plus=lam_p,
                    lambda_minus=lam_m)


def perturbed_gap(background, params, k_max=16):
    """Verified decay rate a0 = min Re lambda over integer 0 < |k|_inf <= k_max.

    Raises StabilityError (naming the offending k) when some mode fails to
    decay; warns when the minimum sits on the outer shell, since then the
    scan window may be too small.
    """
    if k_max < 1:
        raise ParameterError("k_max must be at least 1")
    rng = np.arange(-k_max, k_max + 1)
    K = np.stack(np.meshgrid(rng, rng, rng, indexing="ij"), axis=-1).reshape(-1, 3)
    K = K[np.any(K != 0, axis=1)]
    es = perturbed_eigenvalues(K.astype(float), background, params)
    re_min = np.min(np.stack([es.lambda1.real, es.lambda_plus.real, es.lambda_minus.real]), axis=0)
    idx = int(np.argmin(re_min))
    a0 = float(re_min[idx])
    if a0 <= 0.0:
        raise StabilityError(
            f"background not dissipative: Re lambda = {a0:.6g} at k = {tuple(K[idx])}")
    shell = np.max(np.abs(K), axis=1) == k_max
    if float(np.min(re_min[shell])) <= a0 * (1.0 + 1e-12):
        warnings.warn("spectral minimum attained on the outer shell; increase k_max",
                      RuntimeWarning, stacklevel=2)
    return a0, tuple(int(c) for c in K[idx])
