"""Grids, fluid parameters, and frequency lattices.

The model lives on a mixed domain with ``ell`` periodic coordinates (a torus
of circumference 2*pi per axis by default) and ``3 - ell`` unbounded
coordinates.  Computationally the unbounded directions are truncated to a
long periodic box of length L, so every field is stored on a fully periodic
rectangular lattice and all calculus is spectral.  The frequency along axis i
is q_i = 2*pi*n_i/L_i with integer n_i; periodic axes therefore carry integer
wavenumbers k while truncated axes carry a fine rational sampling of the
continuum frequency xi (spacing 2*pi/L).

Box truncation is faithful only until acoustic wavefronts wrap around an open
axis.  The wrap horizon T = L_min/(2*(gamma + 1)) is exposed on the grid and
every decay fit is expected to stay inside 0.9*T.

Lower dimensional grids (``ndim`` = 1 or 2, no periodic axes) host the
reduced systems obtained by averaging over the torus directions; they reuse
the same lattice conventions with the leading axes removed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, ShapeError

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# pressure laws and fluid parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PressureLaw:
    """Barotropic pressure p(rho) with rho = 1 the background density.

    Supported kinds:
      * ``quadratic``: p(rho) = rho**2
      * ``adiabatic``: p(rho) = rho**kappa, kappa > 1
    """

    kind: str = "quadratic"
    kappa: float = 2.0

    def __post_init__(self):
        if self.kind not in ("quadratic", "adiabatic"):
            raise ParameterError(f"unknown pressure law {self.kind!r}")
        if self.kind == "adiabatic" and not self.kappa > 1.0:
            raise ParameterError("adiabatic exponent must exceed 1 (convexity at rho = 1)")

    def pressure(self, rho):
        if self.kind == "quadratic":
            return rho ** 2
        return rho ** self.kappa

    def dp(self, rho):
        if self.kind == "quadratic":
            return 2.0 * rho
        return self.kappa * rho ** (self.kappa - 1.0)

    def d2p(self, rho):
        if self.kind == "quadratic":
            return 2.0 * np.ones_like(np.asarray(rho, dtype=float))
        return self.kappa * (self.kappa - 1.0) * rho ** (self.kappa - 2.0)


@dataclass(frozen=True)
class FluidParams:
    """Viscosities and sound-speed data of the linearized system.

    gamma = sqrt(p'(1)) is the background sound speed and
    alpha = p''(1)/(2*gamma**2) the quadratic pressure coefficient; both are
    derived from the pressure law and cross-checked to 1e-12 when supplied
    explicitly.  Admissibility requires nu1 > 0 and nu2 >= nu1/3 (equivalent
    to 2/3*mu + mu' >= 0 for the physical viscosities).
    """

    nu1: float = 1.0
    nu2: float = 1.0
    law: PressureLaw = field(default_factory=PressureLaw)
    gamma: float = None
    alpha: float = None

    def __post_init__(self):
        if not self.nu1 > 0.0:
            raise ParameterError("nu1 must be positive")
        if self.nu2 < self.nu1 / 3.0 - 1e-15:
            raise ParameterError("need nu2 >= nu1/3 (viscosity admissibility)")
        g = math.sqrt(float(self.law.dp(1.0)))
        a = float(self.law.d2p(1.0)) / (2.0 * g * g)
        if self.gamma is None:
            object.__setattr__(self, "gamma", g)
        elif abs(self.gamma - g) > 1e-12:
            raise ParameterError(f"gamma {self.gamma} inconsistent with law ({g})")
        if self.alpha is None:
            object.__setattr__(self, "alpha", a)
        elif abs(self.alpha - a) > 1e-12:
            raise ParameterError(f"alpha {self.alpha} inconsistent with law ({a})")
        if not self.alpha > 0.0:
            raise ParameterError("alpha = p''(1)/(2 gamma^2) must be positive")

    @property
    def nu(self):
        """Total longitudinal viscosity nu1 + nu2."""
        return self.nu1 + self.nu2

    def as_tuple(self):
        return (self.nu1, self.nu2, self.gamma, self.alpha)


def params_from_law(nu1=1.0, nu2=1.0, law="quadratic", kappa=2.0):
    """Convenience constructor from a pressure-law name."""
    return FluidParams(nu1=nu1, nu2=nu2, law=PressureLaw(law, kappa))


# ---------------------------------------------------------------------------
# frequency vectors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrequencyVector:
    """A single lattice frequency split into torus part k and open part xi."""

    k: tuple
    xi: tuple

    @property
    def q(self):
        return np.array(self.k + self.xi, dtype=float)

    @property
    def p(self):
        """|q|^2 = |k|^2 + |xi|^2."""
        q = self.q
        return float(q @ q)

    @property
    def q_abs(self):
        return math.sqrt(self.p)


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

class Grid:
    """Uniform periodic lattice with cached frequency arrays.

    Parameters
    ----------
    resolution : tuple of int
        Points per axis; each entry even and >= 4 (powers of two recommended).
    lengths : tuple of float
        Box length per axis.
    ell : int
        Number of leading axes that are genuinely periodic; the remaining
        axes are truncated open directions.
    """

    def __init__(self, resolution, lengths, ell):
        resolution = tuple(int(n) for n in resolution)
        lengths = tuple(float(L) for L in lengths)
        if len(resolution) != len(lengths):
            raise ShapeError("resolution and lengths must have equal rank")
        ndim = len(resolution)
        if ndim not in (1, 2, 3):
            raise ShapeError("grid rank must be 1, 2, or 3")
        if not 0 <= ell <= ndim:
            raise ParameterError(f"ell = {ell} outside 0..{ndim}")
        for n in resolution:
            if n < 4 or n % 2:
                raise ParameterError(f"resolution entries must be even and >= 4, got {n}")
        for L in lengths:
            if not L > 0.0:
                raise ParameterError("box lengths must be positive")
        self.resolution = resolution
        self.lengths = lengths
        self.ell = ell
        self.ndim = ndim
        self.shape = resolution
        self.size = int(np.prod(resolution))
        self.cell_volume = float(np.prod([L / n for L, n in zip(lengths, resolution)]))
        self.volume = float(np.prod(lengths))

        # per-axis frequencies 2*pi*n/L, broadcastable to the full lattice
        self._q1 = []
        for ax, (n, L) in enumerate(zip(resolution, lengths)):
            q = TWO_PI * np.fft.fftfreq(n, d=L / n)
            shape = [1] * ndim
            shape[ax] = n
            self._q1.append(q.reshape(shape))
        self.q_sq = sum(q * q for q in self._q1)          # |q|^2 on the lattice
        self.xi_sq = sum(q * q for q in self._q1[ell:]) if ell < ndim else np.zeros(resolution)

        # 2/3-rule mask: keep |n_i| <= floor(N_i/3) on every axis
        mask = np.ones(resolution, dtype=bool)
        for ax, n in enumerate(resolution):
            idx = np.abs(np.fft.fftfreq(n) * n)
            shape = [1] * ndim
            shape[ax] = n
            mask = mask & (idx.reshape(shape) <= n // 3)
        self.dealias_mask = mask

    # -- coordinates --------------------------------------------------------

    def axis_coords(self, ax):
        """Physical coordinates along one axis, starting at 0."""
        n, L = self.resolution[ax], self.lengths[ax]
        return L * np.arange(n) / n

    def meshgrid(self):
        return np.meshgrid(*[self.axis_coords(ax) for ax in range(self.ndim)], indexing="ij")

    # -- frequencies ---------------------------------------------------------

    def q_axis(self, ax):
        """Broadcastable frequency array of one axis."""
        return self._q1[ax]

    def qvec3(self):
        """All lattice frequencies embedded as 3-vectors, shape (size, 3).

        Grids of rank d < 3 are zero padded on the left so the momentum
        component ordering matches the parent 3-d problem (a rank-2 grid is
        the open part of an ell = 1 domain, rank 1 of ell = 2).
        """
        qs = np.zeros((self.size, 3))
        off = 3 - self.ndim
        for ax in range(self.ndim):
            qs[:, off + ax] = np.broadcast_to(self._q1[ax], self.shape).ravel()
        return qs

    def q_max(self):
        """Largest |q| on the lattice."""
        return math.sqrt(float(np.max(self.q_sq)))

    def dealias_cutoffs(self):
        """Per-axis retained frequency bound 2*pi*floor(N/3)/L."""
        return tuple(TWO_PI * (n // 3) / L for n, L in zip(self.resolution, self.lengths))

    # -- derived quantities --------------------------------------------------

    @property
    def open_axes(self):
        return tuple(range(self.ell, self.ndim))

    def wrap_horizon(self, gamma):
        """Time for an acoustic front to wrap the shortest open axis."""
        if self.ell == self.ndim:
            return math.inf
        L = min(self.lengths[self.ell:])
        return L / (2.0 * (gamma + 1.0))

    def check_field(self, arr):
        arr = np.asarray(arr)
        if arr.shape[-self.ndim:] != self.shape:
            raise ShapeError(f"field shape {arr.shape} does not end in {self.shape}")
        return arr

    def reduced(self):
        """Grid of the open directions only (torus axes averaged out)."""
        if self.ell == 0:
            return self
        if self.ell == self.ndim:
            raise ParameterError("fully periodic grid has no open directions")
        return Grid(self.resolution[self.ell:], self.lengths[self.ell:], ell=0)

    def __repr__(self):
        return (f"Grid(resolution={self.resolution}, lengths="
                f"{tuple(round(L, 6) for L in self.lengths)}, ell={self.ell})")


@dataclass(frozen=True)
class DomainSpec:
    """Declarative description of the full 3-d mixed domain."""

    ell: int
    resolution: tuple
    periodic_lengths: tuple = None
    open_lengths: tuple = None

    def __post_init__(self):
        if self.ell not in (1, 2, 3):
            raise ParameterError("ell must be 1, 2, or 3")
        res = tuple(int(n) for n in self.resolution)
        if len(res) != 3:
            raise ShapeError("resolution must list three axes")
        object.__setattr__(self, "resolution", res)
        per = self.periodic_lengths or tuple(TWO_PI for _ in range(self.ell))
        opn = self.open_lengths or tuple(100.0 * TWO_PI for _ in range(3 - self.ell))
        per = tuple(float(x) for x in per)
        opn = tuple(float(x) for x in opn)
        if len(per) != self.ell or len(opn) != 3 - self.ell:
            raise ShapeError("length tuples inconsistent with ell")
        object.__setattr__(self, "periodic_lengths", per)
        object.__setattr__(self, "open_lengths", opn)

    def grid(self):
        return Grid(self.resolution, self.periodic_lengths + self.open_lengths, self.ell)
