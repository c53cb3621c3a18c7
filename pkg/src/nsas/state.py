"""Field containers and the binary checkpoint format.

A state bundles the scalar field phi (scaled density perturbation) and the
3-component momentum m on one grid.  Reduced profile states reuse the same
container on a lower dimensional grid, reading phi as sigma and m as w.

Checkpoint layout (little endian throughout):

    magic   4 bytes  b"NSAS"
    version u32      currently 1
    ell     u32
    resolution 3*u32
    lengths    3*f64
    time       f64
    params     4*f64  (nu1, nu2, gamma, alpha)
    phi, m1, m2, m3   f64 arrays, z1 index fastest

The density stays away from vacuum: validation enforces
min(1 + phi/gamma) >= 0.1.
"""

from __future__ import annotations

import struct

import numpy as np

from .domain import FluidParams, Grid, PressureLaw
from .errors import DataError, ShapeError, StateError
from .spectral import forward_transform, hermitian_defect, inverse_transform

MAGIC = b"NSAS"
VERSION = 1
VACUUM_MARGIN = 0.1


class StateField:
    """phi and m sampled on a grid at one instant."""

    def __init__(self, grid, params, phi, m, time=0.0):
        self.grid = grid
        self.params = params
        self.phi = grid.check_field(np.asarray(phi, dtype=float))
        m = np.asarray(m, dtype=float)
        if m.shape != (3,) + grid.shape:
            raise ShapeError(f"momentum shape {m.shape} != {(3,) + grid.shape}")
        self.m = m
        self.time = float(time)

    # profile-system aliases
    @property
    def sigma(self):
        return self.phi

    @property
    def w(self):
        return self.m

    def stacked(self):
        """(4, ...) view with phi first."""
        return np.concatenate([self.phi[None], self.m], axis=0)

    def spectral(self):
        """Fourier coefficients of the stacked state, shape (4, ...)."""
        return forward_transform(self.stacked(), self.grid)

    @classmethod
    def from_spectral(cls, grid, params, coeffs, time=0.0):
        fields = inverse_transform(coeffs, grid)
        return cls(grid, params, fields[0], fields[1:], time)

    @classmethod
    def zero(cls, grid, params, time=0.0):
        return cls(grid, params, np.zeros(grid.shape), np.zeros((3,) + grid.shape), time)

    def copy(self):
        return StateField(self.grid, self.params, self.phi.copy(), self.m.copy(), self.time)

    def min_density(self):
        return float(1.0 + np.min(self.phi) / self.params.gamma)

    def validate(self, check_symmetry=False):
        """Raise StateError on non-finite data or a vacuum-margin violation."""
        if not (np.isfinite(self.phi).all() and np.isfinite(self.m).all()):
            raise StateError("state contains non-finite values")
        rho_min = self.min_density()
        if rho_min < VACUUM_MARGIN:
            raise StateError(f"density margin violated: min rho = {rho_min:.4g} < {VACUUM_MARGIN}")
        if check_symmetry:
            defect = hermitian_defect(self.spectral(), self.grid)
            scale = max(1.0, float(np.max(np.abs(self.phi))), float(np.max(np.abs(self.m))))
            if defect > 1e-10 * scale:
                raise StateError(f"spectral coefficients not Hermitian (defect {defect:.3g})")
        return self


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<4sII3I3dd4d")


def write_checkpoint(state, path):
    """Serialize a 3-d state; array bytes are written z1-fastest."""
    grid = state.grid
    if grid.ndim != 3:
        raise DataError("checkpoints are defined for 3-d grids only")
    header = _HEADER.pack(
        MAGIC, VERSION, grid.ell, *grid.resolution, *grid.lengths,
        state.time, *state.params.as_tuple())
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(state.phi, dtype="<f8").tobytes(order="F"))
        for j in range(3):
            fh.write(np.ascontiguousarray(state.m[j], dtype="<f8").tobytes(order="F"))


def _params_from_header(nu1, nu2, gamma, alpha):
    # the two supported laws determine (gamma, alpha) uniquely
    for law in (PressureLaw("quadratic"), PressureLaw("adiabatic", kappa=gamma * gamma)):
        try:
            return FluidParams(nu1=nu1, nu2=nu2, law=law, gamma=gamma, alpha=alpha)
        except Exception:
            continue
    raise DataError(f"checkpoint params (gamma={gamma}, alpha={alpha}) match no known pressure law")


def read_checkpoint(path):
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise DataError("checkpoint truncated in header")
        fields = _HEADER.unpack(raw)
        magic, version, ell = fields[0], fields[1], fields[2]
        if magic != MAGIC:
            raise DataError(f"bad magic {magic!r}")
        if version != VERSION:
            raise DataError(f"unsupported checkpoint version {version}")
        res = fields[3:6]
        lengths = fields[6:9]
        time = fields[9]
        nu1, nu2, gamma, alpha = fields[10:14]
        grid = Grid(res, lengths, ell)
        params = _params_from_header(nu1, nu2, gamma, alpha)
        count = grid.size
        arrays = []
        for _ in range(4):
            buf = fh.read(8 * count)
            if len(buf) < 8 * count:
                raise DataError("checkpoint truncated in field data")
            arr = np.frombuffer(buf, dtype="<f8").reshape(res, order="F")
            arrays.append(arr.astype(float))
        if fh.read(1):
            raise DataError("trailing bytes after field data")
    return StateField(grid, params, arrays[0], np.stack(arrays[1:]), time)
