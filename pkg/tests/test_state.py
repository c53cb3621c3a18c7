"""State container and the binary checkpoint format."""

import numpy as np
import pytest

from nsas import FluidParams, StateField, read_checkpoint, write_checkpoint
from nsas.errors import DataError, ShapeError, StateError
from nsas.state import VACUUM_MARGIN


def _state(grid, params, seed=0, scale=1e-2):
    rng = np.random.default_rng(seed)
    return StateField(grid, params,
                      scale * rng.standard_normal(grid.shape),
                      scale * rng.standard_normal((3,) + grid.shape),
                      time=1.5)


class TestStateField:
    def test_spectral_round_trip(self, mixed_grid, quad_params):
        state = _state(mixed_grid, quad_params)
        back = StateField.from_spectral(mixed_grid, quad_params, state.spectral(),
                                        state.time)
        assert np.max(np.abs(back.stacked() - state.stacked())) <= 1e-14
        assert back.time == state.time

    def test_shape_validation(self, mixed_grid, quad_params):
        good_phi = np.zeros(mixed_grid.shape)
        with pytest.raises(ShapeError):
            StateField(mixed_grid, quad_params, good_phi,
                       np.zeros((2,) + mixed_grid.shape))
        with pytest.raises(ShapeError):
            StateField(mixed_grid, quad_params, np.zeros((3, 3)),
                       np.zeros((3,) + mixed_grid.shape))

    def test_min_density(self, mixed_grid, quad_params):
        state = StateField.zero(mixed_grid, quad_params)
        assert state.min_density() == pytest.approx(1.0)
        state.phi[0, 0, 0] = -0.5 * quad_params.gamma
        assert state.min_density() == pytest.approx(0.5)

    def test_validate_vacuum_margin(self, mixed_grid, quad_params):
        state = StateField.zero(mixed_grid, quad_params)
        state.phi[:] = -(1.0 - 0.5 * VACUUM_MARGIN) * quad_params.gamma
        with pytest.raises(StateError):
            state.validate()

    def test_validate_rejects_nonfinite(self, mixed_grid, quad_params):
        state = StateField.zero(mixed_grid, quad_params)
        state.m[1, 0, 0, 0] = np.nan
        with pytest.raises(StateError):
            state.validate()

    def test_validate_passes_and_chains(self, mixed_grid, quad_params):
        state = _state(mixed_grid, quad_params)
        assert state.validate(check_symmetry=True) is state

    def test_copy_is_independent(self, mixed_grid, quad_params):
        state = _state(mixed_grid, quad_params)
        dup = state.copy()
        dup.phi[0, 0, 0] += 1.0
        assert state.phi[0, 0, 0] != dup.phi[0, 0, 0]

    def test_profile_aliases(self, mixed_grid, quad_params):
        state = _state(mixed_grid, quad_params)
        assert state.sigma is state.phi
        assert state.w is state.m


class TestCheckpoint:
    def test_round_trip(self, mixed_grid, quad_params, tmp_path):
        state = _state(mixed_grid, quad_params, seed=3)
        path = tmp_path / "snap.nsas"
        write_checkpoint(state, path)
        back = read_checkpoint(path)
        assert back.grid.resolution == mixed_grid.resolution
        assert back.grid.lengths == pytest.approx(mixed_grid.lengths)
        assert back.grid.ell == mixed_grid.ell
        assert back.time == state.time
        assert back.params.law.kind == "quadratic"
        assert back.params.gamma == state.params.gamma
        assert np.array_equal(back.phi, state.phi)
        assert np.array_equal(back.m, state.m)

    def test_adiabatic_params_round_trip(self, mixed_grid, adia_params, tmp_path):
        state = _state(mixed_grid, adia_params, seed=4)
        path = tmp_path / "snap.nsas"
        write_checkpoint(state, path)
        back = read_checkpoint(path)
        assert back.params.law.kind == "adiabatic"
        assert back.params.law.kappa == pytest.approx(1.4, rel=1e-12)
        assert back.params.alpha == pytest.approx(adia_params.alpha, rel=1e-12)
        assert back.params.nu2 == adia_params.nu2

    def test_rejects_reduced_grid(self, open_grid, quad_params, tmp_path):
        state = StateField.zero(open_grid, quad_params)
        with pytest.raises(DataError):
            write_checkpoint(state, tmp_path / "bad.nsas")

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "short.nsas"
        path.write_bytes(b"NSAS\x01\x00")
        with pytest.raises(DataError, match="header"):
            read_checkpoint(path)

    def test_truncated_data(self, mixed_grid, quad_params, tmp_path):
        state = _state(mixed_grid, quad_params, seed=5)
        path = tmp_path / "snap.nsas"
        write_checkpoint(state, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-100])
        with pytest.raises(DataError, match="field data"):
            read_checkpoint(path)

    def test_trailing_bytes(self, mixed_grid, quad_params, tmp_path):
        state = _state(mixed_grid, quad_params, seed=6)
        path = tmp_path / "snap.nsas"
        write_checkpoint(state, path)
        with open(path, "ab") as fh:
            fh.write(b"\x00")
        with pytest.raises(DataError, match="trailing"):
            read_checkpoint(path)

    def test_bad_magic(self, mixed_grid, quad_params, tmp_path):
        state = _state(mixed_grid, quad_params, seed=7)
        path = tmp_path / "snap.nsas"
        write_checkpoint(state, path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"XXXX"
        path.write_bytes(bytes(blob))
        with pytest.raises(DataError, match="magic"):
            read_checkpoint(path)

    def test_unknown_version(self, mixed_grid, quad_params, tmp_path):
        state = _state(mixed_grid, quad_params, seed=8)
        path = tmp_path / "snap.nsas"
        write_checkpoint(state, path)
        blob = bytearray(path.read_bytes())
        blob[4:8] = (99).to_bytes(4, "little")
        path.write_bytes(bytes(blob))
        with pytest.raises(DataError, match="version"):
            read_checkpoint(path)

    def test_run_writes_checkpoints(self, torus_grid, quad_params, tmp_path):
        from nsas import SolverConfig, make_initial_data, run

        initial = make_initial_data(torus_grid, quad_params, seed=9, epsilon=0.3)
        run(initial, 0.1, SolverConfig(dt=0.02), checkpoint_stride=2,
            out_dir=str(tmp_path))
        names = sorted(p.name for p in tmp_path.glob("checkpoint_*.nsas"))
        assert names == ["checkpoint_000000.nsas", "checkpoint_000002.nsas",
                         "checkpoint_000004.nsas"]
        back = read_checkpoint(tmp_path / "checkpoint_000004.nsas")
        assert back.time == pytest.approx(0.08)
