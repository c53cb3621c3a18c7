"""Experiment recipes: configured runs that end in PASS/FAIL verdicts.

Each recipe builds its domain and data from an ExperimentConfig, runs the
required solvers, fits the targeted decay laws, and returns an
ExperimentReport whose checks carry the fitted values next to their
thresholds.  Artifacts land in the output directory:

    series.csv          per-sample norm table (fixed column order)
    profile_series.csv  the matching profile run (theorem1/theorem2)
    split_series.csv    low/high frequency split (linear_lemma21)
    symbol_sweep.csv    eigenvalue sweep over p = |q|^2 (symbol_sweep)
    verdict.txt         status plus one line per check
    stamp.json          config hash, seed, build, threads, wall time

A failed check makes the report FAIL (exit code 1); an exception in any
phase makes it ERROR (exit code 2) and the verdict file is written anyway.
Identical config and seed reproduce every artifact byte for byte except the
wall time inside the stamp.

Sample times are aligned between the full run and its profile run by
choosing each dt as sample_dt/n with the smallest n keeping dt under the
stability bound, so both solvers land exactly on the shared sample grid.
"""

from __future__ import annotations

import json
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (MAIN_COLUMNS, PROFILE_COLUMNS, DecaySeries,
                          RunRecorder, SeriesWriter, SupFunctionalTracker,
                          combined_profile_distance, compare_to_profile,
                          fit_decay)
from .domain import DomainSpec, Grid, PressureLaw, FluidParams
from .errors import ConfigError
from .profile import EnergyTracker, ProfileState, profile_nonlinearity_spectral, sup_tracker_for
from .semigroup import SemigroupSampler, frequency_split
from .solver import SolverConfig, make_initial_data, run, stability_limit
from .spectral import (derivative_l2, fft_workers, lebesgue_norm,
                       sobolev_norm, torus_average)
from .state import StateField
from .symbol import (assemble_symbol_batch, half_gap, min_real_part,
                     perturbed_gap, spectral_gap, symbol_eigenvalues)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    detail: str

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


@dataclass
class ExperimentReport:
    experiment: str
    status: str = "PASS"
    checks: list = field(default_factory=list)
    error: str = None

    def add(self, name, passed, value, detail):
        self.checks.append(Check(name, bool(passed), float(value), detail))

    @property
    def exit_code(self):
        if self.status == "ERROR":
            return 2
        return 0 if self.status == "PASS" else 1

    def lines(self):
        out = [f"experiment: {self.experiment}", f"status: {self.status}"]
        if self.error:
            out.append(f"error: {self.error}")
        out.extend(check.line() for check in self.checks)
        return out


@contextmanager
def _phase(name):
    try:
        yield
    except Exception as exc:
        raise RuntimeError(f"[phase {name}] {exc}") from exc


# ---------------------------------------------------------------------------
# config -> objects
# ---------------------------------------------------------------------------

def _params(cfg):
    return FluidParams(nu1=cfg.nu1, nu2=cfg.nu2,
                       law=PressureLaw(cfg.pressure_law, cfg.kappa))


def _full_grid(cfg):
    return DomainSpec(cfg.ell, cfg.resolution,
                      periodic_lengths=(cfg.periodic_length,) * cfg.ell,
                      open_lengths=(cfg.open_length,) * (3 - cfg.ell)).grid()


def _reduced_only_grid(cfg):
    rank = 3 - cfg.ell
    return Grid(cfg.resolution, (cfg.open_length,) * rank, ell=0)


def _initial(cfg, grid, params):
    return make_initial_data(grid, params, cfg.seed, cfg.epsilon,
                             band=cfg.band, envelope_width=cfg.envelope_width,
                             periodic_band=cfg.periodic_band,
                             x_fraction=cfg.x_fraction, packets=cfg.packets)


def _aligned_dt(cfg, grid, params, m_inf):
    """dt = sample_dt/n with the smallest n below the stability bound."""
    limit = stability_limit(grid, params, m_inf, cfg.cfl)
    if cfg.dt is not None:
        n = int(round(cfg.sample_dt / cfg.dt))
        if n < 1 or abs(n * cfg.dt - cfg.sample_dt) > 1e-9 * cfg.sample_dt:
            raise ConfigError("dt must divide sample_dt")
        return cfg.dt, n
    n = max(1, math.ceil(cfg.sample_dt / (0.8 * limit)))
    return cfg.sample_dt / n, n


def _window(cfg, grid, params, last_t):
    if cfg.fit_lo is not None:
        return (cfg.fit_lo, cfg.fit_hi)
    horizon = grid.wrap_horizon(params.gamma)
    hi = 0.9 * horizon if math.isfinite(horizon) else last_t
    return (10.0, hi)


def _slope_check(report, name, fit, target, tol):
    beta = fit.exponent_or_rate
    ok = abs(beta - target) <= tol
    report.add(name, ok, beta,
               f"slope {beta:+.4f} vs {target:+.2f} +- {tol:.2f} "
               f"({fit.model}, rms {fit.residual_rms:.3g}, n={fit.samples})")


def _one_sided_check(report, name, fit, bound):
    beta = fit.exponent_or_rate
    ok = beta <= bound
    report.add(name, ok, beta,
               f"slope {beta:+.4f} <= {bound:+.3f} "
               f"({fit.model}, rms {fit.residual_rms:.3g}, n={fit.samples})")


# ---------------------------------------------------------------------------
# theorem flows (full run + profile run + comparison)
# ---------------------------------------------------------------------------

def _profile_phase(cfg, grid_red, params, eta0, t_end, out, snaps):
    """Run the reduced system, stream its own series, collect snapshots."""
    energy = EnergyTracker()
    m0 = sup_tracker_for(grid_red)
    writer = SeriesWriter(out / "profile_series.csv", PROFILE_COLUMNS)

    def psink(state, step=None):
        stacked = state.stacked()
        writer.write_row({
            "t": state.time,
            "L2_eta": lebesgue_norm(stacked, grid_red, 2),
            "L2_dy_eta": derivative_l2(stacked, grid_red, 1),
            "H2_eta_sq": sobolev_norm(stacked, grid_red, 2) ** 2,
            "N_t": energy.records[-1].N_t,
            "M0_t": m0.running_sup,
        })
        snaps.append((state.time, stacked))

    dt, stride = _aligned_dt(cfg, grid_red, params, float(np.max(np.abs(eta0.m))))
    solver_cfg = SolverConfig(dt=dt, scheme=cfg.scheme, dealias=cfg.dealias, cfl=cfg.cfl)
    try:
        run(eta0, t_end, solver_cfg, diagnostics_stride=stride,
            sinks=(energy, m0, psink), source=profile_nonlinearity_spectral)
    finally:
        writer.close()
    return energy, m0


def _run_theorem_flow(cfg, out):
    report = ExperimentReport(cfg.experiment)
    params = _params(cfg)
    with _phase("setup"):
        grid = _full_grid(cfg)
        initial = _initial(cfg, grid, params)
        dt, stride = _aligned_dt(cfg, grid, params, float(np.max(np.abs(initial.m))))

    sup = SupFunctionalTracker("M" if cfg.ell == 1 else "M1")
    with _phase("full-run"):
        writer = SeriesWriter(out / "series.csv", MAIN_COLUMNS)
        recorder = RunRecorder(writer, sup, keep_average=True)
        try:
            run(initial, cfg.t_end,
                SolverConfig(dt=dt, scheme=cfg.scheme, dealias=cfg.dealias, cfl=cfg.cfl),
                diagnostics_stride=stride, sinks=(recorder,))
        finally:
            writer.close()

    with _phase("profile-run"):
        grid_red = grid.reduced()
        eta0 = ProfileState.from_average(initial)
        snaps = []
        _profile_phase(cfg, grid_red, params, eta0, cfg.t_end, out, snaps)

    with _phase("comparison"):
        comp = compare_to_profile(recorder.average_snaps, snaps, grid_red)
        n1 = 0.0
        times, combined = [], []
        with SeriesWriter(out / "series.csv", MAIN_COLUMNS) as writer:
            for i, row in enumerate(recorder.rows):
                n1 = max(n1, (1.0 + comp.times[i]) * comp.h1[i])
                row = dict(row, L2_ubar_minus_eta=comp.l2[i],
                           H1_ubar_minus_eta=comp.h1[i], N_t=n1)
                writer.write_row(row)
                times.append(row["t"])
                combined.append(combined_profile_distance(row["L2_tilde"],
                                                          comp.l2[i], grid))

    with _phase("fits"):
        window = _window(cfg, grid, params, times[-1])
        diff = DecaySeries(times, combined, "L2_u_minus_eta")
        fit_l2 = fit_decay(recorder.series("L2_u"), "power", window)
        fit_grad = fit_decay(recorder.series("L2_du"), "power", window)
        _slope_check(report, "L2 decay", fit_l2, cfg.slope_l2_target, cfg.slope_l2_tol)
        _slope_check(report, "gradient decay", fit_grad,
                     cfg.slope_grad_target, cfg.slope_grad_tol)
        if cfg.experiment == "theorem1":
            fit_diff = fit_decay(diff, "power", window)
            _one_sided_check(report, "profile distance", fit_diff, cfg.slope_diff_max)
            for k in (2, 3, 4):
                fit_k = fit_decay(recorder.series(f"L2_d{k}u"), "power", window)
                bound = -(4.0 - k) / 3.0 + cfg.slope_k_margin
                _one_sided_check(report, f"order-{k} decay", fit_k, bound)
        else:
            fit_diff = fit_decay(diff, "power_log", window)
            _slope_check(report, "profile distance", fit_diff,
                         cfg.slope_diff_target, cfg.slope_diff_tol)
    return report


def _run_theorem3(cfg, out):
    report = ExperimentReport(cfg.experiment)
    params = _params(cfg)
    with _phase("setup"):
        grid = _full_grid(cfg)
        initial = _initial(cfg, grid, params)
        background = torus_average(initial.stacked(), grid)
        a0, k_arg = perturbed_gap((background[0], background[1:]), params, cfg.k_max)
        dt, stride = _aligned_dt(cfg, grid, params, float(np.max(np.abs(initial.m))))

    means = []
    with _phase("full-run"):
        m2 = SupFunctionalTracker("M2", a0=a0)
        writer = SeriesWriter(out / "series.csv", MAIN_COLUMNS)
        recorder = RunRecorder(writer, m2, keep_average=False)

        def mean_sink(state, step=None):
            avg = torus_average(state.stacked(), grid)
            means.append((state.time, float(avg[0]), np.array(avg[1:])))

        try:
            run(initial, cfg.t_end,
                SolverConfig(dt=dt, scheme=cfg.scheme, dealias=cfg.dealias, cfl=cfg.cfl),
                diagnostics_stride=stride, sinks=(recorder, mean_sink))
        finally:
            writer.close()

    with _phase("checks"):
        drift = max(abs(phi - means[0][1]) for _, phi, _ in means)
        report.add("mean-phi constancy", drift <= cfg.mean_drift_max, drift,
                   f"max drift {drift:.3e} <= {cfg.mean_drift_max:.1e}")
        window = (cfg.fit_lo, cfg.fit_hi) if cfg.fit_lo is not None else None
        fit = fit_decay(recorder.series("H1_tilde"), "exponential", window,
                        t_wrap=math.inf)
        floor = cfg.rate_fraction * a0
        report.add("fluctuation decay rate", fit.exponent_or_rate >= floor,
                   fit.exponent_or_rate,
                   f"rate {fit.exponent_or_rate:.4f} >= {floor:.4f} "
                   f"(a0 {a0:.4f} at k = {tuple(k_arg)}, rms {fit.residual_rms:.3g})")
        bound = cfg.m2_factor * cfg.epsilon
        report.add("M2 bounded", m2.running_sup <= bound, m2.running_sup,
                   f"M2 {m2.running_sup:.3e} <= {bound:.1e}")
    return report


def _run_lemma21(cfg, out):
    report = ExperimentReport(cfg.experiment)
    params = _params(cfg)
    with _phase("setup"):
        grid = _full_grid(cfg)
        initial = _initial(cfg, grid, params)
        if cfg.r0_sq is not None:
            r0_sq = cfg.r0_sq
        else:
            r0_sq = 0.9 * min(1.0, params.gamma ** 2 / params.nu ** 2)
        a = spectral_gap(r0_sq, params)
        a0 = half_gap(r0_sq, params)

    with _phase("semigroup-run"):
        sampler = SemigroupSampler(grid, params, cfg.sample_dt)
        n_steps = int(round(cfg.t_end / cfg.sample_dt))
        writer = SeriesWriter(out / "series.csv", MAIN_COLUMNS)
        split_writer = SeriesWriter(out / "split_series.csv",
                                    ("t", "L2_low", "L2_dy_low", "L2_high"))
        recorder = RunRecorder(writer, None, keep_average=False)
        rows = []
        try:
            recorder(initial, 0)
            _record_split(split_writer, rows, initial, r0_sq)
            for t, coeffs in sampler.iterate(initial, n_steps):
                state = StateField.from_spectral(grid, params,
                                                 coeffs.reshape(4, *grid.shape),
                                                 time=t)
                recorder(state)
                _record_split(split_writer, rows, state, r0_sq)
        finally:
            writer.close()
            split_writer.close()

    with _phase("fits"):
        window = _window(cfg, grid, params, rows[-1][0])
        times = [r[0] for r in rows]
        for j, target in ((0, cfg.slope_l2_target), (1, cfg.slope_grad_target)):
            series = DecaySeries(times, [r[1 + j] for r in rows], f"L2_dy{j}_low")
            fit = fit_decay(series, "power", window)
            tol = cfg.slope_l2_tol if j == 0 else cfg.slope_grad_tol
            _slope_check(report, f"low-frequency decay (j={j})", fit, target, tol)
        high = DecaySeries(times, [r[3] for r in rows], "L2_high")
        fit = fit_decay(high, "exponential", window)
        floor = cfg.rate_fraction * a0
        report.add("high-frequency rate", fit.exponent_or_rate >= floor,
                   fit.exponent_or_rate,
                   f"rate {fit.exponent_or_rate:.4f} >= {floor:.4f} "
                   f"(gap {a:.4f}, a0 {a0:.4f}, rms {fit.residual_rms:.3g})")
    return report


def _record_split(writer, rows, state, r0_sq):
    low, high = frequency_split(state, r0_sq)
    row = (state.time,
           lebesgue_norm(low.stacked(), state.grid, 2),
           derivative_l2(low.stacked(), state.grid, 1, open_only=True),
           lebesgue_norm(high.stacked(), state.grid, 2))
    rows.append(row)
    writer.write_row({"t": row[0], "L2_low": row[1],
                      "L2_dy_low": row[2], "L2_high": row[3]})


def _run_profile_only(cfg, out):
    report = ExperimentReport(cfg.experiment)
    params = _params(cfg)
    with _phase("setup"):
        grid = _reduced_only_grid(cfg)
        raw = _initial(cfg, grid, params)
        eta0 = ProfileState(grid, params, raw.phi, raw.m, raw.time)

    with _phase("profile-run"):
        energy = EnergyTracker()
        m0 = sup_tracker_for(grid)
        writer = SeriesWriter(out / "series.csv", PROFILE_COLUMNS)
        samples = []

        def psink(state, step=None):
            stacked = state.stacked()
            row = {"t": state.time,
                   "L2_eta": lebesgue_norm(stacked, grid, 2),
                   "L2_dy_eta": derivative_l2(stacked, grid, 1),
                   "H2_eta_sq": sobolev_norm(stacked, grid, 2) ** 2,
                   "N_t": energy.records[-1].N_t,
                   "M0_t": m0.running_sup}
            samples.append(row)
            writer.write_row(row)

        dt, stride = _aligned_dt(cfg, grid, params, float(np.max(np.abs(eta0.m))))
        try:
            run(eta0, cfg.t_end,
                SolverConfig(dt=dt, scheme=cfg.scheme, dealias=cfg.dealias, cfl=cfg.cfl),
                diagnostics_stride=stride, sinks=(energy, m0, psink),
                source=profile_nonlinearity_spectral)
        finally:
            writer.close()

    with _phase("checks"):
        n_max = max(rec.N_t for rec in energy.records)
        bound = cfg.energy_factor * cfg.epsilon ** 2
        report.add("energy bounded", n_max <= bound, n_max,
                   f"max N(t) {n_max:.3e} <= {bound:.1e}")
        m0_bound = cfg.m0_factor * cfg.epsilon
        report.add("M0 bounded", m0.running_sup <= m0_bound, m0.running_sup,
                   f"M0 {m0.running_sup:.3e} <= {m0_bound:.1e}")
        window = _window(cfg, grid, params, samples[-1]["t"])
        times = [r["t"] for r in samples]
        fit_l2 = fit_decay(DecaySeries(times, [r["L2_eta"] for r in samples], "L2_eta"),
                           "power", window)
        fit_dy = fit_decay(DecaySeries(times, [r["L2_dy_eta"] for r in samples], "L2_dy_eta"),
                           "power", window)
        _slope_check(report, "profile L2 decay", fit_l2,
                     cfg.slope_l2_target, cfg.slope_l2_tol)
        _slope_check(report, "profile gradient decay", fit_dy,
                     cfg.slope_grad_target, cfg.slope_grad_tol)
    return report


def _run_symbol_sweep(cfg, out):
    report = ExperimentReport(cfg.experiment)
    params = _params(cfg)
    with _phase("sweep"):
        p = np.logspace(math.log10(cfg.sweep_min), math.log10(cfg.sweep_max),
                        cfg.sweep_points)
        eig = symbol_eigenvalues(p, params)
        with SeriesWriter(out / "symbol_sweep.csv",
                          ("p", "Re_lambda1", "Re_lambda_plus", "Im_lambda_plus",
                           "Re_lambda_minus", "Im_lambda_minus", "discriminant")) as writer:
            for i in range(p.size):
                writer.write_row({
                    "p": p[i],
                    "Re_lambda1": eig.lambda1[i].real,
                    "Re_lambda_plus": eig.lambda_plus[i].real,
                    "Im_lambda_plus": eig.lambda_plus[i].imag,
                    "Re_lambda_minus": eig.lambda_minus[i].real,
                    "Im_lambda_minus": eig.lambda_minus[i].imag,
                    "discriminant": eig.discriminant[i].real,
                })

    with _phase("checks"):
        asymptote = params.gamma ** 2 / params.nu
        tail = abs(eig.lambda_minus[-1].real - asymptote)
        report.add("lambda-minus asymptote", tail <= cfg.asymptote_tol, tail,
                   f"|Re lambda_-(p={p[-1]:.3g}) - {asymptote:.4f}| = {tail:.3e} "
                   f"<= {cfg.asymptote_tol:.1e}")
        vieta = np.max(np.abs(eig.lambda_plus * eig.lambda_minus - params.gamma ** 2 * p)
                       / (params.gamma ** 2 * p))
        report.add("Vieta identity", vieta <= 1e-12, float(vieta),
                   f"max relative residual {float(vieta):.3e} <= 1e-12")

    with _phase("cross-checks"):
        # closed forms against a dense eigensolve of the assembled matrices
        from scipy.optimize import linear_sum_assignment
        rng = np.random.default_rng(cfg.seed)
        sets = (params,
                FluidParams(nu1=1.0, nu2=1.0, law=PressureLaw("quadratic")),
                FluidParams(nu1=1.0, nu2=2.0, law=PressureLaw("adiabatic", 1.4)))
        worst = 0.0
        for par in sets:
            direction = rng.normal(size=(1000, 3))
            direction /= np.linalg.norm(direction, axis=1, keepdims=True)
            q = direction * rng.uniform(0.0, 10.0, (1000, 1))
            closed = symbol_eigenvalues(np.sum(q * q, axis=-1), par).as_array()
            dense = np.linalg.eigvals(assemble_symbol_batch(q, par))
            for row_c, row_d in zip(closed, dense):
                cost = np.abs(row_c[:, None] - row_d[None, :])
                i, j = linear_sum_assignment(cost)
                worst = max(worst, float(cost[i, j].max()))
        report.add("closed-form spectrum", worst <= 1e-10, worst,
                   f"max matched deviation {worst:.3e} <= 1e-10 "
                   f"(3000 random frequencies, |q| <= 10)")

        # unit-parameter gap: nu1 = nu2 = gamma = 1, r0^2 = 0.2 sits strictly
        # below the acoustic rate 1/4, so a = nu1 r0^2 must come back exact
        iso = FluidParams(nu1=1.0, nu2=1.0, law=PressureLaw("adiabatic", 1.0 + 1e-12))
        a = spectral_gap(0.2, iso)
        scanned = float(np.min(min_real_part(np.geomspace(0.2, 1e4, 4096), iso)))
        ok = a == 0.2 and scanned >= 0.2 * (1.0 - 1e-9)
        report.add("unit-parameter gap", ok, a,
                   f"a = {a!r} (exact), sampled min Re lambda = {scanned:.12f}")
    return report


_RECIPES = {
    "theorem1": _run_theorem_flow,
    "theorem2": _run_theorem_flow,
    "theorem3": _run_theorem3,
    "linear_lemma21": _run_lemma21,
    "profile_only": _run_profile_only,
    "symbol_sweep": _run_symbol_sweep,
}


def run_experiment(cfg, out_dir=None):
    """Run one configured experiment; always writes verdict.txt and stamp.json."""
    cfg.validate()
    out = Path(out_dir or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    try:
        report = _RECIPES[cfg.experiment](cfg, out)
        if any(not c.passed for c in report.checks):
            report.status = "FAIL"
    except Exception as exc:
        report = ExperimentReport(cfg.experiment, status="ERROR", error=str(exc))
    _write_verdict(out / "verdict.txt", report)
    _write_stamp(out / "stamp.json", cfg, time.time() - started)
    return report


def _write_verdict(path, report):
    path.write_text("\n".join(report.lines()) + "\n", encoding="utf-8")


def _write_stamp(path, cfg, wall_time):
    stamp = {
        "experiment": cfg.experiment,
        "config_sha256": cfg.hash(),
        "seed": cfg.seed,
        "build": __version__,
        "threads": fft_workers(),
        "wall_time_s": round(wall_time, 3),
    }
    path.write_text(json.dumps(stamp, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
