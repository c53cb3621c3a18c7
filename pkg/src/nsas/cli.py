"""Command line front end.

Subcommands:

    analyze-symbol   eigenvalue branches of the linear symbol over p = |q|^2
    simulate         full mixed-domain run from a config file
    profile          reduced profile run from a config file
    fit              decay-model fit of one series.csv column
    report           verdict table and log-log plots for a finished run
    run-experiment   configured experiment with PASS/FAIL verdicts

Exit codes: 0 PASS (or plain success), 1 FAIL (a verdict check missed its
threshold), 2 ERROR (bad input, solver failure).  NSAS_THREADS caps FFT
parallelism; outputs are byte-identical across thread counts.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .diagnostics import (MAIN_COLUMNS, PROFILE_COLUMNS, RunRecorder,
                          SeriesWriter, column_series, fit_decay,
                          read_series_csv)
from .domain import FluidParams, PressureLaw
from .errors import ConfigError, NsasError
from .experiments import run_experiment
from .solver import SolverConfig, run
from .state import write_checkpoint
from .symbol import symbol_eigenvalues

_SWEEP_COLUMNS = ("p", "Re_lambda1", "Re_lambda_plus", "Im_lambda_plus",
                  "Re_lambda_minus", "Im_lambda_minus", "discriminant")


def _cmd_analyze_symbol(args):
    params = FluidParams(nu1=args.nu1, nu2=args.nu2,
                         law=PressureLaw(args.law, args.kappa))
    p = np.logspace(math.log10(args.p_min), math.log10(args.p_max), args.points)
    eig = symbol_eigenvalues(p, params)
    rows = zip(p, eig.lambda1, eig.lambda_plus, eig.lambda_minus, eig.discriminant)
    lines = [",".join(_SWEEP_COLUMNS)]
    for pi, l1, lp, lm, disc in rows:
        lines.append(",".join("%.17g" % v for v in
                              (pi, l1.real, lp.real, lp.imag, lm.real, lm.imag, disc.real)))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_simulate(args):
    from .experiments import _aligned_dt, _full_grid, _initial, _params
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = _params(cfg)
    grid = _full_grid(cfg)
    initial = _initial(cfg, grid, params)
    dt, stride = _aligned_dt(cfg, grid, params, float(np.max(np.abs(initial.m))))
    with SeriesWriter(out / "series.csv", MAIN_COLUMNS) as writer:
        recorder = RunRecorder(writer, keep_average=False)
        final = run(initial, cfg.t_end,
                    SolverConfig(dt=dt, scheme=cfg.scheme, dealias=cfg.dealias,
                                 cfl=cfg.cfl),
                    diagnostics_stride=stride, sinks=(recorder,))
    write_checkpoint(final, out / "final.nsas")
    print(f"wrote {out / 'series.csv'} and {out / 'final.nsas'} "
          f"(t = {final.time:.6g}, {len(recorder.rows)} samples)")
    return 0


def _cmd_profile(args):
    from .domain import Grid
    from .experiments import _aligned_dt, _params
    from .profile import (EnergyTracker, ProfileState,
                          profile_nonlinearity_spectral, sup_tracker_for)
    from .solver import make_initial_data
    from .spectral import derivative_l2, lebesgue_norm, sobolev_norm
    cfg = load_config(args.config)
    if cfg.ell not in (1, 2):
        raise ConfigError("profile runs need ell = 1 (2-d system) or 2 (1-d)")
    res = cfg.resolution if cfg.experiment == "profile_only" \
        else cfg.resolution[cfg.ell:]
    grid = Grid(res, (cfg.open_length,) * len(res), ell=0)
    params = _params(cfg)
    raw = make_initial_data(grid, params, cfg.seed, cfg.epsilon, band=cfg.band,
                            envelope_width=cfg.envelope_width,
                            x_fraction=cfg.x_fraction, packets=cfg.packets)
    eta0 = ProfileState(grid, params, raw.phi, raw.m, raw.time)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    energy = EnergyTracker()
    m0 = sup_tracker_for(grid)
    with SeriesWriter(out / "series.csv", PROFILE_COLUMNS) as writer:
        def sink(state, step=None):
            stacked = state.stacked()
            writer.write_row({"t": state.time,
                              "L2_eta": lebesgue_norm(stacked, grid, 2),
                              "L2_dy_eta": derivative_l2(stacked, grid, 1),
                              "H2_eta_sq": sobolev_norm(stacked, grid, 2) ** 2,
                              "N_t": energy.records[-1].N_t,
                              "M0_t": m0.running_sup})

        dt, stride = _aligned_dt(cfg, grid, params, float(np.max(np.abs(eta0.m))))
        run(eta0, cfg.t_end,
            SolverConfig(dt=dt, scheme=cfg.scheme, dealias=cfg.dealias, cfl=cfg.cfl),
            diagnostics_stride=stride, sinks=(energy, m0, sink),
            source=profile_nonlinearity_spectral)
    print(f"wrote {out / 'series.csv'}")
    return 0


def _cmd_fit(args):
    cols = read_series_csv(args.series)
    series = column_series(cols, args.column)
    model = {"power": "power", "power_log": "power_log",
             "exp": "exponential"}[args.model]
    window = None
    if args.window:
        lo, _, hi = args.window.partition(",")
        window = (float(lo), float(hi))
    fit = fit_decay(series, model, window)
    kind = "rate" if model == "exponential" else "exponent"
    print(f"column {args.column}: model {model}")
    print(f"  {kind}: {fit.exponent_or_rate:.6g}")
    print(f"  amplitude: {fit.amplitude:.6g}")
    print(f"  residual rms (log space): {fit.residual_rms:.3g}")
    print(f"  window: [{fit.window[0]:.6g}, {fit.window[1]:.6g}], "
          f"samples {fit.samples}, trimmed {fit.dropped}")
    return 0


def _plot_from_cols(cols, svg_path, columns, log_x=True, x_name="t"):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    x = cols[x_name]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    plotted = False
    for name in columns:
        if name not in cols:
            continue
        v = cols[name]
        keep = ~np.isnan(v) & (v > 0) & (x > 0)
        if keep.sum() < 2:
            continue
        ax.plot(x[keep], v[keep], label=name)
        plotted = True
    if not plotted:
        plt.close(fig)
        return False
    if log_x:
        ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(x_name)
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(svg_path)
    plt.close(fig)
    return True


def _cmd_report(args):
    run_dir = Path(args.run)
    verdict = run_dir / "verdict.txt"
    status = "PASS"
    if verdict.exists():
        text = verdict.read_text(encoding="utf-8")
        sys.stdout.write(text)
        for line in text.splitlines():
            if line.startswith("status:"):
                status = line.split(":", 1)[1].strip()
    else:
        print(f"no verdict.txt under {run_dir}")
    made = []
    jobs = (
        ("series.csv", "decay_loglog.svg",
         ("L2_u", "L2_du", "L2_tilde", "H1_tilde", "L2_ubar_minus_eta",
          "L2_eta", "L2_dy_eta"), True),
        ("profile_series.csv", "profile_loglog.svg",
         ("L2_eta", "L2_dy_eta"), True),
        ("split_series.csv", "split_decay.svg",
         ("L2_low", "L2_dy_low", "L2_high"), False),
        ("symbol_sweep.csv", "symbol_sweep.svg",
         ("Re_lambda1", "Re_lambda_plus", "Re_lambda_minus"), True),
    )
    for csv_name, svg_name, columns, log_x in jobs:
        src = run_dir / csv_name
        if not src.exists():
            continue
        cols = read_series_csv(src)
        x_name = "p" if csv_name == "symbol_sweep.csv" else "t"
        if _plot_from_cols(cols, run_dir / svg_name, columns, log_x, x_name):
            made.append(svg_name)
    if made:
        print("plots: " + ", ".join(made))
    return {"PASS": 0, "FAIL": 1}.get(status, 2)


def _cmd_run_experiment(args):
    cfg = load_config(args.config)
    report = run_experiment(cfg, out_dir=args.out)
    for line in report.lines():
        print(line)
    return report.exit_code


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nsas",
        description="Spectral simulation and decay analysis for the "
                    "isentropic compressible Navier-Stokes system on "
                    "mixed periodic/open domains.")
    parser.add_argument("--version", action="version", version=f"nsas {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze-symbol", help="eigenvalue branches over p = |q|^2")
    p.add_argument("--nu1", type=float, default=1.0)
    p.add_argument("--nu2", type=float, default=1.0)
    p.add_argument("--law", choices=("quadratic", "adiabatic"), default="quadratic")
    p.add_argument("--kappa", type=float, default=2.0)
    p.add_argument("--p-min", type=float, default=1e-4)
    p.add_argument("--p-max", type=float, default=1e4)
    p.add_argument("--points", type=int, default=400)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=_cmd_analyze_symbol)

    p = sub.add_parser("simulate", help="full mixed-domain run")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("profile", help="reduced profile run")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_profile)

    p = sub.add_parser("fit", help="fit a decay model to one series column")
    p.add_argument("--series", required=True)
    p.add_argument("--column", required=True)
    p.add_argument("--model", choices=("power", "power_log", "exp"), default="power")
    p.add_argument("--window", help="a,b time window")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("report", help="verdict table and plots for a run directory")
    p.add_argument("--run", required=True)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("run-experiment", help="configured experiment with verdicts")
    p.add_argument("--config", required=True,
                   help="config path or the name of a shipped experiment")
    p.add_argument("--out", help="override out_dir from the config")
    p.set_defaults(func=_cmd_run_experiment)
    return parser


def resolve_config_path(name):
    """A real path as-is; otherwise try the shipped configs by name."""
    if Path(name).exists():
        return Path(name)
    from importlib.resources import files
    candidate = files("nsas") / "configs" / f"{name}.cfg"
    if candidate.is_file():
        return candidate
    raise ConfigError(f"no config file or shipped experiment named {name!r}")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "config", None) is not None:
            args.config = resolve_config_path(args.config)
        return args.func(args)
    except NsasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
