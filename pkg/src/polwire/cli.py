"""Command-line entry point: ``polwire {dispersion,propagate,sweep,signatures}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as configmod
from . import ensemble
from .dynamics import (
    OBSERVABLES_HEADER,
    migration_interval,
    prepare_wavepacket,
    propagate,
    time_grid,
    write_observables_csv,
    write_profiles,
)
from .errors import ConfigError, NumericalError, PersistenceError, RealizationError
from .model import build_hamiltonian, photon_energy, photon_wavevectors, sample_realization
from .spectrum import (
    DISPERSION_HEADER,
    bright_mode_table,
    diagonalize,
    effective_group_velocity,
    ordered_dispersion,
    write_dispersion_csv,
)
from .theory import (
    UNRESOLVED,
    early_growth,
    fit_ballistic_velocity,
    polariton_gap,
    rabi_frequency_estimate,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _finite(x):
    if x is None or isinstance(x, str):
        return x
    x = float(x)
    return x if math.isfinite(x) else None


def fit_report(v0_pred, fit, window, growth, gap, rabi_period):
    """JSON-ready record of one prediction/fit comparison."""
    return {
        "v0_pred_nmfs": _finite(v0_pred),
        "v0_fit_nmfs": _finite(fit.v0) if fit else None,
        "r_squared": _finite(fit.r_squared) if fit else None,
        "window_fs": list(window),
        "G_exact": _finite(growth.G_exact),
        "G_weak": _finite(growth.G_weak),
        "G_strong": _finite(growth.G_strong),
        "gap_eV": gap if gap == UNRESOLVED else _finite(gap),
        "rabi_period_fs": _finite(rabi_period),
    }


def _write_table(path_stem, header, rows, fmt):
    path = Path(f"{path_stem}.{fmt}")
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([v if isinstance(v, str) else repr(float(v)) if v is not None else "" for v in row])
    else:
        records = [dict(zip(header, (_finite(v) for v in row))) for row in rows]
        path.write_text(json.dumps(records, indent=1))
    return path


def _load_config(args):
    cfg = configmod.load(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.fit_window_fs is not None:
        if not args.fit_window_fs > 0:
            raise ConfigError("must be > 0", "--fit-window-fs")
        cfg = replace(cfg, run=replace(cfg.run, fit_window=args.fit_window_fs))
    return cfg


def _outdir(args, cfg):
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fmt(args, cfg):
    return args.format or (cfg.formats[0] if cfg.formats else "csv")


# ----------------------------------------------------------------- commands


def cmd_dispersion(args):
    cfg = _load_config(args)
    out = _outdir(args, cfg)
    _, q = photon_wavevectors(cfg.geometry)
    table = effective_group_velocity(ordered_dispersion(cfg.geometry, cfg.matter, q))
    fmt = _fmt(args, cfg)
    if fmt == "csv":
        path = out / "dispersion.csv"
        write_dispersion_csv(table, path)
    else:
        cols = (
            table.q, table.omega_LP, table.omega_UP, table.Pi_LP, table.Pi_UP,
            table.v_g_LP, table.v_g_UP, table.v_eff_LP, table.v_eff_UP,
        )
        path = _write_table(out / "dispersion", DISPERSION_HEADER, zip(*cols), "json")
    hw = photon_energy(cfg.geometry, q)
    lo, hi = float(hw.min()), float(hw.max())
    print(f"cutoff energy (q = 0): {lo:.2f} eV")
    print(f"max mode energy (|m_x| = {cfg.geometry.m_max}): {hi:.2f} eV")
    print(f"mode energy span: {hi - lo:.2f} eV")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_propagate(args):
    cfg = _load_config(args)
    out = _outdir(args, cfg)
    real = sample_realization(cfg.matter, cfg.seed, cfg.generator_id)
    spec = diagonalize(build_hamiltonian(real, cfg.geometry, cfg.matter))
    psi0 = prepare_wavepacket(cfg.wavepacket, real, cfg.geometry)
    t = time_grid(cfg.run.t_max, cfg.run.dt)
    ts = propagate(
        psi0, spec, real, t, cfg.x0, cfg.wavepacket.sigma_x,
        n_edge=cfg.run.n_edge, profile_times=cfg.run.profile_times,
        bin_width=cfg.run.bin_width, length=cfg.geometry.L_x,
    )
    fmt = _fmt(args, cfg)
    if fmt == "csv":
        obs_path = out / "observables.csv"
        write_observables_csv(ts, obs_path)
    else:
        obs_path = _write_table(
            out / "observables", OBSERVABLES_HEADER, zip(ts.t, ts.P_M, ts.rmsd, ts.chi, ts.P_boundary), "json"
        )
    write_profiles(ts, out)
    window = (0.0, cfg.run.fit_window)
    try:
        fit = fit_ballistic_velocity(ts, window)
    except NumericalError:
        fit = None
    growth = early_growth(spec, psi0, migration_interval(real, cfg.x0, cfg.wavepacket.sigma_x))
    try:
        rabi = rabi_frequency_estimate(ts).period
    except NumericalError:
        rabi = None
    q_window = ensemble.default_q_window(cfg) if cfg.signatures.q_window is None else cfg.signatures.q_window
    try:
        gap = polariton_gap(bright_mode_table(spec, cfg.signatures.threshold), cfg.matter.E_M, q_window)
    except ValueError:
        gap = UNRESOLVED
    pred, _ = ensemble.predicted_velocity(cfg)
    report = fit_report(pred, fit, window, growth, gap, rabi)
    report["seed"] = str(cfg.seed)
    (out / "report.json").write_text(json.dumps(report, indent=1))
    print(json.dumps(report))
    print(f"wrote {obs_path}")
    return EXIT_OK


SWEEP_HEADER = (
    "value",
    "v0_fit_nmfs",
    "r_squared",
    "v0_mean_nmfs",
    "v0_se_nmfs",
    "v0_pred_nmfs",
    "v0_pred_literal_nmfs",
    "max_rmsd_mean_nm",
    "max_rmsd_se_nm",
    "chi_final",
    "chi_final_se",
    "chi_steady_time_fs",
    "G_exact",
    "G_weak",
    "G_strong",
)


def cmd_sweep(args):
    cfg = _load_config(args)
    out = _outdir(args, cfg)
    plan = ensemble.SweepPlan.from_config(cfg, n_realizations=args.realizations, base_seed=args.seed)

    def progress(i, point):
        print(f"point {i} ({plan.axis} = {point.value:g}): v0_fit = {point.summary['v0_fit']:.4g} nm/fs",
              file=sys.stderr)

    result = ensemble.run_ensemble(plan, threads=args.threads, progress=progress)
    ensemble.persist(result, out)
    rows = [[p.summary[k] for k in ensemble.SUMMARY_FIELDS] for p in result.points]
    path = _write_table(out / "sweep_summary", SWEEP_HEADER, rows, _fmt(args, cfg))
    print(f"wrote {path} and {out / 'manifest.json'}")
    return EXIT_OK


def cmd_signatures(args):
    cfg = _load_config(args)
    out = _outdir(args, cfg)
    points = ensemble.disorder_signatures(
        cfg, n_realizations=args.realizations, base_seed=args.seed, threads=args.threads
    )
    fmt = _fmt(args, cfg)
    bright_rows = []
    for p in points:
        for r, b in enumerate(p.bright):
            for e, q, pc in zip(b.energy, b.q_peak, b.photon_content):
                bright_rows.append((p.ratio, float(r), e, q, pc))
    _write_table(
        out / "bright_modes",
        ("sigma_M_ratio", "realization", "energy_eV", "q_peak_invnm", "photon_content"),
        bright_rows,
        fmt,
    )
    rows = [(p.ratio, p.gap, p.rabi_period, p.rabi_amplitude) for p in points]
    path = _write_table(
        out / "signatures", ("sigma_M_ratio", "gap_eV", "rabi_period_fs", "rabi_amplitude"), rows, fmt
    )
    for p in points:
        gap = p.gap if p.gap == UNRESOLVED else f"{p.gap:.4f} eV"
        rabi = "none" if p.rabi_period is None else f"{p.rabi_period:.1f} fs"
        print(f"sigma_M/Omega_R = {p.ratio:g}: gap {gap}, Rabi period {rabi}")
    print(f"wrote {path}")
    return EXIT_OK


# ------------------------------------------------------------------- parser


def build_parser():
    parser = argparse.ArgumentParser(prog="polwire", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", help="output directory (default: output.directory)")
    common.add_argument("--seed", type=int, help="override the configured seed (unsigned 64-bit)")
    common.add_argument("--realizations", type=int, help="realizations per sweep point")
    common.add_argument("--threads", type=int, default=1, help="worker threads for realizations")
    common.add_argument("--fit-window-fs", type=float, help="ballistic fit window [0, F] in fs")
    common.add_argument("--format", choices=("csv", "json"), help="table format")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, text in (
        ("dispersion", cmd_dispersion, "ordered polariton dispersion and group velocities"),
        ("propagate", cmd_propagate, "single-realization wave packet propagation"),
        ("sweep", cmd_sweep, "disorder-ensemble parameter sweep"),
        ("signatures", cmd_signatures, "polariton gap and Rabi period versus disorder"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed: must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    if args.realizations is not None and args.realizations < 1:
        print("error: --realizations: must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads < 1:
        print("error: --threads: must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RealizationError as exc:
        code = EXIT_IO if isinstance(exc.cause, OSError) else EXIT_NUMERICAL
        print(f"error: {exc}", file=sys.stderr)
        return code
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (PersistenceError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
