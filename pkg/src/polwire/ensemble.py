"""Disorder-ensemble sweeps: seeding, execution, aggregation and persistence.

Seeds
-----
The generator seed of realization ``r`` at sweep point ``p`` is::

    key  = (p << 32) | r                       # p, r < 2**32
    seed = mix64((base_seed + key) mod 2**64)

where ``mix64`` is the SplitMix64 output function (add the golden-ratio
increment, then two xor-shift-multiply rounds and a final xor-shift). Every
step is a bijection on 64-bit integers, so distinct ``(p, r)`` pairs get
distinct seeds for a given ``base_seed``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import RunConfig, apply_axis, to_dict
from .dynamics import (
    OBSERVABLES_HEADER,
    TimeSeries,
    momentum_distribution,
    migration_interval,
    prepare_wavepacket,
    propagate,
    time_grid,
)
from .errors import (
    CorruptPayloadError,
    GridMismatchError,
    IncompatibleVersionError,
    NumericalError,
    PersistenceError,
    RealizationError,
)
from .model import MatterSpec, build_hamiltonian, photon_wavevectors, sample_realization
from .spectrum import bright_mode_table, diagonalize, effective_group_velocity, ordered_dispersion
from .theory import (
    EarlyGrowth,
    early_growth,
    fit_ballistic_velocity,
    predict_v0,
    steady_state_time,
)

LAYOUT_VERSION = "polwire-ensemble/1"
MASK64 = (1 << 64) - 1
OBSERVABLES = ("P_M", "rmsd", "chi", "P_boundary")


def mix64(x):
    """SplitMix64 output function on a 64-bit unsigned integer."""
    z = (int(x) + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def realization_seed(base_seed, point_index, realization_index):
    if not (0 <= point_index < 2**32 and 0 <= realization_index < 2**32):
        raise ValueError("point and realization indices must fit in 32 bits")
    key = (int(point_index) << 32) | int(realization_index)
    return mix64((int(base_seed) + key) & MASK64)


@dataclass(frozen=True)
class SweepPlan:
    base: RunConfig
    axis: str
    values: tuple
    n_realizations: int = 100
    base_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError("sweep values must be nonempty")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be >= 1")

    @classmethod
    def from_config(cls, cfg: RunConfig, n_realizations=None, base_seed=None):
        """Plan from the ``sweep`` section; a config without one is a single point."""
        sweep = cfg.sweep or {"axis": "sigma_M", "values": [cfg.matter.sigma_M]}
        return cls(
            base=cfg,
            axis=sweep["axis"],
            values=tuple(sweep["values"]),
            n_realizations=n_realizations or sweep.get("n_realizations", 100),
            base_seed=cfg.seed if base_seed is None else base_seed,
        )

    def point_config(self, index):
        return apply_axis(self.base, self.axis, self.values[index])

    def seeds(self, index):
        return [realization_seed(self.base_seed, index, r) for r in range(self.n_realizations)]

    def to_dict(self):
        return {
            "axis": self.axis,
            "values": list(self.values),
            "n_realizations": self.n_realizations,
            "base_seed": self.base_seed,
            "config": to_dict(self.base),
        }

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RealizationOutcome:
    series: TimeSeries
    v0: float
    r_squared: float
    growth: EarlyGrowth
    bright: object = None  # BrightModes of this realization


def run_realization(cfg: RunConfig, seed, tgrid=None, keep_profiles=True):
    """Sample, diagonalize and propagate one realization of ``cfg``."""
    if tgrid is None:
        tgrid = time_grid(cfg.run.t_max, cfg.run.dt)
    real = sample_realization(cfg.matter, seed, cfg.generator_id)
    spec = diagonalize(build_hamiltonian(real, cfg.geometry, cfg.matter))
    psi0 = prepare_wavepacket(cfg.wavepacket, real, cfg.geometry)
    x0 = cfg.x0
    ts = propagate(
        psi0,
        spec,
        real,
        tgrid,
        x0,
        cfg.wavepacket.sigma_x,
        n_edge=cfg.run.n_edge,
        profile_times=cfg.run.profile_times if keep_profiles else (),
        bin_width=cfg.run.bin_width,
        length=cfg.geometry.L_x,
    )
    try:
        fit = fit_ballistic_velocity(ts, (0.0, cfg.run.fit_window))
        v0, r2 = fit.v0, fit.r_squared
    except NumericalError:
        v0, r2 = float("nan"), float("nan")
    growth = early_growth(spec, psi0, migration_interval(real, x0, cfg.wavepacket.sigma_x))
    bright = bright_mode_table(spec, cfg.signatures.threshold)
    return RealizationOutcome(ts, v0, r2, growth, bright)


def aggregate(series):
    """Mean and standard error per observable, summed in the given order.

    The reduction is a plain left fold of deviations from the first series,
    ``mean = x_0 + (sum_i (x_i - x_0)) / n``, so the result bits depend only
    on the order of ``series`` and identical inputs reproduce themselves
    exactly. Returns ``(mean, se)`` as two TimeSeries.
    """
    series = list(series)
    if not series:
        raise ValueError("nothing to aggregate")
    t = series[0].t
    for s in series[1:]:
        if s.t.shape != t.shape or not np.array_equal(s.t, t):
            raise GridMismatchError("time grids differ between series")
    n = len(series)
    mean, se = {}, {}
    for name in OBSERVABLES:
        first = getattr(series[0], name)
        acc = np.zeros_like(t, dtype=float)
        for s in series:
            acc = acc + (getattr(s, name) - first)
        mu = first + acc / n
        if n > 1:
            dev = np.zeros_like(mu)
            for s in series:
                dev = dev + (getattr(s, name) - mu) ** 2
            sd = np.sqrt(dev / (n - 1) / n)
        else:
            sd = np.zeros_like(mu)
        mean[name], se[name] = mu, sd
    return TimeSeries(t=t.copy(), **mean), TimeSeries(t=t.copy(), **se)


def _mean_se(values):
    v = np.asarray(values, dtype=float)
    acc = 0.0
    for x in v:
        acc += x - v[0]
    mu = v[0] + acc / v.size
    if v.size < 2:
        return float(mu), 0.0
    dev = 0.0
    for x in v:
        dev += (x - mu) ** 2
    return float(mu), float(math.sqrt(dev / (v.size - 1) / v.size))


def predicted_velocity(cfg: RunConfig):
    """Ordered-wire prediction for the configured packet: (renormalized, literal)."""
    m = cfg.matter
    lattice = sample_realization(MatterSpec(m.N_M, m.a, 0.0, m.E_M, 0.0, m.Omega_R), 0)
    psi0 = prepare_wavepacket(cfg.wavepacket, lattice, cfg.geometry)
    _, q = photon_wavevectors(cfg.geometry)
    pq = momentum_distribution(psi0, lattice, q)
    table = effective_group_velocity(ordered_dispersion(cfg.geometry, m, q))
    return predict_v0(table, pq, renormalize=True), predict_v0(table, pq)


# summary fields stored per point, in manifest order
SUMMARY_FIELDS = (
    "value",
    "v0_fit",
    "r_squared",
    "v0_mean",
    "v0_se",
    "v0_pred",
    "v0_pred_literal",
    "max_rmsd_mean",
    "max_rmsd_se",
    "chi_final",
    "chi_final_se",
    "chi_steady_time",
    "G_exact",
    "G_weak",
    "G_strong",
)


@dataclass
class PointResult:
    index: int
    value: float
    seeds: list
    mean: TimeSeries
    se: TimeSeries
    summary: dict
    v0_samples: list  # per-realization fitted slopes, realization order
    max_rmsd_samples: list
    realizations: Optional[list] = field(default=None, repr=False)


@dataclass
class EnsembleResult:
    axis: str
    points: list
    n_realizations: int
    base_seed: int
    config_hash: str
    plan_hash: str
    code_version: str
    plan: dict = field(repr=False, default_factory=dict)

    def summary_table(self):
        return [dict(p.summary) for p in self.points]


def _summarize(cfg, value, outcomes, fit_window):
    mean, se = aggregate([o.series for o in outcomes])
    try:
        fit = fit_ballistic_velocity(mean, (0.0, fit_window))
        v0_fit, r2 = fit.v0, fit.r_squared
    except NumericalError:
        v0_fit, r2 = float("nan"), float("nan")
    v0s = [o.v0 for o in outcomes]
    maxes = [float(np.max(o.series.rmsd)) for o in outcomes]
    pred, literal = predicted_velocity(cfg)
    v0_mean, v0_se = _mean_se(v0s)
    max_mean, max_se = _mean_se(maxes)
    summary = {
        "value": value,
        "v0_fit": v0_fit,
        "r_squared": r2,
        "v0_mean": v0_mean,
        "v0_se": v0_se,
        "v0_pred": pred,
        "v0_pred_literal": literal,
        "max_rmsd_mean": max_mean,
        "max_rmsd_se": max_se,
        "chi_final": float(mean.chi[-1]),
        "chi_final_se": float(se.chi[-1]),
        "chi_steady_time": steady_state_time(mean.t, mean.chi),
    }
    for name in EarlyGrowth._fields:
        summary[name] = _mean_se([getattr(o.growth, name) for o in outcomes])[0]
    return mean, se, summary, v0s, maxes


def run_point(plan: SweepPlan, index, threads=1, keep_realizations=False):
    cfg = plan.point_config(index)
    seeds = plan.seeds(index)
    tgrid = time_grid(cfg.run.t_max, cfg.run.dt)

    def work(r):
        try:
            return run_realization(cfg, seeds[r], tgrid, keep_profiles=keep_realizations)
        except Exception as exc:  # attach identity, keep the cause chained
            raise RealizationError(index, r, seeds[r], exc) from exc

    if threads <= 1:
        outcomes = [work(r) for r in range(plan.n_realizations)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(work, r) for r in range(plan.n_realizations)]
            outcomes = []
            try:
                for fut in futures:
                    outcomes.append(fut.result())
            except RealizationError:
                for fut in futures:
                    fut.cancel()
                raise
    mean, se, summary, v0s, maxes = _summarize(cfg, plan.values[index], outcomes, cfg.run.fit_window)
    return PointResult(
        index=index,
        value=plan.values[index],
        seeds=seeds,
        mean=mean,
        se=se,
        summary=summary,
        v0_samples=v0s,
        max_rmsd_samples=maxes,
        realizations=outcomes if keep_realizations else None,
    )


def run_ensemble(plan: SweepPlan, threads=1, keep_realizations=False, progress=None):
    """Run every sweep point; realizations go to a pool of ``threads`` workers.

    Aggregation always happens afterwards in realization-index order, so the
    result does not depend on ``threads``.
    """
    points = []
    for i in range(len(plan.values)):
        points.append(run_point(plan, i, threads, keep_realizations))
        if progress is not None:
            progress(i, points[-1])
    return EnsembleResult(
        axis=plan.axis,
        points=points,
        n_realizations=plan.n_realizations,
        base_seed=plan.base_seed,
        config_hash=plan.base.digest(),
        plan_hash=plan.digest(),
        code_version=__version__,
        plan=plan.to_dict(),
    )


# ---------------------------------------------------------------- persistence


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_series(ts: TimeSeries, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(OBSERVABLES_HEADER)
        for row in zip(ts.t, ts.P_M, ts.rmsd, ts.chi, ts.P_boundary):
            writer.writerow([repr(float(v)) for v in row])


def _read_series(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != OBSERVABLES_HEADER:
            raise CorruptPayloadError(f"{path}: unexpected header {header}")
        rows = [[float(x) for x in row] for row in reader]
    data = np.array(rows, dtype=float).reshape(-1, len(OBSERVABLES_HEADER))
    return TimeSeries(t=data[:, 0], P_M=data[:, 1], rmsd=data[:, 2], chi=data[:, 3], P_boundary=data[:, 4])


def persist(result: EnsembleResult, directory):
    """Write ``manifest.json`` plus mean and standard-error CSVs per point."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        files = {}
        points = []
        for p in result.points:
            for kind, ts in (("mean", p.mean), ("se", p.se)):
                name = f"point_{p.index:03d}_{kind}.csv"
                _write_series(ts, directory / name)
                files[name] = _sha256(directory / name)
            points.append(
                {
                    "index": p.index,
                    "value": p.value,
                    "seeds": [str(s) for s in p.seeds],
                    "summary": p.summary,
                    "v0_samples": p.v0_samples,
                    "max_rmsd_samples": p.max_rmsd_samples,
                    "mean_file": f"point_{p.index:03d}_mean.csv",
                    "se_file": f"point_{p.index:03d}_se.csv",
                }
            )
        manifest = {
            "layout_version": LAYOUT_VERSION,
            "code_version": result.code_version,
            "config_hash": result.config_hash,
            "plan_hash": result.plan_hash,
            "axis": result.axis,
            "n_realizations": result.n_realizations,
            "base_seed": str(result.base_seed),
            "plan": result.plan,
            "points": points,
            "files": files,
        }
        body = json.dumps(manifest, sort_keys=True, indent=1)
        (directory / "manifest.json").write_text(body)
    except OSError as exc:
        raise PersistenceError(f"cannot write ensemble to {directory}: {exc}") from exc
    return directory / "manifest.json"


def load(directory):
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text())
    except OSError as exc:
        raise PersistenceError(f"cannot read {directory / 'manifest.json'}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CorruptPayloadError(f"manifest is not valid JSON: {exc}") from exc
    found = manifest.get("layout_version")
    if found != LAYOUT_VERSION:
        raise IncompatibleVersionError(found, LAYOUT_VERSION)
    for name, digest in manifest["files"].items():
        path = directory / name
        if not path.exists():
            raise CorruptPayloadError(f"missing payload file {name}")
        actual = _sha256(path)
        if actual != digest:
            raise CorruptPayloadError(f"checksum mismatch for {name}: {actual} != {digest}")
    points = []
    for entry in manifest["points"]:
        points.append(
            PointResult(
                index=entry["index"],
                value=entry["value"],
                seeds=[int(s) for s in entry["seeds"]],
                mean=_read_series(directory / entry["mean_file"]),
                se=_read_series(directory / entry["se_file"]),
                summary=entry["summary"],
                v0_samples=entry["v0_samples"],
                max_rmsd_samples=entry["max_rmsd_samples"],
            )
        )
    return EnsembleResult(
        axis=manifest["axis"],
        points=points,
        n_realizations=manifest["n_realizations"],
        base_seed=int(manifest["base_seed"]),
        config_hash=manifest["config_hash"],
        plan_hash=manifest["plan_hash"],
        code_version=manifest["code_version"],
        plan=manifest["plan"],
    )


def _same(a, b):
    if isinstance(a, float) and isinstance(b, float):
        return (math.isnan(a) and math.isnan(b)) or a == b
    return a == b


def results_equal(a: EnsembleResult, b: EnsembleResult):
    """Bitwise equality of every persisted payload and provenance field."""
    head = ("axis", "n_realizations", "base_seed", "config_hash", "plan_hash", "code_version")
    if any(getattr(a, k) != getattr(b, k) for k in head) or len(a.points) != len(b.points):
        return False
    for p, q in zip(a.points, b.points):
        if p.index != q.index or p.value != q.value or list(p.seeds) != list(q.seeds):
            return False
        if p.summary.keys() != q.summary.keys():
            return False
        if not all(_same(p.summary[k], q.summary[k]) for k in p.summary):
            return False
        for xs, ys in ((p.v0_samples, q.v0_samples), (p.max_rmsd_samples, q.max_rmsd_samples)):
            if len(xs) != len(ys) or not all(_same(float(x), float(y)) for x, y in zip(xs, ys)):
                return False
        for s, u in ((p.mean, q.mean), (p.se, q.se)):
            for name in ("t",) + OBSERVABLES:
                if not np.array_equal(getattr(s, name), getattr(u, name), equal_nan=True):
                    return False
    return True


# ----------------------------------------------------------- strong coupling


@dataclass
class SignaturePoint:
    ratio: float  # sigma_M / Omega_R
    gap: object  # eV, or theory.UNRESOLVED
    rabi_period: Optional[float]  # fs, None when no oscillation is found
    rabi_amplitude: Optional[float]
    bright: list  # BrightModes per realization
    mean_P_M: TimeSeries = field(repr=False, default=None)


def default_q_window(cfg: RunConfig):
    """Half a photon grid spacing: only modes whose dominant photon is q = 0."""
    return 0.5 * 2.0 * np.pi / cfg.geometry.L_x


def disorder_signatures(cfg: RunConfig, ratios=None, n_realizations=None, base_seed=None, threads=1):
    """Polariton gap and Rabi period as a function of sigma_M / Omega_R.

    Each ratio is one sweep point with its own seed block. Bright modes are
    pooled over realizations before clustering; the Rabi period is read off
    the ensemble-mean matter population on the fine ``rabi_dt`` grid.
    """
    from dataclasses import replace

    from .errors import NoOscillationError
    from .theory import polariton_gap, rabi_frequency_estimate

    s = cfg.signatures
    ratios = tuple(s.disorder_ratios if ratios is None else ratios)
    n = n_realizations or s.n_realizations
    base_seed = cfg.seed if base_seed is None else base_seed
    q_window = default_q_window(cfg) if s.q_window is None else s.q_window
    tgrid = time_grid(s.rabi_t_max, s.rabi_dt)
    base = replace(cfg, run=replace(cfg.run, profile_times=()))
    out = []
    for i, ratio in enumerate(ratios):
        point = apply_axis(base, "sigma_M_ratio", ratio)
        seeds = [realization_seed(base_seed, i, r) for r in range(n)]

        def work(r, point=point, seeds=seeds, i=i):
            try:
                real = sample_realization(point.matter, seeds[r], point.generator_id)
                spec = diagonalize(build_hamiltonian(real, point.geometry, point.matter))
                psi0 = prepare_wavepacket(point.wavepacket, real, point.geometry)
                ts = propagate(
                    psi0, spec, real, tgrid, point.x0, point.wavepacket.sigma_x, track_norm=False
                )
                return bright_mode_table(spec, s.threshold), ts
            except Exception as exc:
                raise RealizationError(i, r, seeds[r], exc) from exc

        if threads <= 1:
            results = [work(r) for r in range(n)]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(work, range(n)))
        bright = [b for b, _ in results]
        mean, _ = aggregate([ts for _, ts in results])
        gap = polariton_gap(bright, point.matter.E_M, q_window)
        try:
            est = rabi_frequency_estimate(mean)
            period, amp = est.period, est.amplitude
        except NoOscillationError:
            period = amp = None
        out.append(SignaturePoint(float(ratio), gap, period, amp, bright, mean))
    return out
