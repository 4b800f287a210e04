"""Analytic predictions and fitted transport diagnostics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.signal

from .errors import GridMismatchError, InsufficientSamplesError, NoOscillationError
from .spectrum import BrightModes, DispersionTable, Spectrum, effective_group_velocity

UNRESOLVED = "unresolved"
DEFAULT_FIT_WINDOW = (0.0, 500.0)
FIT_WINDOW_VARIANTS = (100.0, 300.0, 500.0, 700.0)


def _checked_distribution(table: DispersionTable, Pq):
    Pq = np.asarray(Pq, dtype=float)
    if Pq.shape != table.q.shape:
        raise GridMismatchError(f"P(q) has shape {Pq.shape}, dispersion grid has {table.q.shape}")
    total = Pq.sum()
    if not total > 0:
        raise ValueError("P(q) must have positive total weight")
    if table.v_eff_LP is None:
        table = effective_group_velocity(table)
    return table, Pq / total


def mean_matter_content(table: DispersionTable, Pq):
    """Time-averaged exciton population ``sum_q P(q) (Pi_LP^2 + Pi_UP^2)``."""
    table, p = _checked_distribution(table, Pq)
    return float(np.sum(p * (table.Pi_LP**2 + table.Pi_UP**2)))


def predict_v0(table: DispersionTable, Pq, renormalize=False):
    """Ballistic spread velocity from the effective exciton group velocity.

    ``v0^2 = sum_q P(q) [v_eff_LP(q)^2 + v_eff_UP(q)^2]``. With
    ``renormalize=True`` the sum is divided by :func:`mean_matter_content`,
    the prefactor that the matter-renormalized RMSD carries; that form is the
    one to compare against fitted slopes.
    """
    table, p = _checked_distribution(table, Pq)
    v2 = float(np.sum(p * (table.v_eff_LP**2 + table.v_eff_UP**2)))
    if renormalize:
        v2 /= mean_matter_content(table, p)
    return float(np.sqrt(v2))


@dataclass(frozen=True)
class BallisticFit:
    v0: float  # nm/fs
    intercept: float  # nm
    r_squared: float
    window: tuple


def fit_ballistic_velocity(ts, window=DEFAULT_FIT_WINDOW):
    """Least-squares line through ``(t, RMSD)`` for ``t_min <= t <= t_max``.

    ``ts`` is a :class:`~polwire.dynamics.TimeSeries` or a ``(t, rmsd)`` pair.
    """
    t, y = (ts.t, ts.rmsd) if hasattr(ts, "rmsd") else ts
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    t_min, t_max = window
    sel = (t >= t_min - 1e-9) & (t <= t_max + 1e-9)
    if np.count_nonzero(sel) < 5:
        raise InsufficientSamplesError(
            f"{np.count_nonzero(sel)} samples in window {window}; need at least 5"
        )
    t, y = t[sel], y[sel]
    tc = t - t.mean()
    yc = y - y.mean()
    slope = float(tc @ yc / (tc @ tc))
    intercept = float(y.mean() - slope * t.mean())
    ss_tot = float(yc @ yc)
    resid = yc - slope * tc
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(resid @ resid) / ss_tot
    return BallisticFit(slope, intercept, min(max(r2, 0.0), 1.0), (float(t_min), float(t_max)))


class EarlyGrowth(NamedTuple):
    G_exact: float  # 1/fs^2
    G_weak: float
    G_strong: float


def _weighted_spread(weights, omega):
    # sum_{A,B} w_A w_B (w_A - w_B)^2 / 2, evaluated around the weighted mean
    total = weights.sum(axis=1)
    mean = (weights @ omega) / np.where(total > 0, total, 1.0)
    dev2 = (omega[None, :] - mean[:, None]) ** 2
    return total * np.einsum("ij,ij->i", weights, dev2)


def early_growth_exact(spec: Spectrum, psi0, interval):
    """Curvature ``(1/2) d^2/dt^2`` at ``t = 0`` of ``1 - sum_{n in I} P_n(t)``.

    Evaluated from the eigen-decomposition: with ``u_nA = <n|A><A|psi0>``,
    ``G = sum_{n in I} Re(S2 S0*) - |S1|^2`` where ``Sk = sum_A u_nA w_A^k``.
    Frequencies are shifted by their mean first; ``G`` only depends on
    differences.
    """
    interval = np.asarray(interval)
    n_m = spec.n_dipoles
    psi0 = np.asarray(psi0, dtype=complex)
    coeff = spec.matter_vectors.conj().T @ psi0[:n_m] + spec.photon_vectors.conj().T @ psi0[n_m:]
    w = spec.omega - spec.omega.mean()
    u = spec.matter_vectors[interval] * coeff[None, :]
    s0 = u.sum(axis=1)
    s1 = u @ w
    s2 = u @ (w * w)
    return float(np.sum((s2 * s0.conj()).real - np.abs(s1) ** 2))


def early_growth_weak(spec: Spectrum, interval):
    """Long-wavelength estimate, ``(1/2N_I) sum_{A,B} sum_{n in I} |A_n|^2 |B_n|^2 (w_A-w_B)^2``."""
    v = spec.matter_vectors[np.asarray(interval)]
    weights = np.abs(v) ** 2
    return float(_weighted_spread(weights, spec.omega).sum() / weights.shape[0])


def early_growth_strong(spec: Spectrum, psi0, interval):
    """Single-realization sample of the strong-disorder estimate.

    ``(1/2) sum_{A,B} sum_{n in I} |A_n|^2 |B_n|^2 |c_n|^2 (w_A-w_B)^2``; the
    disorder average is taken by averaging this over realizations.
    """
    interval = np.asarray(interval)
    weights = np.abs(spec.matter_vectors[interval]) ** 2
    c2 = np.abs(np.asarray(psi0)[: spec.n_dipoles][interval]) ** 2
    return float(c2 @ _weighted_spread(weights, spec.omega))


def early_growth(spec: Spectrum, psi0, interval):
    return EarlyGrowth(
        early_growth_exact(spec, psi0, interval),
        early_growth_weak(spec, interval),
        early_growth_strong(spec, psi0, interval),
    )


class RabiEstimate(NamedTuple):
    period: float  # fs
    amplitude: float


def _welch_amplitude(y, dt, nperseg):
    f, pxx = scipy.signal.welch(y, fs=1.0 / dt, window="hann", nperseg=nperseg, detrend="linear")
    return f, np.sqrt(pxx)


def rabi_frequency_estimate(ts, min_periods=3, contrast=3.0, segments=4, pad=8):
    """Dominant oscillation of ``P_M(t)``.

    Detection: Welch average over half-overlapping Hann segments of length
    ``T / segments``; the resulting amplitude spectrum is compared with a
    power law fitted to it in log-log space, which models the
    non-oscillatory background (relaxation transients, slow drift). The
    strongest peak must exceed ``contrast`` times that background, among
    frequencies that fit ``min_periods`` cycles in one segment; otherwise
    :class:`NoOscillationError` is raised.

    Refinement: the period is re-read from the zero-padded full-record
    spectrum within one Welch bin of the detected peak, and the amplitude
    comes from a least-squares sinusoid at that frequency.
    """
    t, y = (ts.t, ts.P_M) if hasattr(ts, "P_M") else ts
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 8 * segments:
        raise InsufficientSamplesError(f"need at least {8 * segments} samples")
    dt = t[1] - t[0]
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=1e-12):
        raise ValueError("time grid must be uniform")
    y = y - np.polyval(np.polyfit(t, y, 1), t)
    if np.std(y) < 1e-9:
        raise NoOscillationError("P_M(t) is constant")
    nperseg = t.size // segments
    f, amp = _welch_amplitude(y, dt, nperseg)
    seg_duration = nperseg * dt
    band = np.nonzero((f >= min_periods / seg_duration) & (amp > 0))[0]
    if band.size < 4:
        raise NoOscillationError("record too short for the requested number of periods")
    lf, la = np.log(f[band]), np.log(amp[band])
    background = np.exp(np.polyval(np.polyfit(lf, la, 1), lf))
    ratio = amp[band] / background
    i = int(np.argmax(ratio))
    if not ratio[i] > contrast:
        raise NoOscillationError(f"strongest peak is {ratio[i]:.2f} x background (need > {contrast:g})")
    f_detect = f[band[i]]
    n = t.size
    spectrum = np.abs(np.fft.rfft(y * np.hanning(n), pad * n))
    freq = np.fft.rfftfreq(pad * n, dt)
    near = np.nonzero(np.abs(freq - f_detect) <= 1.0 / seg_duration)[0]
    k = near[np.argmax(spectrum[near])]
    fk = freq[k]
    if 0 < k < spectrum.size - 1:
        a, b, c = np.log(spectrum[k - 1 : k + 2] + 1e-300)
        denom = a - 2 * b + c
        if denom < 0:
            fk += 0.5 * (a - c) / denom * (freq[1] - freq[0])
    basis = np.column_stack([np.cos(2 * np.pi * fk * t), np.sin(2 * np.pi * fk * t), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    return RabiEstimate(float(1.0 / fk), float(np.hypot(coef[0], coef[1])))


def polariton_gap(bright, E_M, q_window, clear_fraction=0.5):
    """UP-LP gap (eV) from bright modes with ``|q_peak| <= q_window``.

    ``bright`` is one :class:`BrightModes` table or a sequence of them
    (pooled, e.g. over realizations). Modes are split at ``E_M``; the gap is
    the difference of the cluster means. Returns :data:`UNRESOLVED` when
    one side is empty, or when the two clusters close in on ``E_M``: the
    clear band between the 95th percentile of the lower cluster and the 5th
    percentile of the upper one is narrower than ``clear_fraction`` times
    the gap.
    """
    if isinstance(bright, BrightModes):
        bright = [bright]
    energy = np.concatenate([np.asarray(b.energy) for b in bright]) if bright else np.empty(0)
    q = np.concatenate([np.asarray(b.q_peak) for b in bright]) if bright else np.empty(0)
    sel = energy[np.abs(q) <= q_window]
    if sel.size == 0:
        raise ValueError("no bright modes inside the q window")
    upper, lower = sel[sel > E_M], sel[sel <= E_M]
    if upper.size == 0 or lower.size == 0:
        return UNRESOLVED
    gap = float(upper.mean() - lower.mean())
    clear = np.percentile(upper, 5) - np.percentile(lower, 95)
    if clear < clear_fraction * gap:
        return UNRESOLVED
    return gap


def steady_state_time(t, chi, fraction=0.95):
    """First time at which ``chi`` reaches ``fraction`` of its final value."""
    t = np.asarray(t, dtype=float)
    chi = np.asarray(chi, dtype=float)
    target = fraction * chi[-1]
    hit = np.nonzero(chi >= target)[0]
    return float(t[hit[0]]) if hit.size else float("nan")
