"""Gaussian exciton wave packets, spectral propagation and observables.

State vectors are plain complex arrays over the (dipoles + photons) basis.
Every single-state observable also accepts a matter-only array of length
``N_M``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DegenerateWavepacketError, DimensionError, NoMatterContentError
from .model import CavityGeometry, Realization
from .spectrum import Spectrum

MIN_MATTER = 1e-14


@dataclass(frozen=True)
class WavepacketSpec:
    sigma_x: float
    qbar0: float = 0.0
    x0: Optional[float] = None  # defaults to L_x / 2

    def __post_init__(self):
        if not self.sigma_x > 0:
            raise ValueError(f"sigma_x must be > 0, got {self.sigma_x}")

    def center(self, geom: CavityGeometry):
        return 0.5 * geom.L_x if self.x0 is None else float(self.x0)


def prepare_wavepacket(wp: WavepacketSpec, real: Realization, geom: CavityGeometry):
    """Normalized Gaussian exciton packet with zero photon amplitude."""
    x = real.positions
    x0 = wp.center(geom)
    inside = np.count_nonzero(np.abs(x - x0) <= 3.0 * wp.sigma_x)
    if inside < 3:
        raise DegenerateWavepacketError(
            f"only {inside} site(s) within 3 sigma_x = {3 * wp.sigma_x:g} nm of x0 = {x0:g} nm"
        )
    c = np.exp(-((x - x0) ** 2) / (4.0 * wp.sigma_x**2) + 1j * wp.qbar0 * x)
    psi = np.zeros(real.n_sites + geom.n_modes, dtype=complex)
    psi[: real.n_sites] = c / np.linalg.norm(c)
    return psi


def migration_interval(real: Realization, x0, sigma_x):
    """Boolean mask of sites with ``x0 - 3 sigma_x <= x_n <= x0 + 3 sigma_x``."""
    return np.abs(real.positions - x0) <= 3.0 * sigma_x


def momentum_distribution(psi, real: Realization, q):
    """Exciton probability on the wave-number grid ``q``, normalized to one."""
    c = np.asarray(psi)[: real.n_sites]
    q = np.asarray(q, dtype=float)
    ck = np.exp(-1j * np.outer(q, real.positions)) @ c / np.sqrt(real.n_sites)
    p = np.abs(ck) ** 2
    return p / p.sum()


def distribution_moments(q, p):
    """Mean and standard deviation of a discrete distribution."""
    p = np.asarray(p, dtype=float) / np.sum(p)
    mean = float(np.dot(p, q))
    return mean, float(np.sqrt(np.dot(p, (np.asarray(q) - mean) ** 2)))


def _coefficients(psi0, spec: Spectrum):
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (spec.dim,):
        raise DimensionError(f"state has shape {psi0.shape}, spectrum dimension is {spec.dim}")
    n_m = spec.n_dipoles
    return spec.matter_vectors.conj().T @ psi0[:n_m] + spec.photon_vectors.conj().T @ psi0[n_m:]


def _apply(vectors, x):
    # Real eigenvector blocks: two real GEMMs beat one complex GEMM.
    # .real/.imag are strided views; matmul only reaches BLAS on contiguous data.
    if np.isrealobj(vectors):
        out = np.empty((vectors.shape[0], x.shape[1]), dtype=complex)
        out.real = vectors @ np.ascontiguousarray(x.real)
        out.imag = vectors @ np.ascontiguousarray(x.imag)
        return out
    return vectors @ x


def _phases(spec, coeff, t):
    return np.exp(-1j * np.outer(spec.omega, t)) * coeff[:, None]


def evolve(psi0, spec: Spectrum, tgrid):
    """Exact states ``exp(-iHt/hbar) psi0`` for each ``t``; shape ``(len(t), dim)``."""
    t = np.atleast_1d(np.asarray(tgrid, dtype=float))
    coeff = _coefficients(psi0, spec)
    x = _phases(spec, coeff, t)
    out = np.empty((t.size, spec.dim), dtype=complex)
    out[:, : spec.n_dipoles] = _apply(spec.matter_vectors, x).T
    out[:, spec.n_dipoles :] = (spec.photon_vectors @ x).T
    zero = t == 0
    if np.any(zero):
        out[zero] = np.asarray(psi0, dtype=complex)
    return out


def matter_amplitudes(psi0, spec: Spectrum, tgrid):
    """Dipole amplitudes only, shape ``(len(t), N_M)``."""
    t = np.atleast_1d(np.asarray(tgrid, dtype=float))
    coeff = _coefficients(psi0, spec)
    return _apply(spec.matter_vectors, _phases(spec, coeff, t)).T


def _site_probabilities(psi, n_sites):
    psi = np.asarray(psi)
    if psi.shape[-1] < n_sites:
        raise DimensionError(f"state has {psi.shape[-1]} entries, expected at least {n_sites}")
    return np.abs(psi[..., :n_sites]) ** 2


def _matter(p):
    pm = p.sum(axis=-1)
    if np.any(pm < MIN_MATTER):
        raise NoMatterContentError(f"matter population {np.min(pm):.3e} below {MIN_MATTER:g}")
    return pm


def matter_population(psi, real: Realization):
    return float(_site_probabilities(psi, real.n_sites).sum())


def rmsd(psi, real: Realization, x0):
    """Matter-renormalized root mean square displacement about ``x0`` (nm)."""
    p = _site_probabilities(psi, real.n_sites)
    return float(np.sqrt(p @ (real.positions - x0) ** 2 / _matter(p)))


def migration_probability(psi, real: Realization, x0, sigma_x, normalize=True):
    """Probability of finding the exciton outside the initial +-3 sigma_x window.

    With ``normalize=False`` the population inside the window is not
    divided by the matter population (the form whose second derivative
    :func:`polwire.theory.early_growth_exact` reproduces).
    """
    p = _site_probabilities(psi, real.n_sites)
    inside = p[migration_interval(real, x0, sigma_x)].sum()
    if normalize:
        return float(1.0 - inside / _matter(p))
    return float(1.0 - inside)


def edge_mask(n_sites, n_edge):
    if not 0 <= n_edge < n_sites / 2:
        raise ValueError(f"n_edge must satisfy 0 <= n_edge < N_M/2, got {n_edge}")
    mask = np.zeros(n_sites, dtype=bool)
    if n_edge:
        mask[:n_edge] = True
        mask[-n_edge:] = True
    return mask


def boundary_probability(psi, real: Realization, n_edge):
    """Population on the ``n_edge`` sites nearest each end of the wire."""
    p = _site_probabilities(psi, real.n_sites)
    return float(p[edge_mask(real.n_sites, n_edge)].sum())


def profile_edges(real: Realization, bin_width, length=None):
    if not bin_width > 0:
        raise ValueError("bin_width must be > 0")
    top = max(real.positions[-1], length or 0.0)
    nbins = max(1, int(np.ceil(top / bin_width - 1e-12)))
    if nbins * bin_width < real.positions[-1]:
        nbins += 1
    return np.arange(nbins + 1) * float(bin_width)


def density_profile(psi, real: Realization, bin_width, length=None):
    """Exciton probability binned along x. Returns ``(bin_centers, probability)``."""
    return _binned(_site_probabilities(psi, real.n_sites), real, bin_width, length)


def _binned(p, real, bin_width, length):
    edges = profile_edges(real, bin_width, length)
    idx = np.clip(np.searchsorted(edges, real.positions, side="right") - 1, 0, edges.size - 2)
    hist = np.bincount(idx, weights=p, minlength=edges.size - 1)
    return 0.5 * (edges[1:] + edges[:-1]), hist


@dataclass
class TimeSeries:
    t: np.ndarray
    P_M: np.ndarray
    rmsd: np.ndarray
    chi: np.ndarray
    P_boundary: np.ndarray
    norm: Optional[np.ndarray] = None
    profiles: dict = field(default_factory=dict)  # t -> (bin_centers, probability)

    def __len__(self):
        return self.t.size


OBSERVABLES_HEADER = ("t_fs", "P_M", "RMSD_nm", "chi", "P_boundary")


def time_grid(t_max, dt):
    n = int(round(t_max / dt))
    return np.arange(n + 1) * float(dt)


def propagate(
    psi0,
    spec: Spectrum,
    real: Realization,
    tgrid,
    x0,
    sigma_x,
    n_edge=0,
    profile_times=(),
    bin_width=500.0,
    length=None,
    track_norm=True,
    chunk=256,
):
    """Evolve ``psi0`` and reduce to observables one time chunk at a time.

    Only the observables are kept; full site populations are retained just
    for the requested ``profile_times`` (matched to the nearest grid time).
    """
    t = np.asarray(tgrid, dtype=float)
    coeff = _coefficients(psi0, spec)
    x = real.positions
    d2 = (x - x0) ** 2
    inside = migration_interval(real, x0, sigma_x)
    edges = edge_mask(real.n_sites, n_edge)
    out = {k: np.empty(t.size) for k in ("P_M", "rmsd", "chi", "P_boundary", "norm")}
    want = {int(np.argmin(np.abs(t - tp))): tp for tp in profile_times}
    profiles = {}
    for start in range(0, t.size, chunk):
        sl = slice(start, start + chunk)
        ph = _phases(spec, coeff, t[sl])
        amp = _apply(spec.matter_vectors, ph)
        p = amp.real**2 + amp.imag**2  # (N_M, chunk)
        pm = p.sum(axis=0)
        if np.any(pm < MIN_MATTER):
            raise NoMatterContentError(f"matter population {pm.min():.3e} below {MIN_MATTER:g}")
        out["P_M"][sl] = pm
        out["rmsd"][sl] = np.sqrt(d2 @ p / pm)
        out["chi"][sl] = 1.0 - p[inside].sum(axis=0) / pm
        out["P_boundary"][sl] = p[edges].sum(axis=0)
        if track_norm:
            photon = spec.photon_vectors @ ph
            out["norm"][sl] = pm + (np.abs(photon) ** 2).sum(axis=0)
        for j in range(p.shape[1]):
            if start + j in want:
                profiles[float(t[start + j])] = _binned(p[:, j], real, bin_width, length)
    return TimeSeries(
        t=t,
        P_M=out["P_M"],
        rmsd=out["rmsd"],
        chi=out["chi"],
        P_boundary=out["P_boundary"],
        norm=out["norm"] if track_norm else None,
        profiles=profiles,
    )


def write_observables_csv(ts: TimeSeries, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(OBSERVABLES_HEADER)
        for row in zip(ts.t, ts.P_M, ts.rmsd, ts.chi, ts.P_boundary):
            writer.writerow([repr(float(v)) for v in row])


def read_observables_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return TimeSeries(t=data[:, 0], P_M=data[:, 1], rmsd=data[:, 2], chi=data[:, 3], P_boundary=data[:, 4])


def write_profile_csv(centers, probability, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("bin_center_nm", "probability"))
        for c, p in zip(centers, probability):
            writer.writerow([repr(float(c)), repr(float(p))])


def write_profiles(ts: TimeSeries, directory, stem="profile"):
    directory = Path(directory)
    paths = []
    for tp, (centers, prob) in sorted(ts.profiles.items()):
        path = directory / f"{stem}_t{tp:g}fs.csv"
        write_profile_csv(centers, prob, path)
        paths.append(path)
    return paths
