"""Eigen-decomposition of the wire Hamiltonian and the ordered-system dispersion."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg

from .errors import ConvergenceError
from .model import CONSTANTS, CavityGeometry, HamiltonianMatrix, MatterSpec, photon_energy, photon_wavevectors

RESIDUAL_TOL = 1e-8  # eV


@dataclass(frozen=True)
class Spectrum:
    """Eigenpairs of one Hamiltonian.

    Eigenvector columns are stored split into the dipole rows
    (``matter_vectors``, real when the real-symmetric path was used) and the
    photon rows, in the same basis ordering as :class:`HamiltonianMatrix`.
    """

    omega: np.ndarray  # 1/fs, ascending
    matter_vectors: np.ndarray = field(repr=False)
    photon_vectors: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)
    hbar: float = CONSTANTS.hbar

    @property
    def n_dipoles(self):
        return self.matter_vectors.shape[0]

    @property
    def dim(self):
        return self.omega.size

    @property
    def energies(self):
        return self.hbar * self.omega

    @property
    def vectors(self):
        return np.vstack([self.matter_vectors.astype(complex), self.photon_vectors])

    @property
    def exciton_content(self):
        v = self.matter_vectors
        w = np.einsum("ij,ij->j", v.real, v.real)
        if np.iscomplexobj(v):
            w += np.einsum("ij,ij->j", v.imag, v.imag)
        return np.clip(w, 0.0, 1.0)

    @property
    def photon_content(self):
        return 1.0 - self.exciton_content


def _real_photon_transform(m_x):
    """Unitary ``W`` on the photon block mapping the Hamiltonian to a real matrix.

    Pairs ``(m, -m)`` are recombined into ``i(|m>+|-m>)/sqrt2`` and
    ``(|m>-|-m>)/sqrt2``; ``m = 0`` is multiplied by ``i``. Returns ``None``
    when the mode set is not symmetric.
    """
    m_x = np.asarray(m_x)
    index = {int(m): j for j, m in enumerate(m_x)}
    if set(index) != {-m for m in index}:
        return None
    n = m_x.size
    w = np.zeros((n, n), dtype=complex)
    s = np.sqrt(0.5)
    for m, j in index.items():
        if m == 0:
            w[j, j] = 1j
        elif m > 0:
            k = index[-m]
            w[j, j], w[k, j] = 1j * s, 1j * s
            w[j, k], w[k, k] = s, -s
    return w


def _realify(h: HamiltonianMatrix):
    """Try to express ``H`` as a real symmetric matrix; return (H_real, W) or None."""
    n_m = h.n_dipoles
    pp = h.entries[n_m:, n_m:]
    mm = h.entries[:n_m, :n_m]
    diag = np.diag(pp).real
    if np.any(pp - np.diag(np.diag(pp))) or np.any(np.diag(pp).imag) or np.any(mm.imag):
        return None
    w = _real_photon_transform(h.m_x)
    if w is None:
        return None
    # W mixes only degenerate +/-m pairs, so the photon block must stay diagonal.
    paired = np.abs(w) > 0
    rows, cols = np.nonzero(paired)
    if np.any(diag[rows] != diag[cols]):
        return None
    mp = h.entries[:n_m, n_m:] @ w
    scale = max(np.abs(mp).max(initial=0.0), 1e-300)
    if np.abs(mp.imag).max(initial=0.0) > 1e-12 * scale:
        return None
    hr = np.zeros(h.entries.shape, dtype=float)
    hr[:n_m, :n_m] = mm.real
    hr[:n_m, n_m:] = mp.real
    hr[n_m:, :n_m] = mp.real.T
    hr[n_m:, n_m:] = np.diag(diag)
    return hr, w


def _max_residual(mat, evals, evecs, chunk=512):
    worst = 0.0
    for start in range(0, evals.size, chunk):
        sl = slice(start, start + chunk)
        r = mat @ evecs[:, sl] - evecs[:, sl] * evals[sl]
        worst = max(worst, float(np.sqrt((np.abs(r) ** 2).sum(axis=0)).max()))
    return worst


def diagonalize(h: HamiltonianMatrix, method="auto", check=True, hbar=CONSTANTS.hbar):
    """Full dense eigen-decomposition of ``h``.

    ``method="auto"`` rotates the photon block into standing-wave
    combinations, which makes the wire Hamiltonian real symmetric and
    roughly five times cheaper to diagonalize. Any Hamiltonian without that
    structure falls back to the complex Hermitian solver.
    """
    if method not in ("auto", "real", "complex"):
        raise ValueError(f"unknown method {method!r}")
    n_m = h.n_dipoles
    reduced = _realify(h) if method != "complex" else None
    if method == "real" and reduced is None:
        raise ValueError("Hamiltonian has no real-symmetric form")
    try:
        if reduced is not None:
            hr, w = reduced
            evals, evecs = scipy.linalg.eigh(hr, driver="evd")
            mat = hr
        else:
            mat = np.asarray(h.entries)
            evals, evecs = scipy.linalg.eigh(mat, driver="evd")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"eigensolver failed: {exc}") from exc
    if check:
        res = _max_residual(mat, evals, evecs)
        if not res <= RESIDUAL_TOL:
            raise ConvergenceError(f"eigenpair residual {res:.3e} eV exceeds {RESIDUAL_TOL:g} eV")
    if reduced is not None:
        photon = w @ evecs[n_m:]
    else:
        photon = evecs[n_m:]
    matter = np.ascontiguousarray(evecs[:n_m])
    for arr in (evals, matter, photon):
        arr.setflags(write=False)
    return Spectrum(evals / hbar, matter, photon, np.asarray(h.q), hbar)


class BrightModes(NamedTuple):
    energy: np.ndarray  # eV
    q_peak: np.ndarray  # 1/nm
    photon_content: np.ndarray


def bright_mode_table(spec: Spectrum, threshold=0.10):
    """Eigenstates with photon content above ``threshold``.

    Each is tagged with the photon wave number carrying its largest
    probability ``|<0;q|A>|^2``.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    pc = spec.photon_content
    sel = np.nonzero(pc > threshold)[0]
    peak = np.argmax(np.abs(spec.photon_vectors[:, sel]) ** 2, axis=0)
    return BrightModes(spec.energies[sel], spec.q[peak], pc[sel])


@dataclass(frozen=True)
class DispersionTable:
    q: np.ndarray
    omega_LP: np.ndarray
    omega_UP: np.ndarray
    Pi_LP: np.ndarray
    Pi_UP: np.ndarray
    E_M: float
    Omega_R: float
    geometry: CavityGeometry
    v_g_LP: Optional[np.ndarray] = None
    v_g_UP: Optional[np.ndarray] = None
    v_eff_LP: Optional[np.ndarray] = None
    v_eff_UP: Optional[np.ndarray] = None
    hbar: float = CONSTANTS.hbar


def _branches(q, geom, E_M, Omega_R, constants=CONSTANTS):
    eps = photon_energy(geom, q, constants)
    g2 = 0.25 * Omega_R**2 * E_M / eps
    half = 0.5 * (eps - E_M)
    R = np.sqrt(half**2 + g2)
    mean = 0.5 * (eps + E_M)
    with np.errstate(invalid="ignore", divide="ignore"):
        tilt = np.where(R > 0, half / R, 0.0)
    Pi_UP = 0.5 * (1.0 - tilt)
    Pi_LP = 0.5 * (1.0 + tilt)
    return eps, g2, half, R, mean, Pi_LP, Pi_UP


def ordered_dispersion(geom: CavityGeometry, spec: MatterSpec, q=None, constants=CONSTANTS):
    """Polariton branches of the translationally invariant wire.

    Per wave number the exciton at ``E_M`` couples to the photon with
    ``g_q = (Omega_R/2) sqrt(E_M / hbar omega_q)``; ``Pi`` is the exciton
    weight of each 2x2 eigenvector.
    """
    if q is None:
        _, q = photon_wavevectors(geom)
    q = np.asarray(q, dtype=float)
    _, _, _, R, mean, Pi_LP, Pi_UP = _branches(q, geom, spec.E_M, spec.Omega_R, constants)
    hbar = constants.hbar
    return DispersionTable(
        q=q,
        omega_LP=(mean - R) / hbar,
        omega_UP=(mean + R) / hbar,
        Pi_LP=Pi_LP,
        Pi_UP=Pi_UP,
        E_M=float(spec.E_M),
        Omega_R=float(spec.Omega_R),
        geometry=geom,
        hbar=hbar,
    )


def group_velocities(q, geom, E_M, Omega_R, constants=CONSTANTS):
    """Analytic ``d omega / dq`` of both branches, in nm/fs."""
    q = np.asarray(q, dtype=float)
    eps, g2, half, R, _, _, _ = _branches(q, geom, E_M, Omega_R, constants)
    deps = (constants.hbar_c**2 / geom.epsilon) * q / eps
    dg2 = -g2 * deps / eps
    with np.errstate(invalid="ignore", divide="ignore"):
        dR = np.where(R > 0, (half * deps + dg2) / (2.0 * R), 0.0)
    return (0.5 * deps - dR) / constants.hbar, (0.5 * deps + dR) / constants.hbar


def effective_group_velocity(table: DispersionTable):
    consts = CONSTANTS if table.hbar == CONSTANTS.hbar else replace(CONSTANTS, hbar=table.hbar)
    vg_lp, vg_up = group_velocities(table.q, table.geometry, table.E_M, table.Omega_R, consts)
    return replace(
        table,
        v_g_LP=vg_lp,
        v_g_UP=vg_up,
        v_eff_LP=table.Pi_LP * vg_lp,
        v_eff_UP=table.Pi_UP * vg_up,
    )


DISPERSION_HEADER = (
    "q_invnm",
    "omega_LP_invfs",
    "omega_UP_invfs",
    "Pi_LP",
    "Pi_UP",
    "vg_LP_nmfs",
    "vg_UP_nmfs",
    "veff_LP_nmfs",
    "veff_UP_nmfs",
)


def write_dispersion_csv(table: DispersionTable, path):
    if table.v_eff_LP is None:
        table = effective_group_velocity(table)
    cols = (
        table.q,
        table.omega_LP,
        table.omega_UP,
        table.Pi_LP,
        table.Pi_UP,
        table.v_g_LP,
        table.v_g_UP,
        table.v_eff_LP,
        table.v_eff_UP,
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DISPERSION_HEADER)
        for row in zip(*cols):
            writer.writerow([repr(float(x)) for x in row])
