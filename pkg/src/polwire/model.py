"""Wire geometry, disorder sampling and the single-excitation Hamiltonian.

Units are fixed throughout the package: energies in eV, lengths in nm,
times in fs. Angular frequencies are in 1/fs and wave numbers in 1/nm.

Basis ordering of every state vector and matrix: the first ``N_M`` entries
are the dipole sites ``|n;0>`` in position order, followed by the ``N_c``
photon modes ``|0;q>`` in ascending ``m_x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, SamplingError


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 0.6582119569  # eV fs
    hbar_c: float = 197.3269804  # eV nm
    # e^2 / epsilon_0 = 4 pi * (e^2 / 4 pi epsilon_0), in eV nm
    e2_over_eps0: float = 4.0 * np.pi * 1.439964547

    @property
    def c(self):
        """Speed of light in nm/fs."""
        return self.hbar_c / self.hbar


CONSTANTS = PhysicalConstants()
HBAR = CONSTANTS.hbar


@dataclass(frozen=True)
class CavityGeometry:
    L_x: float
    L_y: float
    L_z: float
    epsilon: float
    m_max: int

    def __post_init__(self):
        for name in ("L_x", "L_y", "L_z"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"must be > 0, got {getattr(self, name)}", name)
        if not self.epsilon >= 1:
            raise ConfigError(f"must be >= 1, got {self.epsilon}", "epsilon")
        if int(self.m_max) != self.m_max or self.m_max < 0:
            raise ConfigError(f"must be a non-negative integer, got {self.m_max}", "m_max")

    @property
    def n_modes(self):
        return 2 * int(self.m_max) + 1

    @property
    def q0(self):
        """Transverse cutoff wave number from the confined y and z directions."""
        return float(np.hypot(np.pi / self.L_y, np.pi / self.L_z))


@dataclass(frozen=True)
class MatterSpec:
    N_M: int
    a: float
    sigma_a: float
    E_M: float
    sigma_M: float
    Omega_R: float

    def __post_init__(self):
        if int(self.N_M) != self.N_M or self.N_M < 1:
            raise ConfigError(f"must be an integer >= 1, got {self.N_M}", "N_M")
        checks = (
            ("a", self.a > 0),
            ("sigma_a", self.sigma_a >= 0),
            ("E_M", self.E_M > 0),
            ("sigma_M", self.sigma_M >= 0),
            ("Omega_R", self.Omega_R >= 0),
        )
        for name, ok in checks:
            if not ok:
                raise ConfigError(f"out of range: {getattr(self, name)}", name)


def check_consistency(spec: MatterSpec, geom: CavityGeometry, rtol=1e-9):
    """Require ``N_M * a == L_x``; the wire length is pinned to the lattice."""
    expected = spec.N_M * spec.a
    if abs(expected - geom.L_x) > rtol * max(expected, geom.L_x):
        raise ConfigError(
            f"N_M * a = {spec.N_M} * {spec.a} = {expected:g} nm but L_x = {geom.L_x:g} nm; "
            f"set Lx_nm to {expected:g} or adjust N_M / a_nm",
            "geometry.Lx_nm",
        )


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Realization:
    positions: np.ndarray
    energies: np.ndarray
    seed: int
    generator_id: str = "PCG64"

    def __post_init__(self):
        object.__setattr__(self, "positions", _frozen(self.positions))
        object.__setattr__(self, "energies", _frozen(self.energies))
        if self.positions.shape != self.energies.shape or self.positions.ndim != 1:
            raise DimensionError("positions and energies must be 1-D arrays of equal length")
        if np.any(np.diff(self.positions) <= 0):
            raise SamplingError("positions must be strictly increasing")
        if np.any(self.energies <= 0):
            raise SamplingError("excitation energies must be positive")

    @property
    def n_sites(self):
        return self.positions.size


@dataclass(frozen=True)
class HamiltonianMatrix:
    entries: np.ndarray
    n_dipoles: int
    m_x: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.entries.shape[0]

    @property
    def n_photons(self):
        return self.dim - self.n_dipoles


def photon_wavevectors(geom: CavityGeometry):
    """Return ``(m_x, q)`` arrays for all modes, ascending in ``m_x``."""
    m = np.arange(-int(geom.m_max), int(geom.m_max) + 1)
    return m, 2.0 * np.pi * m / geom.L_x


def photon_energy(geom: CavityGeometry, q, constants=CONSTANTS):
    """Bare cavity mode energy ``hbar*omega_q`` in eV."""
    q = np.asarray(q, dtype=float)
    return constants.hbar_c / np.sqrt(geom.epsilon) * np.sqrt(q * q + geom.q0**2)


def make_generator(seed, generator_id="PCG64"):
    try:
        bitgen = getattr(np.random, generator_id)
    except AttributeError:
        raise ConfigError(f"unknown generator {generator_id!r}", "generator_id") from None
    if not (isinstance(bitgen, type) and issubclass(bitgen, np.random.BitGenerator)):
        raise ConfigError(f"unknown generator {generator_id!r}", "generator_id")
    return np.random.Generator(bitgen(int(seed)))


def sample_realization(spec: MatterSpec, seed, generator_id="PCG64"):
    """Draw dipole spacings and excitation energies.

    Spacings are drawn first, then energies, from one generator stream.
    Non-positive draws raise :class:`SamplingError` instead of being
    resampled.
    """
    rng = make_generator(seed, generator_id)
    n = int(spec.N_M)
    spacings = rng.normal(spec.a, spec.sigma_a, size=n)
    energies = rng.normal(spec.E_M, spec.sigma_M, size=n)
    if spec.sigma_a == 0:
        positions = spec.a * np.arange(1, n + 1)
    else:
        if np.any(spacings <= 0):
            raise SamplingError(f"{int(np.sum(spacings <= 0))} non-positive spacing(s) drawn (seed {seed})")
        positions = np.cumsum(spacings)
    if spec.sigma_M == 0:
        energies = np.full(n, float(spec.E_M))
    elif np.any(energies <= 0):
        raise SamplingError(f"{int(np.sum(energies <= 0))} non-positive energy(ies) drawn (seed {seed})")
    return Realization(positions, energies, int(seed), generator_id)


def dipole_to_rabi(mu, N_M, geom: CavityGeometry, constants=CONSTANTS):
    """Collective Rabi splitting (eV) for a dipole z-component ``mu`` in e*nm."""
    hw0 = float(photon_energy(geom, 0.0, constants))
    volume = geom.L_x * geom.L_y * geom.L_z
    return mu * np.sqrt(constants.e2_over_eps0 * hw0 * N_M / (2.0 * geom.epsilon * volume))


def rabi_to_dipole(spec: MatterSpec, geom: CavityGeometry, constants=CONSTANTS):
    """Dipole z-component (e*nm) that produces ``spec.Omega_R``."""
    return spec.Omega_R / dipole_to_rabi(1.0, spec.N_M, geom, constants)


def coupling_block(real: Realization, geom: CavityGeometry, spec: MatterSpec, constants=CONSTANTS):
    """Dipole-photon block ``<n;0|H|0;q>`` with shape (N_M, N_c)."""
    _, q = photon_wavevectors(geom)
    hw = photon_energy(geom, q, constants)
    amp = 0.5 * spec.Omega_R * np.sqrt(np.outer(real.energies, 1.0 / hw) / spec.N_M)
    return -1j * amp * np.exp(1j * np.outer(real.positions, q))


def build_hamiltonian(real: Realization, geom: CavityGeometry, spec: MatterSpec, constants=CONSTANTS):
    if real.n_sites != spec.N_M:
        raise DimensionError(f"realization has {real.n_sites} sites, spec expects N_M={spec.N_M}")
    m, q = photon_wavevectors(geom)
    n_m, n_c = real.n_sites, m.size
    h = np.zeros((n_m + n_c, n_m + n_c), dtype=complex)
    h[np.arange(n_m), np.arange(n_m)] = real.energies
    h[n_m + np.arange(n_c), n_m + np.arange(n_c)] = photon_energy(geom, q, constants)
    block = coupling_block(real, geom, spec, constants)
    h[:n_m, n_m:] = block
    h[n_m:, :n_m] = block.conj().T
    for arr in (h, m, q):
        arr.setflags(write=False)
    return HamiltonianMatrix(h, n_m, m, q)
