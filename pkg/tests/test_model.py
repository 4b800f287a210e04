import numpy as np
import pytest
import scipy.constants as sc
from hypothesis import given, settings, strategies as st

from polwire.errors import ConfigError, DimensionError, SamplingError
from polwire.model import (
    CONSTANTS,
    CavityGeometry,
    MatterSpec,
    Realization,
    build_hamiltonian,
    check_consistency,
    dipole_to_rabi,
    photon_energy,
    photon_wavevectors,
    rabi_to_dipole,
    sample_realization,
)

FULL_GEOM = CavityGeometry(50000.0, 200.0, 400.0, 3.0, 500)
DESK_GEOM = CavityGeometry(10000.0, 200.0, 400.0, 3.0, 200)


def small_case(n=40, m_max=6, sigma_a=1.0, sigma_M=0.02, omega=0.1, seed=3):
    geom = CavityGeometry(n * 10.0, 200.0, 400.0, 3.0, m_max)
    spec = MatterSpec(n, 10.0, sigma_a, 2.0, sigma_M, omega)
    return geom, spec, sample_realization(spec, seed)


def test_constants_match_codata():
    hbar = sc.hbar / sc.e * 1e15
    hbar_c = sc.hbar * sc.c / sc.e * 1e9
    assert CONSTANTS.hbar == pytest.approx(hbar, rel=1e-9)
    assert CONSTANTS.hbar_c == pytest.approx(hbar_c, rel=1e-9)
    assert CONSTANTS.e2_over_eps0 == pytest.approx(sc.e / sc.epsilon_0 * 1e9, rel=1e-8)


def test_cutoff_and_top_mode_energy():
    m, q = photon_wavevectors(FULL_GEOM)
    hw = photon_energy(FULL_GEOM, q)
    assert hw.min() == pytest.approx(2.000, abs=0.005)
    assert hw.max() == pytest.approx(7.43, abs=0.01)
    assert m[0] == -500 and m[-1] == 500 and m.size == FULL_GEOM.n_modes


def test_photon_energy_is_even_and_increasing_in_q():
    _, q = photon_wavevectors(DESK_GEOM)
    hw = photon_energy(DESK_GEOM, q)
    assert np.array_equal(hw, hw[::-1])
    assert np.all(np.diff(hw[q >= 0]) > 0)


def test_geometry_validation_names_the_field():
    with pytest.raises(ConfigError) as err:
        CavityGeometry(-1.0, 200.0, 400.0, 3.0, 5)
    assert err.value.path == "L_x"
    with pytest.raises(ConfigError):
        CavityGeometry(100.0, 200.0, 400.0, 0.5, 5)
    with pytest.raises(ConfigError):
        MatterSpec(0, 10.0, 0.0, 2.0, 0.0, 0.1)


def test_consistency_rejects_mismatched_length_with_fix():
    spec = MatterSpec(1000, 10.0, 0.0, 2.0, 0.0, 0.1)
    check_consistency(spec, DESK_GEOM)
    with pytest.raises(ConfigError) as err:
        check_consistency(spec, FULL_GEOM)
    assert err.value.path == "geometry.Lx_nm"
    assert "10000" in str(err.value)


def test_ordered_sampling_is_an_exact_lattice():
    spec = MatterSpec(50, 10.0, 0.0, 2.0, 0.0, 0.1)
    real = sample_realization(spec, 11)
    assert np.array_equal(real.positions, 10.0 * np.arange(1, 51))
    assert np.all(real.energies == 2.0)


def test_sampling_is_deterministic_per_seed():
    spec = MatterSpec(200, 10.0, 1.0, 2.0, 0.05, 0.1)
    a, b, c = (sample_realization(spec, s) for s in (5, 5, 6))
    assert np.array_equal(a.positions, b.positions) and np.array_equal(a.energies, b.energies)
    assert not np.array_equal(a.energies, c.energies)


def test_spacings_drawn_before_energies():
    spec = MatterSpec(30, 10.0, 1.0, 2.0, 0.05, 0.1)
    real = sample_realization(spec, 9)
    rng = np.random.Generator(np.random.PCG64(9))
    spacings = rng.normal(10.0, 1.0, 30)
    energies = rng.normal(2.0, 0.05, 30)
    assert np.array_equal(real.positions, np.cumsum(spacings))
    assert np.array_equal(real.energies, energies)


def test_sample_moments_follow_the_law_of_large_numbers():
    spec = MatterSpec(200000, 10.0, 1.0, 2.0, 0.04, 0.1)
    real = sample_realization(spec, 1)
    spacing = np.diff(real.positions)
    n = spacing.size
    assert abs(spacing.mean() - 10.0) < 5 / np.sqrt(n)
    assert abs(spacing.std() - 1.0) < 5 / np.sqrt(2 * n)
    assert abs(real.energies.mean() - 2.0) < 5 * 0.04 / np.sqrt(n)
    assert abs(real.energies.std() - 0.04) < 5 * 0.04 / np.sqrt(2 * n)


def test_non_positive_draws_raise():
    with pytest.raises(SamplingError):
        sample_realization(MatterSpec(1000, 1.0, 2.0, 2.0, 0.0, 0.1), 0)
    with pytest.raises(SamplingError):
        sample_realization(MatterSpec(1000, 10.0, 0.0, 0.1, 0.2, 0.1), 0)


def test_realization_is_read_only():
    _, _, real = small_case()
    with pytest.raises(ValueError):
        real.positions[0] = 1.0
    with pytest.raises(SamplingError):
        Realization([2.0, 1.0], [2.0, 2.0], 0)


def test_dipole_conversion_against_si_units():
    mu = 0.37  # e nm
    N = 1000
    hw0 = float(photon_energy(DESK_GEOM, 0.0)) * sc.e
    V = DESK_GEOM.L_x * DESK_GEOM.L_y * DESK_GEOM.L_z * 1e-27
    omega_J = mu * sc.e * 1e-9 * np.sqrt(hw0 * N / (2 * DESK_GEOM.epsilon * sc.epsilon_0 * V))
    assert dipole_to_rabi(mu, N, DESK_GEOM) == pytest.approx(omega_J / sc.e, rel=1e-8)
    spec = MatterSpec(N, 10.0, 0.0, 2.0, 0.0, 0.1)
    assert dipole_to_rabi(rabi_to_dipole(spec, DESK_GEOM), N, DESK_GEOM) == pytest.approx(0.1, rel=1e-14)


def test_hamiltonian_entries():
    geom, spec, real = small_case()
    h = build_hamiltonian(real, geom, spec)
    n = spec.N_M
    m, q = photon_wavevectors(geom)
    assert h.dim == n + m.size and h.n_photons == m.size
    assert np.array_equal(np.diag(h.entries)[:n].real, real.energies)
    assert np.allclose(np.diag(h.entries)[n:].real, photon_energy(geom, q))
    # dipoles do not couple to each other, photons do not couple to each other
    assert np.count_nonzero(h.entries[:n, :n] - np.diag(np.diag(h.entries[:n, :n]))) == 0
    assert np.count_nonzero(h.entries[n:, n:] - np.diag(np.diag(h.entries[n:, n:]))) == 0
    k, j = 7, 3
    hw = photon_energy(geom, q[j])
    expect = -0.5j * spec.Omega_R * np.sqrt(real.energies[k] / (n * hw)) * np.exp(1j * q[j] * real.positions[k])
    assert h.entries[k, n + j] == pytest.approx(expect, rel=1e-14)
    assert not h.entries.flags.writeable


def test_dimension_mismatch():
    geom, spec, real = small_case()
    other = MatterSpec(41, 10.0, 1.0, 2.0, 0.02, 0.1)
    with pytest.raises(DimensionError):
        build_hamiltonian(real, geom, other)


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(2, 30),
    m_max=st.integers(0, 6),
    omega=st.floats(0.0, 0.5),
    sigma_M=st.floats(0.0, 0.2),
    seed=st.integers(0, 2**32),
)
def test_hamiltonian_is_hermitian(n, m_max, omega, sigma_M, seed):
    geom = CavityGeometry(n * 10.0, 200.0, 400.0, 3.0, m_max)
    spec = MatterSpec(n, 10.0, 0.5, 2.0, sigma_M, omega)
    h = build_hamiltonian(sample_realization(spec, seed), geom, spec).entries
    assert np.array_equal(h, h.conj().T)
    # collective coupling strength of each photon: sum_n |<n|H|q>|^2 = (Omega/2)^2 <E>/hw_q
    n_m = spec.N_M
    col = (np.abs(h[:n_m, n_m:]) ** 2).sum(axis=0)
    real = sample_realization(spec, seed)
    hw = photon_energy(geom, photon_wavevectors(geom)[1])
    assert np.allclose(col, 0.25 * omega**2 * real.energies.mean() / hw, rtol=1e-12, atol=1e-300)
