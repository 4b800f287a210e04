"""Exciton transport along a disordered molecular wire in a Fabry-Perot microcavity.

Single-excitation Tavis-Cummings model with positional and energetic
disorder, solved by dense diagonalization and exact spectral propagation.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    NumericalError,
    PersistenceError,
    PolwireError,
)
from .model import (  # noqa: E402
    CONSTANTS,
    CavityGeometry,
    MatterSpec,
    Realization,
    build_hamiltonian,
    photon_energy,
    photon_wavevectors,
    sample_realization,
)
from .spectrum import Spectrum, bright_mode_table, diagonalize, effective_group_velocity, ordered_dispersion  # noqa: E402
from .dynamics import TimeSeries, WavepacketSpec, prepare_wavepacket, propagate, time_grid  # noqa: E402
from .theory import (  # noqa: E402
    UNRESOLVED,
    early_growth,
    fit_ballistic_velocity,
    polariton_gap,
    predict_v0,
    rabi_frequency_estimate,
)
