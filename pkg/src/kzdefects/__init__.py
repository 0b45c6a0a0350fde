"""Kibble-Zurek defect statistics in driven Rydberg chains.

Exact evolution in the blockade subspace, domain-wall statistics and
correlators, fits, and zero-noise extrapolation of readout errors.
"""

__version__ = "0.1.0"

from .analysis import (CorrelationLengthRegressor, PowerLawRegressor, anomaly_ratio,
                       compare_distribution, even_poisson_pmf, fit_correlation_length,
                       fit_power_law, hold_spectrum, poisson_pmf, spectral_gap)
from .basis import ConstrainedBasis, enumerate_basis, state_index
from .evolve import IntegratorConfig, evolve, initial_vacuum
from .geometry import AtomGeometry, chain_positions, ring_positions
from .hamiltonian import (DriveProtocol, RydbergParams, Waveform, apply_h, blockade_radius,
                          build_hamiltonian, build_hold_protocol, build_kz_protocol, gamma_rate)
from .mitigation import (ReadoutModel, ZeroNoiseExtrapolator, ZNEGrid, apply_readout_noise,
                         amplification_channel, confusion_inverse_mean, mitigate,
                         systematic_error, zne_mitigate)
from .observables import (BitstringSample, DefectDistribution, QuantumState,
                          connected_defect_correlator, connected_density_correlator,
                          defect_distribution, defect_moments, domain_wall_count,
                          estimate_moments, sample_bitstrings)

__all__ = [
    "__version__",
    "CorrelationLengthRegressor",
    "PowerLawRegressor",
    "anomaly_ratio",
    "compare_distribution",
    "even_poisson_pmf",
    "fit_correlation_length",
    "fit_power_law",
    "hold_spectrum",
    "poisson_pmf",
    "spectral_gap",
    "ConstrainedBasis",
    "enumerate_basis",
    "state_index",
    "IntegratorConfig",
    "evolve",
    "initial_vacuum",
    "AtomGeometry",
    "chain_positions",
    "ring_positions",
    "DriveProtocol",
    "RydbergParams",
    "Waveform",
    "apply_h",
    "blockade_radius",
    "build_hamiltonian",
    "build_hold_protocol",
    "build_kz_protocol",
    "gamma_rate",
    "ReadoutModel",
    "ZeroNoiseExtrapolator",
    "ZNEGrid",
    "apply_readout_noise",
    "amplification_channel",
    "confusion_inverse_mean",
    "mitigate",
    "systematic_error",
    "zne_mitigate",
    "BitstringSample",
    "DefectDistribution",
    "QuantumState",
    "connected_defect_correlator",
    "connected_density_correlator",
    "defect_distribution",
    "defect_moments",
    "domain_wall_count",
    "estimate_moments",
    "sample_bitstrings",
]
