"""Desk-scale simulator and analysis toolkit for dipole-phonon logic.

The package models a trapped molecular ion whose lowest rotational level
serves as a qubit resource: thermal level populations, blackbody-driven
rotational kinetics, Monte Carlo measurement streams, trap-frequency
sweep transfer, dark-run significance statistics, and hidden-Markov
detection of ground-level episodes.
"""

__version__ = "0.1.0"

from .spectroscopy import (
    KB_CM,
    PARITY_DOUBLET,
    ROT_GROUND,
    MolecularConstants,
    RoVibState,
    StateDistribution,
    constants_from_config,
    constants_to_config,
    degeneracy,
    enumerate_levels,
    level_energy,
    manifold_population,
    most_probable_rotational_state,
    partition_function,
    thermal_distribution,
    thermal_population,
)
from .dataio import (
    DATASET_HEADER,
    DataFormatError,
    read_dataset_csv,
    read_keyvalues,
    sha256_digest,
    write_dataset_csv,
    write_keyvalues,
    write_table,
)
from .bbr_kinetics import (
    VIB_DECAY_TARGET,
    EinsteinCoefficients,
    IntegrationError,
    PlanckField,
    PopulationTrajectory,
    RateMatrix,
    build_einstein_coefficients,
    build_rate_matrix,
    evolve_populations,
    ground_state_residence_lifetime,
    leave_probability_per_cycle,
    lifetime_temperature_sweep,
    photon_occupation,
    planck_energy_density,
    radiative_levels,
    restricted_boltzmann,
    rethermalization_time,
)
from .trajectory_sim import (
    DEFAULT_RAMP_FIDELITIES,
    ExperimentConfig,
    MeasurementRecord,
    TrajectoryDynamics,
    TrialDataset,
    bin_series,
    disjoint_bin_counts,
    emit_measurement,
    ensemble_ground_occupancy,
    records_from_rows,
    simulate_hours,
    simulate_trial,
    step_hidden_state,
)
from .sweep_dynamics import (
    SweepConfig,
    TransferWindowMap,
    TwoLevelAmplitudes,
    evolve_sweep,
    evolve_sweep_amplitudes,
    jc_coupling_matrix,
    landau_zener_oracle,
    offres_carrier_excitation,
    transfer_window_map,
)
from .run_statistics import (
    BinValuePrediction,
    NoiseSignalModel,
    SignificanceResult,
    bin_value_distribution,
    binom_noise_pmf,
    extrapolate_p_value,
    find_longest_run,
    longest_run_cdf,
    noise_pmf,
    observed_run_significance,
    p_from_z,
    p_value,
    required_run_length,
    signal_bin_pmf,
    signal_pmf,
    significance,
    z_from_p,
)
from .hmm_detector import (
    STATE_NAMES,
    DecodedSeries,
    DetectionMetrics,
    EstimationError,
    HmmParams,
    baum_welch,
    bayes_posterior,
    default_params,
    estimate_params_supervised,
    evaluate,
    forward_backward,
    viterbi,
    write_decoded_csv,
)

__all__ = [
    "__version__",
    # spectroscopy
    "KB_CM",
    "PARITY_DOUBLET",
    "ROT_GROUND",
    "MolecularConstants",
    "RoVibState",
    "StateDistribution",
    "constants_from_config",
    "constants_to_config",
    "degeneracy",
    "enumerate_levels",
    "level_energy",
    "manifold_population",
    "most_probable_rotational_state",
    "partition_function",
    "thermal_distribution",
    "thermal_population",
    # dataio
    "DATASET_HEADER",
    "DataFormatError",
    "read_dataset_csv",
    "read_keyvalues",
    "sha256_digest",
    "write_dataset_csv",
    "write_keyvalues",
    "write_table",
    # bbr_kinetics
    "VIB_DECAY_TARGET",
    "EinsteinCoefficients",
    "IntegrationError",
    "PlanckField",
    "PopulationTrajectory",
    "RateMatrix",
    "build_einstein_coefficients",
    "build_rate_matrix",
    "evolve_populations",
    "ground_state_residence_lifetime",
    "leave_probability_per_cycle",
    "lifetime_temperature_sweep",
    "photon_occupation",
    "planck_energy_density",
    "radiative_levels",
    "restricted_boltzmann",
    "rethermalization_time",
    # trajectory_sim
    "DEFAULT_RAMP_FIDELITIES",
    "ExperimentConfig",
    "MeasurementRecord",
    "TrajectoryDynamics",
    "TrialDataset",
    "bin_series",
    "disjoint_bin_counts",
    "emit_measurement",
    "ensemble_ground_occupancy",
    "records_from_rows",
    "simulate_hours",
    "simulate_trial",
    "step_hidden_state",
    # sweep_dynamics
    "SweepConfig",
    "TransferWindowMap",
    "TwoLevelAmplitudes",
    "evolve_sweep",
    "evolve_sweep_amplitudes",
    "jc_coupling_matrix",
    "landau_zener_oracle",
    "offres_carrier_excitation",
    "transfer_window_map",
    # run_statistics
    "BinValuePrediction",
    "NoiseSignalModel",
    "SignificanceResult",
    "bin_value_distribution",
    "binom_noise_pmf",
    "extrapolate_p_value",
    "find_longest_run",
    "longest_run_cdf",
    "noise_pmf",
    "observed_run_significance",
    "p_from_z",
    "p_value",
    "required_run_length",
    "signal_bin_pmf",
    "signal_pmf",
    "significance",
    "z_from_p",
    # hmm_detector
    "STATE_NAMES",
    "DecodedSeries",
    "DetectionMetrics",
    "EstimationError",
    "HmmParams",
    "baum_welch",
    "bayes_posterior",
    "default_params",
    "estimate_params_supervised",
    "evaluate",
    "forward_backward",
    "viterbi",
    "write_decoded_csv",
]
