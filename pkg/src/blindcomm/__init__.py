"""Blind community detection from filtered graph signals on time-varying SBM graphs."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .covariance import (
    CovarianceAccumulator,
    PParams,
    TheoreticalCovariance,
    c_constants,
    closed_form_spectrum,
    concentration_probe,
    estimate_p_params,
    merge,
    sample_covariance,
    theoretical_covariance,
)
from .evaluation import ErrorReport, Fig1Config, error_rate, run_fig1_experiment, sc_baseline
from .filters import GraphFilter, apply_filter, filter_spectral_norm, generating_polynomial_at, lowpass_power_filter, paper_alpha
from .graph_model import (
    AdjacencySample,
    Partition,
    PlantedPartitionParams,
    SbmModel,
    build_planted_partition,
    expected_adjacency,
    laplacian,
    sample_adjacency,
)
from .signals import ExcitationSpec, ObservationBatch, generate_batch, generate_observation, sample_excitation
from .spectral import EigenPairs, KMeansConfig, PartitionResult, blind_partition, estimate_num_groups, kmeans, top_k_eigenpairs
