"""Mixtures of hidden Markov models for sequence clustering, with an
entropy-regularized EM variant that favours low-entropy transition matrices."""

from .datasets import (
    SequenceDataset,
    load_dataset,
    load_libras,
    load_sequences_csv,
    sample_mixture,
    save_dataset,
    write_sequences_csv,
)
from .emissions import Categorical, GaussianDiag, Poisson
from .entropy import (
    EntropyReport,
    StationaryDistribution,
    entropy_rate,
    model_entropy,
    normalized_entropy,
    stationary_distribution,
    transition_inner_product,
)
from .errors import ConfigError, DatasetError, MHMMError, NumericalError, ParameterError, UnderflowError
from .evaluation import RunReport, hard_assignments, homogeneity_completeness_v, v_measure
from .fit import FitConfig, fit, init_model
from .hmm import HmmParams, PosteriorTables, forward_backward, sample_sequence, sequence_log_likelihood
from .informational import (
    GateDecision,
    InformationalConfig,
    m_step_informational,
    regularized_transition,
    resolve_lambda,
)
from .mixture import EStepResult, MixtureModel, e_step, load_model, m_step_standard, save_model

__version__ = "0.1.0"
