"""Budget-aware surrogate-assisted evolutionary search in a generative model's latent space."""

from ._kernels import backend_name
from .core import AssessedRecord, Candidate, combine_scores, select_elites
from .evolution import EvolutionConfig, PerturbationPlan, run_evolution
from .genmodel import GenerativeModelSpec, decode, encode, sample_prior
from .harness import ExperimentConfig, desk_config, run_experiment, run_random_baseline
from .metrics import diversity, top_k_mean
from .oracle import BudgetLedger, ObjectiveSpec, OracleClient, OracleEndpoint, assess, score_objective
from .prescreener import (
    ScreeningConfig,
    UtilityModel,
    distance,
    fingerprint,
    fit_utility,
    predict_utility,
    select_offspring,
    uncertainty,
)

__version__ = "0.1.0"
