"""Polynomial NARX structure selection with two-dimensional particle swarms."""

from .ga import GAConfig, run_ga
from .metrics import FrequencyTable, extract_structure, selection_frequency, spurious_stats
from .narx_core import (
    Dataset,
    DictionaryConfig,
    EstimatedModel,
    FitnessEvaluator,
    FitnessSpec,
    Term,
    TermDictionary,
    build_dictionary,
    build_regressor_matrix,
    estimate_parameters,
    evaluate_fitness,
    model_size,
    simulate_free_run,
    sse,
)
from .records import RunRecord, SearchResult
from .swarm2d import SwarmConfig, run_2dupso
from .systems import SYSTEMS, get_system, make_dataset

__version__ = "0.1.0"
