"""Proportional-growth model of firms built from heterogeneous units.

Submodules:

- :mod:`firmgrowth.core` urn dynamics, unit-count distributions, lognormal units, simulation
- :mod:`firmgrowth.analytics` closed-form moments, asymptotes, crossover sizes, densities
- :mod:`firmgrowth.estimators` binning, effective exponents, tail fits, scaling collapse
- :mod:`firmgrowth.experiments` end-to-end Monte-Carlo experiments
- :mod:`firmgrowth.panel`, :mod:`firmgrowth.results`, :mod:`firmgrowth.cli` data in and out
"""

from .core import (
    ClassEnsemble,
    FirmEnsemble,
    GeneralizedRates,
    KDistribution,
    LognormalParams,
    UrnConfig,
    evolve_urn,
    generate_firms,
    make_rng,
    map_generalized_rates,
    prefix_growth,
    sample_k,
    sample_lognormal,
    simulate_growth,
    step_firms,
)
from .errors import (
    CollapseError,
    ConfigurationError,
    DataError,
    DomainError,
    FirmGrowthError,
    FormatError,
    IngestionError,
    InsufficientDataError,
    InvalidRatesError,
)
from .observations import GrowthObservation, ObservationTable
from .panel import Panel, PanelRecord, compute_observations, estimate_lognormal_params, ingest_panel
from .results import ResultEnvelope, export_results

__all__ = [
    "ClassEnsemble", "FirmEnsemble", "GeneralizedRates", "KDistribution", "LognormalParams", "UrnConfig",
    "evolve_urn", "generate_firms", "make_rng", "map_generalized_rates", "prefix_growth", "sample_k",
    "sample_lognormal", "simulate_growth", "step_firms",
    "CollapseError", "ConfigurationError", "DataError", "DomainError", "FirmGrowthError", "FormatError",
    "IngestionError", "InsufficientDataError", "InvalidRatesError",
    "GrowthObservation", "ObservationTable",
    "Panel", "PanelRecord", "compute_observations", "estimate_lognormal_params", "ingest_panel",
    "ResultEnvelope", "export_results",
]
