"""Natural mediation effects versus their randomized interventional analogues.

Exact oracles on simulated structural models, executable identity
checks, and an influence-function falsification test for the gap
between the total effect and its randomized analogue.
"""

from .scm import (
    DiscreteScm,
    FormScm,
    ObservedData,
    ParametricScm,
    Population,
    SpecError,
    UnitPotentials,
    collapse_dgp,
    divergent_dgp,
    enumerate_population,
    fig1_dgp,
    load_spec,
    miles_scm,
    observe,
    prop5_scm,
    sample_population,
    save_spec,
)
from .oracle import (
    EffectSet,
    OracleError,
    covariance_rhs,
    effect_set,
    natural_effects,
    organic_effects,
    ria_effects,
)

__version__ = "0.1.0"

__all__ = [
    "DiscreteScm",
    "EffectSet",
    "FormScm",
    "ObservedData",
    "OracleError",
    "ParametricScm",
    "Population",
    "SpecError",
    "UnitPotentials",
    "collapse_dgp",
    "covariance_rhs",
    "divergent_dgp",
    "effect_set",
    "enumerate_population",
    "fig1_dgp",
    "load_spec",
    "miles_scm",
    "natural_effects",
    "observe",
    "organic_effects",
    "prop5_scm",
    "ria_effects",
    "sample_population",
    "save_spec",
    "__version__",
]
