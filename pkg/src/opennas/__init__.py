"""Swarm-intelligence architecture search over convolutional layer stacks."""

__version__ = "0.1.0"

from .arch import (  # noqa: F401
    Architecture,
    LayerSpec,
    SpaceConfig,
    ValidationReport,
    deserialize,
    materialize,
    param_count,
    sample_random,
    serialize,
    shape_infer,
    validate,
)
from .evaluation import (  # noqa: F401
    EvalRequest,
    EvaluatorFailure,
    ExternTrainer,
    FitnessReport,
    ParamBandSurrogate,
    TargetSurrogate,
)
from .pso import PsoConfig, pso_run  # noqa: F401
from .aco import AcoConfig, aco_run  # noqa: F401
from .search import RandomSearchBaseline, SearchAborted, SearchResult, random_search  # noqa: F401
