"""Causal inference with second order exponential models.

Each variable's conditional given its predecessors in an ordering is fitted
as a maximum-entropy density with prescribed first and second moments, and
orderings are compared by their negative log-likelihood.
"""
__version__ = "0.1.0"

from .domains import (  # noqa: E402
    DomainError,
    DomainHints,
    QuadratureGrid,
    TruncationSpec,
    ValueDomain,
    bin_column,
    build_grid,
    infer_domain,
)
from .soxmodel import (  # noqa: E402
    JointModel,
    PartitionError,
    SecondOrderConditional,
    log_density,
    log_partition,
    sample,
)
from .fitting import FitOptions, fit_conditional, fit_ordering  # noqa: E402
from .inference import (  # noqa: E402
    CausalDecision,
    InferenceOptions,
    decide,
    decide_pairwise,
    decision_from_scores,
    infer_orderings,
)
from .closedform import (  # noqa: E402
    GaussMixtureModel,
    GaussSigmoidModel,
    minimal_tanh_degree,
    noncausal_sigmoid_params,
    or_joint_table,
    unique_gamma,
)
from .fisher import (  # noqa: E402
    DependenceReport,
    FisherMatrix,
    fisher_conditional,
    fisher_marginal,
    split_sample_experiment,
)
from .data import Dataset, load_csv, prepare, save_csv  # noqa: E402
