"""Entity set expansion over a frequency-weighted isA taxonomy.

Given a few seed entities, infer the fine-grained concepts they imply and
rank the entities that best complete those concepts.
"""

from .taxonomy import (
    IsAEdge,
    Taxonomy,
    TaxonomyError,
    TaxonomyFormatError,
    TermId,
    UnknownTermError,
    load_taxonomy,
    normalize_name,
)
from .inference import (
    ConceptDistribution,
    EntityResolutionError,
    Query,
    SmoothingConfig,
    extend_noisy_or,
    normalize,
    posterior_bayes,
    posterior_noisy_or,
)
from .granularity import (
    ConceptSelection,
    HittingTimeIndex,
    HittingTimeStore,
    aggregate_hitting,
    candidate_targets,
    delta_pp,
    hitting_times,
    load_hitting_store,
    precompute_hitting,
    select_fine_grained,
)
from .ranking import (
    ALL_VARIANTS,
    ModelConfig,
    RankedSuggestions,
    ScoredConceptContext,
    UnconceptualizableQueryError,
    build_context,
    candidate_entities,
    knn_baseline,
    prm_score,
    rem_score,
    suggest,
    variant_config,
)
from .evaluation import (
    EmptyEvaluationError,
    EvalQuery,
    GroundTruthList,
    MetricReport,
    VariantSummary,
    evaluate_variants,
    load_lists,
    make_queries,
    mndcg,
    ndcg,
    paired_t_test,
    precision_at,
    precision_recall_f,
    regularized_incomplete_beta,
    rem_rationality_test,
    resolvable_lists,
    student_t_sf,
)

__version__ = "0.1.0"
