"""Multi-attribute constraint-satisfaction rewriting engine and benchmark
harness.

Sequences are scored against per-attribute threshold windows; edit pairs
mined from variation pools feed training-data export; pluggable editors are
driven through multi-step reward-prioritized inference under fixed decode
budgets; campaign runners aggregate satisfaction and discovery metrics into
deterministic reports.
"""

from .attributes import (
    AttributePartition,
    AttributeSpace,
    AttributeSpec,
    AttributeVector,
    MultiConstraint,
    ThresholdWindow,
    attribute_reward,
    combo_constraints,
    ingest_vector,
    satisfaction_score,
    satisfaction_sum,
    satisfies,
    total_reward,
    validate_constraint,
    validate_partition,
    validate_window,
    window_of,
)
from .bench import (
    CampaignReport,
    CampaignSpec,
    discovery_metrics,
    emit_report,
    run_discovery_campaign,
    run_style_campaign,
)
from .editors import (
    EditRequest,
    Editor,
    EditorConfig,
    PoolOracleEditor,
    RandomMutationEditor,
    RecombineEditor,
    pool_oracle_propose,
    random_mutation_propose,
    recombine_propose,
)
from .errors import (
    BridgeError,
    ConfigurationError,
    ContractViolation,
    InputError,
    MacsError,
    ProtocolError,
)
from .evaluators import (
    AMINO_ACIDS,
    EvaluationCache,
    Evaluator,
    EvaluatorSpec,
    PairwiseEvaluator,
    ProteinLandscape,
    RewardModel,
    ScoredSequence,
    Scorer,
    TableEvaluator,
    evaluate,
    evaluate_batch,
    evaluate_pair,
    external_evaluate,
    sequence_digest,
    toy_complexity,
    toy_fluency,
    toy_protein_attr,
    toy_sentiment,
    toy_similarity,
    validate_sequence,
)
from .inference import (
    EpisodeConfig,
    EpisodeResult,
    STRATEGIES,
    StepRecord,
    run_episode,
    trace_records,
)
from .pairs import (
    EditPair,
    PairIndex,
    PairSampler,
    SamplerConfig,
    TrainingExample,
    VariationPool,
    assign_windows,
    build_examples,
    delta_histogram,
    dress_pairs,
    enumerate_pairs,
    histogram_stats,
    load_examples,
    load_pools,
    sample_anchor,
    sample_knn,
    sample_random,
    save_examples,
    save_pools,
    window_weights,
)
from .protocol import (
    ExternalEditor,
    ExternalEvaluator,
    PROTOCOL_VERSION,
    WorkerClient,
    WorkerPool,
)
from .seeding import derive_seed
from .stats import levenshtein, normal_sf, two_prop_ztest

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
