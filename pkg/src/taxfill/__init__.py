"""Taxonomy completion: score candidate positions in a concept DAG and
generate names for the concepts that should fill them."""

from .errors import TaxfillError
from .taxonomy import (
    CandidatePosition,
    Concept,
    Taxonomy,
    TokenVocabulary,
    build_vocabulary,
    insert_concept,
    load_taxonomy,
    remove_concepts,
    save_taxonomy,
    split_taxonomy,
    validate_position,
)
from .context import (
    RelationSet,
    TrainingExample,
    build_training_example,
    enumerate_candidate_positions,
    mask_concept,
    sample_negatives,
)
from .autodiff import OptimizerConfig
from .model import (
    Dims,
    ModelState,
    build_model,
    decode_position,
    encode_position,
    joint_loss,
    load_model,
    position_probability,
    save_model,
)
from .pretrain import (
    CorpusStore,
    ingest_corpus,
    mct_accuracy,
    pretrain_encoder,
    transfer_weights,
)
from .pipeline import (
    ClassifierExtraction,
    CompletionReport,
    Insertion,
    RunConfig,
    TrainResult,
    complete,
    gentaxo_plus_plus,
    load_run_config,
    masked_generation_accuracy,
    save_run_config,
    score_position,
    train,
)
from .metrics import (
    MetricsReport,
    format_table,
    full_report,
    machine_lines,
    score_completion,
    score_generation,
)
from .datasets import protein_taxonomy, synthetic_corpus, synthetic_taxonomy

__version__ = "0.1.0"

__all__ = [
    "CandidatePosition",
    "ClassifierExtraction",
    "CompletionReport",
    "Concept",
    "CorpusStore",
    "Dims",
    "Insertion",
    "MetricsReport",
    "ModelState",
    "OptimizerConfig",
    "RelationSet",
    "RunConfig",
    "TaxfillError",
    "Taxonomy",
    "TokenVocabulary",
    "TrainResult",
    "TrainingExample",
    "build_model",
    "build_training_example",
    "build_vocabulary",
    "complete",
    "decode_position",
    "encode_position",
    "enumerate_candidate_positions",
    "format_table",
    "full_report",
    "gentaxo_plus_plus",
    "ingest_corpus",
    "insert_concept",
    "joint_loss",
    "load_model",
    "load_run_config",
    "load_taxonomy",
    "machine_lines",
    "mask_concept",
    "masked_generation_accuracy",
    "mct_accuracy",
    "position_probability",
    "pretrain_encoder",
    "protein_taxonomy",
    "remove_concepts",
    "sample_negatives",
    "save_model",
    "save_run_config",
    "save_taxonomy",
    "score_completion",
    "score_generation",
    "score_position",
    "split_taxonomy",
    "synthetic_corpus",
    "synthetic_taxonomy",
    "train",
    "transfer_weights",
    "validate_position",
    "__version__",
]
