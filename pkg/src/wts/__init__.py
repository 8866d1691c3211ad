"""Question answering over a self-growing knowledge graph.

The engine answers questions by iteratively retrieving facts from a triple
store, pruning them with model-scored relevance, and reasoning with the
accumulated knowledge; answered questions are then harvested for new
triples that grow the graph for everything asked later.
"""

from .embedding import (
    CachingEmbedder,
    EmbeddingVector,
    HashEmbedder,
    RemoteEmbedder,
    cosine_distance,
    similarity_filter,
    triple_text,
)
from .evolution import (
    EvolutionRecord,
    FeedbackVerdict,
    RedundancyResult,
    Verdict,
    evolve,
    mastership_evolve,
    redundancy_check,
)
from .harness import (
    DatasetRecord,
    GreedyMatchScore,
    RunReport,
    accuracy,
    emit_report,
    greedy_match_score,
    load_dataset,
    run_apprenticeship,
    run_mastership,
)
from .kg_store import AddResult, DkgStore, StoreStats, Triple, normalize_text
from .llm_gateway import (
    Confidence,
    GenParams,
    MockLlm,
    ReasonedAnswer,
    RemoteLlm,
    ScoredTriple,
    extract_entities,
    generate_triples,
    parse_json_reply,
    reason,
    score_triples,
)
from .pipeline import (
    DatasetKind,
    Evidence,
    EvolutionTrigger,
    Mode,
    PipelineConfig,
    PipelineResult,
    Question,
    RetrievalStrategy,
    answer_question,
    evidence_of,
    prune,
    retrieve_depth,
    update_frontier,
)

__version__ = "0.1.0"

__all__ = [
    "AddResult",
    "CachingEmbedder",
    "Confidence",
    "DatasetKind",
    "DatasetRecord",
    "DkgStore",
    "EmbeddingVector",
    "Evidence",
    "EvolutionRecord",
    "EvolutionTrigger",
    "FeedbackVerdict",
    "GenParams",
    "GreedyMatchScore",
    "HashEmbedder",
    "MockLlm",
    "Mode",
    "PipelineConfig",
    "PipelineResult",
    "Question",
    "ReasonedAnswer",
    "RedundancyResult",
    "RemoteEmbedder",
    "RemoteLlm",
    "RetrievalStrategy",
    "RunReport",
    "ScoredTriple",
    "StoreStats",
    "Triple",
    "Verdict",
    "accuracy",
    "answer_question",
    "cosine_distance",
    "emit_report",
    "evidence_of",
    "evolve",
    "extract_entities",
    "generate_triples",
    "greedy_match_score",
    "load_dataset",
    "mastership_evolve",
    "normalize_text",
    "parse_json_reply",
    "prune",
    "reason",
    "redundancy_check",
    "retrieve_depth",
    "run_apprenticeship",
    "run_mastership",
    "score_triples",
    "similarity_filter",
    "triple_text",
    "update_frontier",
]
