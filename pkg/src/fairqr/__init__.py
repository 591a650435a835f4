"""Fairness-aware retrieval via recursive query refinement.

BM25 retrieval, exposure-based group-fairness metrics (KL/JS divergence,
AWRF), a divergence-controlled query-refinement loop with pluggable
refiners, relevance re-ranking, an MMR baseline, and a TREC-style
evaluation harness.
"""

from .corpus import (
    CorpusStore,
    Document,
    GroupSchema,
    UNKNOWN,
    group_vector,
    ingest_corpus,
    load_corpus,
    tokenize,
)
from .evaluation import (
    RunReport,
    composite,
    evaluate_run,
    ndcg_at_k,
    paired_t_test,
)
from .fairness import (
    ExposureDistribution,
    FairnessTarget,
    awrf,
    exposure,
    js_divergence,
    kl_divergence,
    most_underrepresented,
    target_from_qrels,
)
from .index import (
    InvertedIndex,
    RankedList,
    bm25_score,
    build_index,
    load_index,
    retrieve,
    save_index,
)
from .refine import (
    LLMRefiner,
    LexiconRefiner,
    RefinementTrace,
    RefinerConfig,
    fair_qr,
    parse_refinement,
    render_prompt,
)
from .rerank import doc_similarity, mmr_rerank, semantic_rerank
from .synthetic import SkewSpec, generate
from .trec import Qrels, parse_qrels, parse_run, write_qrels, write_run

__version__ = "0.1.0"

__all__ = [
    "CorpusStore", "Document", "GroupSchema", "UNKNOWN", "group_vector",
    "ingest_corpus", "load_corpus", "tokenize",
    "RunReport", "composite", "evaluate_run", "ndcg_at_k", "paired_t_test",
    "ExposureDistribution", "FairnessTarget", "awrf", "exposure",
    "js_divergence", "kl_divergence", "most_underrepresented",
    "target_from_qrels",
    "InvertedIndex", "RankedList", "bm25_score", "build_index", "load_index",
    "retrieve", "save_index",
    "LLMRefiner", "LexiconRefiner", "RefinementTrace", "RefinerConfig",
    "fair_qr", "parse_refinement", "render_prompt",
    "doc_similarity", "mmr_rerank", "semantic_rerank",
    "SkewSpec", "generate",
    "Qrels", "parse_qrels", "parse_run", "write_qrels", "write_run",
]
