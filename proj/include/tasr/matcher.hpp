#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tasr/config.hpp"
#include "tasr/embedding.hpp"
#include "tasr/types.hpp"

namespace tasr {

struct TripleMatch {
    std::size_t query_index = 0;                  // 1-based sub-query position
    std::string doc_id;
    std::optional<std::size_t> doc_triple_index;  // empty for a document without triples
    double s_struct = 0.0;
    double s_sem = 0.0;
    double s_triple = 0.0;
};

struct ScoredDocument {
    std::string doc_id;
    double score = 0.0;
    std::vector<TripleMatch> best_matches;  // one per scored sub-query, in sub-query order
    std::vector<std::size_t> top_set;       // sub-query indices forming the mean term
};

// w1 * [l1 equal] + w2 * [l2 equal].
double score_type_pair(const TaxonomyLabel& query_type, const TaxonomyLabel& doc_type,
                       const PipelineConfig& cfg);

// wh * S_type(head) + wt * S_type(tail). The relation does not contribute.
double score_structural(const SubQuery& query, const TypedTriple& doc, const PipelineConfig& cfg);

struct ComponentCosines {
    double head = 0.0;
    double relation = 0.0;
    double tail = 0.0;
};

ComponentCosines component_cosines(const TripleVectors& query, const TripleVectors& doc);
double score_semantic(const ComponentCosines& cos, const PipelineConfig& cfg);

// Latent slots are encoded through their "?Name" text.
TripleVectors encode_subquery(const SubQuery& query, Embedder& embedder);
double score_semantic(const SubQuery& query, const Triple& doc, Embedder& embedder,
                      const PipelineConfig& cfg);

// alpha * s_struct + (1 - alpha) * s_sem.
double combine_triple_score(double s_struct, double s_sem, const PipelineConfig& cfg);

TripleMatch score_triple(const SubQuery& query, const Triple& doc_raw, const TypedTriple& doc_typed,
                         const PipelineConfig& cfg, Embedder& embedder);

// Highest-scoring triple of `doc` (first index wins ties). A document without
// triples yields s_triple = 0 and no triple index.
TripleMatch best_triple_score(const SubQuery& query, const Document& doc, const PipelineConfig& cfg,
                              Embedder& embedder);

// Max/mean mixture over per-sub-query best scores. `best` is in sub-query
// order; `forced` (0-based) is always kept in the top-t set when given.
// Returns the score and writes the chosen 0-based positions to `top_set`.
double aggregate_document_score(std::span<const double> best, const PipelineConfig& cfg,
                                std::optional<std::size_t> forced, std::vector<std::size_t>* top_set);

// Scores `doc` against every sub-query in `sub_queries` (all must be typed).
ScoredDocument score_document(std::span<const SubQuery> sub_queries, const Document& doc,
                              const PipelineConfig& cfg, Embedder& embedder,
                              std::optional<std::size_t> forced = std::nullopt);

struct RankedPool {
    std::vector<ScoredDocument> scored;    // every pool document, score desc, id asc
    std::vector<ScoredDocument> selected;  // score >= theta (or the top one on fallback)
    bool fallback = false;
};

// Threshold filtering and ranking. Throws Error(EmptyPool).
RankedPool filter_and_rank(std::span<const Document> pool, std::span<const SubQuery> sub_queries,
                           const PipelineConfig& cfg, Embedder& embedder,
                           std::optional<std::size_t> forced = std::nullopt);

// Ranking/threshold step alone, for callers that already hold scores.
RankedPool rank_scored(std::vector<ScoredDocument> scored, double theta);

}  // namespace tasr
