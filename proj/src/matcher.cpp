#include "tasr/matcher.hpp"

#include <algorithm>
#include <numeric>

#include "tasr/error.hpp"

namespace tasr {

double score_type_pair(const TaxonomyLabel& query_type, const TaxonomyLabel& doc_type,
                       const PipelineConfig& cfg) {
    return cfg.w1 * (query_type.l1 == doc_type.l1 ? 1.0 : 0.0) +
           cfg.w2 * (query_type.l2 == doc_type.l2 ? 1.0 : 0.0);
}

double score_structural(const SubQuery& query, const TypedTriple& doc, const PipelineConfig& cfg) {
    if (!query.typed()) {
        throw Error(ErrorKind::InvalidDecomposition, "sub-query " + query.str() + " is not typed");
    }
    return cfg.wh * score_type_pair(*query.head_type, doc.head_type, cfg) +
           cfg.wt * score_type_pair(*query.tail_type, doc.tail_type, cfg);
}

ComponentCosines component_cosines(const TripleVectors& query, const TripleVectors& doc) {
    return {inner(query.head, doc.head), inner(query.relation, doc.relation),
            inner(query.tail, doc.tail)};
}

double score_semantic(const ComponentCosines& cos, const PipelineConfig& cfg) {
    return cfg.lh * cos.head + cfg.lr * cos.relation + cfg.lt * cos.tail;
}

TripleVectors encode_subquery(const SubQuery& query, Embedder& embedder) {
    return encode_triple_components(query.head.text(), query.relation, query.tail.text(), embedder);
}

double score_semantic(const SubQuery& query, const Triple& doc, Embedder& embedder,
                      const PipelineConfig& cfg) {
    return score_semantic(
        component_cosines(encode_subquery(query, embedder), encode_triple_components(doc, embedder)),
        cfg);
}

double combine_triple_score(double s_struct, double s_sem, const PipelineConfig& cfg) {
    return cfg.alpha * s_struct + (1.0 - cfg.alpha) * s_sem;
}

namespace {

TripleMatch match_with_vectors(const SubQuery& query, const TripleVectors& qv, const Document& doc,
                               std::size_t i, const TripleVectors& dv, const PipelineConfig& cfg) {
    TripleMatch m;
    m.query_index = query.index;
    m.doc_id = doc.id;
    m.doc_triple_index = i;
    m.s_struct = score_structural(query, doc.typed_triples[i], cfg);
    m.s_sem = score_semantic(component_cosines(qv, dv), cfg);
    m.s_triple = combine_triple_score(m.s_struct, m.s_sem, cfg);
    return m;
}

void check_aligned(const Document& doc) {
    if (doc.typed_triples.size() != doc.triples.size()) {
        throw Error(ErrorKind::InvalidEntity, "document " + doc.id + " has " +
                                                  std::to_string(doc.triples.size()) + " triples but " +
                                                  std::to_string(doc.typed_triples.size()) +
                                                  " typed triples");
    }
}

TripleMatch best_with_vectors(const SubQuery& query, const TripleVectors& qv, const Document& doc,
                              std::span<const TripleVectors> doc_vectors, const PipelineConfig& cfg) {
    TripleMatch best;
    best.query_index = query.index;
    best.doc_id = doc.id;
    for (std::size_t i = 0; i < doc.triples.size(); ++i) {
        auto m = match_with_vectors(query, qv, doc, i, doc_vectors[i], cfg);
        if (!best.doc_triple_index || m.s_triple > best.s_triple) best = std::move(m);
    }
    return best;
}

std::vector<TripleVectors> encode_document(const Document& doc, Embedder& embedder) {
    std::vector<TripleVectors> out;
    out.reserve(doc.triples.size());
    for (const auto& t : doc.triples) out.push_back(encode_triple_components(t, embedder));
    return out;
}

}  // namespace

TripleMatch score_triple(const SubQuery& query, const Triple& doc_raw, const TypedTriple& doc_typed,
                         const PipelineConfig& cfg, Embedder& embedder) {
    if (doc_raw.relation != doc_typed.relation) {
        throw Error(ErrorKind::InvalidEntity, "raw and typed triples are not aligned");
    }
    TripleMatch m;
    m.query_index = query.index;
    m.doc_id = doc_raw.source_doc.value_or("");
    m.s_struct = score_structural(query, doc_typed, cfg);
    m.s_sem = score_semantic(query, doc_raw, embedder, cfg);
    m.s_triple = combine_triple_score(m.s_struct, m.s_sem, cfg);
    return m;
}

TripleMatch best_triple_score(const SubQuery& query, const Document& doc, const PipelineConfig& cfg,
                              Embedder& embedder) {
    check_aligned(doc);
    auto dv = encode_document(doc, embedder);
    return best_with_vectors(query, encode_subquery(query, embedder), doc, dv, cfg);
}

double aggregate_document_score(std::span<const double> best, const PipelineConfig& cfg,
                                std::optional<std::size_t> forced, std::vector<std::size_t>* top_set) {
    if (best.empty()) throw Error(ErrorKind::InvalidDecomposition, "no sub-queries to aggregate");
    if (forced && *forced >= best.size()) {
        throw Error(ErrorKind::InvalidDecomposition, "forced sub-query position out of range");
    }
    std::vector<std::size_t> order(best.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (forced) {
            if (a == *forced) return b != *forced;
            if (b == *forced) return false;
        }
        return best[a] > best[b];
    });
    const std::size_t t = std::min(cfg.top_t, best.size());
    order.resize(t);

    double max_best = *std::max_element(best.begin(), best.end());
    double sum = 0.0;
    for (std::size_t i : order) sum += best[i];
    if (top_set) *top_set = order;
    return cfg.gamma * max_best + (1.0 - cfg.gamma) * (sum / static_cast<double>(t));
}

namespace {

ScoredDocument score_with_vectors(std::span<const SubQuery> sub_queries,
                                  std::span<const TripleVectors> query_vectors, const Document& doc,
                                  std::span<const TripleVectors> doc_vectors, const PipelineConfig& cfg,
                                  std::optional<std::size_t> forced) {
    ScoredDocument sd;
    sd.doc_id = doc.id;
    std::vector<double> best;
    for (std::size_t k = 0; k < sub_queries.size(); ++k) {
        sd.best_matches.push_back(best_with_vectors(sub_queries[k], query_vectors[k], doc, doc_vectors, cfg));
        best.push_back(sd.best_matches.back().s_triple);
    }
    std::vector<std::size_t> positions;
    sd.score = aggregate_document_score(best, cfg, forced, &positions);
    for (std::size_t p : positions) sd.top_set.push_back(sub_queries[p].index);
    return sd;
}

}  // namespace

ScoredDocument score_document(std::span<const SubQuery> sub_queries, const Document& doc,
                              const PipelineConfig& cfg, Embedder& embedder,
                              std::optional<std::size_t> forced) {
    check_aligned(doc);
    std::vector<TripleVectors> qv;
    for (const auto& sq : sub_queries) qv.push_back(encode_subquery(sq, embedder));
    auto dv = encode_document(doc, embedder);
    return score_with_vectors(sub_queries, qv, doc, dv, cfg, forced);
}

RankedPool rank_scored(std::vector<ScoredDocument> scored, double theta) {
    std::sort(scored.begin(), scored.end(), [](const ScoredDocument& a, const ScoredDocument& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    RankedPool out;
    for (const auto& sd : scored) {
        if (sd.score >= theta) out.selected.push_back(sd);
    }
    if (out.selected.empty() && !scored.empty()) {
        out.selected.push_back(scored.front());
        out.fallback = true;
    }
    out.scored = std::move(scored);
    return out;
}

RankedPool filter_and_rank(std::span<const Document> pool, std::span<const SubQuery> sub_queries,
                           const PipelineConfig& cfg, Embedder& embedder,
                           std::optional<std::size_t> forced) {
    if (pool.empty()) throw Error(ErrorKind::EmptyPool, "candidate pool is empty");
    if (sub_queries.empty()) throw Error(ErrorKind::InvalidDecomposition, "no sub-queries to score");
    std::vector<TripleVectors> qv;
    for (const auto& sq : sub_queries) qv.push_back(encode_subquery(sq, embedder));
    std::vector<ScoredDocument> scored;
    scored.reserve(pool.size());
    for (const auto& doc : pool) {
        check_aligned(doc);
        auto dv = encode_document(doc, embedder);
        scored.push_back(score_with_vectors(sub_queries, qv, doc, dv, cfg, forced));
    }
    return rank_scored(std::move(scored), cfg.theta);
}

}  // namespace tasr
