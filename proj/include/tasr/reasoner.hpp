#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tasr/config.hpp"
#include "tasr/embedding.hpp"
#include "tasr/error.hpp"
#include "tasr/llm.hpp"
#include "tasr/matcher.hpp"
#include "tasr/structurer.hpp"
#include "tasr/taxonomy.hpp"
#include "tasr/types.hpp"

namespace tasr {

struct HopRecord {
    std::size_t index = 0;
    SubQuery sub_query;                      // as decomposed and typed
    SubQuery resolved;                       // after substituting known bindings
    std::vector<SubQuery> scored_with;       // sub-queries that fed document scoring
    std::optional<std::size_t> forced;       // 0-based position in scored_with kept in the top set
    std::vector<ScoredDocument> scores;      // every pool document, ranked
    std::vector<std::string> selected;       // doc ids handed to the answerer, in rank order
    bool fallback = false;                   // threshold removed everything; top document kept
    std::string answer;
    std::optional<std::pair<std::string, std::string>> binding;
};

struct DocumentRecord {
    std::string id;
    std::vector<Triple> triples;
    std::vector<TypedTriple> typed_triples;
};

struct EntityTypeRecord {
    std::string text;
    TypingOutcome outcome;
};

struct ReasoningTrace {
    std::string question_id;
    std::string question;
    PipelineConfig config;
    std::vector<std::string> pool;  // dense retrieval order
    std::vector<DocumentRecord> documents;
    Decomposition decomposition;
    std::vector<EntityTypeRecord> entity_types;
    std::vector<HopRecord> hops;
    BindingTable final_bindings;
    std::string final_answer;
    std::optional<std::string> error;
};

nlohmann::json to_json(const ReasoningTrace& trace);
nlohmann::json to_json(const SubQuery& sq);
nlohmann::json to_json(const ScoredDocument& sd);

// Raised when a query fails part way; carries everything recorded so far.
class QueryAborted : public Error {
public:
    QueryAborted(ErrorKind cause, const std::string& message, ReasoningTrace trace)
        : Error(ErrorKind::QueryAborted, message), cause_(cause), trace_(std::move(trace)) {}

    ErrorKind cause() const noexcept { return cause_; }
    const ReasoningTrace& trace() const noexcept { return trace_; }

private:
    ErrorKind cause_;
    ReasoningTrace trace_;
};

// Substitutes every latent slot bound in `table`. Types are left untouched.
SubQuery resolve(const SubQuery& sq, const BindingTable& table);

// Renders a resolved sub-query as a question for the answerer.
std::string render_subquery_question(const SubQuery& resolved);

// Asks the model for the hop answer over `docs` (rank order). Returns the
// trimmed "answer" field.
std::string answer_subquery(const SubQuery& resolved, std::span<const Document* const> docs,
                            const BindingTable& table, LlmGateway& gateway);

// Adds {v -> answer} for the single still-latent variable of `resolved`.
// No latent: table unchanged. Two latents: Error(AmbiguousBinding).
// Returns the new binding, if any.
std::optional<std::pair<std::string, std::string>> bind(const SubQuery& resolved,
                                                        const std::string& answer,
                                                        BindingTable& table);

struct QueryResult {
    std::string answer;
    ReasoningTrace trace;
};

struct PipelineOptions {
    bool pre_extract = false;         // query-agnostic extraction once per corpus document
    std::size_t extract_parallel = 1;  // concurrent extraction calls within one query
};

// Owns the shared, read-only state of a run: corpus index, taxonomy index,
// typer memo, and the model/encoder front ends.
class Pipeline {
public:
    Pipeline(PipelineConfig cfg, std::shared_ptr<const Taxonomy> taxonomy,
             std::shared_ptr<Embedder> embedder, std::shared_ptr<LlmGateway> gateway,
             std::vector<Document> corpus, PipelineOptions options = {});

    // Runs retrieve -> extract/type -> decompose/type -> per-hop
    // {resolve, filter_and_rank, answer, bind}. Throws QueryAborted.
    QueryResult run_query(const std::string& question, const std::string& question_id = "");

    const PipelineConfig& config() const noexcept { return cfg_; }
    const std::vector<Document>& corpus() const noexcept { return corpus_; }
    EntityTyper& typer() noexcept { return *typer_; }
    Embedder& embedder() noexcept { return *embedder_; }
    LlmGateway& gateway() noexcept { return *gateway_; }

private:
    std::vector<Document> prepare_pool(const std::string& question, ReasoningTrace& trace);

    PipelineConfig cfg_;
    PipelineOptions options_;
    std::shared_ptr<const Taxonomy> taxonomy_;
    std::shared_ptr<Embedder> embedder_;
    std::shared_ptr<LlmGateway> gateway_;
    std::shared_ptr<const TypeIndex> type_index_;
    std::unique_ptr<EntityTyper> typer_;
    std::vector<Document> corpus_;
    VectorIndex corpus_index_;
    std::map<std::string, std::vector<Triple>> pre_extracted_;
};

}  // namespace tasr
