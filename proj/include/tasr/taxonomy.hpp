#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tasr/config.hpp"
#include "tasr/embedding.hpp"
#include "tasr/llm.hpp"
#include "tasr/types.hpp"

namespace tasr {

// Two-level label hierarchy. File order of L1 classes and their children is
// preserved.
class Taxonomy {
public:
    struct Branch {
        std::string name;
        std::vector<std::string> children;
    };

    // {"l1": [{"name": "PERSON", "l2": ["Scientist", ...]}, ...]}.
    // Throws Error(ParseError) or Error(EmptyBranch).
    static Taxonomy from_json(const nlohmann::json& j);
    static Taxonomy load(const std::filesystem::path& path);

    const std::vector<Branch>& branches() const noexcept { return branches_; }
    std::size_t size() const noexcept { return branches_.size(); }
    std::vector<std::string> l1_classes() const;
    const std::vector<std::string>* children(std::string_view l1) const;

    bool has_l1(std::string_view l1) const { return children(l1) != nullptr; }
    bool contains(const TaxonomyLabel& label) const;

private:
    std::vector<Branch> branches_;
};

// Regex fast path for structured entities: years, dates, percentages, money
// and bare counts. Returns nothing when no pattern fires or the resulting
// label is not part of `taxonomy`.
std::optional<TaxonomyLabel> rule_type_entity(const Entity& entity, const Taxonomy& taxonomy);

// Global L1 index plus one L2 index per L1 branch, over label embeddings.
class TypeIndex {
public:
    static TypeIndex build(const Taxonomy& taxonomy, Embedder& embedder);

    const VectorIndex& l1() const noexcept { return l1_; }
    // Throws Error(IndexUnavailable) for an unknown branch.
    const VectorIndex& l2(std::string_view l1) const;

    static std::string l1_text(std::string_view l1);
    static std::string l2_text(std::string_view l1, std::string_view l2);

private:
    VectorIndex l1_;
    std::unordered_map<std::string, VectorIndex> l2_;
};

struct L1Candidate {
    std::string l1;
    double similarity = 0.0;
};

struct L2Candidate {
    TaxonomyLabel label;
    double similarity = 0.0;
};

struct TypeCandidates {
    EmbeddingVector query;                  // entity embedding; empty in pure mode
    std::vector<L1Candidate> l1_candidates; // similarity desc, ties by label
    std::vector<L2Candidate> l2_candidates; // filled by select_type per kept branch
};

// Top n_l1_candidates L1 labels by inner product with the entity embedding.
// Throws Error(IndexUnavailable) when `index` is null.
TypeCandidates retrieve_type_candidates(const Entity& entity, const Taxonomy& taxonomy,
                                        const TypeIndex* index, Embedder& embedder,
                                        const PipelineConfig& cfg);

enum class TypingSource { Rule, Llm, Fallback };
std::string_view to_string(TypingSource source);

struct TypingOutcome {
    TaxonomyLabel label;
    TypingSource source = TypingSource::Llm;
    std::string note;  // why a fallback happened
};

// Two LLM stages: keep up to l1_keep first-level labels, then pick the final
// pair from the union of the kept branches' top m_l2_candidates children.
// A protocol failure in either stage (after the gateway's single retry) falls
// back to the highest-similarity candidate.
TypingOutcome select_type(const Entity& entity, TypeCandidates& candidates, const Taxonomy& taxonomy,
                          const TypeIndex* index, LlmGateway& gateway, const PipelineConfig& cfg,
                          const std::optional<std::string>& context = std::nullopt);

// Memoizing front end: rule path, else retrieve + select. Safe to call from
// several threads.
class EntityTyper {
public:
    EntityTyper(std::shared_ptr<const Taxonomy> taxonomy, std::shared_ptr<const TypeIndex> index,
                std::shared_ptr<Embedder> embedder, std::shared_ptr<LlmGateway> gateway,
                PipelineConfig cfg);

    // Throws Error(InvalidEntity) for empty text.
    TypingOutcome type_entity(std::string_view text,
                              const std::optional<std::string>& context = std::nullopt);

    const Taxonomy& taxonomy() const noexcept { return *taxonomy_; }
    std::size_t memo_size() const;

    struct Event {
        std::string entity;
        TypingOutcome outcome;
    };
    // Fallback decisions, in the order they were made.
    std::vector<Event> fallbacks() const;

private:
    std::shared_ptr<const Taxonomy> taxonomy_;
    std::shared_ptr<const TypeIndex> index_;
    std::shared_ptr<Embedder> embedder_;
    std::shared_ptr<LlmGateway> gateway_;
    PipelineConfig cfg_;

    mutable std::mutex mutex_;
    std::unordered_map<std::string, TypingOutcome> memo_;
    std::vector<Event> fallbacks_;
};

}  // namespace tasr
