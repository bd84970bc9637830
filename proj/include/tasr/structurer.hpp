#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tasr/llm.hpp"
#include "tasr/taxonomy.hpp"
#include "tasr/types.hpp"

namespace tasr {

struct Decomposition {
    std::vector<SubQuery> sub_queries;                          // execution order
    std::vector<std::pair<std::string, std::string>> type_hints;  // "?Var" -> description
    bool degenerate = false;  // the model returned no sub-queries; the question became one hop

    const std::string* hint(std::string_view variable) const;
};

// Query-aware triple extraction for one document. Exact duplicates are
// collapsed; every triple carries source_doc = d.id. An empty body yields []
// without calling the model.
std::vector<Triple> extract_triples(const Document& d, const std::string& query, LlmGateway& gateway);

// Parses {"triples": [...]} into Triples for `doc_id`. Entries with an empty
// component are skipped. Throws Error(ParseError) on a wrong shape.
std::vector<Triple> parse_triples(const nlohmann::json& j, const std::string& doc_id);

// Index-aligned typing of head and tail; relations are copied verbatim.
// When `doc` is given, its title plus the sentence mentioning the entity is
// offered as disambiguation context.
std::vector<TypedTriple> type_document_triples(std::span<const Triple> triples, EntityTyper& typer,
                                               const Document* doc = nullptr);

// First sentence of `text` mentioning `entity`, or an empty string.
std::string evidence_sentence(const std::string& text, const std::string& entity);

Decomposition decompose_query(const std::string& question, LlmGateway& gateway);

// Parses and validates {"sub_queries": [...], "type_hints": {...}}.
// Throws Error(InvalidDecomposition) for ordering violations, chains longer
// than kMaxSubQueries, or malformed slots.
Decomposition parse_decomposition(const nlohmann::json& j, const std::string& question);

// Each sub-query may introduce at most one variable not produced by an
// earlier sub-query. Throws Error(InvalidDecomposition).
void validate_decomposition(const Decomposition& dec);

// Text typed for a latent variable: "<Name words>: <hint>".
std::string latent_typing_text(const std::string& variable, const std::string* hint);

// Sets head_type and tail_type on every sub-query. Bound slots are typed from
// their surface text, latent slots from latent_typing_text.
Decomposition type_subqueries(Decomposition dec, EntityTyper& typer);

}  // namespace tasr
