#include <nlohmann/json.hpp>

#include "tasr/reasoner.hpp"

namespace tasr {

namespace {

nlohmann::json label_json(const std::optional<TaxonomyLabel>& label) {
    if (!label) return nullptr;
    return {{"l1", label->l1}, {"l2", label->l2}};
}

nlohmann::json bindings_json(const BindingTable& table) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [name, value] : table.entries()) out.push_back({{"variable", name}, {"value", value}});
    return out;
}

}  // namespace

nlohmann::json to_json(const SubQuery& sq) {
    return {{"index", sq.index},
            {"head", sq.head.text()},
            {"relation", sq.relation},
            {"tail", sq.tail.text()},
            {"head_type", label_json(sq.head_type)},
            {"tail_type", label_json(sq.tail_type)}};
}

nlohmann::json to_json(const ScoredDocument& sd) {
    nlohmann::json matches = nlohmann::json::array();
    for (const auto& m : sd.best_matches) {
        matches.push_back({{"query_index", m.query_index},
                           {"doc_triple_index", m.doc_triple_index ? nlohmann::json(*m.doc_triple_index)
                                                                   : nlohmann::json(nullptr)},
                           {"s_struct", m.s_struct},
                           {"s_sem", m.s_sem},
                           {"s_triple", m.s_triple}});
    }
    return {{"doc_id", sd.doc_id}, {"score", sd.score}, {"top_set", sd.top_set}, {"best_matches", matches}};
}

nlohmann::json to_json(const ReasoningTrace& trace) {
    nlohmann::json docs = nlohmann::json::array();
    for (const auto& d : trace.documents) {
        nlohmann::json triples = nlohmann::json::array();
        for (std::size_t i = 0; i < d.triples.size(); ++i) {
            nlohmann::json t = {{"head", d.triples[i].head.surface()},
                                {"relation", d.triples[i].relation},
                                {"tail", d.triples[i].tail.surface()}};
            if (i < d.typed_triples.size()) {
                t["head_type"] = label_json(d.typed_triples[i].head_type);
                t["tail_type"] = label_json(d.typed_triples[i].tail_type);
            }
            triples.push_back(std::move(t));
        }
        docs.push_back({{"id", d.id}, {"triples", std::move(triples)}});
    }

    nlohmann::json sub_queries = nlohmann::json::array();
    for (const auto& sq : trace.decomposition.sub_queries) sub_queries.push_back(to_json(sq));
    nlohmann::json hints = nlohmann::json::object();
    for (const auto& [name, text] : trace.decomposition.type_hints) hints[name] = text;

    nlohmann::json types = nlohmann::json::array();
    for (const auto& e : trace.entity_types) {
        nlohmann::json t = {{"text", e.text},
                            {"l1", e.outcome.label.l1},
                            {"l2", e.outcome.label.l2},
                            {"source", std::string(to_string(e.outcome.source))}};
        if (!e.outcome.note.empty()) t["note"] = e.outcome.note;
        types.push_back(std::move(t));
    }

    nlohmann::json hops = nlohmann::json::array();
    for (const auto& h : trace.hops) {
        nlohmann::json scored_with = nlohmann::json::array();
        for (const auto& sq : h.scored_with) scored_with.push_back(to_json(sq));
        nlohmann::json scores = nlohmann::json::array();
        for (const auto& sd : h.scores) scores.push_back(to_json(sd));
        nlohmann::json binding = nullptr;
        if (h.binding) binding = {{"variable", h.binding->first}, {"value", h.binding->second}};
        hops.push_back({{"index", h.index},
                        {"sub_query", to_json(h.sub_query)},
                        {"resolved", to_json(h.resolved)},
                        {"scored_with", std::move(scored_with)},
                        {"forced", h.forced ? nlohmann::json(*h.forced) : nlohmann::json(nullptr)},
                        {"scores", std::move(scores)},
                        {"selected", h.selected},
                        {"fallback", h.fallback},
                        {"answer", h.answer},
                        {"binding", std::move(binding)}});
    }

    return {{"id", trace.question_id},
            {"question", trace.question},
            {"config", to_json(trace.config)},
            {"pool", trace.pool},
            {"documents", std::move(docs)},
            {"decomposition",
             {{"degenerate", trace.decomposition.degenerate},
              {"sub_queries", std::move(sub_queries)},
              {"type_hints", std::move(hints)}}},
            {"entity_types", std::move(types)},
            {"hops", std::move(hops)},
            {"final_bindings", bindings_json(trace.final_bindings)},
            {"final_answer", trace.final_answer},
            {"error", trace.error ? nlohmann::json(*trace.error) : nlohmann::json(nullptr)}};
}

}  // namespace tasr
