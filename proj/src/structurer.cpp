#include "tasr/structurer.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <nlohmann/json.hpp>

#include "tasr/config.hpp"
#include "tasr/error.hpp"
#include "tasr/prompts.hpp"

namespace tasr {

const std::string* Decomposition::hint(std::string_view variable) const {
    for (const auto& [name, text] : type_hints) {
        if (name == variable) return &text;
    }
    return nullptr;
}

namespace {

std::string check_triples_shape(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("triples") || !j["triples"].is_array()) {
        return "expected object with \"triples\" array";
    }
    for (const auto& t : j["triples"]) {
        if (!t.is_object()) return "triple entry is not an object";
        for (const char* key : {"head", "relation", "tail"}) {
            if (!t.contains(key) || !t[key].is_string()) {
                return std::string("triple entry lacks string field \"") + key + "\"";
            }
        }
    }
    return "";
}

}  // namespace

std::vector<Triple> parse_triples(const nlohmann::json& j, const std::string& doc_id) {
    if (auto problem = check_triples_shape(j); !problem.empty()) {
        throw Error(ErrorKind::ParseError, problem);
    }
    std::vector<Triple> out;
    for (const auto& t : j["triples"]) {
        std::string h = trim(t["head"].get<std::string>());
        std::string r = trim(t["relation"].get<std::string>());
        std::string tl = trim(t["tail"].get<std::string>());
        if (h.empty() || r.empty() || tl.empty()) continue;
        Triple triple(Entity(h), r, Entity(tl), doc_id);
        if (std::find(out.begin(), out.end(), triple) == out.end()) out.push_back(std::move(triple));
    }
    return out;
}

std::vector<Triple> extract_triples(const Document& d, const std::string& query, LlmGateway& gateway) {
    if (trim(d.text).empty()) return {};
    auto req = build_request(RoleTag::Extract, "extract",
                             {{"question", query.empty() ? "(none)" : query},
                              {"title", d.title},
                              {"text", d.text}});
    auto resp = gateway.chat_complete(std::move(req), check_triples_shape);
    return parse_triples(resp.parsed, d.id);
}

std::string evidence_sentence(const std::string& text, const std::string& entity) {
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find_first_of(".!?\n", start);
        if (end == std::string::npos) end = text.size();
        std::string sentence = trim(std::string_view(text).substr(start, end - start + 1));
        if (sentence.find(entity) != std::string::npos) return sentence;
        start = end + 1;
    }
    return "";
}

std::vector<TypedTriple> type_document_triples(std::span<const Triple> triples, EntityTyper& typer,
                                               const Document* doc) {
    auto context_for = [&](const std::string& entity) -> std::optional<std::string> {
        if (doc == nullptr) return std::nullopt;
        std::string ctx = doc->title;
        if (auto s = evidence_sentence(doc->text, entity); !s.empty()) ctx += " | " + s;
        return ctx;
    };
    std::vector<TypedTriple> out;
    out.reserve(triples.size());
    for (const auto& t : triples) {
        auto head = typer.type_entity(t.head.surface(), context_for(t.head.surface()));
        auto tail = typer.type_entity(t.tail.surface(), context_for(t.tail.surface()));
        out.push_back({head.label, t.relation, tail.label});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Decomposition

namespace {

bool is_variable_token(const std::string& s) {
    return !s.empty() && s.front() == '?';
}

Slot parse_slot(const nlohmann::json& v, const char* field, std::size_t index) {
    if (!v.is_string()) {
        throw Error(ErrorKind::InvalidDecomposition,
                    "sub-query " + std::to_string(index) + " field \"" + field + "\" is not a string");
    }
    std::string s = trim(v.get<std::string>());
    if (s.empty()) {
        throw Error(ErrorKind::InvalidDecomposition,
                    "sub-query " + std::to_string(index) + " field \"" + field + "\" is empty");
    }
    return is_variable_token(s) ? Slot::latent(s) : Slot::bound(s);
}

std::string hint_from_name(const std::string& variable) {
    std::string words;
    for (std::size_t i = 1; i < variable.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(variable[i]);
        if (i > 1 && std::isupper(c)) words.push_back(' ');
        words.push_back(static_cast<char>(std::tolower(c)));
    }
    return words;
}

}  // namespace

void validate_decomposition(const Decomposition& dec) {
    if (dec.sub_queries.empty()) {
        throw Error(ErrorKind::InvalidDecomposition, "decomposition has no sub-queries");
    }
    if (dec.sub_queries.size() > kMaxSubQueries) {
        throw Error(ErrorKind::InvalidDecomposition,
                    std::to_string(dec.sub_queries.size()) + " sub-queries exceed the limit of " +
                        std::to_string(kMaxSubQueries));
    }
    std::set<std::string> produced;
    for (const auto& sq : dec.sub_queries) {
        std::vector<std::string> fresh;
        for (const auto& name : sq.latent_names()) {
            if (!produced.count(name)) fresh.push_back(name);
        }
        if (fresh.size() > 1) {
            throw Error(ErrorKind::InvalidDecomposition,
                        "sub-query " + std::to_string(sq.index) + " " + sq.str() + " consumes " +
                            fresh.front() + " and " + fresh.back() +
                            " before any earlier sub-query produces them");
        }
        produced.insert(fresh.begin(), fresh.end());
    }
}

Decomposition parse_decomposition(const nlohmann::json& j, const std::string& question) {
    if (!j.is_object() || !j.contains("sub_queries") || !j["sub_queries"].is_array()) {
        throw Error(ErrorKind::InvalidDecomposition, "expected object with \"sub_queries\" array");
    }
    Decomposition dec;
    std::size_t index = 0;
    for (const auto& raw : j["sub_queries"]) {
        ++index;
        if (!raw.is_object()) {
            throw Error(ErrorKind::InvalidDecomposition,
                        "sub-query " + std::to_string(index) + " is not an object");
        }
        SubQuery sq{.index = index,
                    .head = parse_slot(raw.value("head", nlohmann::json()), "head", index),
                    .relation = "",
                    .tail = parse_slot(raw.value("tail", nlohmann::json()), "tail", index),
                    .head_type = std::nullopt,
                    .tail_type = std::nullopt};
        const auto& rel = raw.value("relation", nlohmann::json());
        if (!rel.is_string() || trim(rel.get<std::string>()).empty()) {
            throw Error(ErrorKind::InvalidDecomposition,
                        "sub-query " + std::to_string(index) + " has no relation");
        }
        sq.relation = trim(rel.get<std::string>());
        dec.sub_queries.push_back(std::move(sq));
    }

    if (dec.sub_queries.empty()) {
        dec.degenerate = true;
        dec.sub_queries.push_back(
            {.index = 1, .head = Slot::bound(question), .relation = "answer", .tail = Slot::latent("?Answer"),
             .head_type = std::nullopt, .tail_type = std::nullopt});
        dec.type_hints.emplace_back("?Answer", "answer to the question");
        return dec;
    }

    validate_decomposition(dec);

    if (j.contains("type_hints") && j["type_hints"].is_object()) {
        for (const auto& [key, value] : j["type_hints"].items()) {
            if (!value.is_string()) continue;
            std::string name = normalize_variable_name(key);
            if (!dec.hint(name)) dec.type_hints.emplace_back(name, trim(value.get<std::string>()));
        }
    }
    // Variables the model forgot to describe get a description from their name.
    for (const auto& sq : dec.sub_queries) {
        for (const auto& name : sq.latent_names()) {
            if (!dec.hint(name)) dec.type_hints.emplace_back(name, hint_from_name(name));
        }
    }
    return dec;
}

Decomposition decompose_query(const std::string& question, LlmGateway& gateway) {
    if (trim(question).empty()) throw Error(ErrorKind::InvalidDecomposition, "question is empty");
    auto req = build_request(RoleTag::Decompose, "decompose", {{"question", question}});
    auto resp = gateway.chat_complete(std::move(req), [](const nlohmann::json& j) -> std::string {
        if (!j.is_object() || !j.contains("sub_queries") || !j["sub_queries"].is_array()) {
            return "expected object with \"sub_queries\" array";
        }
        return "";
    });
    return parse_decomposition(resp.parsed, trim(question));
}

std::string latent_typing_text(const std::string& variable, const std::string* hint) {
    std::string name = hint_from_name(variable);
    if (!name.empty()) name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    if (hint == nullptr || hint->empty()) return name;
    return name + ": " + *hint;
}

Decomposition type_subqueries(Decomposition dec, EntityTyper& typer) {
    auto type_slot = [&](const Slot& slot) {
        if (slot.is_latent()) return typer.type_entity(latent_typing_text(slot.text(), dec.hint(slot.text()))).label;
        return typer.type_entity(slot.text()).label;
    };
    for (auto& sq : dec.sub_queries) {
        sq.head_type = type_slot(sq.head);
        sq.tail_type = type_slot(sq.tail);
    }
    return dec;
}

}  // namespace tasr
