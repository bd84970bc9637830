#include "tasr/types.hpp"

#include <algorithm>
#include <cctype>

#include "tasr/error.hpp"

namespace tasr {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::WeightSumViolation: return "WeightSumViolation";
        case ErrorKind::RangeViolation: return "RangeViolation";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::EmptyBranch: return "EmptyBranch";
        case ErrorKind::InvalidEntity: return "InvalidEntity";
        case ErrorKind::IndexUnavailable: return "IndexUnavailable";
        case ErrorKind::EncoderUnavailable: return "EncoderUnavailable";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::EmptyIndex: return "EmptyIndex";
        case ErrorKind::LlmProtocolError: return "LlmProtocolError";
        case ErrorKind::LlmUnavailable: return "LlmUnavailable";
        case ErrorKind::MockMiss: return "MockMiss";
        case ErrorKind::InvalidDecomposition: return "InvalidDecomposition";
        case ErrorKind::EmptyPool: return "EmptyPool";
        case ErrorKind::AmbiguousBinding: return "AmbiguousBinding";
        case ErrorKind::BindingConflict: return "BindingConflict";
        case ErrorKind::EmptyAnswer: return "EmptyAnswer";
        case ErrorKind::DatasetParseError: return "DatasetParseError";
        case ErrorKind::QueryAborted: return "QueryAborted";
    }
    return "Unknown";
}

std::string_view to_string(RoleTag role) {
    switch (role) {
        case RoleTag::Extract: return "extract";
        case RoleTag::Decompose: return "decompose";
        case RoleTag::TypeSelect: return "type_select";
        case RoleTag::Answer: return "answer";
    }
    return "unknown";
}

RoleTag role_from_string(std::string_view s) {
    if (s == "extract") return RoleTag::Extract;
    if (s == "decompose") return RoleTag::Decompose;
    if (s == "type_select") return RoleTag::TypeSelect;
    if (s == "answer") return RoleTag::Answer;
    throw Error(ErrorKind::ParseError, "unknown role tag '" + std::string(s) + "'");
}

std::string trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    auto first = std::find_if_not(s.begin(), s.end(), is_space);
    auto last = std::find_if_not(s.rbegin(), s.rend(), is_space).base();
    if (first >= last) return {};
    return std::string(first, last);
}

Entity::Entity(std::string_view surface) : surface_(trim(surface)) {
    if (surface_.empty()) throw Error(ErrorKind::InvalidEntity, "entity surface is empty");
}

Triple::Triple(Entity h, std::string r, Entity t, std::optional<std::string> doc)
    : head(std::move(h)), relation(trim(r)), tail(std::move(t)), source_doc(std::move(doc)) {
    if (relation.empty()) throw Error(ErrorKind::InvalidEntity, "triple relation is empty");
}

Slot Slot::bound(std::string_view surface) {
    std::string text = trim(surface);
    if (text.empty()) throw Error(ErrorKind::InvalidEntity, "bound slot is empty");
    return Slot(std::move(text), false);
}

Slot Slot::latent(std::string_view name) {
    return Slot(normalize_variable_name(name), true);
}

std::string normalize_variable_name(std::string_view raw) {
    std::string body = trim(raw);
    if (!body.empty() && body.front() == '?') body.erase(body.begin());
    std::string out = "?";
    bool upper_next = true;
    for (unsigned char c : body) {
        if (std::isalnum(c)) {
            out.push_back(upper_next ? static_cast<char>(std::toupper(c)) : static_cast<char>(c));
            upper_next = false;
        } else {
            upper_next = true;
        }
    }
    if (out.size() == 1) throw Error(ErrorKind::InvalidEntity, "latent variable has no name");
    return out;
}

std::vector<std::string> SubQuery::latent_names() const {
    std::vector<std::string> names;
    if (head.is_latent()) names.push_back(head.text());
    if (tail.is_latent() && (names.empty() || names.front() != tail.text())) {
        names.push_back(tail.text());
    }
    return names;
}

std::string SubQuery::str() const {
    return "(" + head.text() + ", " + relation + ", " + tail.text() + ")";
}

void BindingTable::insert(const std::string& name, const std::string& value) {
    if (contains(name)) {
        throw Error(ErrorKind::BindingConflict, "variable " + name + " is already bound");
    }
    entries_.emplace_back(name, value);
}

const std::string* BindingTable::find(std::string_view name) const {
    for (const auto& [key, value] : entries_) {
        if (key == name) return &value;
    }
    return nullptr;
}

}  // namespace tasr
