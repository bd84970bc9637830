#include "tasr/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>

#include <nlohmann/json.hpp>

#include "tasr/error.hpp"
#include "tasr/prompts.hpp"

namespace tasr {

Taxonomy Taxonomy::from_json(const nlohmann::json& j) {
    Taxonomy tax;
    try {
        for (const auto& entry : j.at("l1")) {
            Branch b;
            b.name = trim(entry.at("name").get<std::string>());
            if (b.name.empty()) throw Error(ErrorKind::ParseError, "taxonomy L1 name is empty");
            for (const auto& child : entry.at("l2")) {
                std::string c = trim(child.get<std::string>());
                if (c.empty()) throw Error(ErrorKind::ParseError, "empty L2 under " + b.name);
                if (std::find(b.children.begin(), b.children.end(), c) != b.children.end()) {
                    throw Error(ErrorKind::ParseError, "duplicate L2 '" + c + "' under " + b.name);
                }
                b.children.push_back(std::move(c));
            }
            if (b.children.empty()) {
                throw Error(ErrorKind::EmptyBranch, "L1 class '" + b.name + "' has no children");
            }
            if (tax.has_l1(b.name)) throw Error(ErrorKind::ParseError, "duplicate L1 '" + b.name + "'");
            tax.branches_.push_back(std::move(b));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, std::string("taxonomy: ") + e.what());
    }
    if (tax.branches_.empty()) throw Error(ErrorKind::ParseError, "taxonomy has no L1 classes");
    return tax;
}

Taxonomy Taxonomy::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open taxonomy file " + path.string());
    try {
        return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
    }
}

std::vector<std::string> Taxonomy::l1_classes() const {
    std::vector<std::string> out;
    out.reserve(branches_.size());
    for (const auto& b : branches_) out.push_back(b.name);
    return out;
}

const std::vector<std::string>* Taxonomy::children(std::string_view l1) const {
    for (const auto& b : branches_) {
        if (b.name == l1) return &b.children;
    }
    return nullptr;
}

bool Taxonomy::contains(const TaxonomyLabel& label) const {
    const auto* kids = children(label.l1);
    return kids && std::find(kids->begin(), kids->end(), label.l2) != kids->end();
}

// ---------------------------------------------------------------------------
// Rule-based typing

namespace {

const std::regex& year_re() {
    static const std::regex re(R"(^[12][0-9]{3}$)");
    return re;
}

const std::regex& date_re() {
    static const std::regex re(
        R"(^([0-9]{4}-[0-9]{2}-[0-9]{2})$)"
        R"(|^([0-9]{1,2}/[0-9]{1,2}/[0-9]{4})$)"
        R"(|^((jan|feb|mar|apr|may|jun|jul|aug|sep|sept|oct|nov|dec)[a-z]*\.? [0-9]{1,2}(st|nd|rd|th)?,? [0-9]{4})$)"
        R"(|^([0-9]{1,2} (jan|feb|mar|apr|may|jun|jul|aug|sep|sept|oct|nov|dec)[a-z]*\.?,? [0-9]{4})$)",
        std::regex::icase);
    return re;
}

const std::regex& percent_re() {
    static const std::regex re(R"(^[+-]?([0-9]+(\.[0-9]+)?|\.[0-9]+) ?%$)");
    return re;
}

const std::regex& money_re() {
    static const std::regex re(
        R"(^(\$|US\$|€|£|¥) ?[0-9][0-9,]*(\.[0-9]+)?( ?(thousand|million|billion|trillion|[kmb]n?))?$)",
        std::regex::icase);
    return re;
}

const std::regex& count_re() {
    static const std::regex re(R"(^[0-9]{1,3}(,[0-9]{3})+$|^[0-9]+$)");
    return re;
}

}  // namespace

std::optional<TaxonomyLabel> rule_type_entity(const Entity& entity, const Taxonomy& taxonomy) {
    const std::string& s = entity.surface();
    std::optional<TaxonomyLabel> label;
    if (std::regex_match(s, date_re())) label = TaxonomyLabel{"TIME", "Date"};
    else if (std::regex_match(s, year_re())) label = TaxonomyLabel{"TIME", "Year"};
    else if (std::regex_match(s, percent_re())) label = TaxonomyLabel{"QUANTITY", "Percentage"};
    else if (std::regex_match(s, money_re())) label = TaxonomyLabel{"QUANTITY", "Money"};
    else if (std::regex_match(s, count_re())) label = TaxonomyLabel{"QUANTITY", "Count"};
    if (label && !taxonomy.contains(*label)) return std::nullopt;
    return label;
}

// ---------------------------------------------------------------------------
// Label index

std::string TypeIndex::l1_text(std::string_view l1) {
    std::string out(l1);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string TypeIndex::l2_text(std::string_view l1, std::string_view l2) {
    // "ResearchInstitute" -> "research institute (organization)"
    std::string words;
    for (std::size_t i = 0; i < l2.size(); ++i) {
        unsigned char c = static_cast<unsigned char>(l2[i]);
        if (i > 0 && std::isupper(c) && !std::isupper(static_cast<unsigned char>(l2[i - 1]))) {
            words.push_back(' ');
        }
        words.push_back(static_cast<char>(std::tolower(c)));
    }
    return words + " (" + l1_text(l1) + ")";
}

TypeIndex TypeIndex::build(const Taxonomy& taxonomy, Embedder& embedder) {
    TypeIndex index;
    std::vector<std::string> l1_texts;
    for (const auto& b : taxonomy.branches()) l1_texts.push_back(l1_text(b.name));
    auto l1_vecs = embedder.encode(l1_texts);
    for (std::size_t i = 0; i < taxonomy.size(); ++i) {
        const auto& b = taxonomy.branches()[i];
        index.l1_.add(b.name, std::move(l1_vecs[i]));

        std::vector<std::string> texts;
        for (const auto& c : b.children) texts.push_back(l2_text(b.name, c));
        auto vecs = embedder.encode(texts);
        VectorIndex branch;
        for (std::size_t k = 0; k < b.children.size(); ++k) branch.add(b.children[k], std::move(vecs[k]));
        index.l2_.emplace(b.name, std::move(branch));
    }
    return index;
}

const VectorIndex& TypeIndex::l2(std::string_view l1) const {
    auto it = l2_.find(std::string(l1));
    if (it == l2_.end()) throw Error(ErrorKind::IndexUnavailable, "no L2 index for '" + std::string(l1) + "'");
    return it->second;
}

// ---------------------------------------------------------------------------
// Candidate retrieval and LLM selection

TypeCandidates retrieve_type_candidates(const Entity& entity, const Taxonomy& taxonomy,
                                        const TypeIndex* index, Embedder& embedder,
                                        const PipelineConfig& cfg) {
    TypeCandidates out;
    if (cfg.typing_mode == TypingMode::Pure) {
        for (const auto& b : taxonomy.branches()) out.l1_candidates.push_back({b.name, 0.0});
        return out;
    }
    if (index == nullptr) throw Error(ErrorKind::IndexUnavailable, "type label index not built");
    out.query = embedder.encode_one(entity.surface());
    for (auto& hit : index->l1().search(out.query, cfg.n_l1_candidates)) {
        out.l1_candidates.push_back({std::move(hit.key), hit.score});
    }
    return out;
}

std::string_view to_string(TypingSource source) {
    switch (source) {
        case TypingSource::Rule: return "rule";
        case TypingSource::Llm: return "llm";
        case TypingSource::Fallback: return "fallback";
    }
    return "unknown";
}

namespace {

std::string context_line(const std::optional<std::string>& context) {
    if (!context || context->empty()) return "";
    return "Context: " + *context;
}

std::vector<L2Candidate> branch_candidates(const std::string& l1, const TypeCandidates& cands,
                                           const Taxonomy& taxonomy, const TypeIndex* index,
                                           const PipelineConfig& cfg) {
    std::vector<L2Candidate> out;
    if (cfg.typing_mode == TypingMode::Pure) {
        for (const auto& c : *taxonomy.children(l1)) out.push_back({{l1, c}, 0.0});
        return out;
    }
    for (auto& hit : index->l2(l1).search(cands.query, cfg.m_l2_candidates)) {
        out.push_back({{l1, std::move(hit.key)}, hit.score});
    }
    return out;
}

}  // namespace

TypingOutcome select_type(const Entity& entity, TypeCandidates& candidates, const Taxonomy& taxonomy,
                          const TypeIndex* index, LlmGateway& gateway, const PipelineConfig& cfg,
                          const std::optional<std::string>& context) {
    if (candidates.l1_candidates.empty()) {
        throw Error(ErrorKind::IndexUnavailable, "no type candidates for '" + entity.surface() + "'");
    }
    if (cfg.typing_mode == TypingMode::Retrieval && index == nullptr) {
        throw Error(ErrorKind::IndexUnavailable, "type label index not built");
    }
    const std::size_t keep = cfg.typing_mode == TypingMode::Pure ? 1 : cfg.l1_keep;
    std::vector<std::string> notes;

    // Stage 1: first-level labels.
    std::vector<std::string> allowed;
    std::string listing;
    for (const auto& c : candidates.l1_candidates) {
        allowed.push_back(c.l1);
        listing += (listing.empty() ? "" : ", ") + c.l1;
    }
    auto stage1 = build_request(RoleTag::TypeSelect, "type_select_l1",
                                {{"entity", entity.surface()},
                                 {"context", context_line(context)},
                                 {"candidates", listing},
                                 {"keep", std::to_string(keep)}});
    auto validate_l1 = [&](const nlohmann::json& j) -> std::string {
        if (!j.is_object() || !j.contains("labels") || !j["labels"].is_array() || j["labels"].empty()) {
            return "expected non-empty \"labels\" array";
        }
        for (const auto& l : j["labels"]) {
            if (!l.is_string()) return "label is not a string";
            if (std::find(allowed.begin(), allowed.end(), l.get<std::string>()) == allowed.end()) {
                return "label '" + l.get<std::string>() + "' is not a candidate";
            }
        }
        return "";
    };

    std::vector<std::string> kept;
    try {
        auto resp = gateway.chat_complete(stage1, validate_l1);
        for (const auto& l : resp.parsed["labels"]) {
            auto s = l.get<std::string>();
            if (std::find(kept.begin(), kept.end(), s) == kept.end()) kept.push_back(std::move(s));
            if (kept.size() == keep) break;
        }
    } catch (const LlmError& e) {
        if (e.kind() != ErrorKind::LlmProtocolError) throw;
        for (std::size_t i = 0; i < candidates.l1_candidates.size() && i < keep; ++i) {
            kept.push_back(candidates.l1_candidates[i].l1);
        }
        notes.push_back(std::string("stage 1: ") + e.what());
    }

    // Stage 2: union of the kept branches' L2 candidates.
    candidates.l2_candidates.clear();
    for (const auto& l1 : kept) {
        auto branch = branch_candidates(l1, candidates, taxonomy, index, cfg);
        candidates.l2_candidates.insert(candidates.l2_candidates.end(), branch.begin(), branch.end());
    }
    if (cfg.typing_mode == TypingMode::Retrieval) {
        std::stable_sort(candidates.l2_candidates.begin(), candidates.l2_candidates.end(),
                         [](const L2Candidate& a, const L2Candidate& b) {
                             if (a.similarity != b.similarity) return a.similarity > b.similarity;
                             return a.label.str() < b.label.str();
                         });
    }

    std::string pairs;
    for (const auto& c : candidates.l2_candidates) pairs += "- " + c.label.l1 + " / " + c.label.l2 + "\n";
    auto stage2 = build_request(RoleTag::TypeSelect, "type_select_l2",
                                {{"entity", entity.surface()},
                                 {"context", context_line(context)},
                                 {"candidates", pairs}});
    auto validate_l2 = [&](const nlohmann::json& j) -> std::string {
        if (!j.is_object() || !j.contains("l1") || !j.contains("l2") || !j["l1"].is_string() ||
            !j["l2"].is_string()) {
            return "expected string fields \"l1\" and \"l2\"";
        }
        TaxonomyLabel picked{j["l1"].get<std::string>(), j["l2"].get<std::string>()};
        for (const auto& c : candidates.l2_candidates) {
            if (c.label == picked) return "";
        }
        return "label '" + picked.str() + "' is not a candidate";
    };

    TypingOutcome outcome;
    try {
        auto resp = gateway.chat_complete(stage2, validate_l2);
        outcome.label = {resp.parsed["l1"].get<std::string>(), resp.parsed["l2"].get<std::string>()};
        outcome.source = notes.empty() ? TypingSource::Llm : TypingSource::Fallback;
    } catch (const LlmError& e) {
        if (e.kind() != ErrorKind::LlmProtocolError) throw;
        outcome.label = candidates.l2_candidates.front().label;
        outcome.source = TypingSource::Fallback;
        notes.push_back(std::string("stage 2: ") + e.what());
    }
    for (const auto& n : notes) outcome.note += (outcome.note.empty() ? "" : "; ") + n;
    return outcome;
}

EntityTyper::EntityTyper(std::shared_ptr<const Taxonomy> taxonomy,
                         std::shared_ptr<const TypeIndex> index, std::shared_ptr<Embedder> embedder,
                         std::shared_ptr<LlmGateway> gateway, PipelineConfig cfg)
    : taxonomy_(std::move(taxonomy)),
      index_(std::move(index)),
      embedder_(std::move(embedder)),
      gateway_(std::move(gateway)),
      cfg_(std::move(cfg)) {}

TypingOutcome EntityTyper::type_entity(std::string_view text,
                                       const std::optional<std::string>& context) {
    Entity entity(text);
    {
        std::lock_guard lock(mutex_);
        if (auto it = memo_.find(entity.surface()); it != memo_.end()) return it->second;
    }

    TypingOutcome outcome;
    if (auto ruled = rule_type_entity(entity, *taxonomy_)) {
        outcome = {*ruled, TypingSource::Rule, ""};
    } else {
        auto cands = retrieve_type_candidates(entity, *taxonomy_, index_.get(), *embedder_, cfg_);
        outcome = select_type(entity, cands, *taxonomy_, index_.get(), *gateway_, cfg_,
                              cfg_.typing_context ? context : std::nullopt);
    }

    std::lock_guard lock(mutex_);
    auto [it, inserted] = memo_.insert_or_assign(entity.surface(), outcome);
    if (inserted && outcome.source == TypingSource::Fallback) fallbacks_.push_back({entity.surface(), outcome});
    return it->second;
}

std::size_t EntityTyper::memo_size() const {
    std::lock_guard lock(mutex_);
    return memo_.size();
}

std::vector<EntityTyper::Event> EntityTyper::fallbacks() const {
    std::lock_guard lock(mutex_);
    return fallbacks_;
}

}  // namespace tasr
