#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tasr {

std::string trim(std::string_view s);

// A named entity mention. Surface text is trimmed and never empty.
class Entity {
public:
    // Throws Error(InvalidEntity) when the trimmed text is empty.
    explicit Entity(std::string_view surface);

    const std::string& surface() const noexcept { return surface_; }

    friend bool operator==(const Entity&, const Entity&) = default;

private:
    std::string surface_;
};

// Two-level type (L1 class, L2 class). Membership in a concrete taxonomy is
// checked by Taxonomy::contains, not here.
struct TaxonomyLabel {
    std::string l1;
    std::string l2;

    std::string str() const { return l1 + "/" + l2; }

    friend bool operator==(const TaxonomyLabel&, const TaxonomyLabel&) = default;
};

struct Triple {
    Entity head;
    std::string relation;  // surface form, never replaced by a type
    Entity tail;
    std::optional<std::string> source_doc;

    Triple(Entity h, std::string r, Entity t, std::optional<std::string> doc = std::nullopt);

    friend bool operator==(const Triple&, const Triple&) = default;
};

// Typed counterpart of the document triple at the same index.
struct TypedTriple {
    TaxonomyLabel head_type;
    std::string relation;
    TaxonomyLabel tail_type;

    friend bool operator==(const TypedTriple&, const TypedTriple&) = default;
};

// One argument position of a sub-query: either a concrete entity or a
// "?Name" placeholder awaiting a binding.
class Slot {
public:
    static Slot bound(std::string_view surface);
    static Slot latent(std::string_view name);

    Slot() = default;

    bool is_latent() const noexcept { return latent_; }
    const std::string& text() const noexcept { return text_; }

    friend bool operator==(const Slot&, const Slot&) = default;

private:
    Slot(std::string text, bool latent) : text_(std::move(text)), latent_(latent) {}

    std::string text_;
    bool latent_ = false;
};

// Normalizes a raw variable token ("?database", "?developer company",
// "?company_name") to "?CamelCase".
std::string normalize_variable_name(std::string_view raw);

struct SubQuery {
    std::size_t index = 1;  // 1-based position in the chain
    Slot head;
    std::string relation;
    Slot tail;
    std::optional<TaxonomyLabel> head_type;
    std::optional<TaxonomyLabel> tail_type;

    bool typed() const noexcept { return head_type.has_value() && tail_type.has_value(); }
    std::vector<std::string> latent_names() const;
    std::string str() const;

    friend bool operator==(const SubQuery&, const SubQuery&) = default;
};

// Insert-only map from latent variable to resolved surface text, kept in
// insertion order.
class BindingTable {
public:
    // Throws Error(BindingConflict) if `name` is already bound.
    void insert(const std::string& name, const std::string& value);

    const std::string* find(std::string_view name) const;
    bool contains(std::string_view name) const { return find(name) != nullptr; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    const std::vector<std::pair<std::string, std::string>>& entries() const noexcept {
        return entries_;
    }

    friend bool operator==(const BindingTable&, const BindingTable&) = default;

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

struct Document {
    std::string id;
    std::string title;
    std::string text;
    std::vector<Triple> triples;
    std::vector<TypedTriple> typed_triples;  // index-aligned with triples when populated

    // Text fed to the dense encoder.
    std::string embedding_text() const { return title + "\n\n" + text; }
};

}  // namespace tasr
