#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tasr/config.hpp"
#include "tasr/types.hpp"

namespace tasr {

// Unit-norm embedding. Construction normalizes; a zero vector is rejected.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    static EmbeddingVector normalized(std::vector<double> raw);

    std::span<const double> values() const noexcept { return values_; }
    std::size_t dim() const noexcept { return values_.size(); }

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

private:
    explicit EmbeddingVector(std::vector<double> v) : values_(std::move(v)) {}
    std::vector<double> values_;
};

double inner(std::span<const double> a, std::span<const double> b);
inline double inner(const EmbeddingVector& a, const EmbeddingVector& b) {
    return inner(a.values(), b.values());
}

// Raw encoder backend. Implementations return one vector per text, in order.
class EncoderClient {
public:
    virtual ~EncoderClient() = default;
    virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
};

// Offline encoder: FNV-1a(text) seeds a 64-bit Mersenne twister which draws
// a Gaussian vector. Distinct strings land near-orthogonal.
class MockEncoder final : public EncoderClient {
public:
    explicit MockEncoder(std::size_t dim = 384) : dim_(dim) {}
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

    std::size_t dim() const noexcept { return dim_; }

private:
    std::size_t dim_;
};

std::uint64_t fnv1a64(std::string_view s);

// POST {base}/embed {"texts": [...]} -> {"embeddings": [[...], ...]}.
class HttpEncoder final : public EncoderClient {
public:
    explicit HttpEncoder(std::string base_url);
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;

private:
    std::string base_url_;
};

// "mock:" or "mock:<dim>" selects MockEncoder; anything else is an HTTP base URL.
std::unique_ptr<EncoderClient> make_encoder(const std::string& endpoint);

// Thread-safe normalizing front end with a per-run cache keyed on the exact
// input string.
class Embedder {
public:
    explicit Embedder(std::shared_ptr<EncoderClient> client);

    // Throws EncoderUnavailable / DimensionMismatch.
    std::vector<EmbeddingVector> encode(std::span<const std::string> texts);
    EmbeddingVector encode_one(const std::string& text);

    std::size_t cache_size() const;
    std::size_t client_calls() const;

    // Optional JSONL persistence: {"text": str, "embedding": [..]} per line.
    void load_cache(const std::filesystem::path& path);
    void save_cache(const std::filesystem::path& path) const;

private:
    std::shared_ptr<EncoderClient> client_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, EmbeddingVector> cache_;
    std::optional<std::size_t> dim_;
    std::size_t client_calls_ = 0;
};

inline constexpr std::string_view kHeadPrefix = "S: ";
inline constexpr std::string_view kRelationPrefix = "P: ";
inline constexpr std::string_view kTailPrefix = "O: ";

struct TripleVectors {
    EmbeddingVector head;
    EmbeddingVector relation;
    EmbeddingVector tail;
};

// Encodes "S: "+head, "P: "+relation, "O: "+tail.
TripleVectors encode_triple_components(const std::string& head, const std::string& relation,
                                       const std::string& tail, Embedder& embedder);
TripleVectors encode_triple_components(const Triple& triple, Embedder& embedder);

struct SearchHit {
    std::string key;
    double score = 0.0;
};

// Exact inner-product index over unit vectors.
class VectorIndex {
public:
    void add(std::string key, EmbeddingVector vector);
    std::size_t size() const noexcept { return keys_.size(); }
    bool empty() const noexcept { return keys_.empty(); }

    // Top min(k, size) by inner product desc, ties by key asc. Throws EmptyIndex.
    std::vector<SearchHit> search(const EmbeddingVector& query, std::size_t k) const;

private:
    std::vector<std::string> keys_;
    std::vector<EmbeddingVector> vectors_;
};

VectorIndex build_corpus_index(std::span<const Document> corpus, Embedder& embedder);

// Top-k0 documents of `corpus` by cosine with the query, in rank order.
std::vector<Document> dense_retrieve(const std::string& query, const VectorIndex& corpus_index,
                                     std::span<const Document> corpus, Embedder& embedder,
                                     const PipelineConfig& cfg);

}  // namespace tasr
