#include "tasr/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <unordered_map>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tasr/error.hpp"
#include "http_util.hpp"

namespace tasr {

EmbeddingVector EmbeddingVector::normalized(std::vector<double> raw) {
    double norm_sq = 0.0;
    for (double x : raw) norm_sq += x * x;
    double norm = std::sqrt(norm_sq);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw Error(ErrorKind::EncoderUnavailable, "encoder returned a zero or non-finite vector");
    }
    for (double& x : raw) x /= norm;
    return EmbeddingVector(std::move(raw));
}

double inner(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::DimensionMismatch, "inner product of vectors with dims " +
                                                      std::to_string(a.size()) + " and " +
                                                      std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<std::vector<double>> MockEncoder::embed(std::span<const std::string> texts) {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::mt19937_64 rng(fnv1a64(text));
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<double> v(dim_);
        for (double& x : v) x = gauss(rng);
        out.push_back(std::move(v));
    }
    return out;
}

HttpEncoder::HttpEncoder(std::string base_url) : base_url_(std::move(base_url)) {}

std::vector<std::vector<double>> HttpEncoder::embed(std::span<const std::string> texts) {
    nlohmann::json body = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
    auto [origin, prefix] = split_url(base_url_);
    httplib::Client client(origin);
    client.set_read_timeout(120, 0);
    auto res = client.Post(prefix + "/embed", body.dump(), "application/json");
    if (!res) {
        throw Error(ErrorKind::EncoderUnavailable,
                    "POST " + base_url_ + "/embed failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw Error(ErrorKind::EncoderUnavailable,
                    "POST " + base_url_ + "/embed returned HTTP " + std::to_string(res->status));
    }
    try {
        auto j = nlohmann::json::parse(res->body);
        auto vectors = j.at("embeddings").get<std::vector<std::vector<double>>>();
        if (vectors.size() != texts.size()) {
            throw Error(ErrorKind::EncoderUnavailable, "encoder returned " +
                                                           std::to_string(vectors.size()) +
                                                           " vectors for " +
                                                           std::to_string(texts.size()) + " texts");
        }
        return vectors;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::EncoderUnavailable, std::string("malformed /embed response: ") + e.what());
    }
}

std::unique_ptr<EncoderClient> make_encoder(const std::string& endpoint) {
    if (endpoint.rfind("mock:", 0) == 0) {
        std::string rest = endpoint.substr(5);
        if (rest.empty()) return std::make_unique<MockEncoder>();
        try {
            return std::make_unique<MockEncoder>(std::stoul(rest));
        } catch (const std::exception&) {
            throw Error(ErrorKind::ParseError, "bad mock encoder dimension '" + rest + "'");
        }
    }
    return std::make_unique<HttpEncoder>(endpoint);
}

Embedder::Embedder(std::shared_ptr<EncoderClient> client) : client_(std::move(client)) {
    if (!client_) throw Error(ErrorKind::EncoderUnavailable, "no encoder client configured");
}

std::vector<EmbeddingVector> Embedder::encode(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out(texts.size());
    std::vector<std::string> missing;
    {
        std::lock_guard lock(mutex_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (auto it = cache_.find(texts[i]); it != cache_.end()) {
                out[i] = it->second;
            } else if (std::find(missing.begin(), missing.end(), texts[i]) == missing.end()) {
                missing.push_back(texts[i]);
            }
        }
    }
    if (!missing.empty()) {
        auto raw = client_->embed(missing);
        if (raw.size() != missing.size()) {
            throw Error(ErrorKind::EncoderUnavailable, "encoder returned wrong number of vectors");
        }
        std::lock_guard lock(mutex_);
        ++client_calls_;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (!dim_) dim_ = raw[i].size();
            if (raw[i].size() != *dim_) {
                throw Error(ErrorKind::DimensionMismatch,
                            "expected dim " + std::to_string(*dim_) + ", got " +
                                std::to_string(raw[i].size()));
            }
            cache_.emplace(missing[i], EmbeddingVector::normalized(std::move(raw[i])));
        }
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (out[i].dim() == 0) out[i] = cache_.at(texts[i]);
        }
    }
    return out;
}

EmbeddingVector Embedder::encode_one(const std::string& text) {
    return encode(std::span<const std::string>(&text, 1)).front();
}

std::size_t Embedder::cache_size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

std::size_t Embedder::client_calls() const {
    std::lock_guard lock(mutex_);
    return client_calls_;
}

void Embedder::load_cache(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return;  // first run: nothing cached yet
    std::string line;
    std::lock_guard lock(mutex_);
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            auto v = j.at("embedding").get<std::vector<double>>();
            if (!dim_) dim_ = v.size();
            if (v.size() != *dim_) throw Error(ErrorKind::DimensionMismatch, "cached vector dim");
            cache_.insert_or_assign(j.at("text").get<std::string>(),
                                    EmbeddingVector::normalized(std::move(v)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::ParseError, "embedding cache " + path.string() + ": " + e.what());
        }
    }
}

void Embedder::save_cache(const std::filesystem::path& path) const {
    std::lock_guard lock(mutex_);
    std::vector<const std::string*> keys;
    keys.reserve(cache_.size());
    for (const auto& [k, _] : cache_) keys.push_back(&k);
    std::sort(keys.begin(), keys.end(), [](auto* a, auto* b) { return *a < *b; });
    std::ofstream out(path);
    for (const auto* k : keys) {
        const auto vals = cache_.at(*k).values();
        nlohmann::json j = {{"text", *k},
                            {"embedding", std::vector<double>(vals.begin(), vals.end())}};
        out << j.dump() << '\n';
    }
}

TripleVectors encode_triple_components(const std::string& head, const std::string& relation,
                                       const std::string& tail, Embedder& embedder) {
    std::vector<std::string> texts = {std::string(kHeadPrefix) + head,
                                      std::string(kRelationPrefix) + relation,
                                      std::string(kTailPrefix) + tail};
    auto v = embedder.encode(texts);
    return {std::move(v[0]), std::move(v[1]), std::move(v[2])};
}

TripleVectors encode_triple_components(const Triple& triple, Embedder& embedder) {
    return encode_triple_components(triple.head.surface(), triple.relation, triple.tail.surface(),
                                    embedder);
}

void VectorIndex::add(std::string key, EmbeddingVector vector) {
    if (!vectors_.empty() && vector.dim() != vectors_.front().dim()) {
        throw Error(ErrorKind::DimensionMismatch, "index entry '" + key + "' has dim " +
                                                      std::to_string(vector.dim()));
    }
    keys_.push_back(std::move(key));
    vectors_.push_back(std::move(vector));
}

std::vector<SearchHit> VectorIndex::search(const EmbeddingVector& query, std::size_t k) const {
    if (keys_.empty()) throw Error(ErrorKind::EmptyIndex, "search over an empty index");
    std::vector<SearchHit> hits;
    hits.reserve(keys_.size());
    for (std::size_t i = 0; i < keys_.size(); ++i) {
        hits.push_back({keys_[i], inner(query, vectors_[i])});
    }
    const std::size_t n = std::min(k, hits.size());
    auto better = [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.key < b.key;
    };
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(),
                      better);
    hits.resize(n);
    return hits;
}

VectorIndex build_corpus_index(std::span<const Document> corpus, Embedder& embedder) {
    std::vector<std::string> texts;
    texts.reserve(corpus.size());
    for (const auto& d : corpus) texts.push_back(d.embedding_text());
    auto vectors = embedder.encode(texts);
    VectorIndex index;
    for (std::size_t i = 0; i < corpus.size(); ++i) index.add(corpus[i].id, std::move(vectors[i]));
    return index;
}

std::vector<Document> dense_retrieve(const std::string& query, const VectorIndex& corpus_index,
                                     std::span<const Document> corpus, Embedder& embedder,
                                     const PipelineConfig& cfg) {
    auto hits = corpus_index.search(embedder.encode_one(query), cfg.k0);
    std::unordered_map<std::string_view, const Document*> by_id;
    for (const auto& d : corpus) by_id.emplace(d.id, &d);
    std::vector<Document> pool;
    pool.reserve(hits.size());
    for (const auto& hit : hits) {
        auto it = by_id.find(hit.key);
        if (it == by_id.end()) {
            throw Error(ErrorKind::IndexUnavailable, "index key '" + hit.key + "' not in corpus");
        }
        pool.push_back(*it->second);
    }
    return pool;
}

}  // namespace tasr
