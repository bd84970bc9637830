#include <cmath>
#include <random>
#include <set>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tasr/embedding.hpp"
#include "tasr/error.hpp"
#include "tasr/eval.hpp"
#include "test_support.hpp"

using namespace tasr;

namespace {

// Records every text it is asked to encode.
class SpyEncoder final : public EncoderClient {
public:
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
        for (const auto& t : texts) seen.push_back(t);
        return inner.embed(texts);
    }
    std::vector<std::string> seen;
    MockEncoder inner{32};
};

class FixedEncoder final : public EncoderClient {
public:
    explicit FixedEncoder(std::vector<std::vector<double>> out) : out_(std::move(out)) {}
    std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
        return {out_.begin(), out_.begin() + static_cast<std::ptrdiff_t>(texts.size())};
    }

private:
    std::vector<std::vector<double>> out_;
};

double norm(const EmbeddingVector& v) {
    double s = 0;
    for (double x : v.values()) s += x * x;
    return std::sqrt(s);
}

}  // namespace

TEST(MockEncoder, UnitNormAndDeterministic) {
    Embedder emb(std::make_shared<MockEncoder>());
    auto a = emb.encode_one("a");
    EXPECT_EQ(a.dim(), 384u);
    EXPECT_NEAR(norm(a), 1.0, 1e-6);
    Embedder other(std::make_shared<MockEncoder>());
    EXPECT_EQ(other.encode_one("a"), a);
}

TEST(MockEncoder, SelfSimilarityDominates) {
    Embedder emb(std::make_shared<MockEncoder>());
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
        auto x = emb.encode_one("x" + std::to_string(rng()));
        auto y = emb.encode_one("y" + std::to_string(rng()));
        EXPECT_NEAR(inner(x, x), 1.0, 1e-9);
        EXPECT_LT(inner(x, y), 1.0);
    }
}

TEST(MockEncoder, FnvKnownValues) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Embedder, CachesExactText) {
    auto spy = std::make_shared<SpyEncoder>();
    Embedder emb(spy);
    emb.encode_one("MySQL");
    emb.encode_one("MySQL");
    emb.encode_one("MySQL ");
    EXPECT_EQ(spy->seen.size(), 2u);
    EXPECT_EQ(emb.cache_size(), 2u);
}

TEST(Embedder, RejectsDimensionDrift) {
    Embedder emb(std::make_shared<FixedEncoder>(std::vector<std::vector<double>>{{1, 0, 0}, {1, 0}}));
    std::vector<std::string> texts{"a", "b"};
    try {
        emb.encode(texts);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
    }
}

TEST(Embedder, CacheFileRoundTrip) {
    auto path = std::filesystem::temp_directory_path() / "tasr_embed_cache_test.jsonl";
    Embedder a(std::make_shared<MockEncoder>(16));
    auto v = a.encode_one("hello");
    a.save_cache(path);
    auto spy = std::make_shared<SpyEncoder>();
    Embedder b(spy);
    b.load_cache(path);
    auto w = b.encode_one("hello");
    EXPECT_TRUE(spy->seen.empty());
    for (std::size_t i = 0; i < v.dim(); ++i) EXPECT_NEAR(v.values()[i], w.values()[i], 1e-15);
    std::filesystem::remove(path);
}

TEST(TripleComponents, PrefixesAreBitExact) {
    auto spy = std::make_shared<SpyEncoder>();
    Embedder emb(spy);
    auto v = encode_triple_components("A", "r", "A", emb);
    EXPECT_EQ(spy->seen, (std::vector<std::string>{"S: A", "P: r", "O: A"}));
    EXPECT_LT(inner(v.head, v.tail), 1.0 - 1e-6);
}

TEST(TripleComponents, RunningExampleSubQuery) {
    auto spy = std::make_shared<SpyEncoder>();
    Embedder emb(spy);
    encode_triple_components("Science Activity Planner", "uses", "?Database", emb);
    EXPECT_EQ(spy->seen,
              (std::vector<std::string>{"S: Science Activity Planner", "P: uses", "O: ?Database"}));
    auto again = encode_triple_components("Science Activity Planner", "uses", "?Database", emb);
    EXPECT_EQ(spy->seen.size(), 3u);
    EXPECT_NEAR(inner(again.head, emb.encode_one("S: Science Activity Planner")), 1.0, 1e-12);
}

TEST(VectorIndex, SingletonAndTruncation) {
    Embedder emb(std::make_shared<MockEncoder>(8));
    VectorIndex idx;
    idx.add("only", emb.encode_one("only"));
    auto hits = idx.search(emb.encode_one("q"), 5);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].key, "only");
    idx.add("b", emb.encode_one("b"));
    idx.add("c", emb.encode_one("c"));
    EXPECT_EQ(idx.search(emb.encode_one("q"), 10).size(), 3u);
}

TEST(VectorIndex, EmptyIndexThrows) {
    VectorIndex idx;
    Embedder emb(std::make_shared<MockEncoder>(8));
    try {
        idx.search(emb.encode_one("q"), 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyIndex);
    }
}

TEST(VectorIndex, MatchesArgsortOracle) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    VectorIndex idx;
    std::vector<std::pair<std::string, std::vector<double>>> raw;
    for (int i = 0; i < 50; ++i) {
        std::vector<double> v(16);
        for (auto& x : v) x = g(rng);
        raw.emplace_back("k" + std::to_string(i), v);
        idx.add(raw.back().first, EmbeddingVector::normalized(v));
    }
    std::vector<double> q(16);
    for (auto& x : q) x = g(rng);
    auto qv = EmbeddingVector::normalized(q);
    std::vector<std::pair<double, std::string>> oracle;
    for (const auto& [k, v] : raw) oracle.emplace_back(inner(qv, EmbeddingVector::normalized(v)), k);
    std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    auto hits = idx.search(qv, 5);
    ASSERT_EQ(hits.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(hits[i].key, oracle[i].second);
}

TEST(VectorIndex, TiesBreakByKey) {
    VectorIndex idx;
    auto v = EmbeddingVector::normalized(std::vector<double>{1, 1});
    idx.add("b", v);
    idx.add("a", v);
    idx.add("c", EmbeddingVector::normalized(std::vector<double>{1, -1}));
    auto hits = idx.search(v, 3);
    EXPECT_EQ(hits[0].key, "a");
    EXPECT_EQ(hits[1].key, "b");
    EXPECT_EQ(hits[2].key, "c");
}

TEST(EmbeddingVector, RejectsZero) {
    try {
        EmbeddingVector::normalized(std::vector<double>{0, 0, 0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EncoderUnavailable);
    }
}

TEST(DenseRetrieve, ToyCorpusPoolHasAllDocuments) {
    auto corpus = load_corpus(tasr::testing::source_path("data/toy/corpus.jsonl"));
    Embedder emb(std::make_shared<MockEncoder>());
    auto idx = build_corpus_index(corpus, emb);
    PipelineConfig cfg;
    auto pool = dense_retrieve(
        "Which company originally developed the open-source relational database used in NASA/JPL's Science "
        "Activity Planner for the Mars Rover?",
        idx, corpus, emb, cfg);
    ASSERT_EQ(pool.size(), 6u);
    std::set<std::string> ids;
    for (const auto& d : pool) ids.insert(d.id);
    EXPECT_TRUE(ids.count("doc1") && ids.count("doc3") && ids.count("doc6"));
    cfg.k0 = 2;
    EXPECT_EQ(dense_retrieve("MySQL", idx, corpus, emb, cfg).size(), 2u);
}

TEST(DenseRetrieve, DuplicateDocumentsTieByIdAscending) {
    std::vector<Document> corpus(3);
    corpus[0] = {"z-dup", "Same", "same body", {}, {}};
    corpus[1] = {"a-dup", "Same", "same body", {}, {}};
    corpus[2] = {"other", "Other", "different", {}, {}};
    Embedder emb(std::make_shared<MockEncoder>());
    auto idx = build_corpus_index(corpus, emb);
    PipelineConfig cfg;
    auto pool = dense_retrieve("Same\n\nsame body", idx, corpus, emb, cfg);
    ASSERT_EQ(pool.size(), 3u);
    EXPECT_EQ(pool[0].id, "a-dup");
    EXPECT_EQ(pool[1].id, "z-dup");
}

TEST(HttpEncoder, PostsTextsAndParsesEmbeddings) {
    httplib::Server server;
    nlohmann::json last_request;
    server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
        last_request = nlohmann::json::parse(req.body);
        nlohmann::json out = {{"embeddings", nlohmann::json::array()}};
        for (std::size_t i = 0; i < last_request["texts"].size(); ++i) {
            out["embeddings"].push_back({3.0, 4.0 + static_cast<double>(i)});
        }
        res.set_content(out.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto enc = make_encoder("http://127.0.0.1:" + std::to_string(port));
    Embedder emb(std::move(enc));
    std::vector<std::string> texts{"a", "b"};
    auto vs = emb.encode(texts);
    server.stop();
    th.join();

    EXPECT_EQ(last_request["texts"], nlohmann::json({"a", "b"}));
    ASSERT_EQ(vs.size(), 2u);
    EXPECT_NEAR(vs[0].values()[0], 0.6, 1e-12);
    EXPECT_NEAR(vs[0].values()[1], 0.8, 1e-12);
}

TEST(HttpEncoder, UnreachableServerIsEncoderUnavailable) {
    Embedder emb(make_encoder("http://127.0.0.1:1"));
    try {
        emb.encode_one("x");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EncoderUnavailable);
    }
}
