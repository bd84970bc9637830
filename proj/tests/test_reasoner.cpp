#include <array>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "tasr/error.hpp"
#include "tasr/eval.hpp"
#include "tasr/reasoner.hpp"
#include "test_support.hpp"

using namespace tasr;
using nlohmann::json;
using tasr::testing::make_subquery;

namespace {

const std::string kRunningQuestion =
    "Which company originally developed the open-source relational database used in NASA/JPL's Science "
    "Activity Planner for the Mars Rover?";

const TaxonomyLabel kDatabase{"PRODUCT", "Database"};
const TaxonomyLabel kCompany{"ORGANIZATION", "Company"};

std::unique_ptr<Pipeline> toy_pipeline(std::shared_ptr<RecordingBackend>* rec_out = nullptr,
                                       PipelineConfig cfg = {}) {
    auto rec = std::make_shared<RecordingBackend>(tasr::testing::toy_mock());
    if (rec_out) *rec_out = rec;
    return std::make_unique<Pipeline>(cfg, tasr::testing::default_taxonomy(), tasr::testing::mock_embedder(),
                                      std::make_shared<LlmGateway>(rec),
                                      load_corpus(tasr::testing::source_path("data/toy/corpus.jsonl")));
}

std::vector<Document> documents_from_trace(const ReasoningTrace& trace) {
    std::vector<Document> out;
    for (const auto& d : trace.documents) {
        Document doc;
        doc.id = d.id;
        doc.triples = d.triples;
        doc.typed_triples = d.typed_triples;
        out.push_back(std::move(doc));
    }
    return out;
}

// Three-hop chain over a synthetic corpus. Every entity gets the same type so
// the semantic channel decides the ranking.
struct ChainFixture {
    std::shared_ptr<ScriptedMock> mock = std::make_shared<ScriptedMock>();
    std::vector<Document> corpus;
    std::string question = "In which country is the birth city of the founder of Zorblax Labs?";

    explicit ChainFixture(bool broken_second_answer = false) {
        auto doc = [&](const std::string& id, const std::string& title, const std::string& text,
                       const std::string& h, const std::string& r, const std::string& t) {
            corpus.push_back({id, title, text, {}, {}});
            mock->add(RoleTag::Extract, "Document title: " + title + "\n",
                      json{{"triples", {{{"head", h}, {"relation", r}, {"tail", t}}}}});
        };
        doc("c1", "Zorblax Labs", "Zorblax Labs was founded by Ada Quill.", "Zorblax Labs", "founded by", "Ada Quill");
        doc("c2", "Ada Quill", "Ada Quill was born in Vemford.", "Ada Quill", "born in", "Vemford");
        doc("c3", "Vemford", "Vemford is a city located in Norland.", "Vemford", "located in", "Norland");
        doc("c4", "Gardening", "Tomatoes need sun.", "Tomatoes", "need", "sun");
        mock->add(RoleTag::Decompose, "Question: " + question,
                  json{{"sub_queries",
                        {{{"head", "Zorblax Labs"}, {"relation", "founded by"}, {"tail", "?Founder"}},
                         {{"head", "?Founder"}, {"relation", "born in"}, {"tail", "?City"}},
                         {{"head", "?City"}, {"relation", "located in"}, {"tail", "?Country"}}}}});
        mock->add(RoleTag::Answer, "Step: Zorblax Labs founded by ?Founder.", json{{"answer", "Ada Quill"}});
        if (broken_second_answer) {
            mock->add(RoleTag::Answer, "Step: Ada Quill born in ?City.", "no idea, sorry");
        } else {
            mock->add(RoleTag::Answer, "Step: Ada Quill born in ?City.", json{{"answer", "Vemford"}});
        }
        mock->add(RoleTag::Answer, "Step: Vemford located in ?Country.", json{{"answer", "Norland"}});
        mock->add(RoleTag::TypeSelect, "Choose first-level types", json{{"labels", {"CONCEPT"}}});
        mock->add(RoleTag::TypeSelect, "Choose the final type pair", json{{"l1", "CONCEPT"}, {"l2", "Method"}});
    }

    std::unique_ptr<Pipeline> pipeline(std::shared_ptr<LlmBackend> backend, PipelineConfig cfg = {}) {
        cfg.n_l1_candidates = 12;
        cfg.theta = 0.7;
        return std::make_unique<Pipeline>(cfg, tasr::testing::default_taxonomy(), tasr::testing::mock_embedder(),
                                          std::make_shared<LlmGateway>(std::move(backend)), corpus);
    }
};

}  // namespace

TEST(Resolve, SubstitutesBoundVariables) {
    auto s2 = make_subquery(2, "?Database", "developed_by", "?Company", kDatabase, kCompany);
    BindingTable table;
    table.insert("?Database", "MySQL database");
    auto r = resolve(s2, table);
    EXPECT_EQ(r.head, Slot::bound("MySQL database"));
    EXPECT_EQ(r.tail, Slot::latent("?Company"));
    EXPECT_EQ(r.head_type, kDatabase);
    EXPECT_EQ(r.relation, "developed_by");
    EXPECT_EQ(resolve(s2, BindingTable{}), s2);
}

TEST(Resolve, RenderedQuestions) {
    EXPECT_EQ(render_subquery_question(make_subquery(1, "Science Activity Planner", "uses", "?Database")),
              "Science Activity Planner uses ?Database. What is ?Database?");
    EXPECT_EQ(render_subquery_question(make_subquery(2, "MySQL database", "developed_by", "?Company")),
              "MySQL database developed by ?Company. What is ?Company?");
    EXPECT_EQ(render_subquery_question(make_subquery(3, "MySQL AB", "based_in", "Sweden")),
              "Is it true that MySQL AB based in Sweden? Answer yes or no.");
}

TEST(Bind, AddsSingleLatent) {
    BindingTable table;
    auto b = tasr::bind(make_subquery(1, "Science Activity Planner", "uses", "?Database"), " MySQL database ", table);
    ASSERT_TRUE(b);
    EXPECT_EQ(b->first, "?Database");
    EXPECT_EQ(*table.find("?Database"), "MySQL database");
}

TEST(Bind, VerificationHopLeavesTableUnchanged) {
    BindingTable table;
    table.insert("?Company", "MySQL AB");
    auto b = tasr::bind(make_subquery(3, "MySQL AB", "based_in", "Sweden"), "yes", table);
    EXPECT_FALSE(b);
    EXPECT_EQ(table.size(), 1u);
}

TEST(Bind, TwoLatentsAreAmbiguous) {
    BindingTable table;
    try {
        tasr::bind(make_subquery(1, "?A", "rel", "?B"), "x", table);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::AmbiguousBinding);
    }
    EXPECT_TRUE(table.empty());
}

TEST(Bind, EmptyAnswerIsRejected) {
    BindingTable table;
    try {
        tasr::bind(make_subquery(1, "A", "rel", "?B"), "  ", table);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyAnswer);
    }
}

TEST(AnswerSubquery, PromptCarriesBindingsAndDocuments) {
    auto mock = std::make_shared<ScriptedMock>();
    mock->add(RoleTag::Answer, "Step: MySQL database developed by ?Company.", json{{"answer", "  MySQL AB "}});
    auto rec = std::make_shared<RecordingBackend>(mock);
    LlmGateway gw(rec);
    Document d{"doc6", "MySQL", "MySQL AB developed MySQL.", {}, {}};
    std::vector<const Document*> docs{&d};
    BindingTable table;
    table.insert("?Database", "MySQL database");
    auto answer =
        answer_subquery(make_subquery(2, "MySQL database", "developed_by", "?Company"), docs, table, gw);
    EXPECT_EQ(answer, "MySQL AB");
    auto prompt = rec->requests().at(0).user_prompt;
    EXPECT_NE(prompt.find("?Database = MySQL database"), std::string::npos);
    EXPECT_NE(prompt.find("[1] MySQL\nMySQL AB developed MySQL."), std::string::npos);
    EXPECT_THROW(answer_subquery(make_subquery(1, "a", "r", "?B"), {}, table, gw), Error);
}

TEST(Pipeline, GoldenRunningExample) {
    std::shared_ptr<RecordingBackend> rec;
    auto pipe = toy_pipeline(&rec);
    auto result = pipe->run_query(kRunningQuestion, "q1");
    const auto& trace = result.trace;
    EXPECT_EQ(result.answer, "MySQL AB");
    ASSERT_EQ(trace.hops.size(), 2u);

    const auto& h1 = trace.hops[0];
    EXPECT_EQ(h1.selected, (std::vector<std::string>{"doc1"}));
    EXPECT_FALSE(h1.fallback);
    bool doc3_seen = false;
    for (const auto& s : h1.scores) {
        if (s.doc_id == "doc3") {
            doc3_seen = true;
            EXPECT_LT(s.score, trace.config.theta);
        }
    }
    EXPECT_TRUE(doc3_seen);
    EXPECT_EQ(h1.binding, (std::pair<std::string, std::string>{"?Database", "MySQL database"}));

    const auto& h2 = trace.hops[1];
    EXPECT_EQ(h2.resolved.head, Slot::bound("MySQL database"));
    EXPECT_EQ(h2.selected, (std::vector<std::string>{"doc6"}));
    EXPECT_EQ(h2.binding, (std::pair<std::string, std::string>{"?Company", "MySQL AB"}));
    EXPECT_EQ(trace.final_bindings.size(), 2u);
    EXPECT_FALSE(trace.error);

    // each pool document is extracted once for the query
    EXPECT_EQ(rec->count(RoleTag::Extract), trace.pool.size());
    EXPECT_EQ(rec->count(RoleTag::Decompose), 1u);
    EXPECT_EQ(rec->count(RoleTag::Answer), 2u);
}

TEST(Pipeline, GoldenHopScoresMatchOracle) {
    auto pipe = toy_pipeline();
    auto result = pipe->run_query(kRunningQuestion, "q1");
    auto docs = documents_from_trace(result.trace);
    tasr::testing::OracleVectors vecs;
    for (const auto& hop : result.trace.hops) {
        auto want = tasr::testing::oracle_filter_and_rank(docs, hop.scored_with, result.trace.config, vecs);
        ASSERT_EQ(want.ranked.size(), hop.scores.size());
        for (std::size_t i = 0; i < hop.scores.size(); ++i) {
            EXPECT_EQ(hop.scores[i].doc_id, want.ranked[i].doc_id);
            EXPECT_NEAR(hop.scores[i].score, want.ranked[i].score, 1e-9);
        }
        EXPECT_EQ(hop.selected, want.selected);
    }
}

TEST(Pipeline, TraceSerializes) {
    auto pipe = toy_pipeline();
    auto result = pipe->run_query(kRunningQuestion, "q1");
    auto j = to_json(result.trace);
    EXPECT_EQ(j.at("id"), "q1");
    EXPECT_EQ(j["final_answer"], "MySQL AB");
    EXPECT_EQ(j["hops"].size(), 2u);
    EXPECT_EQ(j.dump(), to_json(pipe->run_query(kRunningQuestion, "q1").trace).dump());
}

TEST(Pipeline, ChainScopeForcesCurrentHop) {
    PipelineConfig cfg;
    cfg.hop_scope = HopScope::Chain;
    auto pipe = toy_pipeline(nullptr, cfg);
    auto result = pipe->run_query(kRunningQuestion, "q1");
    ASSERT_EQ(result.trace.hops.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& hop = result.trace.hops[i];
        EXPECT_EQ(hop.scored_with.size(), 2u);
        EXPECT_EQ(hop.forced, std::optional<std::size_t>(i));
        for (const auto& s : hop.scores) EXPECT_EQ(s.top_set.front(), i + 1);
    }
    EXPECT_EQ(result.answer, "MySQL AB");
}

TEST(Pipeline, ThreeHopChainGrowsTableByOne) {
    ChainFixture fx;
    auto pipe = fx.pipeline(fx.mock);
    auto result = pipe->run_query(fx.question, "chain");
    EXPECT_EQ(result.answer, "Norland");
    const auto& hops = result.trace.hops;
    ASSERT_EQ(hops.size(), 3u);
    const std::vector<std::string> expect_doc{"c1", "c2", "c3"};
    auto docs = documents_from_trace(result.trace);
    tasr::testing::OracleVectors vecs;
    for (std::size_t i = 0; i < 3; ++i) {
        ASSERT_TRUE(hops[i].binding);
        EXPECT_EQ(hops[i].selected, (std::vector<std::string>{expect_doc[i]}));
        auto want = tasr::testing::oracle_filter_and_rank(docs, hops[i].scored_with, result.trace.config, vecs);
        EXPECT_EQ(hops[i].selected, want.selected);
        for (std::size_t k = 0; k < want.ranked.size(); ++k) {
            EXPECT_NEAR(hops[i].scores[k].score, want.ranked[k].score, 1e-9);
        }
    }
    EXPECT_EQ(result.trace.final_bindings.entries(),
              (std::vector<std::pair<std::string, std::string>>{
                  {"?Founder", "Ada Quill"}, {"?City", "Vemford"}, {"?Country", "Norland"}}));
}

TEST(Pipeline, FailureMidChainCarriesTrace) {
    ChainFixture fx(/*broken_second_answer=*/true);
    auto pipe = fx.pipeline(fx.mock);
    try {
        pipe->run_query(fx.question, "broken");
        FAIL();
    } catch (const QueryAborted& e) {
        EXPECT_EQ(e.cause(), ErrorKind::LlmProtocolError);
        ASSERT_EQ(e.trace().hops.size(), 2u);
        EXPECT_TRUE(e.trace().hops[0].binding);
        EXPECT_FALSE(e.trace().hops[1].binding);
        EXPECT_TRUE(e.trace().error);
        EXPECT_EQ(e.trace().final_bindings.size(), 1u);
    }
}

TEST(Pipeline, PreExtractIsQueryAgnostic) {
    auto mock = tasr::testing::toy_mock();
    auto rec = std::make_shared<RecordingBackend>(mock);
    auto corpus = load_corpus(tasr::testing::source_path("data/toy/corpus.jsonl"));
    Pipeline pipe(PipelineConfig{}, tasr::testing::default_taxonomy(), tasr::testing::mock_embedder(),
                  std::make_shared<LlmGateway>(rec), corpus, PipelineOptions{.pre_extract = true, .extract_parallel = 1});
    EXPECT_EQ(rec->count(RoleTag::Extract), corpus.size());
    for (const auto& r : rec->requests()) EXPECT_NE(r.user_prompt.find("Question: (none)"), std::string::npos);
    auto result = pipe.run_query(kRunningQuestion, "q1");
    EXPECT_EQ(result.answer, "MySQL AB");
    EXPECT_EQ(rec->count(RoleTag::Extract), corpus.size());
}

TEST(Pipeline, ParallelExtractionMatchesSerial) {
    auto corpus = load_corpus(tasr::testing::source_path("data/toy/corpus.jsonl"));
    Pipeline serial(PipelineConfig{}, tasr::testing::default_taxonomy(), tasr::testing::mock_embedder(),
                    std::make_shared<LlmGateway>(tasr::testing::toy_mock()), corpus);
    Pipeline parallel(PipelineConfig{}, tasr::testing::default_taxonomy(), tasr::testing::mock_embedder(),
                      std::make_shared<LlmGateway>(tasr::testing::toy_mock()), corpus,
                      PipelineOptions{.pre_extract = false, .extract_parallel = 4});
    auto a = to_json(serial.run_query(kRunningQuestion, "q1").trace);
    auto b = to_json(parallel.run_query(kRunningQuestion, "q1").trace);
    EXPECT_EQ(a.dump(), b.dump());
}
