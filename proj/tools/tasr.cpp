#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tasr/config.hpp"
#include "tasr/embedding.hpp"
#include "tasr/error.hpp"
#include "tasr/eval.hpp"
#include "tasr/llm.hpp"
#include "tasr/matcher.hpp"
#include "tasr/reasoner.hpp"
#include "tasr/taxonomy.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

struct BackendArgs {
    std::string llm;
    std::string model;
    std::string api_key;
    std::string embed;
    std::string embed_cache;
};

void add_backend_options(CLI::App* cmd, BackendArgs& args) {
    cmd->add_option("--llm", args.llm, "Chat endpoint URL or mock:<script.json> (env TASR_LLM_URL)");
    cmd->add_option("--llm-model", args.model, "Model name (env TASR_LLM_MODEL)");
    cmd->add_option("--api-key", args.api_key, "Bearer key (env TASR_LLM_API_KEY)");
    cmd->add_option("--embed", args.embed, "Embedding endpoint URL or mock:[dim] (env TASR_EMBED_URL)");
    cmd->add_option("--embed-cache", args.embed_cache, "JSONL embedding cache to load and update");
}

void resolve_backend_env(BackendArgs& args) {
    if (args.llm.empty()) args.llm = env_or("TASR_LLM_URL", "");
    if (args.model.empty()) args.model = env_or("TASR_LLM_MODEL", "");
    if (args.api_key.empty()) args.api_key = env_or("TASR_LLM_API_KEY", "");
    if (args.embed.empty()) args.embed = env_or("TASR_EMBED_URL", "mock:");
}

std::shared_ptr<tasr::Embedder> make_embedder(const BackendArgs& args) {
    auto embedder = std::make_shared<tasr::Embedder>(tasr::make_encoder(args.embed));
    if (!args.embed_cache.empty() && fs::exists(args.embed_cache)) embedder->load_cache(args.embed_cache);
    return embedder;
}

std::shared_ptr<tasr::LlmGateway> make_gateway(const BackendArgs& args) {
    if (args.llm.empty()) {
        throw tasr::Error(tasr::ErrorKind::LlmUnavailable, "no LLM endpoint: pass --llm or set TASR_LLM_URL");
    }
    return std::make_shared<tasr::LlmGateway>(tasr::make_llm_backend(args.llm, args.model, args.api_key));
}

struct ConfigArgs {
    std::string file;
    std::optional<std::size_t> k0;
    std::optional<double> theta;
    std::optional<double> alpha;
    std::optional<double> gamma;
    std::optional<std::size_t> top_t;
    std::string hop_scope;
    std::string typing_mode;
    std::vector<std::string> sets;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("--config", args.file, "Config file (JSON object or key=value lines)");
    cmd->add_option("--k0", args.k0, "Dense retrieval pool size");
    cmd->add_option("--theta", args.theta, "Document score threshold");
    cmd->add_option("--alpha", args.alpha, "Structural weight in the triple score");
    cmd->add_option("--gamma", args.gamma, "Max weight in document aggregation");
    cmd->add_option("--top-t", args.top_t, "Sub-queries averaged in document aggregation");
    cmd->add_option("--hop-scope", args.hop_scope, "current|chain")->check(CLI::IsMember({"current", "chain"}));
    cmd->add_option("--typing-mode", args.typing_mode, "retrieval|pure")->check(CLI::IsMember({"retrieval", "pure"}));
    cmd->add_option("--set", args.sets, "Extra key=value override, repeatable");
}

tasr::PipelineConfig build_config(const ConfigArgs& args) {
    tasr::PipelineConfig cfg = args.file.empty() ? tasr::PipelineConfig{} : tasr::load_config_file(args.file);
    if (args.k0) cfg.k0 = *args.k0;
    if (args.theta) cfg.theta = *args.theta;
    if (args.alpha) cfg.alpha = *args.alpha;
    if (args.gamma) cfg.gamma = *args.gamma;
    if (args.top_t) cfg.top_t = *args.top_t;
    if (!args.hop_scope.empty()) tasr::apply_config_value(cfg, "hop_scope", args.hop_scope);
    if (!args.typing_mode.empty()) tasr::apply_config_value(cfg, "typing_mode", args.typing_mode);
    for (const auto& s : args.sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos) throw tasr::Error(tasr::ErrorKind::ParseError, "--set expects key=value: " + s);
        tasr::apply_config_value(cfg, tasr::trim(s.substr(0, eq)), tasr::trim(s.substr(eq + 1)));
    }
    return tasr::validate_config(cfg);
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw tasr::Error(tasr::ErrorKind::ParseError, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw tasr::Error(tasr::ErrorKind::ParseError, path + ": " + e.what());
    }
}

// Accepts {"l1": .., "l2": ..} or "L1/L2".
tasr::TaxonomyLabel parse_label(const json& j) {
    if (j.is_string()) {
        auto s = j.get<std::string>();
        auto slash = s.find('/');
        if (slash == std::string::npos) throw tasr::Error(tasr::ErrorKind::ParseError, "label must be L1/L2: " + s);
        return {s.substr(0, slash), s.substr(slash + 1)};
    }
    return {j.at("l1").get<std::string>(), j.at("l2").get<std::string>()};
}

// ---------------------------------------------------------------------------

struct RunArgs {
    std::string corpus;
    std::string dataset;
    std::string taxonomy = "taxonomy/default.json";
    std::string out_dir = ".";
    std::string trace_dir;
    std::size_t parallel = 1;
    std::size_t extract_parallel = 1;
    bool pre_extract = false;
};

int cmd_run(const RunArgs& args, ConfigArgs cfg_args, BackendArgs backend) {
    resolve_backend_env(backend);
    auto cfg = build_config(cfg_args);
    auto taxonomy = std::make_shared<const tasr::Taxonomy>(tasr::Taxonomy::load(args.taxonomy));
    auto corpus = tasr::load_corpus(args.corpus);
    auto dataset = tasr::load_dataset(args.dataset);
    auto embedder = make_embedder(backend);
    auto gateway = make_gateway(backend);

    tasr::PipelineOptions options;
    options.pre_extract = args.pre_extract;
    options.extract_parallel = std::max<std::size_t>(1, args.extract_parallel);
    tasr::Pipeline pipeline(cfg, taxonomy, embedder, gateway, std::move(corpus), options);

    tasr::BenchmarkOptions bench;
    bench.parallel = std::max<std::size_t>(1, args.parallel);
    if (!args.trace_dir.empty()) bench.trace_dir = fs::path(args.trace_dir);
    auto run = tasr::run_benchmark(dataset, pipeline, bench);

    fs::create_directories(args.out_dir);
    tasr::write_predictions(fs::path(args.out_dir) / "predictions.jsonl", run.predictions);
    tasr::write_json(fs::path(args.out_dir) / "report.json", tasr::to_json(run.report));
    if (!backend.embed_cache.empty()) embedder->save_cache(backend.embed_cache);

    std::cerr << "examples=" << run.report.per_example.size() << " em=" << run.report.em_avg
              << " f1=" << run.report.f1_avg << " errors=" << run.report.error_count
              << " fallback_hops=" << run.report.fallback_count << '\n';
    return 0;
}

int cmd_eval(const std::string& predictions, const std::string& dataset_path, const std::string& out) {
    auto dataset = tasr::load_dataset(dataset_path);
    auto preds = tasr::load_predictions(predictions);
    auto report = tasr::score_predictions(dataset, preds);
    auto j = tasr::to_json(report);
    if (!out.empty()) tasr::write_json(out, j);
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_type_entity(const std::string& taxonomy_path, const std::string& text, const std::string& context,
                    ConfigArgs cfg_args, BackendArgs backend) {
    resolve_backend_env(backend);
    auto cfg = build_config(cfg_args);
    auto taxonomy = std::make_shared<const tasr::Taxonomy>(tasr::Taxonomy::load(taxonomy_path));

    tasr::TypingOutcome outcome;
    if (auto ruled = tasr::rule_type_entity(tasr::Entity(text), *taxonomy)) {
        outcome = {*ruled, tasr::TypingSource::Rule, ""};
    } else {
        auto embedder = make_embedder(backend);
        std::shared_ptr<const tasr::TypeIndex> index;
        if (cfg.typing_mode == tasr::TypingMode::Retrieval) {
            index = std::make_shared<const tasr::TypeIndex>(tasr::TypeIndex::build(*taxonomy, *embedder));
        }
        tasr::EntityTyper typer(taxonomy, index, embedder, make_gateway(backend), cfg);
        outcome = typer.type_entity(text, context.empty() ? std::nullopt : std::optional<std::string>(context));
    }
    json j = {{"text", tasr::trim(text)},
              {"l1", outcome.label.l1},
              {"l2", outcome.label.l2},
              {"source", std::string(tasr::to_string(outcome.source))}};
    if (!outcome.note.empty()) j["note"] = outcome.note;
    std::cout << j.dump(2) << '\n';
    return 0;
}

tasr::SubQuery parse_cli_subquery(const json& j, std::size_t index) {
    auto slot = [](const std::string& s) {
        auto t = tasr::trim(s);
        return !t.empty() && t.front() == '?' ? tasr::Slot::latent(t) : tasr::Slot::bound(t);
    };
    tasr::SubQuery sq;
    sq.index = index;
    sq.head = slot(j.at("head").get<std::string>());
    sq.relation = tasr::trim(j.at("relation").get<std::string>());
    sq.tail = slot(j.at("tail").get<std::string>());
    sq.head_type = parse_label(j.at("head_type"));
    sq.tail_type = parse_label(j.at("tail_type"));
    return sq;
}

tasr::Document parse_cli_document(const json& j, std::size_t index) {
    tasr::Document d;
    d.id = j.value("id", "doc" + std::to_string(index));
    for (const auto& t : j.at("triples")) {
        d.triples.emplace_back(tasr::Entity(t.at("head").get<std::string>()), t.at("relation").get<std::string>(),
                               tasr::Entity(t.at("tail").get<std::string>()), d.id);
        d.typed_triples.push_back(
            {parse_label(t.at("head_type")), d.triples.back().relation, parse_label(t.at("tail_type"))});
    }
    return d;
}

int cmd_match(const std::string& subquery_path, const std::string& doc_path, ConfigArgs cfg_args,
              BackendArgs backend) {
    resolve_backend_env(backend);
    auto cfg = build_config(cfg_args);
    auto embedder = make_embedder(backend);

    json sq_json = read_json_file(subquery_path);
    if (sq_json.is_object() && sq_json.contains("sub_queries")) sq_json = sq_json["sub_queries"];
    if (!sq_json.is_array()) sq_json = json::array({sq_json});
    std::vector<tasr::SubQuery> sub_queries;
    for (std::size_t i = 0; i < sq_json.size(); ++i) sub_queries.push_back(parse_cli_subquery(sq_json[i], i + 1));

    json doc_json = read_json_file(doc_path);
    if (doc_json.is_object() && !doc_json.contains("triples")) doc_json = doc_json.at("documents");
    if (!doc_json.is_array()) doc_json = json::array({doc_json});
    std::vector<tasr::Document> docs;
    for (std::size_t i = 0; i < doc_json.size(); ++i) docs.push_back(parse_cli_document(doc_json[i], i + 1));

    json out_docs = json::array();
    for (const auto& d : docs) {
        json per_query = json::array();
        for (const auto& sq : sub_queries) {
            json rows = json::array();
            auto qv = tasr::encode_subquery(sq, *embedder);
            for (std::size_t k = 0; k < d.triples.size(); ++k) {
                auto cos = tasr::component_cosines(qv, tasr::encode_triple_components(d.triples[k], *embedder));
                auto m = tasr::score_triple(sq, d.triples[k], d.typed_triples[k], cfg, *embedder);
                rows.push_back({{"triple", k},
                                {"head_type", tasr::score_type_pair(*sq.head_type, d.typed_triples[k].head_type, cfg)},
                                {"tail_type", tasr::score_type_pair(*sq.tail_type, d.typed_triples[k].tail_type, cfg)},
                                {"s_struct", m.s_struct},
                                {"cos", {{"head", cos.head}, {"relation", cos.relation}, {"tail", cos.tail}}},
                                {"s_sem", m.s_sem},
                                {"s_triple", m.s_triple}});
            }
            auto best = tasr::best_triple_score(sq, d, cfg, *embedder);
            per_query.push_back({{"sub_query", sq.str()},
                                 {"triples", std::move(rows)},
                                 {"best_triple", best.doc_triple_index ? json(*best.doc_triple_index) : json(nullptr)},
                                 {"best", best.s_triple}});
        }
        auto scored = tasr::score_document(sub_queries, d, cfg, *embedder);
        out_docs.push_back({{"id", d.id},
                            {"sub_queries", std::move(per_query)},
                            {"top_set", scored.top_set},
                            {"score", scored.score},
                            {"passes_threshold", scored.score >= cfg.theta}});
    }
    auto ranked = tasr::filter_and_rank(docs, sub_queries, cfg, *embedder);
    json selected = json::array();
    for (const auto& s : ranked.selected) selected.push_back(s.doc_id);
    json result = {{"documents", std::move(out_docs)}, {"selected", std::move(selected)}, {"fallback", ranked.fallback}};
    std::cout << result.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Taxonomy-guided structured retrieval and multi-hop answering"};
    app.require_subcommand(1);

    RunArgs run_args;
    ConfigArgs run_cfg;
    BackendArgs run_backend;
    auto* run = app.add_subcommand("run", "Answer every question of a dataset and score the predictions");
    run->add_option("--corpus", run_args.corpus, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    run->add_option("--dataset", run_args.dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
    run->add_option("--taxonomy", run_args.taxonomy, "Taxonomy JSON")->check(CLI::ExistingFile);
    run->add_option("--out-dir", run_args.out_dir, "Directory for predictions.jsonl and report.json");
    run->add_option("--trace-dir", run_args.trace_dir, "Write one trace JSON per question here");
    run->add_option("--parallel", run_args.parallel, "Questions answered concurrently");
    run->add_option("--extract-parallel", run_args.extract_parallel, "Concurrent extraction calls per question");
    run->add_flag("--pre-extract", run_args.pre_extract, "Extract triples once per document, without the question");
    add_config_options(run, run_cfg);
    add_backend_options(run, run_backend);

    std::string eval_predictions, eval_dataset, eval_out = "report.json";
    auto* eval = app.add_subcommand("eval", "Score an existing predictions file");
    eval->add_option("--predictions", eval_predictions, "Predictions JSONL")->required()->check(CLI::ExistingFile);
    eval->add_option("--dataset", eval_dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
    eval->add_option("--out", eval_out, "Report path (empty to skip writing)");

    std::string te_taxonomy = "taxonomy/default.json", te_text, te_context;
    ConfigArgs te_cfg;
    BackendArgs te_backend;
    auto* type_entity = app.add_subcommand("type-entity", "Assign a taxonomy label to one entity");
    type_entity->add_option("--taxonomy", te_taxonomy, "Taxonomy JSON")->check(CLI::ExistingFile);
    type_entity->add_option("--text", te_text, "Entity surface text")->required();
    type_entity->add_option("--context", te_context, "Optional context passed to type selection");
    add_config_options(type_entity, te_cfg);
    add_backend_options(type_entity, te_backend);

    std::string m_subquery, m_docs;
    ConfigArgs m_cfg;
    BackendArgs m_backend;
    auto* match = app.add_subcommand("match", "Show the score decomposition for typed sub-queries and documents");
    match->add_option("--subquery", m_subquery, "Typed sub-query JSON (object or array)")->required()->check(CLI::ExistingFile);
    match->add_option("--doc-triples", m_docs, "Typed document triples JSON")->required()->check(CLI::ExistingFile);
    add_config_options(match, m_cfg);
    add_backend_options(match, m_backend);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(run_args, run_cfg, run_backend);
        if (eval->parsed()) return cmd_eval(eval_predictions, eval_dataset, eval_out);
        if (type_entity->parsed()) return cmd_type_entity(te_taxonomy, te_text, te_context, te_cfg, te_backend);
        if (match->parsed()) return cmd_match(m_subquery, m_docs, m_cfg, m_backend);
    } catch (const tasr::Error& e) {
        std::cerr << "error [" << tasr::to_string(e.kind()) << "]: " << e.what() << '\n';
        return e.kind() == tasr::ErrorKind::ParseError || e.kind() == tasr::ErrorKind::WeightSumViolation ||
                       e.kind() == tasr::ErrorKind::RangeViolation || e.kind() == tasr::ErrorKind::DatasetParseError
                   ? 2
                   : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
