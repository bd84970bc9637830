#include "tasr/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "tasr/error.hpp"

namespace tasr {

namespace {

template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, ErrorKind kind, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw Error(kind, "cannot open " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            fn(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw Error(kind, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(kind, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

std::vector<std::string> tokens(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{normalize_answer(s)};
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

double f1_single(const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
    if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
    std::unordered_map<std::string, int> counts;
    for (const auto& t : gold) ++counts[t];
    int same = 0;
    for (const auto& t : pred) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++same;
        }
    }
    if (same == 0) return 0.0;
    double precision = static_cast<double>(same) / static_cast<double>(pred.size());
    double recall = static_cast<double>(same) / static_cast<double>(gold.size());
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

std::vector<QaExample> load_dataset(const std::filesystem::path& path) {
    std::vector<QaExample> out;
    std::set<std::string> ids;
    for_each_jsonl(path, ErrorKind::DatasetParseError, [&](const nlohmann::json& j) {
        QaExample ex;
        ex.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
        ex.question = j.at("question").get<std::string>();
        ex.answers = j.at("answers").get<std::vector<std::string>>();
        if (ex.answers.empty()) throw Error(ErrorKind::DatasetParseError, "example " + ex.id + " has no answers");
        if (trim(ex.question).empty()) throw Error(ErrorKind::DatasetParseError, "example " + ex.id + " has no question");
        if (!ids.insert(ex.id).second) throw Error(ErrorKind::DatasetParseError, "duplicate id " + ex.id);
        out.push_back(std::move(ex));
    });
    if (out.empty()) throw Error(ErrorKind::DatasetParseError, path.string() + " contains no examples");
    return out;
}

std::vector<Document> load_corpus(const std::filesystem::path& path) {
    std::vector<Document> out;
    std::set<std::string> ids;
    for_each_jsonl(path, ErrorKind::ParseError, [&](const nlohmann::json& j) {
        Document d;
        d.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
        d.title = j.value("title", "");
        d.text = j.at("text").get<std::string>();
        if (!ids.insert(d.id).second) throw Error(ErrorKind::ParseError, "duplicate document id " + d.id);
        out.push_back(std::move(d));
    });
    if (out.empty()) throw Error(ErrorKind::ParseError, path.string() + " contains no documents");
    return out;
}

std::string normalize_answer(std::string_view s) {
    static const std::string_view punctuation = R"(!"#$%&'()*+,-./:;<=>?@[\]^_`{|}~)";
    std::string cleaned;
    cleaned.reserve(s.size());
    for (char c : s) {
        if (punctuation.find(c) != std::string_view::npos) continue;
        cleaned.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    std::istringstream in(cleaned);
    std::string tok, out;
    while (in >> tok) {
        if (tok == "a" || tok == "an" || tok == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += tok;
    }
    return out;
}

int exact_match(std::string_view prediction, std::span<const std::string> golds) {
    const std::string p = normalize_answer(prediction);
    for (const auto& g : golds) {
        if (normalize_answer(g) == p) return 1;
    }
    return 0;
}

double token_f1(std::string_view prediction, std::span<const std::string> golds) {
    const auto p = tokens(prediction);
    double best = 0.0;
    for (const auto& g : golds) best = std::max(best, f1_single(p, tokens(g)));
    return best;
}

EvalReport score_predictions(std::span<const QaExample> dataset, std::span<const Prediction> predictions,
                             const std::map<std::string, std::size_t>& fallback_hops) {
    std::unordered_map<std::string, const Prediction*> by_id;
    for (const auto& p : predictions) by_id.emplace(p.id, &p);

    EvalReport report;
    double em_sum = 0.0;
    double f1_sum = 0.0;
    for (const auto& ex : dataset) {
        ExampleScore row;
        row.id = ex.id;
        auto it = by_id.find(ex.id);
        if (it == by_id.end() || !it->second->answer) {
            row.errored = true;
            ++report.error_count;
        } else {
            row.em = exact_match(*it->second->answer, ex.answers);
            row.f1 = token_f1(*it->second->answer, ex.answers);
        }
        if (auto f = fallback_hops.find(ex.id); f != fallback_hops.end()) row.fallback_hops = f->second;
        report.fallback_count += row.fallback_hops;
        em_sum += row.em;
        f1_sum += row.f1;
        report.per_example.push_back(std::move(row));
    }
    if (!dataset.empty()) {
        report.em_avg = em_sum / static_cast<double>(dataset.size());
        report.f1_avg = f1_sum / static_cast<double>(dataset.size());
    }
    return report;
}

nlohmann::json to_json(const EvalReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.per_example) {
        rows.push_back({{"id", r.id}, {"em", r.em}, {"f1", r.f1}, {"fallback_hops", r.fallback_hops},
                        {"errored", r.errored}});
    }
    return {{"count", report.per_example.size()},
            {"em_avg", report.em_avg},
            {"f1_avg", report.f1_avg},
            {"fallback_count", report.fallback_count},
            {"error_count", report.error_count},
            {"per_example", std::move(rows)}};
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
    std::vector<Prediction> out;
    for_each_jsonl(path, ErrorKind::DatasetParseError, [&](const nlohmann::json& j) {
        Prediction p;
        p.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
        if (j.contains("answer") && j["answer"].is_string()) p.answer = j["answer"].get<std::string>();
        out.push_back(std::move(p));
    });
    return out;
}

void write_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::ParseError, "cannot write " + path.string());
    for (const auto& p : predictions) {
        nlohmann::json j = {{"id", p.id}, {"answer", p.answer ? nlohmann::json(*p.answer) : nlohmann::json(nullptr)}};
        out << j.dump() << '\n';
    }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::ParseError, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

std::string trace_file_name(std::string_view question_id) {
    std::string name;
    for (char c : question_id) {
        name.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_');
    }
    if (name.empty() || name.front() == '.') name.insert(name.begin(), '_');
    return name + ".json";
}

BenchmarkRun run_benchmark(std::span<const QaExample> dataset, Pipeline& pipeline,
                           const BenchmarkOptions& options) {
    if (dataset.empty()) throw Error(ErrorKind::DatasetParseError, "dataset is empty");
    if (options.trace_dir) std::filesystem::create_directories(*options.trace_dir);

    std::vector<Prediction> predictions(dataset.size());
    std::vector<std::size_t> fallbacks(dataset.size(), 0);

    auto run_one = [&](std::size_t i) {
        const auto& ex = dataset[i];
        predictions[i].id = ex.id;
        ReasoningTrace trace;
        try {
            auto result = pipeline.run_query(ex.question, ex.id);
            predictions[i].answer = result.answer;
            trace = std::move(result.trace);
        } catch (const QueryAborted& e) {
            trace = e.trace();
        }
        for (const auto& h : trace.hops) fallbacks[i] += h.fallback ? 1 : 0;
        if (options.trace_dir) write_json(*options.trace_dir / trace_file_name(ex.id), to_json(trace));
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.parallel, dataset.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < dataset.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < workers; ++w) {
            threads.emplace_back([&] {
                for (std::size_t i = next++; i < dataset.size(); i = next++) run_one(i);
            });
        }
        for (auto& t : threads) t.join();
    }

    std::map<std::string, std::size_t> fallback_hops;
    for (std::size_t i = 0; i < dataset.size(); ++i) fallback_hops[dataset[i].id] = fallbacks[i];
    BenchmarkRun run;
    run.report = score_predictions(dataset, predictions, fallback_hops);
    run.predictions = std::move(predictions);
    return run;
}

}  // namespace tasr
