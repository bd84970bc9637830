#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tasr/reasoner.hpp"
#include "tasr/types.hpp"

namespace tasr {

struct QaExample {
    std::string id;
    std::string question;
    std::vector<std::string> answers;  // at least one gold alias
};

// {"id", "question", "answers": [...]} per line. Throws Error(DatasetParseError)
// for malformed lines, missing answers, duplicate ids, or an empty file.
std::vector<QaExample> load_dataset(const std::filesystem::path& path);

// {"id", "title", "text"} per line. Throws Error(ParseError).
std::vector<Document> load_corpus(const std::filesystem::path& path);

// Lowercase, strip ASCII punctuation, drop the articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view s);

int exact_match(std::string_view prediction, std::span<const std::string> golds);

// Max over golds of token-level F1 on normalized tokens.
double token_f1(std::string_view prediction, std::span<const std::string> golds);

struct Prediction {
    std::string id;
    std::optional<std::string> answer;  // empty when the query errored
};

struct ExampleScore {
    std::string id;
    int em = 0;
    double f1 = 0.0;
    std::size_t fallback_hops = 0;
    bool errored = false;
};

struct EvalReport {
    std::vector<ExampleScore> per_example;
    double em_avg = 0.0;
    double f1_avg = 0.0;
    std::size_t fallback_count = 0;
    std::size_t error_count = 0;
};

// Scores predictions against the dataset (dataset order). Missing or
// errored predictions count as zeros.
EvalReport score_predictions(std::span<const QaExample> dataset, std::span<const Prediction> predictions,
                             const std::map<std::string, std::size_t>& fallback_hops = {});

nlohmann::json to_json(const EvalReport& report);

std::vector<Prediction> load_predictions(const std::filesystem::path& path);
void write_predictions(const std::filesystem::path& path, std::span<const Prediction> predictions);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

struct BenchmarkOptions {
    std::size_t parallel = 1;
    std::optional<std::filesystem::path> trace_dir;
};

struct BenchmarkRun {
    std::vector<Prediction> predictions;  // dataset order
    EvalReport report;
};

// Runs every example through the pipeline. Failed queries are recorded as
// unanswered; their partial traces are still written.
BenchmarkRun run_benchmark(std::span<const QaExample> dataset, Pipeline& pipeline,
                           const BenchmarkOptions& options = {});

// File-system safe trace name for a question id.
std::string trace_file_name(std::string_view question_id);

}  // namespace tasr
