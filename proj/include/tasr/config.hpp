#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace tasr {

// Which sub-queries feed document aggregation at each hop.
//   Current: only the resolved sub-query of the hop being executed.
//   Chain:   every sub-query with the bindings known so far applied; the
//            current one is always a member of the top-t set.
enum class HopScope { Current, Chain };

// Retrieval: embedding-pruned candidates, LLM keeps l1_keep, then picks a pair.
// Pure: LLM picks one L1 from the whole taxonomy, then one of its children.
enum class TypingMode { Retrieval, Pure };

struct PipelineConfig {
    std::size_t k0 = 10;
    double theta = 0.3;
    double alpha = 0.5;
    double gamma = 0.5;
    std::size_t top_t = 3;

    double w1 = 0.5;  // L1 indicator weight
    double w2 = 0.5;  // L2 indicator weight
    double wh = 0.5;  // head slot weight
    double wt = 0.5;  // tail slot weight
    double lh = 0.3;  // semantic head weight
    double lr = 0.3;  // semantic relation weight
    double lt = 0.4;  // semantic tail weight

    std::size_t n_l1_candidates = 10;
    std::size_t l1_keep = 3;
    std::size_t m_l2_candidates = 20;

    HopScope hop_scope = HopScope::Current;
    TypingMode typing_mode = TypingMode::Retrieval;
    bool typing_context = false;  // pass title + evidence sentence to type selection
};

inline constexpr double kWeightSumTolerance = 1e-9;
inline constexpr std::size_t kMaxSubQueries = 8;

// Returns cfg unchanged, or throws Error(WeightSumViolation | RangeViolation)
// naming the offending group or field.
PipelineConfig validate_config(const PipelineConfig& cfg);

// Applies one "key=value" override. Unknown keys raise Error(ParseError).
void apply_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value);

// Reads a JSON object or flat key=value lines (# comments allowed) over the
// defaults. Does not validate; callers validate after CLI overrides.
PipelineConfig load_config_file(const std::filesystem::path& path);
PipelineConfig config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PipelineConfig& cfg);

std::string_view to_string(HopScope scope);
std::string_view to_string(TypingMode mode);

}  // namespace tasr
