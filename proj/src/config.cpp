#include "tasr/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tasr/error.hpp"
#include "tasr/types.hpp"

namespace tasr {

namespace {

void check_unit(double v, const char* field) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorKind::RangeViolation, std::string(field) + " must lie in [0,1]");
    }
}

void check_positive(std::size_t v, const char* field) {
    if (v == 0) throw Error(ErrorKind::RangeViolation, std::string(field) + " must be positive");
}

void check_sum(std::initializer_list<double> ws, const char* group) {
    double sum = 0.0;
    for (double w : ws) {
        if (!(w >= 0.0)) {
            throw Error(ErrorKind::RangeViolation,
                        std::string(group) + " weights must be non-negative");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > kWeightSumTolerance) {
        throw Error(ErrorKind::WeightSumViolation,
                    std::string(group) + " weights sum to " + std::to_string(sum) + ", not 1");
    }
}

double parse_double(std::string_view key, std::string_view value) {
    std::string s = trim(value);
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorKind::ParseError,
                    "config key '" + std::string(key) + "' expects a number, got '" + s + "'");
    }
}

std::size_t parse_size(std::string_view key, std::string_view value) {
    std::string s = trim(value);
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(ErrorKind::ParseError, "config key '" + std::string(key) +
                                               "' expects a non-negative integer, got '" + s + "'");
    }
    return v;
}

bool parse_bool(std::string_view key, std::string_view value) {
    std::string s = trim(value);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw Error(ErrorKind::ParseError,
                "config key '" + std::string(key) + "' expects true/false, got '" + s + "'");
}

}  // namespace

PipelineConfig validate_config(const PipelineConfig& cfg) {
    check_positive(cfg.k0, "k0");
    check_positive(cfg.top_t, "top_t");
    check_positive(cfg.n_l1_candidates, "n_l1_candidates");
    check_positive(cfg.l1_keep, "l1_keep");
    check_positive(cfg.m_l2_candidates, "m_l2_candidates");
    check_unit(cfg.theta, "theta");
    check_unit(cfg.alpha, "alpha");
    check_unit(cfg.gamma, "gamma");
    check_sum({cfg.w1, cfg.w2}, "type-level (w1, w2)");
    check_sum({cfg.wh, cfg.wt}, "head/tail (wh, wt)");
    check_sum({cfg.lh, cfg.lr, cfg.lt}, "semantic (lh, lr, lt)");
    return cfg;
}

void apply_config_value(PipelineConfig& cfg, std::string_view key, std::string_view value) {
    if (key == "k0") cfg.k0 = parse_size(key, value);
    else if (key == "theta") cfg.theta = parse_double(key, value);
    else if (key == "alpha") cfg.alpha = parse_double(key, value);
    else if (key == "gamma") cfg.gamma = parse_double(key, value);
    else if (key == "top_t") cfg.top_t = parse_size(key, value);
    else if (key == "w1") cfg.w1 = parse_double(key, value);
    else if (key == "w2") cfg.w2 = parse_double(key, value);
    else if (key == "wh") cfg.wh = parse_double(key, value);
    else if (key == "wt") cfg.wt = parse_double(key, value);
    else if (key == "lh") cfg.lh = parse_double(key, value);
    else if (key == "lr") cfg.lr = parse_double(key, value);
    else if (key == "lt") cfg.lt = parse_double(key, value);
    else if (key == "n_l1_candidates") cfg.n_l1_candidates = parse_size(key, value);
    else if (key == "l1_keep") cfg.l1_keep = parse_size(key, value);
    else if (key == "m_l2_candidates") cfg.m_l2_candidates = parse_size(key, value);
    else if (key == "typing_context") cfg.typing_context = parse_bool(key, value);
    else if (key == "hop_scope") {
        std::string v = trim(value);
        if (v == "current") cfg.hop_scope = HopScope::Current;
        else if (v == "chain") cfg.hop_scope = HopScope::Chain;
        else throw Error(ErrorKind::ParseError, "hop_scope must be current|chain, got '" + v + "'");
    } else if (key == "typing_mode") {
        std::string v = trim(value);
        if (v == "retrieval") cfg.typing_mode = TypingMode::Retrieval;
        else if (v == "pure") cfg.typing_mode = TypingMode::Pure;
        else throw Error(ErrorKind::ParseError, "typing_mode must be retrieval|pure, got '" + v + "'");
    } else {
        throw Error(ErrorKind::ParseError, "unknown config key '" + std::string(key) + "'");
    }
}

PipelineConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorKind::ParseError, "config JSON must be an object");
    PipelineConfig cfg;
    for (const auto& [key, value] : j.items()) {
        std::string text;
        if (value.is_string()) text = value.get<std::string>();
        else if (value.is_boolean()) text = value.get<bool>() ? "true" : "false";
        else if (value.is_number_integer() || value.is_number_unsigned()) text = value.dump();
        else if (value.is_number_float()) {
            // dump() round-trips exactly, which keeps 1/3-style weights summing to 1.
            text = value.dump();
        } else {
            throw Error(ErrorKind::ParseError, "config key '" + key + "' has unsupported type");
        }
        apply_config_value(cfg, key, text);
    }
    return cfg;
}

PipelineConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string content = buf.str();

    std::string head = trim(content);
    if (!head.empty() && head.front() == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(content);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorKind::ParseError, "config " + path.string() + ": " + e.what());
        }
        return config_from_json(j);
    }

    PipelineConfig cfg;
    std::istringstream lines(content);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::ParseError,
                        path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        }
        apply_config_value(cfg, trim(std::string_view(t).substr(0, eq)),
                           std::string_view(t).substr(eq + 1));
    }
    return cfg;
}

nlohmann::json to_json(const PipelineConfig& cfg) {
    return {
        {"k0", cfg.k0},
        {"theta", cfg.theta},
        {"alpha", cfg.alpha},
        {"gamma", cfg.gamma},
        {"top_t", cfg.top_t},
        {"w1", cfg.w1},
        {"w2", cfg.w2},
        {"wh", cfg.wh},
        {"wt", cfg.wt},
        {"lh", cfg.lh},
        {"lr", cfg.lr},
        {"lt", cfg.lt},
        {"n_l1_candidates", cfg.n_l1_candidates},
        {"l1_keep", cfg.l1_keep},
        {"m_l2_candidates", cfg.m_l2_candidates},
        {"hop_scope", std::string(to_string(cfg.hop_scope))},
        {"typing_mode", std::string(to_string(cfg.typing_mode))},
        {"typing_context", cfg.typing_context},
    };
}

std::string_view to_string(HopScope scope) {
    return scope == HopScope::Current ? "current" : "chain";
}

std::string_view to_string(TypingMode mode) {
    return mode == TypingMode::Retrieval ? "retrieval" : "pure";
}

}  // namespace tasr
