#pragma once

// Experiment plumbing: INI configs with typed parameter schemas, record
// sinks writing JSON lines plus a CSV projection, and the run context that
// enforces sample, enumeration and wall-clock budgets.

#include "latflow/stats.hpp"
#include "latflow/types.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#ifndef LATFLOW_VERSION
#define LATFLOW_VERSION "0.0.0"
#endif

namespace latflow {

using json = nlohmann::json;

inline constexpr const char* kRecordSchema = "latflow-records";
inline constexpr int kRecordSchemaVersion = 1;

class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

enum class ParamType { integer, real, text, reals, integers, boolean };

inline const char* to_string(ParamType t) {
    switch (t) {
    case ParamType::integer:
        return "int";
    case ParamType::real:
        return "real";
    case ParamType::text:
        return "string";
    case ParamType::reals:
        return "real list";
    case ParamType::integers:
        return "int list";
    case ParamType::boolean:
        return "bool";
    }
    return "?";
}

struct ParamSpec {
    std::string name;
    ParamType type;
    std::string fallback; // default value as config text
    std::string doc;
};

namespace experiment_detail {

inline std::vector<std::string> split_list(const std::string& text) {
    std::string s = text;
    for (char& c : s)
        if (c == ',' || c == ';')
            c = ' ';
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string tok; in >> tok;)
        out.push_back(tok);
    return out;
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos)
        return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline double parse_real(const std::string& name, const std::string& tok) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size())
            throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw SchemaError("parameter '" + name + "': '" + tok + "' is not a real number");
    }
}

inline std::int64_t parse_int(const std::string& name, const std::string& tok) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(tok, &used);
        if (used != tok.size())
            throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw SchemaError("parameter '" + name + "': '" + tok + "' is not an integer");
    }
}

inline bool parse_bool(const std::string& name, const std::string& tok) {
    if (tok == "true" || tok == "1" || tok == "yes")
        return true;
    if (tok == "false" || tok == "0" || tok == "no")
        return false;
    throw SchemaError("parameter '" + name + "': '" + tok + "' is not a boolean");
}

/// Typed JSON value of a parameter; validates the text.
inline json typed_value(const ParamSpec& spec, const std::string& text) {
    const std::string t = trim(text);
    switch (spec.type) {
    case ParamType::integer:
        return parse_int(spec.name, t);
    case ParamType::real:
        return parse_real(spec.name, t);
    case ParamType::text:
        return t;
    case ParamType::boolean:
        return parse_bool(spec.name, t);
    case ParamType::reals: {
        json a = json::array();
        for (const auto& tok : split_list(t))
            a.push_back(parse_real(spec.name, tok));
        return a;
    }
    case ParamType::integers: {
        json a = json::array();
        for (const auto& tok : split_list(t))
            a.push_back(parse_int(spec.name, tok));
        return a;
    }
    }
    return nullptr;
}

} // namespace experiment_detail

/// Resolved, validated parameter block.
class Params {
public:
    Params() = default;
    explicit Params(json values) : values_(std::move(values)) {}

    const json& values() const { return values_; }

    std::int64_t integer(const std::string& k) const { return at(k).get<std::int64_t>(); }
    double real(const std::string& k) const { return at(k).get<double>(); }
    bool boolean(const std::string& k) const { return at(k).get<bool>(); }
    std::string text(const std::string& k) const { return at(k).get<std::string>(); }
    std::vector<double> reals(const std::string& k) const { return at(k).get<std::vector<double>>(); }
    std::vector<std::int64_t> integers(const std::string& k) const { return at(k).get<std::vector<std::int64_t>>(); }

    /// Text list parameter split on whitespace and commas (targets like "1/3").
    std::vector<std::string> words(const std::string& k) const { return experiment_detail::split_list(text(k)); }

private:
    const json& at(const std::string& k) const {
        if (!values_.contains(k))
            throw SchemaError("missing parameter '" + k + "'");
        return values_.at(k);
    }
    json values_ = json::object();
};

struct Budget {
    std::uint64_t samples = 5'000'000;           // total sampled points per run
    std::int64_t entries = kDefaultEnumerationBudget; // lattice enumeration box points per call
    double wall_seconds = 3600;
};

struct ExperimentConfig {
    std::string scenario;
    std::uint64_t seed = 1;
    std::string out = "out";
    std::map<std::string, std::string> params; // raw text, validated against the scenario schema
    Budget budget;
};

/// Reads `scenario`, `seed` and `out` at top level plus [params] and [budget].
inline ExperimentConfig parse_config(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw SchemaError(std::string("config: ") + e.what());
    }
    ExperimentConfig cfg;
    for (const auto& [key, node] : tree) {
        if (key == "params") {
            for (const auto& [k, v] : node)
                cfg.params[k] = v.data();
        } else if (key == "budget") {
            for (const auto& [k, v] : node) {
                const std::string d = experiment_detail::trim(v.data());
                if (k == "samples")
                    cfg.budget.samples = static_cast<std::uint64_t>(experiment_detail::parse_int("budget.samples", d));
                else if (k == "entries")
                    cfg.budget.entries = experiment_detail::parse_int("budget.entries", d);
                else if (k == "wall_seconds")
                    cfg.budget.wall_seconds = experiment_detail::parse_real("budget.wall_seconds", d);
                else
                    throw SchemaError("config: unknown budget key '" + k + "'");
            }
        } else if (!node.empty()) {
            throw SchemaError("config: unknown section [" + key + "]");
        } else if (key == "scenario") {
            cfg.scenario = experiment_detail::trim(node.data());
        } else if (key == "seed") {
            cfg.seed = static_cast<std::uint64_t>(experiment_detail::parse_int("seed", experiment_detail::trim(node.data())));
        } else if (key == "out") {
            cfg.out = experiment_detail::trim(node.data());
        } else {
            throw SchemaError("config: unknown key '" + key + "'");
        }
    }
    if (cfg.scenario.empty())
        throw SchemaError("config: missing 'scenario'");
    if (cfg.budget.samples == 0 || cfg.budget.entries <= 0 || !(cfg.budget.wall_seconds > 0))
        throw SchemaError("config: budgets must be positive");
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw SchemaError("config: cannot open '" + path + "'");
    return parse_config(in);
}

/// Defaults filled in and every value type-checked; unknown keys rejected.
inline Params resolve_params(const std::vector<ParamSpec>& schema, const std::map<std::string, std::string>& raw) {
    json out = json::object();
    for (const auto& [k, v] : raw) {
        (void)v;
        const bool known = std::any_of(schema.begin(), schema.end(), [&](const ParamSpec& s) { return s.name == k; });
        if (!known)
            throw SchemaError("unknown parameter '" + k + "'");
    }
    for (const auto& spec : schema) {
        const auto it = raw.find(spec.name);
        out[spec.name] = experiment_detail::typed_value(spec, it == raw.end() ? spec.fallback : it->second);
    }
    return Params(std::move(out));
}

/// The part of a config that determines results (output path and worker
/// count do not).
inline json resolved_config_json(const ExperimentConfig& cfg, const Params& params) {
    return {{"scenario", cfg.scenario},
            {"seed", cfg.seed},
            {"params", params.values()},
            {"budget",
             {{"samples", cfg.budget.samples}, {"entries", cfg.budget.entries}, {"wall_seconds", cfg.budget.wall_seconds}}}};
}

inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Row key text for a real parameter.
inline std::string key_real(const std::string& name, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s=%.9e", name.c_str(), v);
    return buf;
}

/// JSON lines plus CSV projection. Records are written and flushed as they
/// arrive, so a truncated run keeps everything produced before the stop.
class RecordSink {
public:
    RecordSink() = default; // in-memory only

    RecordSink(const std::string& jsonl_path, const std::string& csv_path, std::vector<std::string> columns)
        : columns_(std::move(columns)) {
        jsonl_.open(jsonl_path, std::ios::binary | std::ios::trunc);
        csv_.open(csv_path, std::ios::binary | std::ios::trunc);
        if (!jsonl_ || !csv_)
            throw std::runtime_error("cannot open output files '" + jsonl_path + "', '" + csv_path + "'");
        for (std::size_t i = 0; i < columns_.size(); ++i)
            csv_ << (i ? "," : "") << columns_[i];
        csv_ << '\n';
        csv_.flush();
    }

    void header(const json& h) {
        if (jsonl_.is_open()) {
            jsonl_ << h.dump() << '\n';
            jsonl_.flush();
        }
    }

    void emit(const json& rec) {
        records_.push_back(rec);
        if (jsonl_.is_open()) {
            jsonl_ << rec.dump() << '\n';
            jsonl_.flush();
        }
        if (csv_.is_open()) {
            for (std::size_t i = 0; i < columns_.size(); ++i) {
                if (i)
                    csv_ << ',';
                if (rec.contains(columns_[i]))
                    csv_ << csv_cell(rec.at(columns_[i]));
            }
            csv_ << '\n';
            csv_.flush();
        }
    }

    const std::vector<json>& records() const { return records_; }

private:
    static std::string csv_cell(const json& v) {
        if (v.is_string()) {
            std::string s = v.get<std::string>();
            if (s.find_first_of(",\"\n") == std::string::npos)
                return s;
            std::string q = "\"";
            for (char c : s)
                q += c == '"' ? std::string("\"\"") : std::string(1, c);
            return q + "\"";
        }
        if (v.is_array()) {
            std::string s;
            for (std::size_t i = 0; i < v.size(); ++i)
                s += (i ? " " : "") + (v[i].is_string() ? v[i].get<std::string>() : v[i].dump());
            return s;
        }
        return v.dump();
    }

    std::vector<std::string> columns_;
    std::ofstream jsonl_, csv_;
    std::vector<json> records_;
};

/// Everything a scenario needs while running.
class RunContext {
public:
    RunContext(ExperimentConfig cfg, Params params, RecordSink& sink, unsigned workers)
        : cfg_(std::move(cfg)), params_(std::move(params)), sink_(sink), workers_(workers),
          start_(std::chrono::steady_clock::now()) {
        config_json_ = resolved_config_json(cfg_, params_);
        hash_ = fnv1a_hex(config_json_.dump());
    }

    const ExperimentConfig& config() const { return cfg_; }
    const Params& params() const { return params_; }
    std::uint64_t seed() const { return cfg_.seed; }
    unsigned workers() const { return workers_; }
    const std::string& hash() const { return hash_; }
    const json& config_json() const { return config_json_; }

    /// Reserves n samples against the budget.
    void charge(std::uint64_t n) {
        used_ += n;
        if (used_ > cfg_.budget.samples)
            throw BudgetExceeded("sample budget of " + std::to_string(cfg_.budget.samples) + " exceeded");
        check_time();
    }

    void check_time() const {
        const std::chrono::duration<double> el = std::chrono::steady_clock::now() - start_;
        if (el.count() > cfg_.budget.wall_seconds)
            throw BudgetExceeded("wall-clock budget exceeded");
    }

    /// Adds config_hash; FAIL rows get a replay payload naming this config.
    void emit(json rec, const json& replay_params = nullptr, const json& point = nullptr) {
        rec["config_hash"] = hash_;
        if (rec.value("status", "") == "FAIL") {
            ++failures_;
            json cfg = config_json_;
            if (!replay_params.is_null())
                for (const auto& [k, v] : replay_params.items())
                    cfg["params"][k] = v;
            json payload = {{"config", cfg}, {"key", rec.value("key", "")}, {"status", "FAIL"}};
            if (!point.is_null())
                payload["point"] = point;
            rec["replay"] = payload;
        }
        sink_.emit(rec);
    }

    int failures() const { return failures_; }

private:
    ExperimentConfig cfg_;
    Params params_;
    RecordSink& sink_;
    unsigned workers_;
    std::chrono::steady_clock::time_point start_;
    json config_json_;
    std::string hash_;
    std::uint64_t used_ = 0;
    int failures_ = 0;
};

/// Measured row as a record.
inline json row_json(const std::string& key, const MeasureRow& r) {
    return {{"key", key},       {"param", r.param},   {"events", r.events}, {"samples", r.samples},
            {"boundary", r.boundary}, {"measured", r.measured}, {"lower", r.lower},   {"upper", r.upper},
            {"bound", std::isfinite(r.bound) ? json(r.bound) : json("inf")}, {"status", to_string(r.status)}};
}

} // namespace latflow
