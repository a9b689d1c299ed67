// Batch runner: run <config>, list-scenarios, replay <record>.

#include "latflow/scenarios.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace latflow;

namespace {

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, std::optional<std::string> out,
            int workers) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(path);
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << '\n';
        return 2;
    }
    if (seed)
        cfg.seed = *seed;
    if (out)
        cfg.out = *out;
    const auto res = run_experiment(cfg, resolve_workers(workers), true);
    if (!res.message.empty())
        std::cerr << (res.exit_code == 2 ? "schema error: " : "") << res.message << '\n';
    if (!res.jsonl_path.empty()) {
        std::size_t fails = 0;
        for (const auto& r : res.records)
            fails += r.value("status", "") == "FAIL";
        std::cout << res.jsonl_path << '\n' << res.csv_path << '\n';
        std::cout << res.records.size() << " records, " << fails << " FAIL\n";
    }
    return res.exit_code;
}

int cmd_list(bool as_json) {
    if (as_json) {
        json cat = json::array();
        for (const auto& s : scenario_catalog()) {
            json params = json::array();
            for (const auto& p : s.params)
                params.push_back({{"name", p.name}, {"type", to_string(p.type)}, {"default", p.fallback}, {"doc", p.doc}});
            cat.push_back({{"tag", s.tag}, {"anchor", s.anchor}, {"summary", s.summary}, {"params", params},
                           {"csv_columns", s.csv_columns}});
        }
        std::cout << cat.dump(2) << '\n';
        return 0;
    }
    for (const auto& s : scenario_catalog()) {
        std::cout << s.tag << "  [" << s.anchor << "]\n    " << s.summary << '\n';
        for (const auto& p : s.params)
            std::cout << "    " << p.name << " (" << to_string(p.type) << ", default '" << p.fallback << "'): " << p.doc
                      << '\n';
    }
    return 0;
}

// Point-level recheck of a marked point with delta below eps. Replays exit 0
// when the recorded failure is reproduced and 1 when it is not.
int replay_marking_point(const json& payload) {
    const auto cfg = config_from_json(payload.at("config"));
    const auto* info = find_scenario(cfg.scenario);
    const auto params = resolve_params(info->params, cfg.params);
    const int k = static_cast<int>(params.integer("k"));
    const auto map = scenario_detail::veronese_instance(params, k - 1, "t");
    double rho = params.real("rho");
    if (rho <= 0)
        rho = rho_for_map(map.f, map.ball).rho;
    const auto inst = map.as_marking(rho);
    const auto x = payload.at("point").at("x").get<Point>();
    const double eps = payload.at("point").at("eps").get<double>();
    const auto m = is_marked(inst, x, eps);
    const double d = static_cast<double>(delta(Lattice(inst.at(x))).value);
    const bool violation = m.status == MarkStatus::marked && d < eps - 1e-9;
    std::cout << json{{"x", x}, {"eps", eps}, {"classification", to_string(m.status)}, {"delta", d},
                      {"violation", violation}}
                     .dump()
              << '\n';
    std::cout << (violation ? "reproduced" : "not reproduced") << '\n';
    return violation ? 0 : 1;
}

int cmd_replay(const std::string& path, const std::string& key, int workers) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "cannot open '" << path << "'\n";
        return 2;
    }
    json target, header, keyed;
    for (std::string line; std::getline(in, line);) {
        if (line.empty())
            continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            std::cerr << "bad record: " << e.what() << '\n';
            return 2;
        }
        if (rec.contains("schema"))
            header = rec;
        if (!key.empty() && keyed.is_null() && rec.value("key", "") == key)
            keyed = rec;
        if (!rec.contains("replay"))
            continue;
        if (key.empty() || rec.value("key", "") == key) {
            target = rec;
            break;
        }
    }
    // Rows that did not fail carry no replay payload; rerun them from the header.
    if (target.is_null() && !keyed.is_null() && !header.is_null())
        target = {{"replay", {{"config", header.at("config")}, {"key", key}, {"status", keyed.value("status", "")}}}};
    if (target.is_null()) {
        std::cerr << "no replayable record" << (key.empty() ? "" : " with key '" + key + "'") << '\n';
        return 2;
    }
    const auto& payload = target.at("replay");
    if (payload.contains("point") && payload.at("config").at("scenario") == "marking-41")
        return replay_marking_point(payload);
    const auto cfg = config_from_json(payload.at("config"));
    const auto res = run_experiment(cfg, resolve_workers(workers), false);
    for (const auto& r : res.records) {
        if (r.value("key", "") != payload.at("key").get<std::string>())
            continue;
        std::cout << r.dump() << '\n';
        const bool same = r.value("status", "") == payload.value("status", "");
        std::cout << (same ? "reproduced" : "not reproduced") << '\n';
        return same ? 0 : 1;
    }
    std::cerr << "replayed run produced no record with key '" << payload.at("key") << "'\n";
    return res.exit_code == 3 ? 3 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"latflow: experiments on flows in the space of lattices and Diophantine approximation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(LATFLOW_VERSION));

    auto* run = app.add_subcommand("run", "run an experiment config");
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    int workers = 0;
    run->add_option("config", config_path, "INI config file")->required();
    run->add_option("--seed", seed, "override the config seed");
    run->add_option("--out", out, "override the output directory");
    run->add_option("--workers", workers, "worker threads (default: LATFLOW_WORKERS or all cores)");

    auto* list = app.add_subcommand("list-scenarios", "print the scenario catalog");
    bool as_json = false;
    list->add_flag("--json", as_json, "machine-readable catalog");

    auto* replay = app.add_subcommand("replay", "recompute a record and check its status");
    std::string record_path, key;
    replay->add_option("record", record_path, "file holding the record (JSON line or JSONL output)")->required();
    replay->add_option("--key", key, "record key when the file holds several");
    replay->add_option("--workers", workers, "worker threads");

    CLI11_PARSE(app, argc, argv);
    try {
        if (run->parsed())
            return cmd_run(config_path, seed, out, workers);
        if (list->parsed())
            return cmd_list(as_json);
        if (replay->parsed())
            return cmd_replay(record_path, key, workers);
    } catch (const SchemaError& e) {
        std::cerr << "schema error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
