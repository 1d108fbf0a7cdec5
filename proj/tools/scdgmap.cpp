// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: parse / scdg / map / sign / detect / export.
// Exit codes: 0 success, 1 input error, 2 when detect finds verdicts.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "scdgmap/android.hpp"
#include "scdgmap/error.hpp"
#include "scdgmap/graph.hpp"
#include "scdgmap/ipc.hpp"
#include "scdgmap/mapping.hpp"
#include "scdgmap/matching.hpp"
#include "scdgmap/rules.hpp"
#include "scdgmap/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

struct RunConfig {
    std::vector<std::string> traces;
    std::string logcat;
    std::string manifest;
    std::string perm_map;
    std::string service_map;
    std::string signature_store;
    std::string output_dir = ".";
    std::string logcat_tag = "APICALL";
    int jobs = 1;

    scdgmap::ParseConfig parse = scdgmap::ParseConfig::defaults();
    scdgmap::DependenceRuleSet rules = scdgmap::DependenceRuleSet::defaults();
    scdgmap::NormalizationTable norm = scdgmap::NormalizationTable::defaults();
    scdgmap::MapConfig map;

    void apply_file(const std::string& path, bool skip_traces, bool skip_noise) {
        std::ifstream in(path);
        if (!in) throw scdgmap::IoError("cannot open config file: " + path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw scdgmap::SchemaError("config " + path + ": " + e.what());
        }
        if (!skip_traces) {
            if (j.contains("trace")) traces = {j["trace"].get<std::string>()};
            if (j.contains("traces")) traces = j["traces"].get<std::vector<std::string>>();
        }
        logcat = j.value("logcat", logcat);
        manifest = j.value("manifest", manifest);
        perm_map = j.value("perm_map", perm_map);
        service_map = j.value("service_map", service_map);
        signature_store = j.value("signature_store", signature_store);
        output_dir = j.value("output_dir", output_dir);
        logcat_tag = j.value("logcat_tag", logcat_tag);
        if (j.contains("noise") && !skip_noise)
            parse.noise = j["noise"].get<std::set<std::string>>();
        if (j.contains("outparam_syscalls")) {
            parse.outparam_syscalls = j["outparam_syscalls"].get<std::set<std::string>>();
            // Value-match candidates come from the same out-parameter set
            // unless an explicit rules block overrides it below.
            rules.producer_outparam_syscalls = parse.outparam_syscalls;
        }
        if (j.contains("pid_packages"))
            for (const auto& [pid, pkg] : j["pid_packages"].items())
                parse.pid_package_map[std::stoi(pid)] = pkg.get<std::string>();
        if (j.contains("rules")) rules = scdgmap::DependenceRuleSet::from_json(j["rules"]);
        if (j.contains("normalization"))
            norm = scdgmap::NormalizationTable::from_json(j["normalization"]);
        if (j.contains("map")) map = scdgmap::MapConfig::from_json(j["map"]);
    }

    // Everything needed to reproduce the run; output_dir and jobs are
    // deliberately excluded so artifacts do not depend on where they land.
    json header() const {
        json pid_packages = json::object();
        for (const auto& [pid, pkg] : parse.pid_package_map)
            pid_packages[std::to_string(pid)] = pkg;
        json j = {{"traces", traces},
                  {"logcat", logcat},
                  {"manifest", manifest},
                  {"perm_map", perm_map},
                  {"service_map", service_map},
                  {"signature_store", signature_store},
                  {"logcat_tag", logcat_tag},
                  {"noise", parse.noise},
                  {"outparam_syscalls", parse.outparam_syscalls},
                  {"pid_packages", pid_packages},
                  {"rules", rules.to_json()},
                  {"normalization", norm.to_json()},
                  {"map", map.to_json()}};
        return j;
    }
};

void write_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw scdgmap::IoError("cannot write " + tmp.string());
        out << content;
        if (!out) throw scdgmap::IoError("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

fs::path out_path(const RunConfig& cfg, const std::string& trace, const std::string& suffix,
                  const std::string& override_path) {
    if (!override_path.empty()) return override_path;
    fs::create_directories(cfg.output_dir);
    return fs::path(cfg.output_dir) / (stem_of(trace) + suffix);
}

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw scdgmap::IoError("missing required input: " + what);
    if (!fs::exists(path)) throw scdgmap::IoError(what + " not found: " + path);
}

struct PipelineRun {
    scdgmap::TraceSession session;
    std::vector<scdgmap::Scdg> graphs;
};

PipelineRun run_scdg_pipeline(const RunConfig& cfg, const std::string& trace) {
    PipelineRun run;
    run.session = scdgmap::load_trace(trace, cfg.parse);
    run.graphs = scdgmap::build_scdgs(run.session, cfg.rules, cfg.norm);
    return run;
}

scdgmap::MappingReport run_map_pipeline(const RunConfig& cfg, const PipelineRun& run) {
    require_file(cfg.logcat, "logcat file");
    auto apis = scdgmap::load_api_events(cfg.logcat, {cfg.logcat_tag});
    auto report = scdgmap::assign_scdgs_to_apis(run.graphs, apis.events, cfg.map);
    scdgmap::ServiceMap services;
    if (!cfg.service_map.empty()) services = scdgmap::ServiceMap::load(cfg.service_map);
    auto ipc = scdgmap::extract_ipc(run.graphs, run.session, services);
    report.ipc = std::move(ipc.interactions);
    for (const auto& d : ipc.diagnostics) std::cerr << "note: " << d << "\n";
    return report;
}

void for_each_trace(const RunConfig& cfg, const std::function<void(const std::string&)>& fn) {
    if (cfg.traces.empty()) throw scdgmap::IoError("missing required input: trace file");
    for (const auto& t : cfg.traces) require_file(t, "trace file");
    if (cfg.jobs <= 1 || cfg.traces.size() == 1) {
        for (const auto& t : cfg.traces) fn(t);
        return;
    }
    std::mutex err_mutex;
    std::vector<std::string> errors;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < cfg.traces.size(); i = next.fetch_add(1)) {
            try {
                fn(cfg.traces[i]);
            } catch (const std::exception& e) {
                std::scoped_lock lock(err_mutex);
                errors.emplace_back(e.what());
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs),
                                                cfg.traces.size());
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (!errors.empty()) throw scdgmap::Error(errors.front());
}

int cmd_parse(const RunConfig& cfg, const std::string& override_out) {
    for_each_trace(cfg, [&](const std::string& trace) {
        auto session = scdgmap::load_trace(trace, cfg.parse);
        std::ostringstream out;
        json header = {{"schema_version", kSchemaVersion},
                       {"type", "events"},
                       {"config", cfg.header()},
                       {"source", trace},
                       {"filtered_count", session.filtered_count},
                       {"skipped_count", session.skipped_count},
                       {"merged_pair_count", session.merged_pair_count}};
        out << header.dump() << "\n";
        for (const auto& e : session.events) out << scdgmap::event_to_json(e).dump() << "\n";
        write_atomic(out_path(cfg, trace, ".events.jsonl", override_out), out.str());
    });
    return 0;
}

std::string dot_bundle(const std::vector<scdgmap::Scdg>& graphs) {
    std::string out;
    for (const auto& g : graphs) out += scdgmap::export_dot(g);
    return out;
}

int cmd_scdg(const RunConfig& cfg, const std::string& override_out) {
    for_each_trace(cfg, [&](const std::string& trace) {
        auto run = run_scdg_pipeline(cfg, trace);
        json list = json::array();
        for (const auto& g : run.graphs) list.push_back(scdgmap::scdg_to_json(g));
        json doc = {{"schema_version", kSchemaVersion},
                    {"type", "graphs"},
                    {"config", cfg.header()},
                    {"source", trace},
                    {"graphs", list}};
        write_atomic(out_path(cfg, trace, ".graphs.json", override_out), doc.dump(2) + "\n");
        write_atomic(out_path(cfg, trace, ".graphs.dot", ""), dot_bundle(run.graphs));
    });
    return 0;
}

void print_report_table(const scdgmap::MappingReport& report) {
    std::cout << std::left << std::setw(10) << "graph" << std::setw(44) << "api"
              << std::setw(10) << "overlap" << "\n";
    for (const auto& a : report.assignments)
        std::cout << std::left << std::setw(10) << a.graph_id << std::setw(44) << a.api_name
                  << std::setw(10) << a.overlap << "\n";
    for (int id : report.unmapped_graphs)
        std::cout << std::left << std::setw(10) << id << std::setw(44) << "(unmapped)"
                  << "\n";
    for (const auto& a : report.unevidenced_apis)
        std::cout << std::left << std::setw(10) << "-" << std::setw(44) << a.api_name
                  << "(no SCDG)\n";
}

int cmd_map(const RunConfig& cfg, const std::string& override_out) {
    const std::string trace = cfg.traces.empty() ? "" : cfg.traces.front();
    require_file(trace, "trace file");
    auto run = run_scdg_pipeline(cfg, trace);
    auto report = run_map_pipeline(cfg, run);
    json doc = {{"schema_version", kSchemaVersion},
                {"type", "mapping_report"},
                {"config", cfg.header()},
                {"source", trace},
                {"report", report.to_json()}};
    write_atomic(out_path(cfg, trace, ".report.json", override_out), doc.dump(2) + "\n");
    print_report_table(report);
    return 0;
}

int cmd_sign(const RunConfig& cfg, const std::string& api_name) {
    const std::string trace = cfg.traces.empty() ? "" : cfg.traces.front();
    require_file(trace, "trace file");
    require_file(cfg.perm_map, "api-permission map");
    if (cfg.signature_store.empty())
        throw scdgmap::IoError("missing required input: signature store path");

    auto run = run_scdg_pipeline(cfg, trace);
    auto report = run_map_pipeline(cfg, run);
    auto perms = scdgmap::load_api_permission_map(cfg.perm_map);
    auto sig = scdgmap::build_signature(report, run.graphs, api_name, perms);
    if (sig.implied_permissions.empty())
        std::cerr << "warning: " << api_name << " has no entry in the api-permission map\n";

    std::vector<scdgmap::ApiSignature> store;
    if (fs::exists(cfg.signature_store))
        store = scdgmap::load_signature_store(cfg.signature_store);
    std::erase_if(store, [&](const auto& s) { return s.api_name == api_name; });
    store.push_back(std::move(sig));
    std::sort(store.begin(), store.end(),
              [](const auto& a, const auto& b) { return a.api_name < b.api_name; });
    scdgmap::save_signature_store(cfg.signature_store, store);
    std::cout << "signature for " << api_name << " stored ("
              << store.back().min_nodes << " nodes)\n";
    return 0;
}

int cmd_detect(const RunConfig& cfg, const std::string& override_out) {
    const std::string trace = cfg.traces.empty() ? "" : cfg.traces.front();
    require_file(trace, "trace file");
    require_file(cfg.manifest, "manifest");
    require_file(cfg.perm_map, "api-permission map");
    require_file(cfg.signature_store, "signature store");

    auto run = run_scdg_pipeline(cfg, trace);
    auto report = run_map_pipeline(cfg, run);
    auto manifest = scdgmap::parse_manifest(cfg.manifest, cfg.parse.pid_package_map);
    auto perms = scdgmap::load_api_permission_map(cfg.perm_map);
    auto sigs = scdgmap::load_signature_store(cfg.signature_store);

    scdgmap::MatchConfig match_cfg;
    match_cfg.min_match_size = cfg.map.min_match_size;
    auto verdicts = scdgmap::detect_abuse(manifest, report, run.graphs, sigs, perms, match_cfg);

    json list = json::array();
    for (const auto& v : verdicts) list.push_back(v.to_json());
    json doc = {{"schema_version", kSchemaVersion},
                {"type", "verdicts"},
                {"config", cfg.header()},
                {"source", trace},
                {"verdicts", list}};
    write_atomic(out_path(cfg, trace, ".verdicts.json", override_out), doc.dump(2) + "\n");

    std::cout << std::left << std::setw(20) << "kind" << std::setw(44) << "subject"
              << "explanation\n";
    for (const auto& v : verdicts)
        std::cout << std::left << std::setw(20) << scdgmap::to_string(v.kind)
                  << std::setw(44) << v.subject << v.explanation << "\n";
    if (verdicts.empty()) std::cout << "no verdicts\n";
    return verdicts.empty() ? 0 : 2;
}

int cmd_export(const RunConfig& cfg, const std::string& graphs_path,
               const std::string& override_out) {
    std::vector<scdgmap::Scdg> graphs;
    std::string source;
    if (!graphs_path.empty()) {
        require_file(graphs_path, "graphs file");
        std::ifstream in(graphs_path);
        json doc;
        try {
            in >> doc;
        } catch (const json::exception& e) {
            throw scdgmap::SchemaError(graphs_path + ": " + e.what());
        }
        for (const auto& g : doc.at("graphs")) graphs.push_back(scdgmap::scdg_from_json(g));
        source = graphs_path;
    } else {
        source = cfg.traces.empty() ? "" : cfg.traces.front();
        require_file(source, "trace file");
        graphs = run_scdg_pipeline(cfg, source).graphs;
    }
    write_atomic(out_path(cfg, source, ".graphs.dot", override_out), dot_bundle(graphs));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"System-call dependence graph analysis for Android traces"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path, override_out, api_name, graphs_path;

    app.add_option("--config", config_path, "JSON run configuration file");
    app.add_option("--output-dir", cfg.output_dir, "directory for derived artifacts");
    app.add_option("--jobs", cfg.jobs, "parallel workers across multiple trace files");

    auto add_common = [&](CLI::App* sub, bool multi_trace) {
        sub->fallthrough();  // global flags (--config, --output-dir) may follow the verb
        if (multi_trace)
            sub->add_option("--trace", cfg.traces, "strace-format trace file(s)");
        else
            sub->add_option_function<std::string>(
                "--trace", [&](const std::string& t) { cfg.traces = {t}; },
                "strace-format trace file");
        sub->add_option("--out", override_out, "override the output file path");
        sub->add_option_function<std::vector<std::string>>(
            "--noise",
            [&](const std::vector<std::string>& v) {
                cfg.parse.noise = {v.begin(), v.end()};
            },
            "replace the noise syscall list");
        sub->add_option("--logcat-tag", cfg.logcat_tag, "API marker tag");
    };

    auto* parse_cmd = app.add_subcommand("parse", "parse a trace into a JSONL event dump");
    add_common(parse_cmd, true);

    auto* scdg_cmd = app.add_subcommand("scdg", "build SCDGs (JSON + DOT)");
    add_common(scdg_cmd, true);

    auto* map_cmd = app.add_subcommand("map", "align SCDGs with API events");
    add_common(map_cmd, false);
    map_cmd->add_option("--logcat", cfg.logcat, "epoch-format logcat file");
    map_cmd->add_option("--service-map", cfg.service_map, "binder service map JSON");
    map_cmd->add_option("--clock-offset-us", cfg.map.clock_offset_us,
                        "skew added to logcat timestamps");
    map_cmd->add_option("--max-window-us", cfg.map.max_window_us, "API window cap");

    auto* sign_cmd = app.add_subcommand("sign", "build a signature from a mapped run");
    add_common(sign_cmd, false);
    sign_cmd->add_option("--logcat", cfg.logcat, "epoch-format logcat file");
    sign_cmd->add_option("--service-map", cfg.service_map, "binder service map JSON");
    sign_cmd->add_option("--perm-map", cfg.perm_map, "api-permission map JSON");
    sign_cmd->add_option("--store", cfg.signature_store, "signature store to append to");
    sign_cmd->add_option("--api", api_name, "API name to sign")->required();

    auto* detect_cmd = app.add_subcommand("detect", "permission abuse / evasion verdicts");
    add_common(detect_cmd, false);
    detect_cmd->add_option("--logcat", cfg.logcat, "epoch-format logcat file");
    detect_cmd->add_option("--service-map", cfg.service_map, "binder service map JSON");
    detect_cmd->add_option("--manifest", cfg.manifest, "AndroidManifest.xml (plain XML)");
    detect_cmd->add_option("--perm-map", cfg.perm_map, "api-permission map JSON");
    detect_cmd->add_option("--store", cfg.signature_store, "signature store JSON");

    auto* export_cmd = app.add_subcommand("export", "emit a DOT bundle");
    add_common(export_cmd, false);
    export_cmd->add_option("--graphs", graphs_path, "previously exported graphs JSON");

    // Config file values load first so explicit flags win. Collection-valued
    // flags (--trace, --noise) replace the config values outright.
    bool has_trace_flag = false, has_noise_flag = false;
    std::string preparse_config;
    for (int i = 1; i < argc; ++i) {
        std::string_view arg(argv[i]);
        if (arg == "--trace") has_trace_flag = true;
        if (arg == "--noise") has_noise_flag = true;
        if (arg == "--config" && i + 1 < argc) preparse_config = argv[i + 1];
    }
    if (!preparse_config.empty()) {
        try {
            cfg.apply_file(preparse_config, has_trace_flag, has_noise_flag);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }

    CLI11_PARSE(app, argc, argv);

    try {
        if (parse_cmd->parsed()) return cmd_parse(cfg, override_out);
        if (scdg_cmd->parsed()) return cmd_scdg(cfg, override_out);
        if (map_cmd->parsed()) return cmd_map(cfg, override_out);
        if (sign_cmd->parsed()) return cmd_sign(cfg, api_name);
        if (detect_cmd->parsed()) return cmd_detect(cfg, override_out);
        if (export_cmd->parsed()) return cmd_export(cfg, graphs_path, override_out);
    } catch (const scdgmap::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
