// fpwasm command-line front end. Exit status: 0 ok, 1 script-level failure
// under --strict or a runtime error, 2 configuration error.

#include "fpwasm/assembler.hpp"
#include "fpwasm/corpus.hpp"
#include "fpwasm/errors.hpp"
#include "fpwasm/harness.hpp"
#include "fpwasm/metrics.hpp"
#include "fpwasm/pipeline.hpp"
#include "fpwasm/signals.hpp"
#include "fpwasm/translator.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

using namespace fpwasm;
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_config = 2;

struct Options {
    std::vector<std::string> inputs;
    std::string output_dir;
    std::string rules = "all";
    std::string translator = "stub";
    std::string endpoint;
    std::string model;
    std::string harness;
    std::string api_names_file;
    std::string callees_file;
    std::string timings_file;
    bool no_dom = false;
    bool strict = false;
    bool json = false;
    int timeout_ms = 5000;
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());

    // sample
    std::size_t subsets = 10;
    std::uint64_t seed = 0;
    std::size_t fp_total = 400;
    std::size_t non_fp_total = 100;
    std::string weights;

    // ingest / label
    std::size_t chunk_size = default_chunk_size;
    std::string label_rules_file;

    // metrics
    std::string subsets_dir;

    // signals
    std::string watchlist_file;
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read '" + p.string() + "'");
    return {std::istreambuf_iterator<char>(in), {}};
}

void write_file(const fs::path& p, std::string_view data) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write '" + p.string() + "'");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

RuleSet parse_rules(const std::string& spec) {
    if (spec == "all") return all_rule_set();
    RuleSet out;
    for (const auto& name : split(spec, ','))
        if (!name.empty()) out.insert(parse_rule_id(name));
    if (out.empty()) throw ConfigError("--rules needs 'all' or at least one rule name");
    return out;
}

std::vector<std::string> harness_argv(const std::string& command) {
    std::istringstream in(command);
    std::vector<std::string> argv;
    for (std::string w; in >> w;) argv.push_back(w);
    if (argv.empty()) throw ConfigError("--harness needs a command");
    return argv;
}

void check_inputs(const Options& o) {
    if (o.inputs.empty()) throw ConfigError("no inputs given");
    for (const auto& in : o.inputs)
        if (!fs::exists(in)) throw ConfigError("input '" + in + "' does not exist");
}

/// Everything a conversion run shares across scripts.
struct Conversion {
    PipelineConfig config;
    std::unique_ptr<Translator> translator;
    std::unique_ptr<HarnessClient> harness;
};

std::unique_ptr<Conversion> make_conversion(const Options& o) {
    auto c = std::make_unique<Conversion>();
    c->config.rules = parse_rules(o.rules);
    c->config.rule_config.dom_available = !o.no_dom;
    c->config.rule_config.strict_translator = o.strict;
    if (!o.api_names_file.empty()) c->config.rule_config.fp_api_names = load_name_list(read_file(o.api_names_file));
    if (!o.callees_file.empty()) c->config.rule_config.sensitive_callees = load_name_list(read_file(o.callees_file));
    const TranslatorMode mode = parse_translator_mode(o.translator);
    if (mode != TranslatorMode::Off) {
        ServiceConfig sc;
        sc.endpoint = o.endpoint;
        sc.model = o.model;
        sc.strict = o.strict;
        c->translator = std::make_unique<MemoTranslator>(make_translator(mode, sc));
        c->config.translator = c->translator.get();
    }
    if (o.timeout_ms <= 0) throw ConfigError("--timeout-ms must be positive");
    c->config.validation.timeout_ms = o.timeout_ms;
    if (!o.harness.empty()) {
        c->harness = std::make_unique<HarnessClient>(harness_argv(o.harness));
        c->config.harness = c->harness.get();
    }
    return c;
}

std::vector<SourceScript> load_scripts(const Options& o) {
    auto res = ingest({o.inputs.begin(), o.inputs.end()}, o.workers);
    for (const auto& [path, reason] : res.skipped) std::cerr << "skipped " << path << ": " << reason << '\n';
    std::vector<SourceScript> out;
    for (auto& r : res.records) out.push_back(std::move(r.script));
    return out;
}

std::string display_name(const SourceScript& s) { return s.origin().value_or(s.id()); }

/// Output stem for a script: the origin file name up to its first dot.
std::string stem_of(const SourceScript& s) {
    if (!s.origin()) return s.id().substr(0, 16);
    std::string name = fs::path(*s.origin()).filename().string();
    const auto dot = name.find('.');
    if (dot != std::string::npos && dot > 0) name.resize(dot);
    return name.empty() ? s.id().substr(0, 16) : name;
}

fs::path output_dir_for(const Options& o, const SourceScript& s) {
    if (!o.output_dir.empty()) return o.output_dir;
    if (s.origin()) return fs::path(*s.origin()).parent_path();
    return ".";
}

std::string text_line(const SourceScript& s, const ScriptResult& r) {
    std::ostringstream line;
    const auto& rep = r.report;
    line << display_name(s) << " stage=" << to_string(rep.stage_reached);
    if (rep.excluded_reason) {
        line << " excluded=\"" << *rep.excluded_reason << '"';
        return line.str();
    }
    char cov[32];
    std::snprintf(cov, sizeof cov, "%.2f", rep.coverage_pct);
    line << " success=" << (rep.success ? "yes" : "no") << " coverage=" << cov << "% kept=" << r.plan.kept.size()
         << " dropped=" << r.plan.dropped.size() << " bytes=" << rep.original_bytes << "->" << rep.output_bytes;
    if (rep.error) line << " error=\"" << *rep.error << '"';
    return line.str();
}

int strict_status(const Options& o, const std::vector<ConversionReport>& reports) {
    if (!o.strict) return exit_ok;
    for (const auto& r : reports)
        if (!r.success) return exit_failure;
    return exit_ok;
}

fs::path timings_path(const Options& o, const std::vector<SourceScript>& scripts) {
    if (!o.timings_file.empty()) return o.timings_file;
    if (!o.output_dir.empty()) return fs::path(o.output_dir) / "timings.json";
    if (!scripts.empty()) return output_dir_for(o, scripts.front()) / "timings.json";
    return "timings.json";
}

int cmd_convert(const Options& o) {
    auto conv = make_conversion(o);
    check_inputs(o);
    const auto scripts = load_scripts(o);
    const auto results = run_pipeline(scripts, conv->config, o.workers);
    std::vector<ConversionReport> reports;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& s = scripts[i];
        const auto& r = results[i];
        reports.push_back(r.report);
        if (r.output) {
            const fs::path dir = output_dir_for(o, s);
            const std::string stem = stem_of(s);
            write_file(dir / (stem + ".obf.js"), r.output->text);
            write_file(dir / (stem + ".plan.json"), plan_report_json(s, r.plan));
            if (!r.output->embedded_module.empty())
                write_file(dir / (stem + ".wasm"),
                           std::string_view(reinterpret_cast<const char*>(r.output->embedded_module.data()),
                                            r.output->embedded_module.size()));
        }
        std::cout << (o.json ? report_json(r.report) : text_line(s, r)) << '\n';
    }
    write_file(timings_path(o, scripts), timings_json(reports));
    return strict_status(o, reports);
}

int cmd_validate(const Options& o) {
    auto conv = make_conversion(o);
    check_inputs(o);
    bool all_ok = true;
    for (const auto& in : o.inputs) {
        const fs::path path(in);
        ObfuscatedScript obf{read_file(path), {}, {}};
        std::string stem = path.filename().string();
        stem.resize(stem.find('.') == std::string::npos ? stem.size() : stem.find('.'));
        const fs::path sidecar = path.parent_path() / (stem + ".wasm");
        if (fs::exists(sidecar)) {
            const auto bytes = read_file(sidecar);
            obf.embedded_module.assign(bytes.begin(), bytes.end());
        } else {
            try {
                obf.embedded_module = extract_embedded_bytes(obf.text);
            } catch (const ExtractError&) {
            }
        }
        const auto out = validate(obf, conv->harness.get(), conv->config.validation);
        all_ok = all_ok && out.success();
        if (o.json) {
            ojson j{{"file", in},
                    {"success", out.success()},
                    {"stage1_compile", to_string(out.stage1_compile)},
                    {"stage2_parse", to_string(out.stage2_parse)},
                    {"stage3_execute", to_string(out.stage3_execute)},
                    {"error", out.error ? ojson(*out.error) : ojson(nullptr)}};
            std::cout << j.dump() << '\n';
        } else {
            std::cout << in << " stage1=" << to_string(out.stage1_compile) << " stage2=" << to_string(out.stage2_parse)
                      << " stage3=" << to_string(out.stage3_execute);
            if (out.error) std::cout << " error=\"" << *out.error << '"';
            std::cout << '\n';
        }
    }
    return o.strict && !all_ok ? exit_failure : exit_ok;
}

int cmd_ingest(const Options& o) {
    check_inputs(o);
    if (o.output_dir.empty()) throw ConfigError("ingest needs --output-dir");
    if (o.chunk_size == 0) throw ConfigError("--chunk-size must be positive");
    auto res = ingest({o.inputs.begin(), o.inputs.end()}, o.workers);
    for (const auto& [path, reason] : res.skipped) std::cerr << "skipped " << path << ": " << reason << '\n';
    const auto files = write_chunks(res.records, o.output_dir, o.chunk_size);
    std::cout << "records=" << res.records.size() << " duplicates=" << res.dup_count
              << " skipped=" << res.skipped.size() << " chunks=" << files.size() << '\n';
    return o.strict && !res.skipped.empty() ? exit_failure : exit_ok;
}

LabelRules label_rules(const Options& o) {
    return o.label_rules_file.empty() ? LabelRules::defaults() : LabelRules::from_json(read_file(o.label_rules_file));
}

int cmd_label(const Options& o) {
    const auto rules = label_rules(o);
    check_inputs(o);
    if (o.output_dir.empty()) throw ConfigError("label needs --output-dir");
    auto res = ingest({o.inputs.begin(), o.inputs.end()}, o.workers);
    std::map<std::string, std::size_t> counts;
    for (auto& r : res.records) {
        r = label(std::move(r), rules);
        ++counts[std::string(to_string(*r.label))];
        for (Category c : r.categories) ++counts[std::string(to_string(c))];
    }
    write_chunks(res.records, o.output_dir, o.chunk_size);
    for (const auto& [k, n] : counts) std::cout << k << '=' << n << '\n';
    return exit_ok;
}

std::vector<std::size_t> parse_weights(const std::string& text) {
    std::vector<std::size_t> out;
    if (text.empty()) return out;
    for (const auto& w : split(text, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoull(w, &used));
            if (used != w.size()) throw std::invalid_argument(w);
        } catch (const std::exception&) {
            throw ConfigError("--weights: '" + w + "' is not a non-negative integer");
        }
    }
    if (out.size() != std::size(all_categories))
        throw ConfigError("--weights needs one value per category in the order Canvas,WebRTC,CanvasFont,AudioContext");
    return out;
}

int cmd_sample(const Options& o) {
    SampleConfig sc;
    sc.fp_total = o.fp_total;
    sc.non_fp_total = o.non_fp_total;
    sc.weights = parse_weights(o.weights);
    sc.strict = o.strict;
    if (o.subsets == 0) throw ConfigError("--subsets must be positive");
    check_inputs(o);
    auto res = ingest({o.inputs.begin(), o.inputs.end()}, o.workers);
    const auto result = sample(res.records, o.subsets, o.seed, sc);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
    const fs::path dir = o.output_dir.empty() ? fs::path(".") : fs::path(o.output_dir);
    for (const auto& s : result.subsets)
        write_file(dir / ("subset-" + std::to_string(s.index) + ".json"), subset_to_json(s) + "\n");
    std::cout << "subsets=" << result.subsets.size();
    for (const auto& [c, n] : result.pools) std::cout << ' ' << to_string(c) << '=' << n;
    std::cout << '\n';
    return exit_ok;
}

/// Subset membership by script id from subset-<i>.json files.
std::map<std::string, std::vector<std::string>> load_subsets(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("--subsets-dir '" + dir.string() + "' is not a directory");
    std::map<std::string, std::vector<std::string>> member;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (name.rfind("subset-", 0) == 0 && e.path().extension() == ".json") files.push_back(e.path());
    }
    if (files.empty()) throw ConfigError("no subset-<i>.json files in '" + dir.string() + "'");
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        ojson j;
        try {
            j = ojson::parse(read_file(f));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("bad subset file '" + f.string() + "': " + e.what());
        }
        const std::string index = std::to_string(j.at("index").get<std::size_t>());
        for (const char* key : {"fp", "non_fp"})
            for (const auto& id : j.at(key)) member[id.get<std::string>()].push_back(index);
    }
    return member;
}

void emit_table(const Options& o, const AggregateTable& t, TableKind kind, const fs::path& dir, const std::string& name) {
    const auto csv = aggregate_csv(t, kind);
    const auto json = aggregate_json(t, kind);
    write_file(dir / (name + ".csv"), csv);
    write_file(dir / (name + ".json"), json + "\n");
    std::cout << (o.json ? json + "\n" : csv);
}

int cmd_metrics(const Options& o) {
    auto conv = make_conversion(o);
    check_inputs(o);
    std::map<std::string, std::vector<std::string>> member;
    if (!o.subsets_dir.empty()) member = load_subsets(o.subsets_dir);
    const auto rules = label_rules(o);
    auto res = ingest({o.inputs.begin(), o.inputs.end()}, o.workers);
    std::vector<SourceScript> scripts;
    std::map<std::string, std::vector<Category>> categories;
    for (auto& r : res.records) {
        if (!o.subsets_dir.empty() && !member.count(r.script.id())) continue;
        if (!r.label) r = label(std::move(r), rules);
        categories[r.script.id()] = r.categories;
        scripts.push_back(std::move(r.script));
    }
    if (scripts.empty()) throw ConfigError("no input script is a member of any subset");
    const auto results = run_pipeline(scripts, conv->config, o.workers);
    std::vector<ConversionReport> reports;
    for (const auto& r : results) reports.push_back(r.report);

    const fs::path dir = o.output_dir.empty() ? fs::path(".") : fs::path(o.output_dir);
    std::string lines;
    for (const auto& r : reports) lines += report_json(r) + "\n";
    write_file(dir / "reports.jsonl", lines);
    write_file(dir / "reports.csv", reports_csv(reports));
    write_file(o.timings_file.empty() ? dir / "timings.json" : fs::path(o.timings_file), timings_json(reports));

    auto by_subset = aggregate(reports, [&](const ConversionReport& r) {
        if (o.subsets_dir.empty()) return std::vector<std::string>{"all"};
        return member.at(r.script_id);
    });
    emit_table(o, by_subset, TableKind::Subset, dir, "metrics_subset");
    bool any_category = false;
    for (const auto& [id, cs] : categories) any_category = any_category || !cs.empty();
    if (any_category) {
        auto by_category = aggregate(reports, [&](const ConversionReport& r) {
            std::vector<std::string> keys;
            for (Category c : categories.at(r.script_id)) keys.emplace_back(to_string(c));
            return keys;
        });
        emit_table(o, by_category, TableKind::Category, dir, "metrics_category");
    }
    return strict_status(o, reports);
}

int cmd_ablate(const Options& o) {
    auto conv = make_conversion(o);
    check_inputs(o);
    const auto scripts = load_scripts(o);
    if (scripts.empty()) throw ConfigError("no scripts to ablate");
    const std::vector<RuleId> rules(conv->config.rules.begin(), conv->config.rules.end());
    const auto table = ablate(scripts, rules, conv->config, o.workers);
    emit_table(o, table, TableKind::Rule, o.output_dir.empty() ? fs::path(".") : fs::path(o.output_dir), "ablation");
    return exit_ok;
}

int cmd_signals(const Options& o) {
    auto conv = make_conversion(o);
    const auto watchlist =
        o.watchlist_file.empty() ? default_watchlist() : load_watchlist(read_file(o.watchlist_file));
    if (watchlist.empty()) throw ConfigError("watchlist is empty");
    check_inputs(o);
    const auto scripts = load_scripts(o);
    const auto results = run_pipeline(scripts, conv->config, o.workers);
    std::map<std::string, SignalDelta> totals;
    for (const auto& t : watchlist) totals[t.rendered()] = SignalDelta{t, 0, 0, 0};
    ojson per_script = ojson::array();
    std::string tables;
    bool all_ok = true;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        if (!r.output) {
            all_ok = false;
            std::cerr << display_name(scripts[i]) << ": not converted\n";
            continue;
        }
        const auto deltas = evasion_report(scripts[i], *r.output, watchlist);
        for (const auto& d : deltas) {
            auto& t = totals.at(d.tuple.rendered());
            t.count_before += d.count_before;
            t.count_after += d.count_after;
            t.delta += d.delta;
        }
        per_script.push_back({{"script", display_name(scripts[i])},
                              {"script_id", scripts[i].id()},
                              {"deltas", ojson::parse(signal_report_json(deltas))}});
        tables += display_name(scripts[i]) + "\n" + signal_report_table(deltas) + "\n";
    }
    std::vector<SignalDelta> total;
    for (const auto& t : watchlist) total.push_back(totals.at(t.rendered()));
    if (o.json) {
        ojson j{{"scripts", per_script}, {"total", ojson::parse(signal_report_json(total))}};
        std::cout << j.dump(2) << '\n';
    } else {
        std::cout << tables << "all scripts\n" << signal_report_table(total);
    }
    return o.strict && !all_ok ? exit_failure : exit_ok;
}

void add_conversion_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--rules", o.rules, "'all' or comma-separated rule names");
    cmd->add_option("--translator", o.translator, "stub, service or off");
    cmd->add_option("--endpoint", o.endpoint, "chat-completion URL for --translator service");
    cmd->add_option("--model", o.model, "model name for --translator service");
    cmd->add_flag("--no-dom", o.no_dom, "disable rules that need a document");
    cmd->add_option("--api-names", o.api_names_file, "fingerprinting API names, one per line");
    cmd->add_option("--callees", o.callees_file, "sensitive callee names, one per line");
    cmd->add_option("--harness", o.harness, "runtime harness command line; enables stage 3");
    cmd->add_option("--timeout-ms", o.timeout_ms, "stage 3 per-script timeout");
    cmd->add_option("--timings", o.timings_file, "where to write timings.json");
}

void add_common_flags(CLI::App* cmd, Options& o, bool inputs_required = true) {
    auto* in = cmd->add_option("inputs", o.inputs, "script files, directories or corpus-<k>.json chunks");
    if (inputs_required) in->required();
    cmd->add_option("-o,--output-dir", o.output_dir, "output directory");
    cmd->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
    cmd->add_flag("--strict", o.strict, "exit 1 on any script-level failure");
    cmd->add_flag("--json", o.json, "machine-readable output");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Convert JavaScript into WebAssembly-backed equivalents and measure the result"};
    app.require_subcommand(1);
    Options o;

    auto* convert = app.add_subcommand("convert", "convert scripts; writes <name>.obf.js, .plan.json and .wasm");
    add_common_flags(convert, o);
    add_conversion_flags(convert, o);

    auto* validate_cmd = app.add_subcommand("validate", "run the validation stages on converted scripts");
    add_common_flags(validate_cmd, o);
    validate_cmd->add_option("--harness", o.harness, "runtime harness command line; enables stage 3");
    validate_cmd->add_option("--timeout-ms", o.timeout_ms, "stage 3 per-script timeout");

    auto* ingest_cmd = app.add_subcommand("ingest", "normalize, hash and deduplicate scripts into chunk files");
    add_common_flags(ingest_cmd, o);
    ingest_cmd->add_option("--chunk-size", o.chunk_size, "records per chunk");

    auto* label_cmd = app.add_subcommand("label", "assign fingerprinting labels and categories");
    add_common_flags(label_cmd, o);
    label_cmd->add_option("--label-rules", o.label_rules_file, "category rules as JSON");
    label_cmd->add_option("--chunk-size", o.chunk_size, "records per chunk");

    auto* sample_cmd = app.add_subcommand("sample", "draw stratified subsets; writes subset-<i>.json");
    add_common_flags(sample_cmd, o);
    sample_cmd->add_option("--subsets", o.subsets, "number of subsets");
    sample_cmd->add_option("--seed", o.seed, "RNG seed");
    sample_cmd->add_option("--fp-total", o.fp_total, "fingerprinting scripts per subset");
    sample_cmd->add_option("--non-fp-total", o.non_fp_total, "non-fingerprinting scripts per subset");
    sample_cmd->add_option("--weights", o.weights, "stratum weights in the order Canvas,WebRTC,CanvasFont,AudioContext");

    auto* metrics_cmd = app.add_subcommand("metrics", "convert, validate and aggregate per subset and category");
    add_common_flags(metrics_cmd, o);
    add_conversion_flags(metrics_cmd, o);
    metrics_cmd->add_option("--subsets-dir", o.subsets_dir, "directory holding subset-<i>.json files");
    metrics_cmd->add_option("--label-rules", o.label_rules_file, "category rules as JSON");

    auto* ablate_cmd = app.add_subcommand("ablate", "one conversion run per rule; writes ablation.csv/json");
    add_common_flags(ablate_cmd, o);
    add_conversion_flags(ablate_cmd, o);

    auto* signals_cmd = app.add_subcommand("signals", "watchlist tuple counts before and after conversion");
    add_common_flags(signals_cmd, o);
    add_conversion_flags(signals_cmd, o);
    signals_cmd->add_option("--watchlist", o.watchlist_file, "Kind:token per line");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    try {
        if (*convert) return cmd_convert(o);
        if (*validate_cmd) return cmd_validate(o);
        if (*ingest_cmd) return cmd_ingest(o);
        if (*label_cmd) return cmd_label(o);
        if (*sample_cmd) return cmd_sample(o);
        if (*metrics_cmd) return cmd_metrics(o);
        if (*ablate_cmd) return cmd_ablate(o);
        if (*signals_cmd) return cmd_signals(o);
    } catch (const ConfigError& e) {
        std::cerr << "fpwasm: configuration error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "fpwasm: " << e.what() << '\n';
        return exit_failure;
    }
    return exit_config;
}
