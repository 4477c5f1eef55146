#include "fpwasm/pipeline.hpp"

#include "fpwasm/errors.hpp"
#include "fpwasm/parser.hpp"

#include <atomic>
#include <chrono>
#include <thread>

namespace fpwasm {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

ScriptResult run_script(const SourceScript& script, const PipelineConfig& config) {
    ScriptResult r{script, {}, {}, std::nullopt, {}, {}};
    const auto t0 = std::chrono::steady_clock::now();
    NodePtr root;
    try {
        root = parse(script);
    } catch (const OversizeError& e) {
        r.report = excluded_report(script, e.what());
        return r;
    } catch (const ParseError& e) {
        r.report = excluded_report(script, e.what());
        return r;
    }
    r.candidates = apply_all(*root, script, config.rules, config.translator, config.rule_config);
    std::optional<std::string> failure;
    try {
        r.plan = plan_patch(r.candidates);
        r.output = assemble(script, r.plan);
    } catch (const Error& e) {
        failure = e.what();
    }
    ConversionTimings timings;
    timings.conversion_s = seconds_since(t0);

    if (failure) {
        r.outcome.stage1_compile = StageStatus::Fail;
        r.outcome.error = "stage 1: " + *failure;
        r.report = report(script, r.candidates, r.plan, ObfuscatedScript{script.text(), {}, script.id()}, r.outcome,
                          timings);
        return r;
    }
    const auto t1 = std::chrono::steady_clock::now();
    r.outcome = validate(*r.output, config.harness, config.validation);
    timings.validation_s = seconds_since(t1);
    r.report = report(script, r.candidates, r.plan, *r.output, r.outcome, timings);
    return r;
}

std::vector<ScriptResult> run_pipeline(const std::vector<SourceScript>& scripts, const PipelineConfig& config,
                                       unsigned workers) {
    std::vector<std::optional<ScriptResult>> slots(scripts.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < scripts.size();) slots[i] = run_script(scripts[i], config);
    };
    const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(scripts.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    std::vector<ScriptResult> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

AggregateTable ablate(const std::vector<SourceScript>& scripts, const std::vector<RuleId>& rules,
                      const PipelineConfig& config, unsigned workers) {
    if (scripts.empty()) throw RangeError("ablation needs at least one script");
    std::vector<AggregateRow> rows;
    for (RuleId rule : rules) {
        PipelineConfig one = config;
        one.rules = {rule};
        std::vector<ConversionReport> reports;
        for (auto& res : run_pipeline(scripts, one, workers)) reports.push_back(std::move(res.report));
        const std::string name(to_string(rule));
        auto t = aggregate(reports, [&](const ConversionReport&) { return std::vector<std::string>{name}; });
        rows.push_back(t.rows.front());
    }
    return aggregate_rows(std::move(rows));
}

}  // namespace fpwasm
