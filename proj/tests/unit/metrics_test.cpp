#include "fpwasm/errors.hpp"
#include "fpwasm/metrics.hpp"
#include "fpwasm/parser.hpp"
#include "fpwasm/pipeline.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>

using namespace fpwasm;

namespace {

ConversionReport fake(double cov, bool success, double conv, double val, double size) {
    ConversionReport r;
    r.coverage_pct = cov;
    r.success = success;
    r.stage_reached = StageReached::Stage3;
    r.conversion_time_s = conv;
    r.validation_time_s = val;
    r.size_change_pct = size;
    return r;
}

std::vector<SourceScript> mini_corpus() {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(fs::path(FPWASM_FIXTURES) / "corpus")) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<SourceScript> out;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        out.emplace_back(std::string(std::istreambuf_iterator<char>(in), {}));
    }
    return out;
}

}  // namespace

TEST(Formulas, Arithmetic) {
    EXPECT_DOUBLE_EQ(coverage_pct(250, 1000), 25.0);
    EXPECT_DOUBLE_EQ(relative_increase_pct(1000, 1245), 24.5);
    EXPECT_DOUBLE_EQ(relative_increase_pct(1000, 543), -45.7);
    EXPECT_DOUBLE_EQ(success_rate_pct(429, 500), 85.8);
    EXPECT_EQ(coverage_pct(5, 0), 0.0);
    EXPECT_EQ(relative_increase_pct(0, 10), 0.0);
    EXPECT_EQ(success_rate_pct(0, 0), 0.0);
}

TEST(MeanSd, TwoPointAndSingle) {
    auto m = mean_sd({80, 90});
    EXPECT_DOUBLE_EQ(m.mean, 85);
    EXPECT_NEAR(m.sd, 7.0710678118654755, 1e-12);
    EXPECT_TRUE(m.sd_defined);
    auto one = mean_sd({42});
    EXPECT_EQ(one.mean, 42);
    EXPECT_EQ(one.sd, 0);
    EXPECT_FALSE(one.sd_defined);
}

TEST(Aggregate, SpreadsheetOracle) {
    std::vector<ConversionReport> reports{fake(10, true, 1, 0.5, 20), fake(30, false, 3, 0.7, -10),
                                          fake(50, true, 2, 0.2, 5)};
    ConversionReport ex;
    ex.excluded_reason = "ParseError";
    reports.insert(reports.begin() + 1, ex);
    const std::vector<std::string> group{"A", "A", "A", "B"};
    std::map<const ConversionReport*, std::string> key;
    for (std::size_t i = 0; i < reports.size(); ++i) key[&reports[i]] = group[i];
    auto t = aggregate(reports, [&](const ConversionReport& r) { return std::vector<std::string>{key.at(&r)}; });
    ASSERT_EQ(t.rows.size(), 2u);
    const auto& a = t.rows[0];
    EXPECT_EQ(a.total, 4u - 1u);
    EXPECT_EQ(a.excluded, 1u);
    EXPECT_NEAR(a.success_rate_pct, 50.0, 1e-9);
    EXPECT_NEAR(a.mean_coverage_pct, 20.0, 1e-9);
    EXPECT_NEAR(a.mean_conv_time_s, 2.0, 1e-9);
    EXPECT_NEAR(a.mean_val_time_s, 0.6, 1e-9);
    EXPECT_NEAR(a.mean_size_change_pct, 5.0, 1e-9);
    EXPECT_NEAR(t.success_rate_pct.mean, 75.0, 1e-9);
    EXPECT_NEAR(t.success_rate_pct.sd, 35.35533905932738, 1e-9);
    EXPECT_NEAR(t.coverage_pct.mean, 35.0, 1e-9);
    EXPECT_NEAR(t.coverage_pct.sd, 21.213203435596427, 1e-9);
    EXPECT_NEAR(t.val_time_s.sd, 0.28284271247461906, 1e-9);
    EXPECT_NEAR(t.size_change_pct.sd, 0.0, 1e-9);
    EXPECT_THROW(aggregate({}, [](const ConversionReport&) { return std::vector<std::string>{}; }), RangeError);
}

TEST(Aggregate, InfraErrorsLeaveDenominator) {
    auto ok = fake(1, true, 0, 0, 0);
    auto infra = fake(1, false, 0, 0, 0);
    infra.infra_error = true;
    auto t = aggregate({ok, infra}, [](const ConversionReport&) { return std::vector<std::string>{"g"}; });
    EXPECT_DOUBLE_EQ(t.rows[0].success_rate_pct, 100.0);
    EXPECT_EQ(t.rows[0].infra_errors, 1u);
    EXPECT_FALSE(t.success_rate_pct.sd_defined);
}

TEST(Aggregate, PublishedSubsetTable) {
    const double rows[10][5] = {{84.05, 20.21, 3.22, 0.69, 26.02}, {86.75, 25.43, 3.75, 0.72, 19.47},
                                {88.51, 21.46, 3.64, 0.65, 22.97}, {84.42, 28.40, 3.40, 0.74, 27.91},
                                {86.14, 28.01, 3.39, 0.77, 32.99}, {85.80, 24.45, 3.60, 0.68, 15.53},
                                {85.33, 30.01, 3.07, 0.74, 30.14}, {85.71, 22.10, 3.45, 0.65, 17.99},
                                {85.92, 23.91, 2.83, 0.72, 34.65}, {84.93, 26.07, 4.13, 0.59, 17.69}};
    std::vector<AggregateRow> in;
    for (int i = 0; i < 10; ++i) {
        AggregateRow r;
        r.group = std::to_string(i + 1);
        r.success_rate_pct = rows[i][0];
        r.mean_coverage_pct = rows[i][1];
        r.mean_conv_time_s = rows[i][2];
        r.mean_val_time_s = rows[i][3];
        r.mean_size_change_pct = rows[i][4];
        in.push_back(r);
    }
    auto t = aggregate_rows(in);
    EXPECT_NEAR(t.success_rate_pct.mean, 85.76, 0.01);
    EXPECT_NEAR(t.success_rate_pct.sd, 1.26, 0.01);
    EXPECT_NEAR(t.coverage_pct.mean, 25.01, 0.01);
    EXPECT_NEAR(t.coverage_pct.sd, 3.20, 0.01);
    EXPECT_NEAR(t.conv_time_s.mean, 3.45, 0.01);
    EXPECT_NEAR(t.conv_time_s.sd, 0.36, 0.01);
    EXPECT_NEAR(t.val_time_s.mean, 0.70, 0.01);
    EXPECT_NEAR(t.val_time_s.sd, 0.05, 0.01);
    EXPECT_NEAR(t.size_change_pct.mean, 24.54, 0.01);
    EXPECT_NEAR(t.size_change_pct.sd, 6.81, 0.01);

    auto csv = aggregate_csv(t, TableKind::Subset);
    EXPECT_EQ(csv.rfind("sample_subset_no,total,success_rate_pct,conversion_coverage_pct", 0), 0u);
    auto json = nlohmann::json::parse(aggregate_json(t, TableKind::Rule));
    EXPECT_TRUE(json["rows"][0].contains("size_difference_pct"));
    EXPECT_NEAR(json["summary"]["success_rate_pct"]["mean"].get<double>(), 85.756, 1e-9);
}

TEST(Report, FromRealConversion) {
    SourceScript s("let x = 42;\nconsole.log(x);\n");
    auto root = parse(s);
    auto candidates = apply_all(*root, s, {RuleId::ReplaceLiteralsRecursive}, nullptr);
    auto plan = plan_patch(candidates);
    auto obf = assemble(s, plan);
    auto outcome = validate(obf, nullptr);
    auto r = report(s, candidates, plan, obf, outcome, {0.1, 0.2});
    EXPECT_EQ(r.script_id, s.id());
    // the whole declaration statement is replaced
    EXPECT_EQ(r.chars_transformed, 11u);
    EXPECT_NEAR(r.coverage_pct, 100.0 * 11 / 28, 1e-12);
    EXPECT_NEAR(r.size_change_pct, relative_increase_pct(s.byte_len(), obf.text.size()), 1e-12);
    EXPECT_LT(r.sidecar_output_bytes, r.output_bytes);
    EXPECT_TRUE(r.success);
    EXPECT_EQ(r.stage_reached, StageReached::Stage2);
    EXPECT_EQ(r.per_rule_kept.at(RuleId::ReplaceLiteralsRecursive), 1u);
    auto j = nlohmann::json::parse(report_json(r));
    EXPECT_EQ(j["stage_reached"], "2");

    SourceScript none("foo();");
    auto nplan = plan_patch({});
    auto nobf = assemble(none, nplan);
    auto nr = report(none, {}, nplan, nobf, validate(nobf, nullptr), {});
    EXPECT_EQ(nr.coverage_pct, 0.0);
    EXPECT_EQ(nr.size_change_pct, 0.0);
    EXPECT_TRUE(nr.success);
}

TEST(Pipeline, ExclusionAndBounds) {
    auto scripts = mini_corpus();
    scripts.emplace_back("let x = ;");
    scripts.emplace_back(std::string(150 * 1024, ' '));
    auto results = run_pipeline(scripts, PipelineConfig{}, 4);
    ASSERT_EQ(results.size(), scripts.size());
    std::vector<ConversionReport> reports;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i].report;
        EXPECT_EQ(r.script_id, scripts[i].id());
        EXPECT_GE(r.coverage_pct, 0.0);
        EXPECT_LE(r.coverage_pct, 100.0);
        reports.push_back(r);
    }
    EXPECT_EQ(results[12].report.stage_reached, StageReached::Excluded);
    EXPECT_EQ(results[13].report.stage_reached, StageReached::Excluded);
    auto t = aggregate(reports, [](const ConversionReport&) { return std::vector<std::string>{"all"}; });
    EXPECT_EQ(t.rows[0].excluded, 2u);
    EXPECT_DOUBLE_EQ(t.rows[0].success_rate_pct, 100.0);
}

TEST(Pipeline, SingleRuleCoverageBoundedByAllRules) {
    auto scripts = mini_corpus();
    auto all = run_pipeline(scripts, PipelineConfig{}, 4);
    for (RuleId rule : all_rules()) {
        PipelineConfig one;
        one.rules = {rule};
        auto single = run_pipeline(scripts, one, 4);
        for (std::size_t i = 0; i < scripts.size(); ++i)
            EXPECT_LE(single[i].report.coverage_pct, all[i].report.coverage_pct + 1e-9)
                << to_string(rule) << " script " << i;
    }
}

TEST(Pipeline, AblateShape) {
    auto scripts = mini_corpus();
    std::vector<RuleId> rules(all_rules().begin(), all_rules().end());
    auto t = ablate(scripts, rules, PipelineConfig{}, 4);
    ASSERT_EQ(t.rows.size(), 14u);
    EXPECT_EQ(t.rows[0].group, "replace_literals_recursive");
    for (const auto& r : t.rows) EXPECT_EQ(r.total, scripts.size());

    auto none = ablate({SourceScript("foo();")}, {RuleId::ReplaceClassDefs}, PipelineConfig{});
    EXPECT_EQ(none.rows[0].mean_coverage_pct, 0.0);
}
