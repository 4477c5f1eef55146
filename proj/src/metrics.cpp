#include "fpwasm/metrics.hpp"

#include "fpwasm/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

namespace fpwasm {

using ojson = nlohmann::ordered_json;

std::string_view to_string(StageReached s) noexcept {
    switch (s) {
    case StageReached::Excluded: return "excluded";
    case StageReached::Stage1: return "1";
    case StageReached::Stage2: return "2";
    case StageReached::Stage3: return "3";
    }
    return "?";
}

double coverage_pct(std::size_t chars_transformed, std::size_t chars_original) noexcept {
    if (chars_original == 0) return 0;
    return 100.0 * static_cast<double>(chars_transformed) / static_cast<double>(chars_original);
}

double relative_increase_pct(std::size_t before, std::size_t after) noexcept {
    if (before == 0) return 0;
    return 100.0 * (static_cast<double>(after) - static_cast<double>(before)) / static_cast<double>(before);
}

double success_rate_pct(std::size_t passing, std::size_t counted) noexcept {
    if (counted == 0) return 0;
    return 100.0 * static_cast<double>(passing) / static_cast<double>(counted);
}

namespace {

// Byte length of the embedded `new Uint8Array([...])` literal, 0 if absent.
std::size_t embedded_literal_bytes(const std::string& text) {
    const std::string open = "new Uint8Array([";
    const auto b = text.find(open);
    if (b == std::string::npos) return 0;
    const auto e = text.find("])", b + open.size());
    if (e == std::string::npos) return 0;
    return e + 2 - b;
}

StageReached reached(const ValidationOutcome& o) {
    if (o.stage3_execute != StageStatus::NotRun && o.stage3_execute != StageStatus::Skipped) return StageReached::Stage3;
    if (o.stage2_parse != StageStatus::NotRun) return StageReached::Stage2;
    return StageReached::Stage1;
}

}  // namespace

ConversionReport report(const SourceScript& script, const std::vector<TransformArtifact>& candidates,
                        const PatchPlan& plan, const ObfuscatedScript& output, const ValidationOutcome& outcome,
                        const ConversionTimings& timings) {
    ConversionReport r;
    r.script_id = script.id();
    r.chars_original = script.length();
    for (const auto& a : plan.kept) {
        r.chars_transformed += a.span.length();
        ++r.per_rule_kept[a.rule];
    }
    for (const auto& a : candidates) ++r.per_rule_matches[a.rule];
    r.coverage_pct = coverage_pct(r.chars_transformed, r.chars_original);
    r.success = outcome.success();
    r.infra_error = outcome.infra_error();
    r.stage_reached = reached(outcome);
    r.conversion_time_s = timings.conversion_s;
    r.validation_time_s = timings.validation_s;
    r.original_bytes = script.byte_len();
    r.output_bytes = output.text.size();
    r.sidecar_output_bytes = output.text.size() - embedded_literal_bytes(output.text) + output.embedded_module.size();
    r.size_change_pct = relative_increase_pct(r.original_bytes, r.output_bytes);
    r.size_change_sidecar_pct = relative_increase_pct(r.original_bytes, r.sidecar_output_bytes);
    r.error = outcome.error;
    return r;
}

ConversionReport excluded_report(const SourceScript& script, std::string reason) {
    ConversionReport r;
    r.script_id = script.id();
    r.excluded_reason = std::move(reason);
    r.stage_reached = StageReached::Excluded;
    r.original_bytes = script.byte_len();
    r.chars_original = script.length();
    return r;
}

MeanSd mean_sd(const std::vector<double>& values) {
    MeanSd out;
    if (values.empty()) return out;
    const double n = static_cast<double>(values.size());
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() < 2) return out;
    double ss = 0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / (n - 1));
    out.sd_defined = true;
    return out;
}

AggregateTable aggregate_rows(std::vector<AggregateRow> rows) {
    AggregateTable t;
    t.rows = std::move(rows);
    auto column = [&](double AggregateRow::*field) {
        std::vector<double> v;
        for (const auto& r : t.rows) v.push_back(r.*field);
        return mean_sd(v);
    };
    t.success_rate_pct = column(&AggregateRow::success_rate_pct);
    t.coverage_pct = column(&AggregateRow::mean_coverage_pct);
    t.conv_time_s = column(&AggregateRow::mean_conv_time_s);
    t.val_time_s = column(&AggregateRow::mean_val_time_s);
    t.size_change_pct = column(&AggregateRow::mean_size_change_pct);
    return t;
}

AggregateTable aggregate(const std::vector<ConversionReport>& reports, const GroupKey& key) {
    if (reports.empty()) throw RangeError("aggregate needs at least one report");
    std::map<std::string, std::vector<const ConversionReport*>> groups;
    for (const auto& r : reports)
        for (const auto& g : key(r)) groups[g].push_back(&r);
    std::vector<AggregateRow> rows;
    for (const auto& [name, members] : groups) {
        AggregateRow row;
        row.group = name;
        row.total = members.size();
        std::vector<double> cov, conv, val, size, sidecar;
        for (const ConversionReport* r : members) {
            if (r->excluded_reason) {
                ++row.excluded;
                continue;
            }
            cov.push_back(r->coverage_pct);
            conv.push_back(r->conversion_time_s);
            val.push_back(r->validation_time_s);
            size.push_back(r->size_change_pct);
            sidecar.push_back(r->size_change_sidecar_pct);
            if (r->infra_error) ++row.infra_errors;
            else if (r->success) ++row.passing;
        }
        row.success_rate_pct = success_rate_pct(row.passing, row.total - row.excluded - row.infra_errors);
        row.mean_coverage_pct = mean_sd(cov).mean;
        row.mean_conv_time_s = mean_sd(conv).mean;
        row.mean_val_time_s = mean_sd(val).mean;
        row.mean_size_change_pct = mean_sd(size).mean;
        row.mean_size_change_sidecar_pct = mean_sd(sidecar).mean;
        rows.push_back(std::move(row));
    }
    return aggregate_rows(std::move(rows));
}

namespace {

const char* group_column(TableKind kind) {
    switch (kind) {
    case TableKind::Subset: return "sample_subset_no";
    case TableKind::Category: return "category";
    case TableKind::Rule: return "conversion_rule";
    }
    return "group";
}

const char* size_column(TableKind kind) {
    return kind == TableKind::Rule ? "size_difference_pct" : "size_change_pct";
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string aggregate_csv(const AggregateTable& t, TableKind kind) {
    std::ostringstream o;
    o << group_column(kind) << ",total,success_rate_pct,conversion_coverage_pct,mean_conversion_time_s,"
      << "mean_validation_time_s," << size_column(kind) << "," << size_column(kind) << "_sidecar\n";
    for (const auto& r : t.rows)
        o << csv_field(r.group) << ',' << r.total << ',' << num(r.success_rate_pct) << ',' << num(r.mean_coverage_pct)
          << ',' << num(r.mean_conv_time_s) << ',' << num(r.mean_val_time_s) << ',' << num(r.mean_size_change_pct)
          << ',' << num(r.mean_size_change_sidecar_pct) << '\n';
    auto stat = [&](const char* name, double MeanSd::*f) {
        o << name << ",," << num(t.success_rate_pct.*f) << ',' << num(t.coverage_pct.*f) << ','
          << num(t.conv_time_s.*f) << ',' << num(t.val_time_s.*f) << ',' << num(t.size_change_pct.*f) << ",\n";
    };
    stat("mean", &MeanSd::mean);
    stat("sd", &MeanSd::sd);
    return o.str();
}

std::string aggregate_json(const AggregateTable& t, TableKind kind) {
    ojson rows = ojson::array();
    for (const auto& r : t.rows)
        rows.push_back({{group_column(kind), r.group},
                        {"total", r.total},
                        {"excluded", r.excluded},
                        {"infra_errors", r.infra_errors},
                        {"success_rate_pct", r.success_rate_pct},
                        {"conversion_coverage_pct", r.mean_coverage_pct},
                        {"mean_conversion_time_s", r.mean_conv_time_s},
                        {"mean_validation_time_s", r.mean_val_time_s},
                        {size_column(kind), r.mean_size_change_pct},
                        {std::string(size_column(kind)) + "_sidecar", r.mean_size_change_sidecar_pct}});
    auto ms = [](const MeanSd& m) { return ojson{{"mean", m.mean}, {"sd", m.sd}, {"sd_defined", m.sd_defined}}; };
    ojson j;
    j["rows"] = rows;
    j["summary"] = {{"success_rate_pct", ms(t.success_rate_pct)},
                    {"conversion_coverage_pct", ms(t.coverage_pct)},
                    {"mean_conversion_time_s", ms(t.conv_time_s)},
                    {"mean_validation_time_s", ms(t.val_time_s)},
                    {size_column(kind), ms(t.size_change_pct)}};
    return j.dump(2);
}

std::string report_json(const ConversionReport& r) {
    ojson j;
    j["script_id"] = r.script_id;
    j["excluded_reason"] = r.excluded_reason ? ojson(*r.excluded_reason) : ojson(nullptr);
    j["coverage_pct"] = r.coverage_pct;
    j["success"] = r.success;
    j["infra_error"] = r.infra_error;
    j["stage_reached"] = std::string(to_string(r.stage_reached));
    j["chars_original"] = r.chars_original;
    j["chars_transformed"] = r.chars_transformed;
    j["original_bytes"] = r.original_bytes;
    j["output_bytes"] = r.output_bytes;
    j["sidecar_output_bytes"] = r.sidecar_output_bytes;
    j["size_change_pct"] = r.size_change_pct;
    j["size_change_sidecar_pct"] = r.size_change_sidecar_pct;
    ojson matches = ojson::object(), kept = ojson::object();
    for (const auto& [rule, n] : r.per_rule_matches) matches[std::string(to_string(rule))] = n;
    for (const auto& [rule, n] : r.per_rule_kept) kept[std::string(to_string(rule))] = n;
    j["per_rule_matches"] = matches;
    j["per_rule_kept"] = kept;
    j["error"] = r.error ? ojson(*r.error) : ojson(nullptr);
    return j.dump();
}

std::string reports_csv(const std::vector<ConversionReport>& reports) {
    std::ostringstream o;
    o << "script_id,stage_reached,success,infra_error,coverage_pct,original_bytes,output_bytes,size_change_pct,"
      << "size_change_sidecar_pct,excluded_reason\n";
    for (const auto& r : reports)
        o << r.script_id << ',' << to_string(r.stage_reached) << ',' << (r.success ? "true" : "false") << ','
          << (r.infra_error ? "true" : "false") << ',' << num(r.coverage_pct) << ','
          << r.original_bytes << ',' << r.output_bytes << ','
          << num(r.size_change_pct) << ',' << num(r.size_change_sidecar_pct) << ','
          << csv_field(r.excluded_reason.value_or("")) << '\n';
    return o.str();
}

std::string timings_json(const std::vector<ConversionReport>& reports) {
    ojson j = ojson::object();
    for (const auto& r : reports)
        j[r.script_id] = {{"conversion_s", r.conversion_time_s}, {"validation_s", r.validation_time_s}};
    return j.dump(2);
}

}  // namespace fpwasm
