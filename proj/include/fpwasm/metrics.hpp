#pragma once

#include "fpwasm/assembler.hpp"
#include "fpwasm/rules.hpp"
#include "fpwasm/validation.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fpwasm {

enum class StageReached : std::uint8_t { Excluded, Stage1, Stage2, Stage3 };

std::string_view to_string(StageReached s) noexcept;

/// coverage_pct = 100 * kept code points / script code points.
/// size_change_pct compares the single output file with embedded bytes;
/// size_change_sidecar_pct compares output text without the byte literal
/// plus a separate .wasm file.
struct ConversionReport {
    std::string script_id;
    std::optional<std::string> excluded_reason;
    double coverage_pct = 0;
    bool success = false;
    /// Stage 3 could not run for infrastructure reasons; such scripts are
    /// left out of success-rate denominators like excluded ones.
    bool infra_error = false;
    StageReached stage_reached = StageReached::Excluded;
    double conversion_time_s = 0;
    double validation_time_s = 0;
    std::size_t original_bytes = 0;
    std::size_t output_bytes = 0;
    std::size_t sidecar_output_bytes = 0;
    double size_change_pct = 0;
    double size_change_sidecar_pct = 0;
    std::size_t chars_original = 0;
    std::size_t chars_transformed = 0;
    std::map<RuleId, std::size_t> per_rule_matches;
    std::map<RuleId, std::size_t> per_rule_kept;
    std::optional<std::string> error;
};

struct ConversionTimings {
    double conversion_s = 0;
    double validation_s = 0;
};

double coverage_pct(std::size_t chars_transformed, std::size_t chars_original) noexcept;
/// (after - before) / before * 100; 0 when before is 0.
double relative_increase_pct(std::size_t before, std::size_t after) noexcept;
/// 100 * passing / counted; 0 when counted is 0.
double success_rate_pct(std::size_t passing, std::size_t counted) noexcept;

/// `candidates` are the apply_all results before overlap filtering.
ConversionReport report(const SourceScript& script, const std::vector<TransformArtifact>& candidates,
                        const PatchPlan& plan, const ObfuscatedScript& output, const ValidationOutcome& outcome,
                        const ConversionTimings& timings);
ConversionReport excluded_report(const SourceScript& script, std::string reason);

struct MeanSd {
    double mean = 0;
    double sd = 0;
    /// False for fewer than two values; sd is then 0.
    bool sd_defined = false;
};

/// Sample standard deviation (n - 1 denominator).
MeanSd mean_sd(const std::vector<double>& values);

struct AggregateRow {
    std::string group;
    std::size_t total = 0;
    std::size_t excluded = 0;
    std::size_t infra_errors = 0;
    std::size_t passing = 0;
    double success_rate_pct = 0;
    double mean_coverage_pct = 0;
    double mean_conv_time_s = 0;
    double mean_val_time_s = 0;
    double mean_size_change_pct = 0;
    double mean_size_change_sidecar_pct = 0;
};

struct AggregateTable {
    std::vector<AggregateRow> rows;
    /// Across-row statistics for each averaged column.
    MeanSd success_rate_pct, coverage_pct, conv_time_s, val_time_s, size_change_pct;
};

using GroupKey = std::function<std::vector<std::string>(const ConversionReport&)>;

/// Per-group means over non-excluded reports (rows in key order), then the
/// mean and sample SD across rows. A report may belong to several groups.
/// Throws RangeError on an empty report set.
AggregateTable aggregate(const std::vector<ConversionReport>& reports, const GroupKey& key);
/// Rows given directly, e.g. a published table.
AggregateTable aggregate_rows(std::vector<AggregateRow> rows);

enum class TableKind { Subset, Category, Rule };

/// Column names follow the corresponding published table headers.
std::string aggregate_csv(const AggregateTable& table, TableKind kind);
std::string aggregate_json(const AggregateTable& table, TableKind kind);
std::string report_json(const ConversionReport& r);
/// Timing fields are left out of both; see timings_json.
std::string reports_csv(const std::vector<ConversionReport>& reports);
/// {script_id: {conversion_s, validation_s}} in input order.
std::string timings_json(const std::vector<ConversionReport>& reports);

}  // namespace fpwasm
