#pragma once

#include "fpwasm/assembler.hpp"
#include "fpwasm/metrics.hpp"
#include "fpwasm/rules.hpp"
#include "fpwasm/translator.hpp"
#include "fpwasm/validation.hpp"

#include <optional>
#include <vector>

namespace fpwasm {

struct PipelineConfig {
    RuleSet rules = all_rule_set();
    RuleConfig rule_config = RuleConfig::defaults();
    /// Null disables Rule 9. Shared across workers.
    Translator* translator = nullptr;
    /// Null skips stage 3. Shared across workers.
    HarnessClient* harness = nullptr;
    ValidationConfig validation;
};

struct ScriptResult {
    SourceScript script;
    std::vector<TransformArtifact> candidates;
    PatchPlan plan;
    /// Absent for excluded scripts and when synthesis or assembly failed.
    std::optional<ObfuscatedScript> output;
    ValidationOutcome outcome;
    ConversionReport report;
};

/// parse -> apply_all -> plan_patch -> assemble, timed as conversion, then
/// validate, timed as validation. Parse and size failures produce an
/// excluded report; synthesis and assembly failures fail stage 1.
ScriptResult run_script(const SourceScript& script, const PipelineConfig& config);

/// Results in input order.
std::vector<ScriptResult> run_pipeline(const std::vector<SourceScript>& scripts, const PipelineConfig& config,
                                       unsigned workers = 1);

/// One full pipeline run per rule with only that rule enabled; one row per
/// rule, grouped under its snake_case name.
AggregateTable ablate(const std::vector<SourceScript>& scripts, const std::vector<RuleId>& rules,
                      const PipelineConfig& config, unsigned workers = 1);

}  // namespace fpwasm
