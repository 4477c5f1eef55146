#pragma once

#include "fpwasm/assembler.hpp"
#include "fpwasm/harness.hpp"

#include <optional>
#include <string>

namespace fpwasm {

enum class StageStatus : std::uint8_t {
    Pass,
    Fail,
    Skipped,     // not configured (stage 3 without a harness)
    NotRun,      // an earlier stage failed
    InfraError,  // harness crash, protocol error, or missed deadline
};

std::string_view to_string(StageStatus s) noexcept;

struct StageTimings {
    double stage1_s = 0;
    double stage2_s = 0;
    double stage3_s = 0;

    double total() const noexcept { return stage1_s + stage2_s + stage3_s; }
};

struct ValidationOutcome {
    StageStatus stage1_compile = StageStatus::NotRun;
    StageStatus stage2_parse = StageStatus::NotRun;
    StageStatus stage3_execute = StageStatus::NotRun;
    std::optional<std::string> error;
    std::optional<HarnessResponse> harness_response;
    StageTimings timings;

    /// Every attempted stage passed; stage 3 passed or was skipped.
    bool success() const noexcept;
    /// Excluded from success-rate denominators.
    bool infra_error() const noexcept { return stage3_execute == StageStatus::InfraError; }
};

struct ValidationConfig {
    int timeout_ms = 5000;
    /// Fail with HarnessUnavailable instead of skipping stage 3.
    bool require_harness = false;
    bool collect_fingerprint = false;
    bool monitor_apis = false;
};

/// Stage 1 decodes and validates the embedded module, stage 2 re-parses the
/// output text, stage 3 executes it through the harness. Scripts without
/// an embedded module pass stage 1 trivially.
ValidationOutcome validate(const ObfuscatedScript& obf, HarnessClient* harness, const ValidationConfig& config = {});

}  // namespace fpwasm
