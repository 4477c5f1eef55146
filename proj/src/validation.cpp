#include "fpwasm/validation.hpp"

#include "fpwasm/errors.hpp"
#include "fpwasm/parser.hpp"
#include "fpwasm/wasm.hpp"

#include <chrono>

namespace fpwasm {

std::string_view to_string(StageStatus s) noexcept {
    switch (s) {
    case StageStatus::Pass: return "pass";
    case StageStatus::Fail: return "fail";
    case StageStatus::Skipped: return "skipped";
    case StageStatus::NotRun: return "not_run";
    case StageStatus::InfraError: return "infra_error";
    }
    return "?";
}

bool ValidationOutcome::success() const noexcept {
    return stage1_compile == StageStatus::Pass && stage2_parse == StageStatus::Pass &&
           (stage3_execute == StageStatus::Pass || stage3_execute == StageStatus::Skipped);
}

namespace {

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string stage1(const ObfuscatedScript& obf) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = extract_embedded_bytes(obf.text);
    } catch (const ExtractError& e) {
        if (obf.embedded_module.empty()) return {};
        return e.what();
    }
    if (bytes != obf.embedded_module) return "embedded bytes differ from the synthesized module";
    try {
        const auto problems = validate(decode(bytes));
        if (!problems.empty()) return "invalid module: " + problems.front();
    } catch (const DecodeError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

ValidationOutcome validate(const ObfuscatedScript& obf, HarnessClient* harness, const ValidationConfig& config) {
    if (config.require_harness && !harness) throw HarnessUnavailable("stage 3 requested but no harness configured");
    ValidationOutcome out;

    Stopwatch s1;
    std::string problem = stage1(obf);
    out.timings.stage1_s = s1.seconds();
    if (!problem.empty()) {
        out.stage1_compile = StageStatus::Fail;
        out.error = "stage 1: " + problem;
        return out;
    }
    out.stage1_compile = StageStatus::Pass;

    Stopwatch s2;
    try {
        parse_text(std::string_view(obf.text));
        out.stage2_parse = StageStatus::Pass;
    } catch (const ParseError& e) {
        out.stage2_parse = StageStatus::Fail;
        out.error = std::string("stage 2: ") + e.what();
    }
    out.timings.stage2_s = s2.seconds();
    if (out.stage2_parse != StageStatus::Pass) return out;

    if (!harness) {
        out.stage3_execute = StageStatus::Skipped;
        return out;
    }
    Stopwatch s3;
    HarnessRequest req;
    req.id = obf.original_id;
    req.script = obf.text;
    req.timeout_ms = config.timeout_ms;
    req.collect_fingerprint = config.collect_fingerprint;
    req.monitor_apis = config.monitor_apis;
    HarnessResult r = harness->execute(std::move(req));
    out.timings.stage3_s = s3.seconds();
    if (r.is_infra_error()) {
        out.stage3_execute = StageStatus::InfraError;
        out.error = "stage 3 infrastructure: " + r.infra_error;
        return out;
    }
    out.harness_response = r.response;
    if (r.response->status == HarnessStatus::Ok) {
        out.stage3_execute = StageStatus::Pass;
    } else {
        out.stage3_execute = StageStatus::Fail;
        out.error = "stage 3 " + std::string(to_string(r.response->status)) +
                    (r.response->error ? ": " + *r.response->error : std::string());
    }
    return out;
}

}  // namespace fpwasm
