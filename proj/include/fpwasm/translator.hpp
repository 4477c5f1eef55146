#pragma once

#include "fpwasm/ir.hpp"

#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

namespace fpwasm {

struct Node;

struct TranslationRequest {
    std::string function_source;
    std::string target_name;
    std::chrono::milliseconds timeout{30000};
};

enum class TranslationStatus : std::uint8_t { Ok, Declined, Error };

std::string_view to_string(TranslationStatus s) noexcept;

/// status == Ok implies function_ir is present and passes module synthesis.
struct TranslationResult {
    TranslationStatus status = TranslationStatus::Declined;
    std::optional<FunctionIR> function_ir;
    std::optional<std::string> raw_text;
    std::string reason;
};

enum class TranslatorMode : std::uint8_t { Stub, Service, Off };

std::string_view to_string(TranslatorMode m) noexcept;
/// Accepts "stub", "service", "off"; throws ConfigError otherwise.
TranslatorMode parse_translator_mode(std::string_view text);

struct ServiceConfig {
    std::string endpoint;  // http(s)://host[:port]/path of a chat-completion API
    std::string model;
    std::string token_env = "FPWASM_TRANSLATOR_TOKEN";
    std::chrono::milliseconds timeout{30000};
    /// Transport failures yield Error instead of Declined.
    bool strict = false;
};

class Translator {
public:
    virtual ~Translator() = default;
    virtual TranslationResult translate(const TranslationRequest& req) = 0;
    virtual TranslatorMode mode() const noexcept = 0;
};

/// System message sent with every service request.
std::string translation_prompt(std::string_view target_name);

/// Deterministic built-in translator for pure single-return numeric
/// functions. Parameters are i32 unless a fractional literal or `/` occurs,
/// in which case everything is f64.
TranslationResult translate_stub(const TranslationRequest& req);
/// Same, on an already parsed function node.
TranslationResult translate_stub(const Node& function);

/// Code inside the first fenced block, or the whole text when unfenced.
std::string extract_code_block(std::string_view text);

/// Parses one exported AssemblyScript function restricted to the FunctionIR
/// grammar. Throws ParseError on anything outside it. `name_out` receives
/// the declared function name.
FunctionIR parse_assemblyscript_function(std::string_view text, std::string* name_out = nullptr);

/// Wraps `parse_assemblyscript_function` and a throwaway synthesis; any
/// failure is Declined.
TranslationResult accept_service_output(std::string raw_text);

std::unique_ptr<Translator> make_translator(TranslatorMode mode, const ServiceConfig& config = {});

/// Per-run memo keyed by (function source, target name).
class MemoTranslator : public Translator {
public:
    explicit MemoTranslator(std::unique_ptr<Translator> inner) : inner_(std::move(inner)) {}
    TranslationResult translate(const TranslationRequest& req) override;
    TranslatorMode mode() const noexcept override { return inner_->mode(); }

private:
    std::unique_ptr<Translator> inner_;
    std::mutex mu_;
    std::unordered_map<std::string, TranslationResult> memo_;
};

}  // namespace fpwasm
