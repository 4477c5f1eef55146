#pragma once

#include "fpwasm/ast.hpp"
#include "fpwasm/ir.hpp"
#include "fpwasm/source.hpp"

#include <array>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace fpwasm {

class Translator;

/// Ablation identifiers in rule order. Rule 3 owns two identifiers.
enum class RuleId : std::uint8_t {
    ReplaceLiteralsRecursive,          // Rule 1
    ReplaceCallee,                     // Rule 2
    ReplaceIntArrays,                  // Rule 3, integral elements
    ReplaceFloatArrays,                // Rule 3, fractional elements
    ReplaceIfElse,                     // Rule 4
    ReplaceForLoops,                   // Rule 5
    ReplaceWhileLoops,                 // Rule 6
    ReplaceFunctionCallsWithNoReturn,  // Rule 7
    ReplaceClassDefs,                  // Rule 8
    ReplaceFuncDefs,                   // Rule 9
    ReplaceCanvasApiCalls,             // Rule 10
    ObfuscateFunctions,                // Rule 11
    ReplaceWithRegex,                  // Rule 12
    ReplaceObfScreen,                  // Rule 13
};

inline constexpr std::size_t rule_count = 14;

const std::array<RuleId, rule_count>& all_rules() noexcept;
std::string_view to_string(RuleId r) noexcept;
/// Throws ConfigError for names outside the closed set.
RuleId parse_rule_id(std::string_view name);
/// 1-based rule number (both array identifiers map to 3).
int rule_number(RuleId r) noexcept;

using RuleSet = std::set<RuleId>;
RuleSet all_rule_set();

/// Where the glue text lands, used to parse it in isolation.
enum class GlueContext : std::uint8_t {
    Statement,     // replaces a whole statement
    Expression,    // replaces an expression
    MemberSuffix,  // replaces `.name` after an object expression
    Declarator,    // replaces one `id = init` inside a declaration
};

struct TransformArtifact {
    RuleId rule = RuleId::ReplaceLiteralsRecursive;
    Span span;
    std::vector<ExportIR> exports;
    std::vector<ImportDecl> imports;
    std::string glue;
    GlueContext context = GlueContext::Expression;

    friend bool operator==(const TransformArtifact&, const TransformArtifact&) = default;
};

struct RuleConfig {
    /// Rule 10 property names; Rule 13 compares decoded keys against it.
    std::vector<std::string> fp_api_names;
    /// Rule 2 callee names.
    std::vector<std::string> sensitive_callees;
    /// Rule 8 needs `document`; false disables it.
    bool dom_available = true;
    /// Propagate TranslatorUnavailable from Rule 9 instead of skipping.
    bool strict_translator = false;

    static RuleConfig defaults();
};

/// One name per line; `#` starts a comment; blank lines ignored.
std::vector<std::string> load_name_list(std::string_view text);

/// All matches of the enabled rules ordered by (span.start, rule order).
/// `translator` may be null, which disables Rule 9.
std::vector<TransformArtifact> apply_all(const Node& root, const SourceScript& script, const RuleSet& enabled,
                                         Translator* translator, const RuleConfig& config = RuleConfig::defaults());

/// Mechanical artifact check: glue parses inside its context and every
/// `instance.exports.<sym>` and bound import field resolves. Returns the
/// first problem or an empty string.
std::string check_artifact(const TransformArtifact& a);

/// Split point used by every split-string rule.
std::pair<std::string, std::string> split_half(std::string_view name);

/// Runtime names the glue relies on. Scripts declaring any of them are left
/// untransformed since their bindings would shadow the runtime. A direct eval
/// outside any function must be rewritten by ReplaceCallee, otherwise the
/// script is left untransformed.
const std::vector<std::string>& reserved_runtime_names();

}  // namespace fpwasm
