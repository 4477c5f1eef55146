#pragma once

#include "fpwasm/assembler.hpp"
#include "fpwasm/ast.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace fpwasm {

struct AstTuple {
    std::string node_kind;
    std::string token;

    std::string rendered() const { return node_kind + ":" + token; }
    /// Splits "Kind:token" at the first colon. Throws ConfigError.
    static AstTuple parse(std::string_view rendered);

    friend auto operator<=>(const AstTuple&, const AstTuple&) = default;
};

/// One emitted tuple and the span of the token node it came from.
struct TupleOccurrence {
    AstTuple tuple;
    Span span;
};

/// Emission, in document order:
///   MemberExpression  property name (identifier, or string literal when
///                     computed) and the object name when it is a bare
///                     identifier
///   CallExpression    callee name (identifier, or member property) and each
///                     identifier-like string literal argument
///   Property          key name (identifier or string/number literal)
///   BinaryExpression  each operand that is an identifier or a member with a
///                     named property
std::vector<TupleOccurrence> extract_tuple_occurrences(const Node& root);

using TupleCounts = std::map<std::string, std::size_t>;  // rendered -> count

TupleCounts extract_tuples(const Node& root);

struct VectorizedCorpus {
    /// Ranked by total count descending, ties lexicographic.
    std::vector<std::string> vocabulary;
    /// counts[doc][column]
    std::vector<std::vector<std::size_t>> counts;
};

/// Throws RangeError when cap is 0 or docs is empty.
VectorizedCorpus vectorize(const std::vector<TupleCounts>& docs, std::size_t vocab_cap = 5000);

struct SignalDelta {
    AstTuple tuple;
    long count_before = 0;
    long count_after = 0;
    long delta = 0;  // after - before
};

/// Top-ten tuples of the feature-importance table, in table order.
const std::vector<AstTuple>& default_watchlist();
/// One "Kind:token" per line; blank lines and '#' comments are skipped.
std::vector<AstTuple> load_watchlist(std::string_view text);

/// Counts each watchlist tuple in the original and in the full converted
/// text. Throws ParseError when either does not parse.
std::vector<SignalDelta> evasion_report(const SourceScript& original, const ObfuscatedScript& converted,
                                        const std::vector<AstTuple>& watchlist = default_watchlist());

std::string signal_report_json(const std::vector<SignalDelta>& deltas);
/// Aligned text table with a trailing total row.
std::string signal_report_table(const std::vector<SignalDelta>& deltas);

/// For each kept Rule 10/12/13 artifact: watchlist tuples of the original
/// inside its span, and watchlist tuples found in its glue once spliced.
struct SpanSuppression {
    RuleId rule;
    Span span;
    std::size_t before = 0;
    std::size_t in_glue = 0;
};

std::vector<SpanSuppression> span_suppression(const SourceScript& original, const PatchPlan& plan,
                                              const std::vector<AstTuple>& watchlist = default_watchlist());

}  // namespace fpwasm
