#include "fpwasm/signals.hpp"

#include "fpwasm/errors.hpp"
#include "fpwasm/parser.hpp"
#include "fpwasm/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

namespace fpwasm {

AstTuple AstTuple::parse(std::string_view rendered) {
    const auto colon = rendered.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == rendered.size())
        throw ConfigError("malformed AST tuple '" + std::string(rendered) + "'");
    return {std::string(rendered.substr(0, colon)), std::string(rendered.substr(colon + 1))};
}

namespace {

bool identifier_like(std::string_view s) {
    if (s.empty()) return false;
    auto head = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '$'; };
    if (!head(s[0])) return false;
    return std::all_of(s.begin() + 1, s.end(), [&](char c) { return head(c) || (c >= '0' && c <= '9'); });
}

bool is_string(const Node* n) { return n && n->is(NodeKind::Literal) && n->literal_type == LiteralType::String; }

// Named property of a member expression: the identifier, or the string
// literal of a computed access.
const Node* property_token(const Node& member, std::string& token) {
    const Node* p = member.child(1);
    if (!p) return nullptr;
    if (!member.computed && p->is(NodeKind::Identifier)) {
        token = p->name;
        return p;
    }
    if (member.computed && is_string(p)) {
        token = p->string_value;
        return p;
    }
    return nullptr;
}

}  // namespace

std::vector<TupleOccurrence> extract_tuple_occurrences(const Node& root) {
    std::vector<TupleOccurrence> out;
    auto emit = [&](std::string_view kind, std::string token, const Node& at) {
        out.push_back({{std::string(kind), std::move(token)}, at.span});
    };
    walk(root, [&](const Node& n, const Node*) {
        std::string token;
        switch (n.kind) {
        case NodeKind::MemberExpression:
            if (const Node* obj = n.child(0); obj && obj->is(NodeKind::Identifier)) emit("MemberExpression", obj->name, *obj);
            if (const Node* p = property_token(n, token)) emit("MemberExpression", token, *p);
            break;
        case NodeKind::CallExpression: {
            const Node* callee = n.child(0);
            if (callee && callee->is(NodeKind::Identifier)) emit("CallExpression", callee->name, *callee);
            else if (callee && callee->is(NodeKind::MemberExpression))
                if (const Node* p = property_token(*callee, token)) emit("CallExpression", token, *p);
            for (std::size_t i = 1; i < n.children.size(); ++i) {
                const Node* a = n.child(i);
                if (is_string(a) && identifier_like(a->string_value)) emit("CallExpression", a->string_value, *a);
            }
            break;
        }
        case NodeKind::Property: {
            const Node* key = n.child(0);
            if (!key) break;
            if (!n.computed && key->is(NodeKind::Identifier)) emit("Property", key->name, *key);
            else if (is_string(key)) emit("Property", key->string_value, *key);
            else if (key->is(NodeKind::Literal) && key->literal_type == LiteralType::Number) emit("Property", key->raw, *key);
            break;
        }
        case NodeKind::BinaryExpression:
            for (std::size_t i = 0; i < 2; ++i) {
                const Node* operand = n.child(i);
                if (!operand) continue;
                if (operand->is(NodeKind::Identifier)) emit("BinaryExpression", operand->name, *operand);
                else if (operand->is(NodeKind::MemberExpression))
                    if (const Node* p = property_token(*operand, token)) emit("BinaryExpression", token, *p);
            }
            break;
        default:
            break;
        }
        return true;
    });
    return out;
}

TupleCounts extract_tuples(const Node& root) {
    TupleCounts out;
    for (const auto& o : extract_tuple_occurrences(root)) ++out[o.tuple.rendered()];
    return out;
}

VectorizedCorpus vectorize(const std::vector<TupleCounts>& docs, std::size_t vocab_cap) {
    if (vocab_cap == 0) throw RangeError("vocabulary cap must be positive");
    if (docs.empty()) throw RangeError("vectorize needs at least one document");
    TupleCounts totals;
    for (const auto& d : docs)
        for (const auto& [t, c] : d) totals[t] += c;
    std::vector<std::pair<std::string, std::size_t>> ranked(totals.begin(), totals.end());
    // map iteration is lexicographic, so a stable sort keeps that as the tie order
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (ranked.size() > vocab_cap) ranked.resize(vocab_cap);
    VectorizedCorpus out;
    for (const auto& [t, c] : ranked) out.vocabulary.push_back(t);
    for (const auto& d : docs) {
        auto& row = out.counts.emplace_back(out.vocabulary.size(), 0);
        for (std::size_t k = 0; k < out.vocabulary.size(); ++k) {
            auto it = d.find(out.vocabulary[k]);
            if (it != d.end()) row[k] = it->second;
        }
    }
    return out;
}

const std::vector<AstTuple>& default_watchlist() {
    static const std::vector<AstTuple> list = [] {
        std::vector<AstTuple> v;
        for (const char* t : {"MemberExpression:screen", "MemberExpression:fillText", "CallExpression:canvas",
                              "MemberExpression:language", "MemberExpression:localStorage", "MemberExpression:appName",
                              "MemberExpression:platform", "MemberExpression:fillStyle", "MemberExpression:colorDepth",
                              "MemberExpression:fillRect"})
            v.push_back(AstTuple::parse(t));
        return v;
    }();
    return list;
}

std::vector<AstTuple> load_watchlist(std::string_view text) {
    std::vector<AstTuple> out;
    std::istringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);) {
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        const auto e = line.find_last_not_of(" \t\r");
        out.push_back(AstTuple::parse(std::string_view(line).substr(b, e - b + 1)));
    }
    return out;
}

std::vector<SignalDelta> evasion_report(const SourceScript& original, const ObfuscatedScript& converted,
                                        const std::vector<AstTuple>& watchlist) {
    const TupleCounts before = extract_tuples(*parse_text(std::string_view(original.text())));
    const TupleCounts after = extract_tuples(*parse_text(std::string_view(converted.text)));
    std::vector<SignalDelta> out;
    for (const auto& t : watchlist) {
        SignalDelta d{t, 0, 0, 0};
        if (auto it = before.find(t.rendered()); it != before.end()) d.count_before = static_cast<long>(it->second);
        if (auto it = after.find(t.rendered()); it != after.end()) d.count_after = static_cast<long>(it->second);
        d.delta = d.count_after - d.count_before;
        out.push_back(std::move(d));
    }
    return out;
}

std::string signal_report_json(const std::vector<SignalDelta>& deltas) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& d : deltas)
        arr.push_back({{"tuple", d.tuple.rendered()},
                       {"count_before", d.count_before},
                       {"count_after", d.count_after},
                       {"delta", d.delta}});
    return arr.dump(2);
}

std::string signal_report_table(const std::vector<SignalDelta>& deltas) {
    std::size_t width = 5;
    for (const auto& d : deltas) width = std::max(width, d.tuple.rendered().size());
    std::ostringstream o;
    auto row = [&](const std::string& name, const std::string& b, const std::string& a, const std::string& d) {
        o << std::left << std::setw(static_cast<int>(width)) << name << std::right << std::setw(8) << b << std::setw(8)
          << a << std::setw(8) << d << '\n';
    };
    row("tuple", "before", "after", "delta");
    long tb = 0, ta = 0;
    for (const auto& d : deltas) {
        row(d.tuple.rendered(), std::to_string(d.count_before), std::to_string(d.count_after), std::to_string(d.delta));
        tb += d.count_before;
        ta += d.count_after;
    }
    row("total", std::to_string(tb), std::to_string(ta), std::to_string(ta - tb));
    return o.str();
}

std::vector<SpanSuppression> span_suppression(const SourceScript& original, const PatchPlan& plan,
                                              const std::vector<AstTuple>& watchlist) {
    std::set<std::string> watched;
    for (const auto& t : watchlist) watched.insert(t.rendered());
    const auto before = extract_tuple_occurrences(*parse_text(std::string_view(original.text())));

    // spliced glue spans in the patched body
    const std::string body = patch_body(original, plan.kept);
    const auto after = extract_tuple_occurrences(*parse_text(std::string_view(body)));
    std::vector<SpanSuppression> out;
    long shift = 0;
    for (const auto& a : plan.kept) {
        const std::size_t glue_len = decode_utf8(a.glue)->size();
        const Span out_span{static_cast<std::size_t>(static_cast<long>(a.span.start) + shift),
                            static_cast<std::size_t>(static_cast<long>(a.span.start) + shift) + glue_len};
        shift += static_cast<long>(glue_len) - static_cast<long>(a.span.length());
        if (a.rule != RuleId::ReplaceCanvasApiCalls && a.rule != RuleId::ReplaceWithRegex &&
            a.rule != RuleId::ReplaceObfScreen)
            continue;
        SpanSuppression s{a.rule, a.span, 0, 0};
        for (const auto& o : before)
            if (a.span.contains(o.span) && watched.count(o.tuple.rendered())) ++s.before;
        for (const auto& o : after)
            if (out_span.contains(o.span) && watched.count(o.tuple.rendered())) ++s.in_glue;
        out.push_back(s);
    }
    return out;
}

}  // namespace fpwasm
