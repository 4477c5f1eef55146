#include "fpwasm/assembler.hpp"
#include "fpwasm/errors.hpp"
#include "fpwasm/parser.hpp"
#include "fpwasm/translator.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <random>

using namespace fpwasm;

namespace {

TransformArtifact span_artifact(std::size_t start, std::size_t end, RuleId rule = RuleId::ReplaceLiteralsRecursive,
                                std::string symbol = "") {
    TransformArtifact a;
    a.rule = rule;
    a.span = Span{start, end};
    if (symbol.empty()) symbol = "s_" + std::to_string(start) + "_" + std::to_string(end);
    a.exports = {ExportIR::const_i32(symbol, 1)};
    a.glue = "instance.exports." + symbol + ".value";
    return a;
}

ObfuscatedScript convert(const std::string& code, RuleSet rules = all_rule_set(), Translator* tr = nullptr) {
    SourceScript s(code);
    auto root = parse(s);
    return assemble(s, plan_patch(apply_all(*root, s, rules, tr)));
}

std::size_t count(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
    return n;
}

// Brute-force oracle: the greedy result must be maximal, i.e. no dropped
// artifact is disjoint from every kept one.
bool disjoint_from_all(const TransformArtifact& a, const std::vector<TransformArtifact>& kept) {
    return std::none_of(kept.begin(), kept.end(), [&](const auto& k) { return k.span.intersects(a.span); });
}

}  // namespace

TEST(FilterOverlaps, ContainmentAndAdjacency) {
    auto p = filter_overlaps({span_artifact(5, 8), span_artifact(0, 10)});
    ASSERT_EQ(p.kept.size(), 1u);
    EXPECT_EQ(p.kept[0].span, (Span{0, 10}));
    ASSERT_EQ(p.dropped.size(), 1u);
    EXPECT_EQ(p.dropped[0].artifact.span, (Span{5, 8}));
    EXPECT_NE(p.dropped[0].reason.find("[0,10)"), std::string::npos);

    p = filter_overlaps({span_artifact(0, 5), span_artifact(5, 9)});
    EXPECT_EQ(p.kept.size(), 2u);
}

TEST(FilterOverlaps, ChainKeepsOne) {
    auto p = filter_overlaps({span_artifact(0, 4), span_artifact(3, 7), span_artifact(2, 6)});
    // [0,4) wins; [2,6) and [3,7) both intersect it
    ASSERT_EQ(p.kept.size(), 1u);
    EXPECT_EQ(p.kept[0].span, (Span{0, 4}));
}

TEST(FilterOverlaps, SameSpanRuleOrderBreaksTie) {
    auto p = filter_overlaps({span_artifact(0, 4, RuleId::ObfuscateFunctions, "a_0"),
                              span_artifact(0, 4, RuleId::ReplaceCallee, "b_0")});
    ASSERT_EQ(p.kept.size(), 1u);
    EXPECT_EQ(p.kept[0].rule, RuleId::ReplaceCallee);
}

TEST(FilterOverlaps, DuplicateSymbolDropped) {
    auto p = filter_overlaps({span_artifact(0, 2, RuleId::ReplaceLiteralsRecursive, "x"),
                              span_artifact(4, 6, RuleId::ReplaceLiteralsRecursive, "x")});
    ASSERT_EQ(p.kept.size(), 1u);
    ASSERT_EQ(p.dropped.size(), 1u);
    EXPECT_NE(p.dropped[0].reason.find("duplicate"), std::string::npos);
}

TEST(FilterOverlaps, RandomizedMaximalAndDisjoint) {
    std::mt19937 rng(20240611);
    for (int iter = 0; iter < 300; ++iter) {
        std::vector<TransformArtifact> in;
        const int n = 1 + static_cast<int>(rng() % 8);
        for (int i = 0; i < n; ++i) {
            const std::size_t s = rng() % 30;
            const std::size_t len = 1 + rng() % 8;
            in.push_back(span_artifact(s, s + len, static_cast<RuleId>(rng() % rule_count),
                                       "s" + std::to_string(i)));
        }
        auto p = filter_overlaps(in);
        EXPECT_EQ(p.kept.size() + p.dropped.size(), in.size());
        for (std::size_t i = 0; i < p.kept.size(); ++i)
            for (std::size_t j = i + 1; j < p.kept.size(); ++j) {
                EXPECT_FALSE(p.kept[i].span.intersects(p.kept[j].span));
                EXPECT_LT(p.kept[i].span.start, p.kept[j].span.start);
            }
        for (const auto& d : p.dropped) EXPECT_FALSE(disjoint_from_all(d.artifact, p.kept));
    }
}

TEST(Assemble, ZeroArtifactsIsIdentity) {
    const std::string code = "console.log(a + b);\n";
    SourceScript s(code);
    auto obf = assemble(s, plan_patch({}));
    EXPECT_EQ(obf.text, code);
    EXPECT_TRUE(obf.embedded_module.empty());
    EXPECT_EQ(obf.original_id, s.id());
    EXPECT_THROW(embedded_bytes_roundtrip(obf), ExtractError);
}

TEST(Assemble, RuleOneWrapper) {
    auto obf = convert("let x = 42;", {RuleId::ReplaceLiteralsRecursive});
    EXPECT_NE(obf.text.find("let x = instance.exports.x_0.value;"), std::string::npos);
    EXPECT_EQ(count(obf.text, "WebAssembly.instantiate("), 1u);
    EXPECT_EQ(count(obf.text, "new Uint8Array(["), 1u);
    EXPECT_EQ(obf.text.find("new WebAssembly.Instance"), std::string::npos);
    EXPECT_EQ(obf.text.find("WebAssembly.Module("), std::string::npos);
    EXPECT_EQ(embedded_bytes_roundtrip(obf), obf.embedded_module);
    EXPECT_NO_THROW(parse_text(std::string_view(obf.text)));
    auto m = decode(obf.embedded_module);
    EXPECT_TRUE(validate(m).empty());
    EXPECT_NE(m.find_export("x_0"), nullptr);
}

TEST(Assemble, OneImportField) {
    auto obf = convert("doSomething();", {RuleId::ReplaceFunctionCallsWithNoReturn});
    auto root = parse_text(std::string_view(obf.text));
    std::size_t js_fields = 0;
    walk(*root, [&](const Node& n, const Node*) {
        if (n.is(NodeKind::Property) && n.child(0)->is(NodeKind::Identifier) && n.child(0)->name == "js")
            js_fields = n.child(1)->children.size();
        return true;
    });
    EXPECT_EQ(js_fields, 1u);
    EXPECT_EQ(decode(obf.embedded_module).imports.size(), 1u);
}

TEST(Assemble, UntouchedRegionsPreserved) {
    const std::string code = "/* head */ let x = 1; // mid \xC3\xA9\nf(\"tail\");\n";
    SourceScript s(code);
    auto root = parse(s);
    auto plan = plan_patch(apply_all(*root, s, {RuleId::ReplaceLiteralsRecursive}, nullptr));
    const std::string body = patch_body(s, plan.kept);
    EXPECT_EQ(body, "/* head */ let x = instance.exports.x_11.value; // mid \xC3\xA9\nf(\"tail\");\n");
    EXPECT_NE(assemble(s, plan).text.find(body), std::string::npos);
}

TEST(Assemble, MissingExportRejected) {
    SourceScript s("let x = 42;");
    auto root = parse(s);
    auto artifacts = apply_all(*root, s, {RuleId::ReplaceLiteralsRecursive}, nullptr);
    auto plan = plan_patch(artifacts);
    plan.kept[0].glue = "let x = instance.exports.nope.value;";
    EXPECT_THROW(assemble(s, plan), AssembleError);
}

TEST(Assemble, CorruptionDetected) {
    auto obf = convert("let x = 42;");
    auto flipped = obf;
    const auto pos = flipped.text.find("new Uint8Array([0,") + std::string("new Uint8Array([").size();
    flipped.text.replace(pos, 1, "1");
    EXPECT_NE(embedded_bytes_roundtrip(flipped), obf.embedded_module);
    auto broken = obf;
    broken.text.replace(pos, 1, "x");
    EXPECT_THROW(embedded_bytes_roundtrip(broken), ExtractError);
    EXPECT_THROW(extract_embedded_bytes("const __fp_bytes = new Uint8Array([1,256]);"), ExtractError);
}

TEST(Assemble, FullConversionParses) {
    auto stub = make_translator(TranslatorMode::Stub);
    const std::string code =
        "'use strict';\n"
        "var label = \"canvas\";\n"
        "function sq(a) { return a * a; }\n"
        "const c = document.createElement(\"canvas\");\n"
        "const ctx = c.getContext('2d');\n"
        "ctx.fillText(label, 2, 2);\n"
        "for (let i = 0; i < 3; i++) { ctx.fillRect(1, 1, 2, 2); }\n"
        "if (sq(2) > 3) { console.log([1, 2, 3]); } else { console.log(\"no\"); }\n";
    auto obf = convert(code, all_rule_set(), stub.get());
    EXPECT_NO_THROW(parse_text(std::string_view(obf.text)));
    EXPECT_TRUE(validate(decode(obf.embedded_module)).empty());
}

TEST(PlanReport, ListsKeptAndDropped) {
    SourceScript s("atob(\"x\");");
    auto root = parse(s);
    auto plan = plan_patch(apply_all(*root, s, all_rule_set(), nullptr));
    auto doc = nlohmann::json::parse(plan_report_json(s, plan));
    EXPECT_EQ(doc["script_id"], s.id());
    ASSERT_EQ(doc["kept"].size(), plan.kept.size());
    // the statement-level span is longer than the call's, so Rule 7 wins
    EXPECT_EQ(doc["kept"][0]["rule"], "replace_function_calls_with_no_return");
    EXPECT_EQ(doc["dropped"][0]["rule"], "replace_callee");
    EXPECT_EQ(doc["dropped"].size(), plan.dropped.size());
    for (const auto& d : doc["dropped"]) EXPECT_TRUE(d.contains("reason"));
}
