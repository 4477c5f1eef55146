#include "fpwasm/errors.hpp"
#include "fpwasm/parser.hpp"
#include "fpwasm/rules.hpp"
#include "fpwasm/translator.hpp"
#include "fpwasm/wasm.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace fpwasm;

namespace {

struct Run {
    SourceScript script;
    NodePtr root;
    std::vector<TransformArtifact> artifacts;
};

Run run(const std::string& code, RuleSet enabled = all_rule_set(), Translator* tr = nullptr,
        RuleConfig cfg = RuleConfig::defaults()) {
    Run r{SourceScript(code), nullptr, {}};
    r.root = parse(r.script);
    r.artifacts = apply_all(*r.root, r.script, enabled, tr, cfg);
    for (const auto& a : r.artifacts) {
        EXPECT_EQ(check_artifact(a), "") << a.glue;
        EXPECT_LE(a.span.end, r.script.length());
    }
    return r;
}

std::vector<TransformArtifact> only(const Run& r, RuleId id) {
    std::vector<TransformArtifact> out;
    for (const auto& a : r.artifacts)
        if (a.rule == id) out.push_back(a);
    return out;
}

std::vector<TransformArtifact> one_rule(const std::string& code, RuleId id, Translator* tr = nullptr) {
    return run(code, {id}, tr).artifacts;
}

std::string text_of(const Run& r, Span s) { return slice(r.script, s); }

}  // namespace

TEST(RuleIds, ClosedSetRoundTrips) {
    EXPECT_EQ(all_rules().size(), 14u);
    for (RuleId id : all_rules()) EXPECT_EQ(parse_rule_id(to_string(id)), id);
    EXPECT_THROW(parse_rule_id("replace_everything"), ConfigError);
    EXPECT_EQ(rule_number(RuleId::ReplaceIntArrays), 3);
    EXPECT_EQ(rule_number(RuleId::ReplaceFloatArrays), 3);
    EXPECT_EQ(rule_number(RuleId::ReplaceObfScreen), 13);
}

TEST(RuleHelpers, SplitHalfFloorsByCodePoint) {
    EXPECT_EQ(split_half("fillText"), (std::pair<std::string, std::string>{"fill", "Text"}));
    EXPECT_EQ(split_half("getContext"), (std::pair<std::string, std::string>{"getCo", "ntext"}));
    EXPECT_EQ(split_half("screen"), (std::pair<std::string, std::string>{"scr", "een"}));
    EXPECT_EQ(split_half("canvas"), (std::pair<std::string, std::string>{"can", "vas"}));
    EXPECT_EQ(split_half("abc"), (std::pair<std::string, std::string>{"a", "bc"}));
    EXPECT_EQ(split_half("\xC3\xA9t\xC3\xA9"), (std::pair<std::string, std::string>{"\xC3\xA9", "t\xC3\xA9"}));
}

TEST(RuleHelpers, NameListParsing) {
    auto names = load_name_list("# header\nfoo\n\n  bar  # trailing\r\nbaz");
    EXPECT_EQ(names, (std::vector<std::string>{"foo", "bar", "baz"}));
    EXPECT_TRUE(load_name_list("").empty());
}

TEST(ApplyAll, EmptyScript) { EXPECT_TRUE(run("").artifacts.empty()); }

TEST(ApplyAll, SingleLiteralDeclaration) {
    auto r = run("let x = 42;");
    ASSERT_EQ(r.artifacts.size(), 1u);
    const auto& a = r.artifacts[0];
    EXPECT_EQ(a.rule, RuleId::ReplaceLiteralsRecursive);
    EXPECT_EQ(a.glue, "let x = instance.exports.x_0.value;");
    ASSERT_EQ(a.exports.size(), 1u);
    EXPECT_EQ(a.exports[0], ExportIR::const_i32("x_0", 42));
    EXPECT_NE(emit_assemblyscript_text(a.exports, {}).find("export let x_0: i32 = 42"), std::string::npos);
}

TEST(ApplyAll, OrderedByStartThenRuleAndIdempotent) {
    const std::string code =
        "var s = \"canvas\";\n"
        "ctx.fillText(s, 1, 2);\n"
        "if (a > 1) { x = 1; } else { x = 2; }\n"
        "for (let i = 0; i < 3; i++) { tick(); }\n";
    auto r1 = run(code);
    auto r2 = run(code);
    EXPECT_EQ(r1.artifacts, r2.artifacts);
    for (std::size_t i = 1; i < r1.artifacts.size(); ++i) {
        const auto& p = r1.artifacts[i - 1];
        const auto& q = r1.artifacts[i];
        EXPECT_TRUE(p.span.start < q.span.start ||
                    (p.span.start == q.span.start && static_cast<int>(p.rule) <= static_cast<int>(q.rule)));
    }
    std::set<std::string> symbols, fields;
    for (const auto& a : r1.artifacts) {
        for (const auto& e : a.exports)
            for (const auto& n : e.exported_names()) EXPECT_TRUE(symbols.insert(n).second) << n;
        for (const auto& imp : a.imports) EXPECT_TRUE(fields.insert(imp.field).second) << imp.field;
    }
}

TEST(ApplyAll, EnabledSetFilters) {
    auto r = run("let x = 42; eval(x);", {RuleId::ReplaceCallee});
    ASSERT_EQ(r.artifacts.size(), 1u);
    EXPECT_EQ(r.artifacts[0].rule, RuleId::ReplaceCallee);
}

TEST(ApplyAll, ReservedRuntimeNameDisablesConversion) {
    EXPECT_TRUE(run("var instance = 1; let x = 42;").artifacts.empty());
    EXPECT_TRUE(run("function getString(p) {} let x = 42;").artifacts.empty());
    EXPECT_FALSE(run("let x = 42; o.instance = 2;").artifacts.empty());
}

// Rule 1

TEST(Rule1, KindsAndGlue) {
    auto a = one_rule("const y = 2.5", RuleId::ReplaceLiteralsRecursive);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].exports[0], ExportIR::const_f64("y_0", 2.5));
    EXPECT_EQ(a[0].glue, "const y = instance.exports.y_0.value");

    a = one_rule("let b = true;", RuleId::ReplaceLiteralsRecursive);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].exports[0], ExportIR::const_i32("b_0", 1));
    EXPECT_EQ(a[0].glue, "let b = instance.exports.b_0.value !== 0;");

    a = one_rule("  let s = \"hi\";", RuleId::ReplaceLiteralsRecursive);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].exports[0], ExportIR::const_string("s_2", "hi"));
    EXPECT_EQ(a[0].glue, "let s = getString(instance.exports.s_2.value);");
    EXPECT_EQ(a[0].span, (Span{2, 15}));
}

TEST(Rule1, NumericEdgeCases) {
    auto a = one_rule("var n = -0, big = 3000000000, h = 0x10;", RuleId::ReplaceLiteralsRecursive);
    // `-0` is a unary expression, not a literal
    ASSERT_EQ(a.size(), 2u);
    EXPECT_EQ(a[0].exports[0].kind, ExportKind::ConstF64);
    EXPECT_EQ(a[0].glue, "big = instance.exports.big_12.value");
    EXPECT_EQ(a[0].context, GlueContext::Declarator);
    EXPECT_EQ(a[1].exports[0], ExportIR::const_i32("h_30", 16));
}

TEST(Rule1, Skips) {
    for (const char* code : {"let t = `x`;", "let r = /a/;", "let n = null;", "let u = undefined;", "let z;",
                             "for (let i = 0; i < 3; i++) {}", "for (var k = 0 in o) {}",
                             "for (const v of [1]) {}", "let [a] = 1;", "let q = \"\\uD800\";"}) {
        auto r = run(code, {RuleId::ReplaceLiteralsRecursive});
        EXPECT_TRUE(r.artifacts.empty()) << code;
    }
}

TEST(Rule1, NoSpanIntersectsLoopHeader) {
    auto r = run("for (let i = 0; i < 3; i++) { let y = 1; }", {RuleId::ReplaceLiteralsRecursive});
    ASSERT_EQ(r.artifacts.size(), 1u);
    EXPECT_EQ(text_of(r, r.artifacts[0].span), "let y = 1;");
}

TEST(Rule1, InvalidIdentifierFallsBack) {
    auto a = one_rule("let caf\\u00e9 = 1;", RuleId::ReplaceLiteralsRecursive);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].exports[0].symbol, "v_0");
    EXPECT_EQ(a[0].glue, "let caf\\u00e9 = instance.exports.v_0.value;");
}

// Rule 2

TEST(Rule2, EvalListingShape) {
    std::string code(123, ' ');
    code += "eval(arg0);";
    auto a = one_rule(code, RuleId::ReplaceCallee);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].exports[0], ExportIR::const_string("eval_123", "eval"));
    EXPECT_NE(a[0].glue.find("globalObject_123[getString(pointer_eval_123)](arg0)"), std::string::npos);
    EXPECT_NE(a[0].glue.find("const pointer_eval_123 = instance.exports.eval_123;"), std::string::npos);
    EXPECT_NE(emit_assemblyscript_text(a[0].exports, {}).find("export const eval_123: string = \"eval\""),
              std::string::npos);
}

TEST(Rule2, MatchesAndSkips) {
    EXPECT_TRUE(one_rule("new ActiveXObject(\"X\");", RuleId::ReplaceCallee).empty());
    EXPECT_EQ(one_rule("atob(\"aGk=\");", RuleId::ReplaceCallee).size(), 1u);
    EXPECT_EQ(one_rule("new Function(\"return 1\")();", RuleId::ReplaceCallee).size(), 1u);
    EXPECT_EQ(one_rule("window.atob(s);", RuleId::ReplaceCallee).size(), 1u);
    EXPECT_EQ(one_rule("window[\"eval\"](s);", RuleId::ReplaceCallee).size(), 1u);
    EXPECT_TRUE(one_rule("window[k](s);", RuleId::ReplaceCallee).empty());
    EXPECT_TRUE(one_rule("function eval2() {} var atob = 1; atob(1);", RuleId::ReplaceCallee).empty());
    EXPECT_TRUE(one_rule("setTimeout(fn, 10);", RuleId::ReplaceCallee).empty());
    EXPECT_EQ(one_rule("setTimeout(\"go()\", 10);", RuleId::ReplaceCallee).size(), 1u);
    EXPECT_TRUE(one_rule("parseInt(\"1\");", RuleId::ReplaceCallee).empty());
    EXPECT_TRUE(one_rule("async function f() { eval(await g()); }", RuleId::ReplaceCallee).empty());
}

TEST(Rule2, MemberAndNewGlue) {
    auto a = one_rule("obj.unescape(a, b);", RuleId::ReplaceCallee);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_NE(a[0].glue.find("return (obj)[getString(pointer_unescape_0)](a, b);"), std::string::npos);
    a = one_rule("x = new Function(\"a\", \"return a\");", RuleId::ReplaceCallee);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_NE(a[0].glue.find("new (globalObject_4[getString(pointer_Function_4)])(\"a\", \"return a\")"),
              std::string::npos);
}

TEST(Rule2, ConfigurableList) {
    RuleConfig cfg = RuleConfig::defaults();
    cfg.sensitive_callees = load_name_list("# custom\nfetch\n");
    auto r = run("fetch(u); atob(s);", {RuleId::ReplaceCallee}, nullptr, cfg);
    ASSERT_EQ(r.artifacts.size(), 1u);
    EXPECT_EQ(r.artifacts[0].exports[0].str, "fetch");
}

TEST(Rule2, TopLevelDirectEvalMustBeRewritten) {
    // without ReplaceCallee the eval stays direct and nothing is converted
    EXPECT_TRUE(run("var n = 5; eval(s);", {RuleId::ReplaceLiteralsRecursive}).artifacts.empty());
    auto r = run("var n = 5; eval(s);", all_rule_set());
    ASSERT_EQ(r.artifacts.size(), 2u);
    EXPECT_EQ(r.artifacts[1].rule, RuleId::ReplaceCallee);
    // an enclosing call rewrite would move the eval into a closure
    auto nested = run("setTimeout(eval(s));", all_rule_set());
    for (const auto& a : nested.artifacts) EXPECT_EQ(a.span.start, 11u) << to_string(a.rule);
    // inside a function the eval only blocks closure rules
    auto inner = run("function f(s) { eval(s); }", {RuleId::ReplaceFunctionCallsWithNoReturn});
    EXPECT_TRUE(inner.artifacts.empty());
}

// Rule 3

TEST(Rule3, IntFloatAndEmpty) {
    auto r = run("let a = [1,2,3];", {RuleId::ReplaceIntArrays, RuleId::ReplaceFloatArrays});
    ASSERT_EQ(r.artifacts.size(), 1u);
    const auto& a = r.artifacts[0];
    EXPECT_EQ(a.rule, RuleId::ReplaceIntArrays);
    EXPECT_EQ(a.exports[0], ExportIR::array_i32("arr_8", "get_arr_8", {1, 2, 3}));
    EXPECT_EQ(a.glue, "Array.from(new Int32Array(instance.exports.memory.buffer, instance.exports.get_arr_8(), 3))");

    auto f = one_rule("let a = [1, 2.5];", RuleId::ReplaceFloatArrays);
    ASSERT_EQ(f.size(), 1u);
    EXPECT_EQ(f[0].exports[0], ExportIR::array_f64("arr_8", "get_arr_8", {1.0, 2.5}));
    EXPECT_NE(f[0].glue.find("Float64Array"), std::string::npos);

    EXPECT_TRUE(one_rule("let a = [1, 2.5];", RuleId::ReplaceIntArrays).empty());
    EXPECT_TRUE(one_rule("let a = [];", RuleId::ReplaceIntArrays).empty());
    EXPECT_TRUE(one_rule("let a = [1, \"x\"];", RuleId::ReplaceIntArrays).empty());
    EXPECT_TRUE(one_rule("let a = new Array(1, 2);", RuleId::ReplaceIntArrays).empty());
    EXPECT_TRUE(one_rule("let a = [1, , 2];", RuleId::ReplaceIntArrays).empty());
    EXPECT_TRUE(one_rule("let a = [...b, 2];", RuleId::ReplaceIntArrays).empty());
    auto neg = one_rule("g([-1, 2]);", RuleId::ReplaceIntArrays);
    ASSERT_EQ(neg.size(), 1u);
    EXPECT_EQ(neg[0].exports[0].i32_array, (std::vector<std::int32_t>{-1, 2}));
}

// Rule 4

TEST(Rule4, DispatcherAndGlue) {
    auto a = one_rule("if (a>1) {x=1;} else {x=2;}", RuleId::ReplaceIfElse);
    ASSERT_EQ(a.size(), 1u);
    ASSERT_EQ(a[0].imports.size(), 2u);
    EXPECT_EQ(a[0].imports[0].field, "$imp1_0");
    EXPECT_EQ(a[0].imports[0].js_body, "() => {x=1;}");
    EXPECT_EQ(a[0].imports[1].js_body, "() => {x=2;}");
    EXPECT_NE(a[0].glue.find("let wasmTestCondition_0 = (a>1) ? 1 : 0;"), std::string::npos);
    EXPECT_NE(a[0].glue.find("instance.exports.$if_else_0(wasmTestCondition_0)"), std::string::npos);

    const auto& f = a[0].exports[0].func;
    EXPECT_EQ(check_function(f), "");
    std::vector<std::string> calls;
    HostCall host = [&](const std::string& field, const std::vector<Value>&) -> Value {
        calls.push_back(field);
        return std::int32_t{0};
    };
    interpret(f, {std::int32_t{1}}, host);
    interpret(f, {std::int32_t{0}}, host);
    EXPECT_EQ(calls, (std::vector<std::string>{"$imp1_0", "$imp2_0"}));
    EXPECT_NE(emit_assemblyscript_text(a[0].exports, a[0].imports).find("@external(\"js\", \"$imp1_0\")"),
              std::string::npos);
}

TEST(Rule4, DisruptiveControlFlowSkipped) {
    for (const char* code : {"function f(c) { if (c) {return;} else {} }", "if (c) { throw e; } else { x(); }",
                             "for (;;) { if (c) { break; } else { x(); } }",
                             "for (;;) { if (c) { x(); } else { continue; } }",
                             "if (c) { for (;;) { break; } } else {}", "if (c) { var v = 1; } else {}",
                             "if (c) { g(); }", "if (c) { f = () => { return 1; }; } else {}"}) {
        EXPECT_TRUE(one_rule(code, RuleId::ReplaceIfElse).empty()) << code;
    }
}

TEST(Rule4, NestedMatchedAtBothLevelsInnerTravelsVerbatim) {
    auto a = one_rule("if (a) { if (b) { x(); } else { y(); } } else { z(); }", RuleId::ReplaceIfElse);
    ASSERT_EQ(a.size(), 2u);
    EXPECT_EQ(a[0].span.start, 0u);
    EXPECT_NE(a[0].imports[0].js_body.find("if (b) { x(); } else { y(); }"), std::string::npos);
    EXPECT_TRUE(a[0].span.contains(a[1].span));
}

TEST(Rule4, NonBlockBranches) {
    auto a = one_rule("if (a) x(); else y();", RuleId::ReplaceIfElse);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].imports[0].js_body, "() => {x();}");
}

// Rule 5

TEST(Rule5, ListingShape) {
    auto a = one_rule("for (let i=0;i<10;i++){f();}", RuleId::ReplaceForLoops);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].imports[0].field, "body_0");
    EXPECT_EQ(a[0].imports[0].js_body, "() => {f();}");
    EXPECT_EQ(a[0].glue, "__fp.run({body_0: () => {f();}}, () => instance.exports.for_0());");
    const std::string text = emit_assemblyscript_text(a[0].exports, a[0].imports);
    EXPECT_NE(text.find("export function for_0(): void"), std::string::npos);
    EXPECT_NE(text.find("while (i < 10) {\n    body_0();"), std::string::npos) << text;

    int n = 0;
    interpret(a[0].exports[0].func, {}, [&](const std::string&, const std::vector<Value>&) -> Value {
        ++n;
        return std::int32_t{0};
    });
    EXPECT_EQ(n, 10);
}

TEST(Rule5, StepTwoRunsTwice) {
    auto a = one_rule("for (let i=0;i<3;i+=2){count++}", RuleId::ReplaceForLoops);
    ASSERT_EQ(a.size(), 1u);
    int n = 0;
    interpret(a[0].exports[0].func, {}, [&](const std::string&, const std::vector<Value>&) -> Value {
        ++n;
        return std::int32_t{0};
    });
    EXPECT_EQ(n, 2);
}

TEST(Rule5, InclusiveBoundAndOverflowGuard) {
    auto a = one_rule("for (let i = 5; i <= 7; ++i) g();", RuleId::ReplaceForLoops);
    ASSERT_EQ(a.size(), 1u);
    int n = 0;
    interpret(a[0].exports[0].func, {}, [&](const std::string&, const std::vector<Value>&) -> Value {
        ++n;
        return std::int32_t{0};
    });
    EXPECT_EQ(n, 3);
    EXPECT_TRUE(one_rule("for (let i = 0; i <= 2147483647; i++) g();", RuleId::ReplaceForLoops).empty());
}

TEST(Rule5, Skips) {
    for (const char* code :
         {"for (let i=0;i<n;i++){}", "for (var i=0;i<3;i++){}", "for (let i=0, j=0;i<3;i++){}",
          "for (let i=0;i<3;i--){}", "for (let i=0;i<3;i+=0){}", "for (let i=0;i>3;i++){}",
          "for (let i=0;i<3;i++){ a[i] = 1; }", "for (let i=0;i<3;i++){ break; }",
          "for (let i=0;i<3;i++){ continue; }", "function f(){ for (let i=0;i<3;i++){ return; } }",
          "for (let i=0;i<3;i++){ var v; }", "for (let i=0;i<3;j++){}", "for (let i=0.5;i<3;i++){}"}) {
        EXPECT_TRUE(one_rule(code, RuleId::ReplaceForLoops).empty()) << code;
    }
    EXPECT_EQ(one_rule("for (let i=0;i<3;i++){ for (;;) { break; } }", RuleId::ReplaceForLoops).size(), 1u);
    EXPECT_EQ(one_rule("for (let i=0;i<3;i++){ h(() => { return 1; }); }", RuleId::ReplaceForLoops).size(), 1u);
}

// Rule 6

TEST(Rule6, ListingShape) {
    auto a = one_rule("while (i<3){i++;}", RuleId::ReplaceWhileLoops);
    ASSERT_EQ(a.size(), 1u);
    ASSERT_EQ(a[0].imports.size(), 2u);
    EXPECT_EQ(a[0].imports[0].field, "cond_0");
    EXPECT_EQ(a[0].imports[0].result, ResultType::I32);
    EXPECT_EQ(a[0].imports[0].js_body, "() => (i<3) ? 1 : 0");
    EXPECT_EQ(a[0].imports[1].js_body, "() => {i++;}");
    EXPECT_NE(a[0].glue.find("() => instance.exports.f_0()"), std::string::npos);
    const std::string text = emit_assemblyscript_text(a[0].exports, a[0].imports);
    EXPECT_NE(text.find("if (cond_0() == 0) {"), std::string::npos) << text;

    // simulate the glue side: i starts at 0
    int i = 0, bodies = 0;
    interpret(a[0].exports[0].func, {}, [&](const std::string& field, const std::vector<Value>&) -> Value {
        if (field == "cond_0") return std::int32_t{i < 3 ? 1 : 0};
        ++i;
        ++bodies;
        return std::int32_t{0};
    });
    EXPECT_EQ(bodies, 3);
}

TEST(Rule6, Skips) {
    EXPECT_TRUE(one_rule("while (c) { break; }", RuleId::ReplaceWhileLoops).empty());
    EXPECT_TRUE(one_rule("outer: while (c) { while (d) { continue outer; } }", RuleId::ReplaceWhileLoops).empty());
    EXPECT_EQ(one_rule("while (c) { while (d) { break; } }", RuleId::ReplaceWhileLoops).size(), 1u);
    EXPECT_TRUE(one_rule("function* g() { while (yield) {} }", RuleId::ReplaceWhileLoops).empty());
    EXPECT_EQ(one_rule("while (false){x();}", RuleId::ReplaceWhileLoops).size(), 1u);
    EXPECT_EQ(one_rule("while (a&&b){ g(); }", RuleId::ReplaceWhileLoops)[0].imports[0].js_body,
              "() => (a&&b) ? 1 : 0");
}

// Rule 7

TEST(Rule7, ListingShape) {
    auto a = one_rule("doSomething();", RuleId::ReplaceFunctionCallsWithNoReturn);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].imports[0].js_body, "() => {doSomething();}");
    EXPECT_NE(a[0].glue.find("impFunc_0: () => {doSomething();}"), std::string::npos);
    EXPECT_EQ(a[0].span, (Span{0, 14}));
    EXPECT_TRUE(one_rule("let r = g();", RuleId::ReplaceFunctionCallsWithNoReturn).empty());
    EXPECT_TRUE(one_rule("x = g();", RuleId::ReplaceFunctionCallsWithNoReturn).empty());
    EXPECT_TRUE(one_rule("async function f() { await g(); }", RuleId::ReplaceFunctionCallsWithNoReturn).empty());
    EXPECT_TRUE(one_rule("async function f() { g(await h()); }", RuleId::ReplaceFunctionCallsWithNoReturn).empty());
    EXPECT_TRUE(one_rule("class A extends B { constructor() { super(); } }", RuleId::ReplaceFunctionCallsWithNoReturn)
                    .empty());
}

// Rule 8

TEST(Rule8, DeclarationAndExpression) {
    auto a = one_rule("class A { m(){return 1;} }", RuleId::ReplaceClassDefs);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].exports[0], ExportIR::const_string("class_0", "class A { m(){return 1;} }"));
    EXPECT_EQ(a[0].glue.rfind("let A = ", 0), 0u);
    EXPECT_NE(a[0].glue.find("document.createElement(\"script\")"), std::string::npos);

    auto e = one_rule("let C = class { m(){ return `q\"'`; } };", RuleId::ReplaceClassDefs);
    ASSERT_EQ(e.size(), 1u);
    EXPECT_EQ(e[0].context, GlueContext::Expression);
    EXPECT_EQ(e[0].exports[0].str, "class { m(){ return `q\"'`; } }");
}

TEST(Rule8, DomFlagAndScriptNames) {
    RuleConfig cfg = RuleConfig::defaults();
    cfg.dom_available = false;
    EXPECT_TRUE(run("class A {}", {RuleId::ReplaceClassDefs}, nullptr, cfg).artifacts.empty());
    EXPECT_TRUE(one_rule("const k = 1; class A { m(){ return k; } }", RuleId::ReplaceClassDefs).empty());
    EXPECT_EQ(one_rule("class A { m(x){ let y = x; return A; } }", RuleId::ReplaceClassDefs).size(), 1u);
}

// Rule 9

TEST(Rule9, StubTranslatorDeclarationAndArrow) {
    auto stub = make_translator(TranslatorMode::Stub);
    auto a = one_rule("function add(a,b){return a+b;}", RuleId::ReplaceFuncDefs, stub.get());
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].exports[0].symbol, "add");
    EXPECT_EQ(a[0].glue, "let add = instance.exports.add;");
    EXPECT_NE(emit_assemblyscript_text(a[0].exports, {}).find("export function add(a: i32, b: i32): i32"),
              std::string::npos);

    auto arrow = one_rule("const g = (x)=>x*2;", RuleId::ReplaceFuncDefs, stub.get());
    ASSERT_EQ(arrow.size(), 1u);
    EXPECT_EQ(arrow[0].glue, "instance.exports.func_def_10");
}

TEST(Rule9, Skips) {
    auto stub = make_translator(TranslatorMode::Stub);
    for (const char* code :
         {"function f(){ return document.title; }", "class K { m(a){ return a; } }", "o = { m(a){ return a; } };",
          "add(1,2); function add(a,b){return a+b;}", "function add(a){return a;} function add(b){return b;}",
          "if (c) function h(a){return a;}"}) {
        EXPECT_TRUE(one_rule(code, RuleId::ReplaceFuncDefs, stub.get()).empty()) << code;
    }
    EXPECT_TRUE(one_rule("function add(a,b){return a+b;}", RuleId::ReplaceFuncDefs, nullptr).empty());
    auto off = make_translator(TranslatorMode::Off);
    EXPECT_TRUE(one_rule("function add(a,b){return a+b;}", RuleId::ReplaceFuncDefs, off.get()).empty());
}

TEST(Rule9, PositionalNamesAreRenamed) {
    auto stub = make_translator(TranslatorMode::Stub);
    auto a = one_rule("function x_1(a){return a;}", RuleId::ReplaceFuncDefs, stub.get());
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].exports[0].symbol, "func_def_0");
    EXPECT_EQ(a[0].glue, "let x_1 = instance.exports.func_def_0;");
}

namespace {
class FailingTranslator : public Translator {
public:
    TranslationResult translate(const TranslationRequest&) override {
        return {TranslationStatus::Error, std::nullopt, "", "down"};
    }
    TranslatorMode mode() const noexcept override { return TranslatorMode::Service; }
};
}  // namespace

TEST(Rule9, StrictModePropagates) {
    FailingTranslator t;
    EXPECT_TRUE(one_rule("function f(a){return a;}", RuleId::ReplaceFuncDefs, &t).empty());
    RuleConfig cfg = RuleConfig::defaults();
    cfg.strict_translator = true;
    EXPECT_THROW(run("function f(a){return a;}", {RuleId::ReplaceFuncDefs}, &t, cfg), TranslatorUnavailable);
}

// Rule 10

TEST(Rule10, DotAndBracket) {
    auto r = run("ctx.fillText(t, 0, 0);", {RuleId::ReplaceCanvasApiCalls});
    ASSERT_EQ(r.artifacts.size(), 1u);
    const auto& a = r.artifacts[0];
    EXPECT_EQ(text_of(r, a.span), ".fillText");
    EXPECT_EQ(a.exports[0], ExportIR::const_string("f_h_3", "fill"));
    EXPECT_EQ(a.exports[1], ExportIR::const_string("s_h_3", "Text"));
    EXPECT_EQ(a.glue, "[getString(instance.exports.f_h_3) + getString(instance.exports.s_h_3)]");

    r = run("nav[\"platform\"];", {RuleId::ReplaceCanvasApiCalls});
    ASSERT_EQ(r.artifacts.size(), 1u);
    EXPECT_EQ(text_of(r, r.artifacts[0].span), "\"platform\"");
    EXPECT_EQ(r.artifacts[0].exports[0].str, "plat");

    auto g = one_rule("c.getContext('2d');", RuleId::ReplaceCanvasApiCalls);
    ASSERT_EQ(g.size(), 1u);
    EXPECT_EQ(g[0].exports[0].str, "getCo");
    EXPECT_EQ(g[0].exports[1].str, "ntext");

    EXPECT_TRUE(one_rule("nav[k];", RuleId::ReplaceCanvasApiCalls).empty());
    EXPECT_TRUE(one_rule("o.fill();", RuleId::ReplaceCanvasApiCalls).empty());
}

TEST(Rule10, Anchor123) {
    std::string code(120, ' ');
    code += "ctx.fillText(t);";
    auto a = one_rule(code, RuleId::ReplaceCanvasApiCalls);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].exports[0].symbol, "f_h_123");
}

// Rule 11

TEST(Rule11, CanvasCallAndScreenMember) {
    std::string code(123, ' ');
    code += "canvas();";
    auto a = one_rule(code, RuleId::ObfuscateFunctions);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a[0].exports[0], ExportIR::const_string("e_call_123", "eval"));
    EXPECT_EQ(a[0].exports[1], ExportIR::const_string("c_str_123", "canvas()"));
    EXPECT_NE(emit_assemblyscript_text(a[0].exports, {}).find("export const c_str_123: string = \"canvas()\""),
              std::string::npos);
    EXPECT_EQ(a[0].glue,
              "globalObject[getString(instance.exports.e_call_123)](getString(instance.exports.c_str_123))");

    auto s = one_rule("h = screen.availHeight;", RuleId::ObfuscateFunctions);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].exports[1].str, "screen.availHeight");

    auto q = one_rule("h = screen[\"a'b\\\"\"];", RuleId::ObfuscateFunctions);
    ASSERT_EQ(q.size(), 1u);
    EXPECT_EQ(q[0].exports[1].str, "screen[\"a'b\\\"\"]");
}

TEST(Rule11, Skips) {
    for (const char* code : {"screen.x = 1;", "screen.x++;", "delete screen.x;", "screen.go();",
                             "let screen = {}; h = screen.x;", "function canvas() {} canvas();",
                             "let k = 'a'; h = screen[k];", "function f() { return screen[this.k]; }"}) {
        EXPECT_TRUE(one_rule(code, RuleId::ObfuscateFunctions).empty()) << code;
    }
}

// Rule 12

TEST(Rule12, QuotedCanvas) {
    auto r = run("c = document.createElement(\"canvas\");", {RuleId::ReplaceWithRegex});
    ASSERT_EQ(r.artifacts.size(), 1u);
    EXPECT_EQ(text_of(r, r.artifacts[0].span), "\"canvas\"");
    EXPECT_EQ(r.artifacts[0].exports[0], ExportIR::const_string("cv1_27", "can"));
    EXPECT_EQ(r.artifacts[0].exports[1], ExportIR::const_string("cv2_27", "vas"));

    EXPECT_TRUE(one_rule("o = {\"canvas\": 1};", RuleId::ReplaceWithRegex).empty());
    EXPECT_TRUE(one_rule("o = {'canvas' : 1};", RuleId::ReplaceWithRegex).empty());
    EXPECT_TRUE(one_rule("s = \"my canvas\";", RuleId::ReplaceWithRegex).empty());
    EXPECT_TRUE(one_rule("// \"canvas\"\nx();", RuleId::ReplaceWithRegex).empty());

    auto two = one_rule("a('canvas'); b(\"canvas\");", RuleId::ReplaceWithRegex);
    ASSERT_EQ(two.size(), 2u);
    EXPECT_NE(two[0].exports[0].symbol, two[1].exports[0].symbol);
}

TEST(Rule12, NonAsciiPrefixKeepsCodePointOffsets) {
    auto r = run("s = \"\xC3\xA9\"; t = \"canvas\";", {RuleId::ReplaceWithRegex});
    ASSERT_EQ(r.artifacts.size(), 1u);
    EXPECT_EQ(text_of(r, r.artifacts[0].span), "\"canvas\"");
    EXPECT_EQ(r.artifacts[0].exports[0].symbol, "cv1_13");
}

// Rule 13

TEST(Rule13, HexPropsExample) {
    const std::string code =
        "const props = {\n"
        "  \"\\x61\\x76\\x61\\x69\\x6C\\x48\\x65\\x69\\x67\\x68\\x74\": \"availHeight\",\n"
        "  \"\\x61\\x76\\x61\\x69\\x6C\\x57\\x69\\x64\\x74\\x68\": \"availWidth\",\n"
        "  \"\\x63\\x6F\\x6C\\x6F\\x72\\x44\\x65\\x70\\x74\\x68\": \"colorDepth\"};\n"
        "\n"
        "const propKey = \"\\x61\\x76\\x61\\x69\\x6C\\x48\\x65\\x69\\x67\\x68\\x74\"; // \"availHeight\"\n"
        "const value = screen[props[propKey]];\n";
    auto r = run(code, {RuleId::ReplaceObfScreen});
    ASSERT_EQ(r.artifacts.size(), 1u);
    const auto& a = r.artifacts[0];
    EXPECT_EQ(text_of(r, a.span), "screen");
    EXPECT_EQ(a.exports[0].str, "scr");
    EXPECT_EQ(a.exports[1].str, "een");
    EXPECT_EQ(a.glue.rfind("globalObject[getString(instance.exports.sc1_", 0), 0u);

    auto root = parse_text(std::string_view("x = \"\\x61\\x76\\x61\\x69\\x6C\\x48\\x65\\x69\\x67\\x68\\x74\";"));
    EXPECT_EQ(root->child(0)->child(0)->child(1)->string_value, "availHeight");
}

TEST(Rule13, DirectHexKeyAndSkips) {
    EXPECT_EQ(one_rule("h = screen[\"\\x61vailHeight\"];", RuleId::ReplaceObfScreen).size(), 1u);
    EXPECT_TRUE(one_rule("h = screen[\"availHeight\"];", RuleId::ReplaceObfScreen).empty());
    EXPECT_TRUE(one_rule("h = screen[k];", RuleId::ReplaceObfScreen).empty());
    EXPECT_TRUE(one_rule("h = screen.availHeight;", RuleId::ReplaceObfScreen).empty());
    EXPECT_TRUE(one_rule("let screen = {}; screen[\"\\x61vailHeight\"];", RuleId::ReplaceObfScreen).empty());
}

// Whole-script: every rule fires on a composite script and all artifacts check.

TEST(ApplyAll, EveryRuleFires) {
    auto stub = make_translator(TranslatorMode::Stub);
    const std::string code =
        "let x = 42;\n"
        "eval(\"1\");\n"
        "let ia = [1, 2];\n"
        "let fa = [0.5];\n"
        "if (x > 1) { log(1); } else { log(2); }\n"
        "for (let i = 0; i < 2; i++) { log(3); }\n"
        "while (x < 44) { x++; }\n"
        "class Shape {}\n"
        "function sq(a) { return a * a; }\n"
        "ctx.fillRect(0, 0, 1, 1);\n"
        "h = screen.colorDepth;\n"
        "c = make(\"canvas\");\n"
        "const pk = \"\\x63olorDepth\";\n"
        "d = screen[pk];\n";
    auto r = run(code, all_rule_set(), stub.get());
    std::set<RuleId> fired;
    for (const auto& a : r.artifacts) fired.insert(a.rule);
    for (RuleId id : all_rules()) EXPECT_TRUE(fired.count(id)) << to_string(id);
}

TEST(CheckArtifact, DetectsBrokenArtifacts) {
    auto a = one_rule("let x = 42;", RuleId::ReplaceLiteralsRecursive)[0];
    auto broken = a;
    broken.glue = "let x = instance.exports.y_0.value;";
    EXPECT_NE(check_artifact(broken), "");
    broken.glue = "let x = (;";
    EXPECT_NE(check_artifact(broken), "");
    auto loop = one_rule("for (let i=0;i<1;i++){f();}", RuleId::ReplaceForLoops)[0];
    loop.glue = "instance.exports.for_0();";
    EXPECT_NE(check_artifact(loop), "");
}
