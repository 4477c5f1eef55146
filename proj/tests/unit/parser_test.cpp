#include "fpwasm/errors.hpp"
#include "fpwasm/parser.hpp"
#include "fpwasm/source.hpp"

#include <gtest/gtest.h>

#include <string>
#include <vector>

namespace fpwasm {
namespace {

std::vector<const Node*> collect(const Node& root, NodeKind kind) {
    std::vector<const Node*> out;
    walk(root, [&](const Node& n, const Node*) {
        if (n.kind == kind) out.push_back(&n);
        return true;
    });
    return out;
}

TEST(Parser, SingleDeclaration) {
    SourceScript script("let x = 42;");
    auto root = parse(script);
    ASSERT_EQ(root->children.size(), 1u);
    EXPECT_EQ(root->child(0)->kind, NodeKind::VariableDeclaration);
    EXPECT_EQ(root->child(0)->name, "let");
    auto literals = collect(*root, NodeKind::Literal);
    ASSERT_EQ(literals.size(), 1u);
    EXPECT_EQ(literals[0]->raw, "42");
    EXPECT_EQ(literals[0]->span, (Span{8, 10}));
    EXPECT_EQ(slice(script, literals[0]->span), "42");
    EXPECT_EQ(script.text().find("42"), literals[0]->span.start);
}

TEST(Parser, OversizeScriptRejected) {
    SourceScript script(std::string(150 * 1024, ' '));
    EXPECT_THROW(parse(script), OversizeError);
}

TEST(Parser, ExactLimitAccepted) {
    std::string text = "x;" + std::string(max_script_bytes - 2, ' ');
    EXPECT_NO_THROW(parse(SourceScript(text)));
}

TEST(Parser, MalformedDeclaration) { EXPECT_THROW(parse(SourceScript("let x = ;")), ParseError); }

TEST(Parser, ParseErrorCarriesOffset) {
    try {
        parse(SourceScript("let x = ;"));
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.offset(), 8u);
    }
}

TEST(Parser, ModuleSyntaxRejected) {
    EXPECT_THROW(parse_text("import x from 'y';"), ParseError);
    EXPECT_THROW(parse_text("export const a = 1;"), ParseError);
}

TEST(Parser, NewerSyntaxRejected) {
    EXPECT_THROW(parse_text("a?.b"), ParseError);
    EXPECT_THROW(parse_text("a ?? b"), ParseError);
    EXPECT_THROW(parse_text("class A { x = 1; }"), ParseError);
}

TEST(Parser, CodePointOffsets) {
    SourceScript script("var s = \"é\U0001F600\"; var n = 1;");
    auto root = parse(script);
    auto literals = collect(*root, NodeKind::Literal);
    ASSERT_EQ(literals.size(), 2u);
    EXPECT_EQ(literals[0]->span, (Span{8, 12}));
    EXPECT_EQ(literals[0]->string_value, "é\U0001F600");
    EXPECT_EQ(slice(script, literals[1]->span), "1");
}

// Each entry must parse; spans are checked for containment and leaf order.
const char* const valid_corpus[] = {
    "",
    "a = b ? c : d, e;",
    "var f = function g(a, b = 2, ...rest) { return a + b * rest.length; };",
    "const add = (a, b) => a + b; const sq = x => x * x; const n = () => ({});",
    "async function f() { await g(); } const h = async x => await x;",
    "function* gen() { yield 1; yield* other(); }",
    "class A extends B { constructor() { super(); } static m() {} get x() { return 1; } set x(v) {} }",
    "let {a, b: [c, d = 1], ...e} = obj; [x, y] = [y, x];",
    "for (var i = 0; i < 10; i++) {} for (const k in o) {} for (let v of arr) {}",
    "outer: for (;;) { inner: while (true) { break outer; } }",
    "do x++; while (x < 5)",
    "switch (x) { case 1: f(); break; default: g(); }",
    "try { f(); } catch (e) { g(e); } finally { h(); }",
    "try { f(); } catch { }",
    "var re = /ab+c/gi, d = a / b / c;",
    "var t = `a${b}c${`nested${d}`}e`; tag`x${y}`;",
    "a\n++b",
    "var x = 1\nvar y = 2",
    "if (a) b(); else if (c) d(); else { e(); }",
    "new Foo; new Foo.Bar(1)(2); new new X()();",
    "x = {get: 1, set: 2, async: 3, static: 4, 'q': 5, 7: 6, [k]: 7, m() {}, get g() { return 1; }};",
    "a **= 2; b = 2 ** 3 ** 2; c = (-2) ** 2;",
    "delete o.p; void 0; typeof x === 'undefined';",
    "with (o) { p; }",
    "let async = 1; async(); var yield_ = 1;",
    "({a = 1} = {});",
    "function f() { return\n1; }",
    "var o = { if: 1, class: 2 }; o.if; o.class;",
    "x = a in b; for (var i = (a in b) ? 1 : 0; i < 1; i++) {}",
    "label: function f() {}",
    "(function () { 'use strict'; })();",
    "var s = '\\x41\\u0042\\u{1F600}\\n';",
    "0x1F; 0o17; 0b101; 017; 1e3; .5; 5.;",
    "a = b\n(c)",
    "function F() { this.x = new.target; }",
};

TEST(Parser, ValidCorpusSpans) {
    for (const char* text : valid_corpus) {
        SCOPED_TRACE(text);
        NodePtr root;
        ASSERT_NO_THROW(root = parse_text(std::string_view(text)));
        SourceScript script{std::string(text)};
        EXPECT_EQ(root->span, (Span{0, script.length()}));
        EXPECT_EQ(slice(script, root->span), script.text());
        std::size_t last_leaf = 0;
        walk(*root, [&](const Node& n, const Node* parent) {
            if (parent) {
                EXPECT_LE(parent->span.start, n.span.start) << to_string(n.kind);
                EXPECT_GE(parent->span.end, n.span.end) << to_string(n.kind);
            }
            EXPECT_LE(n.span.start, n.span.end);
            bool leaf = true;
            for (const auto& c : n.children)
                if (c) leaf = false;
            if (leaf) {
                EXPECT_GE(n.span.start, last_leaf) << to_string(n.kind);
                last_leaf = n.span.start;
            }
            return true;
        });
    }
}

TEST(Parser, InvalidCorpus) {
    const char* const invalid[] = {
        "let x = ;", "a +", "function () {}", "return 1;", "break;", "for (;;) { continue foo; }",
        "if (a) else b;", "var 1x = 2;", "x = 'unterminated", "a => { ", "1 = 2;", "({a: 1} = x);",
        "class { }", "new.target", "-2 ** 2", "`abc", "/unterminated",
    };
    for (const char* text : invalid) {
        SCOPED_TRACE(text);
        EXPECT_THROW(parse_text(std::string_view(text)), ParseError);
    }
}

TEST(Parser, Precedence) {
    auto root = parse_text(std::string_view("a + b * c - d;"));
    const Node* e = root->child(0)->child(0);
    ASSERT_EQ(e->kind, NodeKind::BinaryExpression);
    EXPECT_EQ(e->name, "-");
    EXPECT_EQ(e->child(0)->name, "+");
    EXPECT_EQ(e->child(0)->child(1)->name, "*");

    root = parse_text(std::string_view("a ** b ** c;"));
    e = root->child(0)->child(0);
    EXPECT_EQ(e->child(0)->name, "a");
    EXPECT_EQ(e->child(1)->name, "**");
}

TEST(Parser, ParenthesizedSpansStartAtParen) {
    auto root = parse_text(std::string_view("(a + b) * c;"));
    const Node* e = root->child(0)->child(0);
    EXPECT_EQ(e->span, (Span{0, 11}));
    EXPECT_EQ(e->child(0)->span, (Span{1, 6}));
    root = parse_text(std::string_view("c * (a + b);"));
    EXPECT_EQ(root->child(0)->child(0)->span, (Span{0, 11}));
}

TEST(Parser, MemberPunctPosition) {
    auto root = parse_text(std::string_view("ctx.fillText; nav['platform'];"));
    auto members = collect(*root, NodeKind::MemberExpression);
    ASSERT_EQ(members.size(), 2u);
    EXPECT_EQ(members[0]->punct_pos, 3u);
    EXPECT_FALSE(members[0]->computed);
    EXPECT_EQ(members[1]->punct_pos, 17u);
    EXPECT_TRUE(members[1]->computed);
}

TEST(Parser, TemplateElementSpansExcludeDelimiters) {
    auto root = parse_text(std::string_view("`ab${c}de`;"));
    auto els = collect(*root, NodeKind::TemplateElement);
    ASSERT_EQ(els.size(), 2u);
    EXPECT_EQ(els[0]->span, (Span{1, 3}));
    EXPECT_EQ(els[1]->span, (Span{7, 9}));
}

TEST(Parser, Determinism) {
    for (const char* text : valid_corpus) {
        auto a = parse_text(std::string_view(text));
        auto b = parse_text(std::string_view(text));
        EXPECT_TRUE(structurally_equal(*a, *b)) << text;
    }
}

TEST(Parser, DeepNestingFailsCleanly) {
    std::string text(5000, '(');
    text += "1";
    text += std::string(5000, ')');
    EXPECT_THROW(parse_text(std::string_view(text)), ParseError);
    std::string arrays(5000, '[');
    EXPECT_THROW(parse_text(std::string_view(arrays)), ParseError);
}

TEST(Parser, ArrowParamsAndBodyForms) {
    auto root = parse_text(std::string_view("f = (a, {b}, [c], ...d) => a;"));
    auto arrows = collect(*root, NodeKind::ArrowFunctionExpression);
    ASSERT_EQ(arrows.size(), 1u);
    EXPECT_TRUE(arrows[0]->expression_body);
    EXPECT_EQ(arrows[0]->function_params().size(), 4u);
}

}  // namespace
}  // namespace fpwasm
