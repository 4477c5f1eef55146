#include "fpwasm/errors.hpp"
#include "fpwasm/parser.hpp"
#include "fpwasm/signals.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

using namespace fpwasm;

namespace {

TupleCounts tuples(const std::string& code) { return extract_tuples(*parse_text(std::string_view(code))); }

ObfuscatedScript convert(const SourceScript& s, RuleSet rules) {
    auto root = parse(s);
    return assemble(s, plan_patch(apply_all(*root, s, rules, nullptr)));
}

long delta_of(const std::vector<SignalDelta>& ds, const std::string& t) {
    for (const auto& d : ds)
        if (d.tuple.rendered() == t) return d.delta;
    ADD_FAILURE() << t;
    return 0;
}

}  // namespace

TEST(Tuples, MemberEmitsPropertyAndBase) {
    EXPECT_EQ(tuples("screen.availHeight;"),
              (TupleCounts{{"MemberExpression:availHeight", 1}, {"MemberExpression:screen", 1}}));
    EXPECT_EQ(tuples("a.b.c;"), (TupleCounts{{"MemberExpression:a", 1}, {"MemberExpression:b", 1},
                                             {"MemberExpression:c", 1}}));
    EXPECT_EQ(tuples("o[\"canvas\"]; o[k];"), (TupleCounts{{"MemberExpression:canvas", 1}, {"MemberExpression:o", 2}}));
    EXPECT_TRUE(tuples("").empty());
}

TEST(Tuples, CallPropertyBinary) {
    auto t = tuples("ctx.fillText(\"hi there\", 1, 2);");
    EXPECT_EQ(t["MemberExpression:fillText"], 1u);
    EXPECT_EQ(t["CallExpression:fillText"], 1u);
    EXPECT_EQ(t.count("CallExpression:hi there"), 0u);
    auto c = tuples("document.createElement(\"canvas\"); f(1);");
    EXPECT_EQ(c["CallExpression:canvas"], 1u);
    EXPECT_EQ(c["CallExpression:createElement"], 1u);
    EXPECT_EQ(c["CallExpression:f"], 1u);
    auto p = tuples("var o = { getScreenResolution: 1, \"k\": 2, 3: 4, [z]: 5 };");
    EXPECT_EQ(p, (TupleCounts{{"Property:3", 1}, {"Property:getScreenResolution", 1}, {"Property:k", 1}}));
    auto b = tuples("if (e.type == x) {}");
    EXPECT_EQ(b["BinaryExpression:type"], 1u);
    EXPECT_EQ(b["BinaryExpression:x"], 1u);
}

TEST(Tuples, Parse) {
    EXPECT_EQ(AstTuple::parse("MemberExpression:screen").token, "screen");
    EXPECT_EQ(AstTuple::parse("Property:a:b").token, "a:b");
    EXPECT_THROW(AstTuple::parse("nocolon"), ConfigError);
    auto w = load_watchlist("# top\nMemberExpression:screen\n\n  CallExpression:canvas \n");
    ASSERT_EQ(w.size(), 2u);
    EXPECT_EQ(w[1].rendered(), "CallExpression:canvas");
    EXPECT_EQ(default_watchlist().size(), 10u);
    EXPECT_EQ(default_watchlist().front().rendered(), "MemberExpression:screen");
}

TEST(Vectorize, SharedTuples) {
    // totals: a 3, z 3, b 2, x 2, y 2, c 1, d 1
    auto v = vectorize({tuples("a.x; a.y; a.z;"), tuples("b.x; b.y; c.z; d.z;")}, 3);
    EXPECT_EQ(v.vocabulary, (std::vector<std::string>{"MemberExpression:a", "MemberExpression:z", "MemberExpression:b"}));
    EXPECT_EQ(v.counts[0], (std::vector<std::size_t>{3, 1, 0}));
    EXPECT_EQ(v.counts[1], (std::vector<std::size_t>{0, 2, 2}));
    auto shared = vectorize({tuples("a.x;"), tuples("a.x; a.x;")});
    EXPECT_EQ(shared.vocabulary.size(), 2u);
    EXPECT_EQ(shared.counts[1], (std::vector<std::size_t>{2, 2}));
}

TEST(Vectorize, CapKeepsMostFrequent) {
    std::vector<TupleCounts> docs(2);
    for (int i = 0; i < 6000; ++i) docs[0]["T:" + std::to_string(i)] = static_cast<std::size_t>(1 + (i % 7 == 0));
    for (int i = 0; i < 6000; i += 3) docs[1]["T:" + std::to_string(i)] = 1;
    auto v = vectorize(docs);
    ASSERT_EQ(v.vocabulary.size(), 5000u);
    std::map<std::string, std::size_t> total;
    for (const auto& d : docs)
        for (const auto& [t, c] : d) total[t] += c;
    std::size_t min_kept = SIZE_MAX, max_dropped = 0;
    std::set<std::string> kept(v.vocabulary.begin(), v.vocabulary.end());
    for (const auto& [t, c] : total) {
        if (kept.count(t)) min_kept = std::min(min_kept, c);
        else max_dropped = std::max(max_dropped, c);
    }
    EXPECT_GE(min_kept, max_dropped);
    EXPECT_THROW(vectorize(docs, 0), RangeError);
    EXPECT_THROW(vectorize({}), RangeError);
}

TEST(Evasion, FillTextDelta) {
    SourceScript s("var ctx = c.getContext(\"2d\");\nctx.fillText(\"x\", 1, 2);\n");
    auto obf = convert(s, {RuleId::ReplaceCanvasApiCalls});
    auto ds = evasion_report(s, obf);
    EXPECT_EQ(delta_of(ds, "MemberExpression:fillText"), -1);
    EXPECT_EQ(ds.size(), 10u);

    SourceScript plain("var q = 1 + 2;");
    for (const auto& d : evasion_report(plain, convert(plain, all_rule_set()))) {
        EXPECT_EQ(d.count_before, 0);
        EXPECT_EQ(d.delta, 0);
    }
    auto table = signal_report_table(ds);
    EXPECT_NE(table.find("total"), std::string::npos);
    EXPECT_NE(signal_report_json(ds).find("\"count_before\""), std::string::npos);
}

TEST(Evasion, GlueCarriesNoWatchedTuples) {
    namespace fs = std::filesystem;
    std::size_t checked = 0;
    for (const auto& e : fs::directory_iterator(fs::path(FPWASM_FIXTURES) / "corpus")) {
        std::ifstream in(e.path(), std::ios::binary);
        SourceScript s(std::string(std::istreambuf_iterator<char>(in), {}));
        auto root = parse(s);
        auto plan = plan_patch(apply_all(*root, s, all_rule_set(), nullptr));
        for (const auto& sp : span_suppression(s, plan)) {
            EXPECT_EQ(sp.in_glue, 0u) << e.path().filename() << " " << to_string(sp.rule);
            ++checked;
        }
    }
    EXPECT_GT(checked, 0u);
}
