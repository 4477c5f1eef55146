#include "fpwasm/rules.hpp"

#include "fpwasm/errors.hpp"
#include "fpwasm/parser.hpp"
#include "fpwasm/text.hpp"
#include "fpwasm/translator.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <map>
#include <regex>

namespace fpwasm {

namespace {

constexpr std::array<RuleId, rule_count> rule_order{
    RuleId::ReplaceLiteralsRecursive,
    RuleId::ReplaceCallee,
    RuleId::ReplaceIntArrays,
    RuleId::ReplaceFloatArrays,
    RuleId::ReplaceIfElse,
    RuleId::ReplaceForLoops,
    RuleId::ReplaceWhileLoops,
    RuleId::ReplaceFunctionCallsWithNoReturn,
    RuleId::ReplaceClassDefs,
    RuleId::ReplaceFuncDefs,
    RuleId::ReplaceCanvasApiCalls,
    RuleId::ObfuscateFunctions,
    RuleId::ReplaceWithRegex,
    RuleId::ReplaceObfScreen,
};

constexpr std::array<std::string_view, rule_count> rule_names{
    "replace_literals_recursive",
    "replace_callee",
    "replace_int_arrays",
    "replace_float_arrays",
    "replace_if_else",
    "replace_for_loops",
    "replace_while_loops",
    "replace_function_calls_with_no_return",
    "replace_class_defs",
    "replace_func_defs",
    "replace_canvas_api_calls",
    "obfuscate_functions",
    "replace_with_regex",
    "replace_obf_screen",
};

}  // namespace

const std::array<RuleId, rule_count>& all_rules() noexcept { return rule_order; }

std::string_view to_string(RuleId r) noexcept { return rule_names[static_cast<std::size_t>(r)]; }

RuleId parse_rule_id(std::string_view name) {
    for (std::size_t i = 0; i < rule_count; ++i)
        if (rule_names[i] == name) return rule_order[i];
    throw ConfigError("unknown rule '" + std::string(name) + "'");
}

int rule_number(RuleId r) noexcept {
    const int i = static_cast<int>(r);
    return i <= 2 ? i + 1 : i;
}

RuleSet all_rule_set() { return RuleSet(rule_order.begin(), rule_order.end()); }

RuleConfig RuleConfig::defaults() {
    RuleConfig c;
    c.fp_api_names = {"toDataURL",        "getContext",        "fillText",     "fillRect",         "fillStyle",
                      "measureText",      "hardwareConcurrency", "availHeight", "availWidth",       "colorDepth",
                      "platform",         "language",          "appName",      "userAgent",        "getTimezoneOffset",
                      "plugins",          "createAnalyser",    "createOscillator", "enumerateDevices"};
    c.sensitive_callees = {"eval", "Function", "atob", "btoa", "unescape", "escape", "setTimeout"};
    return c;
}

std::vector<std::string> load_name_list(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
        while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
        if (!line.empty()) out.emplace_back(line);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return out;
}

std::pair<std::string, std::string> split_half(std::string_view name) {
    auto cps = decode_utf8(name);
    if (!cps) throw RangeError("split_half: invalid UTF-8");
    const std::size_t half = cps->size() / 2;
    return {encode_utf8(std::u32string_view(*cps).substr(0, half)),
            encode_utf8(std::u32string_view(*cps).substr(half))};
}

const std::vector<std::string>& reserved_runtime_names() {
    static const std::vector<std::string> names{"instance", "getString", "memory", "globalObject", "importObject",
                                                "__fp",     "__fp_slots", "__fp_bytes", "__fp_decoder"};
    return names;
}

namespace {

// --- whole-script facts ---------------------------------------------------

void pattern_names(const Node* p, std::vector<const Node*>& out) {
    if (!p) return;
    switch (p->kind) {
    case NodeKind::Identifier:
        out.push_back(p);
        break;
    case NodeKind::ArrayPattern:
        for (const auto& c : p->children) pattern_names(c.get(), out);
        break;
    case NodeKind::ObjectPattern:
        for (const auto& c : p->children) {
            if (c->is(NodeKind::Property))
                pattern_names(c->child(1), out);
            else
                pattern_names(c.get(), out);
        }
        break;
    case NodeKind::AssignmentPattern:
    case NodeKind::RestElement:
        pattern_names(p->child(0), out);
        break;
    default:
        break;
    }
}

// Binding identifiers introduced anywhere below `root`.
std::vector<const Node*> bindings_in(const Node& root) {
    std::vector<const Node*> out;
    walk(root, [&](const Node& n, const Node*) {
        switch (n.kind) {
        case NodeKind::VariableDeclarator:
            pattern_names(n.child(0), out);
            break;
        case NodeKind::FunctionDeclaration:
        case NodeKind::FunctionExpression:
        case NodeKind::ArrowFunctionExpression:
            if (n.function_id()) out.push_back(n.function_id());
            for (const auto& p : n.function_params()) pattern_names(p.get(), out);
            break;
        case NodeKind::ClassDeclaration:
        case NodeKind::ClassExpression:
            if (n.child(0)) out.push_back(n.child(0));
            break;
        case NodeKind::CatchClause:
            pattern_names(n.child(0), out);
            break;
        default:
            break;
        }
        return true;
    });
    return out;
}

bool is_name_position(const Node& n, const Node* parent) {
    if (!parent) return false;
    switch (parent->kind) {
    case NodeKind::MemberExpression:
        return !parent->computed && parent->child(1) == &n;
    case NodeKind::Property:
    case NodeKind::MethodDefinition:
        return !parent->computed && parent->child(0) == &n;
    case NodeKind::LabeledStatement:
    case NodeKind::BreakStatement:
    case NodeKind::ContinueStatement:
    case NodeKind::MetaProperty:
        return true;
    default:
        return false;
    }
}

// Identifier references (binding positions included, property names not).
std::vector<const Node*> references_in(const Node& root) {
    std::vector<const Node*> out;
    walk(root, [&](const Node& n, const Node* parent) {
        if (n.is(NodeKind::Identifier) && !is_name_position(n, parent)) out.push_back(&n);
        return true;
    });
    return out;
}

struct Hazards {
    bool any_jump = false;      // return/throw/break/continue at any depth
    bool escaping = false;      // control leaves the root (outside nested functions)
    bool suspends = false;      // yield/await outside nested functions
    bool hoists = false;        // var/function declarations or direct eval outside nested functions
    bool this_or_args = false;  // `this`, `arguments`, `super`, new.target anywhere
};

void scan_hazards(const Node& n, int loops, int switches, bool nested, Hazards& h) {
    bool child_nested = nested;
    int child_loops = loops;
    int child_switches = switches;
    switch (n.kind) {
    case NodeKind::ReturnStatement:
        h.any_jump = true;
        if (!nested) h.escaping = true;
        break;
    case NodeKind::ThrowStatement:
        h.any_jump = true;
        break;
    case NodeKind::BreakStatement:
        h.any_jump = true;
        if (!nested && (n.child(0) || (loops == 0 && switches == 0))) h.escaping = true;
        break;
    case NodeKind::ContinueStatement:
        h.any_jump = true;
        if (!nested && (n.child(0) || loops == 0)) h.escaping = true;
        break;
    case NodeKind::YieldExpression:
    case NodeKind::AwaitExpression:
        if (!nested) h.suspends = true;
        break;
    case NodeKind::VariableDeclaration:
        if (!nested && n.name == "var") h.hoists = true;
        break;
    case NodeKind::FunctionDeclaration:
        if (!nested) h.hoists = true;
        child_nested = true;
        break;
    case NodeKind::FunctionExpression:
    case NodeKind::ArrowFunctionExpression:
        child_nested = true;
        break;
    case NodeKind::ThisExpression:
    case NodeKind::Super:
    case NodeKind::MetaProperty:
        h.this_or_args = true;
        break;
    case NodeKind::Identifier:
        if (n.name == "arguments") h.this_or_args = true;
        break;
    case NodeKind::CallExpression:
        // direct eval can declare vars in the enclosing function scope
        if (!nested && n.child(0)->is(NodeKind::Identifier) && n.child(0)->name == "eval") h.hoists = true;
        break;
    case NodeKind::ForStatement:
    case NodeKind::ForInStatement:
    case NodeKind::ForOfStatement:
    case NodeKind::WhileStatement:
    case NodeKind::DoWhileStatement:
        ++child_loops;
        break;
    case NodeKind::SwitchStatement:
        ++child_switches;
        break;
    default:
        break;
    }
    for (const auto& c : n.children)
        if (c) scan_hazards(*c, child_loops, child_switches, child_nested, h);
}

Hazards hazards(const Node& n) {
    Hazards h;
    scan_hazards(n, 0, 0, false, h);
    return h;
}

bool is_int32(double v) {
    return v == std::floor(v) && v >= INT_MIN && v <= INT_MAX && !(v == 0 && std::signbit(v));
}

std::optional<double> numeric_literal(const Node* n) {
    if (!n) return std::nullopt;
    if (n->is(NodeKind::Literal) && n->literal_type == LiteralType::Number) return n->number_value;
    if (n->is(NodeKind::UnaryExpression) && n->name == "-" && n->child(0)->is(NodeKind::Literal) &&
        n->child(0)->literal_type == LiteralType::Number)
        return -n->child(0)->number_value;
    return std::nullopt;
}

std::string sym(std::string_view base, std::size_t pos) { return std::string(base) + "_" + std::to_string(pos); }

std::string exports_ref(const std::string& symbol) { return "instance.exports." + symbol; }

std::string string_pair(const std::string& a, const std::string& b) {
    return "getString(" + exports_ref(a) + ") + getString(" + exports_ref(b) + ")";
}

ImportDecl import_void(const std::string& field, std::string js_body) {
    return ImportDecl{"js", field, {}, ResultType::Void, std::move(js_body)};
}

std::string bindings_object(const std::vector<ImportDecl>& imports) {
    std::string s = "{";
    for (std::size_t i = 0; i < imports.size(); ++i) {
        if (i) s += ", ";
        s += imports[i].field + ": " + imports[i].js_body;
    }
    return s + "}";
}

// Glue for callback-driven rules: bind the site's closures, then call.
std::string run_with(const std::vector<ImportDecl>& imports, const std::string& call) {
    return "__fp.run(" + bindings_object(imports) + ", () => " + call + ");";
}

// --- engine ----------------------------------------------------------------

class Engine {
public:
    Engine(const Node& root, const SourceScript& script, const RuleSet& enabled, Translator* translator,
           const RuleConfig& cfg)
      : root_(root), text_(script.code_points()), enabled_(enabled), translator_(translator), cfg_(cfg),
        fp_api_(cfg.fp_api_names.begin(), cfg.fp_api_names.end()),
        sensitive_(cfg.sensitive_callees.begin(), cfg.sensitive_callees.end()) {
        for (const Node* b : bindings_in(root)) ++declared_[b->name];
        for (const Node* r : references_in(root)) reference_starts_[r->name].push_back(r->span.start);
        walk(root, [&](const Node& n, const Node*) {
            if (n.is(NodeKind::Literal) && n.literal_type == LiteralType::String &&
                n.raw.find("\\x") != std::string::npos && fp_api_.count(n.string_value))
                hex_api_literal_ = true;
            return true;
        });
        walk(root, [&](const Node& n, const Node*) {
            if (n.is(NodeKind::CallExpression) && n.child(0) && n.child(0)->is(NodeKind::Identifier) &&
                n.child(0)->name == "eval")
                top_level_evals_.push_back(n.span);
            return !n.is_function();
        });
    }

    std::vector<TransformArtifact> run() {
        for (const auto& name : reserved_runtime_names())
            if (declared_.count(name)) return {};
        walk(root_, [&](const Node& n, const Node* parent) {
            visit(n, parent);
            return true;
        });
        if (on(RuleId::ReplaceWithRegex)) regex_canvas();
        // A top-level direct eval left in place would declare its vars in the
        // wrapper scope. Each one must become an indirect call, and nothing may
        // enclose that call.
        for (const Span& e : top_level_evals_) {
            const bool rewritten = std::any_of(out_.begin(), out_.end(), [&](const TransformArtifact& a) {
                return a.rule == RuleId::ReplaceCallee && a.span == e;
            });
            if (!rewritten) return {};
            std::erase_if(out_, [&](const TransformArtifact& a) {
                return a.span.contains(e) && !(a.span == e);
            });
        }
        std::stable_sort(out_.begin(), out_.end(), [](const TransformArtifact& a, const TransformArtifact& b) {
            if (a.span.start != b.span.start) return a.span.start < b.span.start;
            return static_cast<int>(a.rule) < static_cast<int>(b.rule);
        });
        return std::move(out_);
    }

private:
    bool on(RuleId r) const { return enabled_.count(r) > 0; }

    std::vector<Span> top_level_evals_;
    std::string src(Span s) const { return slice(text_, s); }
    std::string src(const Node& n) const { return slice(text_, n.span); }
    bool declared(const std::string& name) const { return declared_.count(name) > 0; }

    void emit(RuleId rule, Span span, std::vector<ExportIR> exports, std::vector<ImportDecl> imports, std::string glue,
              GlueContext context) {
        TransformArtifact a;
        a.rule = rule;
        a.span = span;
        a.exports = std::move(exports);
        a.imports = std::move(imports);
        a.glue = std::move(glue);
        a.context = context;
        out_.push_back(std::move(a));
    }

    static std::string closure(const std::string& stmt_text, bool is_block) {
        return is_block ? "() => " + stmt_text : "() => {" + stmt_text + "}";
    }

    std::string statement_closure(const Node& stmt) const { return closure(src(stmt), stmt.is(NodeKind::BlockStatement)); }

    void visit(const Node& n, const Node* parent) {
        switch (n.kind) {
        case NodeKind::VariableDeclaration:
            if (on(RuleId::ReplaceLiteralsRecursive)) literals(n, parent);
            break;
        case NodeKind::CallExpression:
            if (on(RuleId::ReplaceCallee)) sensitive_call(n);
            if (on(RuleId::ObfuscateFunctions)) dynamic_codegen(n, parent);
            break;
        case NodeKind::NewExpression:
            if (on(RuleId::ReplaceCallee)) sensitive_call(n);
            break;
        case NodeKind::ArrayExpression:
            numeric_array(n);
            break;
        case NodeKind::IfStatement:
            if (on(RuleId::ReplaceIfElse)) if_else(n);
            break;
        case NodeKind::ForStatement:
            if (on(RuleId::ReplaceForLoops)) for_loop(n);
            break;
        case NodeKind::WhileStatement:
            if (on(RuleId::ReplaceWhileLoops)) while_loop(n);
            break;
        case NodeKind::ExpressionStatement:
            if (on(RuleId::ReplaceFunctionCallsWithNoReturn)) call_statement(n);
            break;
        case NodeKind::ClassDeclaration:
        case NodeKind::ClassExpression:
            if (on(RuleId::ReplaceClassDefs) && cfg_.dom_available) class_def(n);
            break;
        case NodeKind::FunctionDeclaration:
        case NodeKind::FunctionExpression:
        case NodeKind::ArrowFunctionExpression:
            if (on(RuleId::ReplaceFuncDefs)) func_def(n, parent);
            break;
        case NodeKind::MemberExpression:
            if (on(RuleId::ReplaceCanvasApiCalls)) fp_member(n);
            if (on(RuleId::ObfuscateFunctions)) dynamic_codegen(n, parent);
            if (on(RuleId::ReplaceObfScreen)) hex_screen(n);
            break;
        default:
            break;
        }
    }

    // Rule 1
    void literals(const Node& decl, const Node* parent) {
        if (parent && (parent->is(NodeKind::ForStatement) || parent->is(NodeKind::ForInStatement) ||
                       parent->is(NodeKind::ForOfStatement)) &&
            parent->child(0) == &decl)
            return;
        const bool single = decl.children.size() == 1;
        for (const auto& d : decl.children) {
            const Node* id = d->child(0);
            const Node* init = d->child(1);
            if (!id->is(NodeKind::Identifier) || !init || !init->is(NodeKind::Literal)) continue;
            const std::size_t pos = single ? decl.span.start : d->span.start;
            const std::string name = src(*id);
            const std::string symbol = sym(is_valid_symbol(name) ? name : "v", pos);
            std::string value;
            ExportIR ex;
            switch (init->literal_type) {
            case LiteralType::Number:
                ex = is_int32(init->number_value)
                         ? ExportIR::const_i32(symbol, static_cast<std::int32_t>(init->number_value))
                         : ExportIR::const_f64(symbol, init->number_value);
                value = exports_ref(symbol) + ".value";
                break;
            case LiteralType::Boolean:
                ex = ExportIR::const_i32(symbol, init->bool_value ? 1 : 0);
                value = exports_ref(symbol) + ".value !== 0";
                break;
            case LiteralType::String:
                if (init->lone_surrogate) continue;
                ex = ExportIR::const_string(symbol, init->string_value);
                value = "getString(" + exports_ref(symbol) + ".value)";
                break;
            default:
                continue;
            }
            if (single) {
                const bool semi = decl.span.end > 0 && text_[decl.span.end - 1] == U';';
                emit(RuleId::ReplaceLiteralsRecursive, decl.span, {ex}, {},
                     decl.name + " " + name + " = " + value + (semi ? ";" : ""), GlueContext::Statement);
            } else {
                emit(RuleId::ReplaceLiteralsRecursive, d->span, {ex}, {}, name + " = " + value,
                     GlueContext::Declarator);
            }
        }
    }

    // Rule 2
    void sensitive_call(const Node& call) {
        const Node* callee = call.child(0);
        std::string name;
        std::string receiver;
        if (callee->is(NodeKind::Identifier)) {
            name = callee->name;
            if (declared(name)) return;
        } else if (callee->is(NodeKind::MemberExpression)) {
            const Node* prop = callee->child(1);
            if (!callee->computed)
                name = prop->name;
            else if (prop->is(NodeKind::Literal) && prop->literal_type == LiteralType::String)
                name = prop->string_value;
            else
                return;
            if (callee->child(0)->is(NodeKind::Super)) return;
            receiver = src(*callee->child(0));
        } else {
            return;
        }
        if (!sensitive_.count(name) || !is_valid_symbol(name)) return;
        if (call.is(NodeKind::NewExpression) && name == "ActiveXObject") return;
        const std::size_t nargs = call.children.size() - 1;
        if (name == "setTimeout") {
            const Node* first = call.child(1);
            if (!first || !first->is(NodeKind::Literal) || first->literal_type != LiteralType::String) return;
        }
        std::string args;
        if (nargs > 0) {
            args = src(Span{call.child(1)->span.start, call.children.back()->span.end});
            for (std::size_t i = 1; i < call.children.size(); ++i)
                if (hazards(*call.child(i)).suspends) return;
        }
        if (!receiver.empty() && hazards(*callee->child(0)).suspends) return;
        const std::size_t pos = call.span.start;
        const std::string symbol = sym(name, pos);
        const std::string pointer = "pointer_" + symbol;
        const std::string global = "globalObject_" + std::to_string(pos);
        std::string target;
        if (receiver.empty())
            target = global + "[getString(" + pointer + ")]";
        else
            target = "(" + receiver + ")[getString(" + pointer + ")]";
        std::string invoke = call.is(NodeKind::NewExpression) ? "new (" + target + ")(" + args + ")"
                                                              : target + "(" + args + ")";
        std::string glue = "(() => { const " + pointer + " = " + exports_ref(symbol) + "; ";
        if (receiver.empty())
            glue += "const " + global + " = typeof window !== 'undefined' ? window : globalThis; ";
        glue += "return " + invoke + "; })()";
        emit(RuleId::ReplaceCallee, call.span, {ExportIR::const_string(symbol, name)}, {}, std::move(glue),
             GlueContext::Expression);
    }

    // Rule 3
    void numeric_array(const Node& arr) {
        if (arr.children.empty()) return;
        std::vector<double> values;
        for (const auto& el : arr.children) {
            auto v = numeric_literal(el.get());
            if (!v) return;
            values.push_back(*v);
        }
        const bool integral = std::all_of(values.begin(), values.end(), is_int32);
        const RuleId rule = integral ? RuleId::ReplaceIntArrays : RuleId::ReplaceFloatArrays;
        if (!on(rule)) return;
        const std::size_t pos = arr.span.start;
        const std::string symbol = sym("arr", pos);
        const std::string getter = "get_" + symbol;
        ExportIR ex;
        if (integral) {
            std::vector<std::int32_t> iv;
            for (double v : values) iv.push_back(static_cast<std::int32_t>(v));
            ex = ExportIR::array_i32(symbol, getter, std::move(iv));
        } else {
            ex = ExportIR::array_f64(symbol, getter, values);
        }
        const std::string view = integral ? "Int32Array" : "Float64Array";
        emit(rule, arr.span, {ex}, {},
             "Array.from(new " + view + "(instance.exports.memory.buffer, " + exports_ref(getter) + "(), " +
                 std::to_string(values.size()) + "))",
             GlueContext::Expression);
    }

    // Rule 4
    void if_else(const Node& n) {
        const Node* test = n.child(0);
        const Node* then_s = n.child(1);
        const Node* else_s = n.child(2);
        if (!else_s) return;
        for (const Node* b : {then_s, else_s}) {
            const Hazards h = hazards(*b);
            if (h.any_jump || h.suspends || h.hoists) return;
        }
        if (hazards(*test).suspends) return;
        const std::size_t pos = n.span.start;
        const std::string imp1 = sym("$imp1", pos);
        const std::string imp2 = sym("$imp2", pos);
        const std::string fn = sym("$if_else", pos);
        const std::string cond = sym("wasmTestCondition", pos);
        std::vector<ImportDecl> imports{import_void(imp1, statement_closure(*then_s)),
                                        import_void(imp2, statement_closure(*else_s))};
        FunctionIR f;
        f.params = {ValType::I32};
        f.param_names = {"condition"};
        f.imports_needed = imports;
        f.body.push_back(Stmt::if_else(
            Expr::compare(Expr::Op::Eq, Expr::get_local(0, ValType::I32), Expr::const_i32(1)),
            {Stmt::eval(Expr::call(imp1, ResultType::Void))}, {Stmt::eval(Expr::call(imp2, ResultType::Void))}));
        std::string glue = "{ let " + cond + " = (" + src(*test) + ") ? 1 : 0; " +
                           run_with(imports, exports_ref(fn) + "(" + cond + ")") + " }";
        emit(RuleId::ReplaceIfElse, n.span, {ExportIR::function(fn, std::move(f))}, std::move(imports),
             std::move(glue), GlueContext::Statement);
    }

    // Rule 5
    void for_loop(const Node& n) {
        const Node* init = n.child(0);
        const Node* test = n.child(1);
        const Node* update = n.child(2);
        const Node* body = n.child(3);
        if (!init || !test || !update || !init->is(NodeKind::VariableDeclaration) || init->name != "let" ||
            init->children.size() != 1)
            return;
        const Node* id = init->child(0)->child(0);
        const auto start = numeric_literal(init->child(0)->child(1));
        if (!id->is(NodeKind::Identifier) || !start || !is_int32(*start)) return;
        const std::string var = id->name;

        if (!test->is(NodeKind::BinaryExpression) || (test->name != "<" && test->name != "<=")) return;
        if (!test->child(0)->is(NodeKind::Identifier) || test->child(0)->name != var) return;
        const auto bound = numeric_literal(test->child(1));
        if (!bound || !is_int32(*bound)) return;

        double step = 0;
        if (update->is(NodeKind::UpdateExpression) && update->name == "++" &&
            update->child(0)->is(NodeKind::Identifier) && update->child(0)->name == var) {
            step = 1;
        } else if (update->is(NodeKind::AssignmentExpression) && update->name == "+=" &&
                   update->child(0)->is(NodeKind::Identifier) && update->child(0)->name == var) {
            auto s = numeric_literal(update->child(1));
            if (!s || !is_int32(*s) || *s <= 0) return;
            step = *s;
        } else {
            return;
        }
        // the i32 counter must not wrap before the JS loop would stop
        if (*bound + step > INT_MAX) return;

        for (const Node* r : references_in(*body))
            if (r->name == var) return;
        const Hazards h = hazards(*body);
        if (h.escaping || h.suspends || h.hoists) return;

        const std::size_t pos = n.span.start;
        const std::string fn = sym("for", pos);
        const std::string body_field = sym("body", pos);
        std::vector<ImportDecl> imports{import_void(body_field, statement_closure(*body))};
        FunctionIR f;
        f.locals = {ValType::I32};
        f.local_names = {"i"};
        f.imports_needed = imports;
        const Expr::Op cmp = test->name == "<" ? Expr::Op::Lt : Expr::Op::Le;
        f.body.push_back(Stmt::set_local(0, Expr::const_i32(static_cast<std::int32_t>(*start))));
        f.body.push_back(Stmt::loop_while(
            Expr::compare(cmp, Expr::get_local(0, ValType::I32), Expr::const_i32(static_cast<std::int32_t>(*bound))),
            {Stmt::eval(Expr::call(body_field, ResultType::Void)),
             Stmt::set_local(0, Expr::binary(Expr::Op::Add, Expr::get_local(0, ValType::I32),
                                              Expr::const_i32(static_cast<std::int32_t>(step))))}));
        std::string glue = run_with(imports, exports_ref(fn) + "()");
        emit(RuleId::ReplaceForLoops, n.span, {ExportIR::function(fn, std::move(f))}, std::move(imports),
             std::move(glue), GlueContext::Statement);
    }

    // Rule 6
    void while_loop(const Node& n) {
        const Node* test = n.child(0);
        const Node* body = n.child(1);
        if (hazards(*test).suspends) return;
        const Hazards h = hazards(*body);
        if (h.escaping || h.suspends || h.hoists) return;
        const std::size_t pos = n.span.start;
        const std::string fn = sym("f", pos);
        const std::string cond = sym("cond", pos);
        const std::string body_field = sym("body", pos);
        std::vector<ImportDecl> imports{
            ImportDecl{"js", cond, {}, ResultType::I32, "() => (" + src(*test) + ") ? 1 : 0"},
            import_void(body_field, statement_closure(*body))};
        FunctionIR f;
        f.imports_needed = imports;
        f.body.push_back(Stmt::loop({
            Stmt::if_else(Expr::compare(Expr::Op::Eq, Expr::call(cond, ResultType::I32), Expr::const_i32(0)),
                          {Stmt::break_loop()}),
            Stmt::eval(Expr::call(body_field, ResultType::Void)),
        }));
        std::string glue = run_with(imports, exports_ref(fn) + "()");
        emit(RuleId::ReplaceWhileLoops, n.span, {ExportIR::function(fn, std::move(f))}, std::move(imports),
             std::move(glue), GlueContext::Statement);
    }

    // Rule 7
    void call_statement(const Node& n) {
        const Node* call = n.child(0);
        if (!call->is(NodeKind::CallExpression) || call->child(0)->is(NodeKind::Super)) return;
        const Hazards h = hazards(*call);
        if (h.suspends || h.hoists) return;
        const std::size_t pos = n.span.start;
        const std::string fn = sym("f", pos);
        const std::string imp = sym("impFunc", pos);
        std::vector<ImportDecl> imports{import_void(imp, "() => {" + src(*call) + ";}")};
        FunctionIR f;
        f.imports_needed = imports;
        f.body.push_back(Stmt::eval(Expr::call(imp, ResultType::Void)));
        std::string glue = run_with(imports, exports_ref(fn) + "()");
        emit(RuleId::ReplaceFunctionCallsWithNoReturn, n.span, {ExportIR::function(fn, std::move(f))},
             std::move(imports), std::move(glue), GlueContext::Statement);
    }

    // Rule 8
    void class_def(const Node& n) {
        // the injected script runs at global scope, so script-local names are unreachable from it
        std::map<std::string, int> inner;
        for (const Node* b : bindings_in(n)) ++inner[b->name];
        const std::string own = n.child(0) ? n.child(0)->name : std::string();
        for (const Node* r : references_in(n)) {
            if (r->name == own || inner.count(r->name)) continue;
            if (declared(r->name)) return;
        }
        const std::size_t pos = n.span.start;
        const std::string symbol = sym("class", pos);
        const std::string content = sym("classContent", pos);
        const std::string script = sym("script", pos);
        const std::string holder = "globalThis.__fp_" + symbol;
        std::string inject = "(() => { const " + content + " = getString(" + exports_ref(symbol) + ".value); const " +
                             script + " = document.createElement(\"script\"); " + script +
                             ".textContent = \"" + holder + " = (\" + " + content + " + \");\"; document.body.appendChild(" +
                             script + "); const c = " + holder + "; delete " + holder + "; return c; })()";
        std::vector<ExportIR> ex{ExportIR::const_string(symbol, src(n))};
        if (n.is(NodeKind::ClassDeclaration)) {
            emit(RuleId::ReplaceClassDefs, n.span, std::move(ex), {}, "let " + src(*n.child(0)) + " = " + inject + ";",
                 GlueContext::Statement);
        } else {
            emit(RuleId::ReplaceClassDefs, n.span, std::move(ex), {}, std::move(inject), GlueContext::Expression);
        }
    }

    // Rule 9
    void func_def(const Node& n, const Node* parent) {
        if (!translator_ || translator_->mode() == TranslatorMode::Off) return;
        if (parent && (parent->is(NodeKind::MethodDefinition) ||
                       (parent->is(NodeKind::Property) && (parent->method || parent->name != "init"))))
            return;
        const std::size_t pos = n.span.start;
        std::string symbol = sym("func_def", pos);
        std::string glue;
        GlueContext context = GlueContext::Expression;
        if (n.is(NodeKind::FunctionDeclaration)) {
            if (!parent || !(parent->is(NodeKind::Program) || parent->is(NodeKind::BlockStatement) ||
                             parent->is(NodeKind::SwitchCase)))
                return;
            const std::string name = n.function_id()->name;
            if (declared_.at(name) != 1) return;
            // the replacement is not hoisted, so earlier uses would break
            for (std::size_t start : reference_starts_[name])
                if (start < n.function_id()->span.start) return;
            static const std::regex positional(R"(.*_[0-9]+$)");
            if (is_valid_symbol(name) && name != "memory" && !std::regex_match(name, positional)) symbol = name;
            glue = "let " + src(*n.function_id()) + " = " + exports_ref(symbol) + ";";
            context = GlueContext::Statement;
        } else {
            glue = exports_ref(symbol);
        }
        TranslationRequest req{src(n), symbol, std::chrono::milliseconds(30000)};
        TranslationResult r = translator_->translate(req);
        if (r.status == TranslationStatus::Error && cfg_.strict_translator)
            throw TranslatorUnavailable("translator failed for function at " + std::to_string(pos) + ": " + r.reason);
        if (r.status != TranslationStatus::Ok || !r.function_ir || !r.function_ir->imports_needed.empty()) return;
        emit(RuleId::ReplaceFuncDefs, n.span, {ExportIR::function(symbol, std::move(*r.function_ir))}, {},
             std::move(glue), context);
    }

    std::vector<ExportIR> split_exports(const std::string& a, const std::string& b, const std::string& value) const {
        auto [h1, h2] = split_half(value);
        return {ExportIR::const_string(a, h1), ExportIR::const_string(b, h2)};
    }

    // Rule 10
    void fp_member(const Node& m) {
        const Node* prop = m.child(1);
        if (!m.computed) {
            if (!fp_api_.count(prop->name)) return;
            const std::size_t pos = m.punct_pos;
            const std::string a = sym("f_h", pos), b = sym("s_h", pos);
            emit(RuleId::ReplaceCanvasApiCalls, Span{m.punct_pos, prop->span.end}, split_exports(a, b, prop->name), {},
                 "[" + string_pair(a, b) + "]", GlueContext::MemberSuffix);
        } else if (prop->is(NodeKind::Literal) && prop->literal_type == LiteralType::String &&
                   fp_api_.count(prop->string_value)) {
            const std::size_t pos = prop->span.start;
            const std::string a = sym("f_h", pos), b = sym("s_h", pos);
            emit(RuleId::ReplaceCanvasApiCalls, prop->span, split_exports(a, b, prop->string_value), {},
                 string_pair(a, b), GlueContext::Expression);
        }
    }

    // Rule 11
    void dynamic_codegen(const Node& n, const Node* parent) {
        if (n.is(NodeKind::CallExpression)) {
            const Node* callee = n.child(0);
            if (!callee->is(NodeKind::Identifier) || callee->name != "canvas") return;
        } else {
            const Node* obj = n.child(0);
            if (!obj->is(NodeKind::Identifier) || obj->name != "screen") return;
            // indirect eval yields a value, not a reference
            if (parent) {
                if ((parent->is(NodeKind::AssignmentExpression) || parent->is(NodeKind::UpdateExpression)) &&
                    parent->child(0) == &n)
                    return;
                if (parent->is(NodeKind::UnaryExpression) && parent->name == "delete") return;
                if ((parent->is(NodeKind::CallExpression) || parent->is(NodeKind::NewExpression) ||
                     parent->is(NodeKind::TaggedTemplateExpression)) &&
                    parent->child(0) == &n)
                    return;
                if (parent->is(NodeKind::ForInStatement) || parent->is(NodeKind::ForOfStatement)) return;
            }
        }
        // evaluated at global scope, so every name must resolve there
        const Hazards h = hazards(n);
        if (h.this_or_args || h.suspends) return;
        for (const Node* r : references_in(n))
            if (declared(r->name)) return;
        const std::size_t pos = n.span.start;
        const std::string e = sym("e_call", pos), c = sym("c_str", pos);
        emit(RuleId::ObfuscateFunctions, n.span, {ExportIR::const_string(e, "eval"), ExportIR::const_string(c, src(n))},
             {}, "globalObject[getString(" + exports_ref(e) + ")](getString(" + exports_ref(c) + "))",
             GlueContext::Expression);
    }

    // Rule 12
    void regex_canvas() {
        static const std::regex pattern(R"(((['"]|\\)+canvas(['"]|\\)+))");
        // string literals by start offset, excluding property keys
        std::map<std::size_t, const Node*> literals;
        walk(root_, [&](const Node& n, const Node* parent) {
            if (n.is(NodeKind::Literal) && n.literal_type == LiteralType::String && n.string_value == "canvas") {
                const bool key = parent && (parent->is(NodeKind::Property) || parent->is(NodeKind::MethodDefinition)) &&
                                 parent->child(0) == &n && !parent->computed;
                if (!key) literals.emplace(n.span.start, &n);
            }
            return true;
        });
        if (literals.empty()) return;
        // regex runs on UTF-8 bytes; map byte offsets back to code points
        const std::string bytes = encode_utf8(text_);
        std::vector<std::size_t> cp_of_byte(bytes.size() + 1, text_.size());
        for (std::size_t i = 0, cp = 0; i < bytes.size(); ++i) {
            if (i > 0 && (static_cast<unsigned char>(bytes[i]) & 0xC0) != 0x80) ++cp;
            cp_of_byte[i] = cp;
        }
        for (auto it = std::sregex_iterator(bytes.begin(), bytes.end(), pattern); it != std::sregex_iterator(); ++it) {
            const auto& m = *it;
            const std::size_t bstart = static_cast<std::size_t>(m.position(0));
            const std::size_t bend = bstart + static_cast<std::size_t>(m.length(0));
            if (bend < bytes.size() && bytes[bend] == ':') continue;
            // the match must be exactly one quoted literal, e.g. "canvas"
            const std::size_t start = cp_of_byte[bstart];
            auto lit = literals.find(start);
            if (lit == literals.end() || lit->second->span.end != cp_of_byte[bend]) continue;
            const std::size_t pos = start;
            const std::string a = sym("cv1", pos), b = sym("cv2", pos);
            emit(RuleId::ReplaceWithRegex, lit->second->span, split_exports(a, b, "canvas"), {},
                 "(" + string_pair(a, b) + ")", GlueContext::Expression);
        }
    }

    // Rule 13
    void hex_screen(const Node& m) {
        if (!m.computed) return;
        const Node* obj = m.child(0);
        if (!obj->is(NodeKind::Identifier) || (obj->name != "screen" && obj->name != "canvas")) return;
        if (declared(obj->name)) return;
        const Node* key = m.child(1);
        if (key->is(NodeKind::Literal)) {
            if (key->literal_type != LiteralType::String || key->raw.find("\\x") == std::string::npos ||
                !fp_api_.count(key->string_value))
                return;
        } else if (!hex_api_literal_) {
            return;
        }
        const std::size_t pos = obj->span.start;
        const std::string a = sym("sc1", pos), b = sym("sc2", pos);
        emit(RuleId::ReplaceObfScreen, obj->span, split_exports(a, b, obj->name), {},
             "globalObject[" + string_pair(a, b) + "]", GlueContext::Expression);
    }

    const Node& root_;
    const std::u32string& text_;
    const RuleSet& enabled_;
    Translator* translator_;
    const RuleConfig& cfg_;
    std::set<std::string> fp_api_;
    std::set<std::string> sensitive_;
    std::map<std::string, int> declared_;
    std::map<std::string, std::vector<std::size_t>> reference_starts_;
    bool hex_api_literal_ = false;
    std::vector<TransformArtifact> out_;
};

}  // namespace

std::vector<TransformArtifact> apply_all(const Node& root, const SourceScript& script, const RuleSet& enabled,
                                         Translator* translator, const RuleConfig& config) {
    return Engine(root, script, enabled, translator, config).run();
}

std::string check_artifact(const TransformArtifact& a) {
    // a derived-class constructor admits super, new.target, this and arguments
    std::string wrapped;
    switch (a.context) {
    case GlueContext::Statement:
        wrapped = a.glue;
        break;
    case GlueContext::Expression:
        wrapped = "(" + a.glue + ");";
        break;
    case GlueContext::MemberSuffix:
        wrapped = "o" + a.glue + ";";
        break;
    case GlueContext::Declarator:
        wrapped = "let " + a.glue + ";";
        break;
    }
    try {
        parse_text(std::string_view("class C extends Object { constructor() { super();\n" + wrapped + "\n} }"));
    } catch (const ParseError& e) {
        return std::string("glue does not parse: ") + e.what();
    }

    std::set<std::string> names{"memory"};
    for (const auto& e : a.exports)
        for (const auto& n : e.exported_names()) names.insert(n);
    static const std::regex ref(R"(instance\.exports\.([A-Za-z_$][A-Za-z0-9_$]*))");
    for (auto it = std::sregex_iterator(a.glue.begin(), a.glue.end(), ref); it != std::sregex_iterator(); ++it) {
        if (!names.count((*it)[1])) return "glue references missing export '" + std::string((*it)[1]) + "'";
    }
    std::set<std::string> fields;
    for (const auto& imp : a.imports) {
        if (!fields.insert(imp.field).second) return "duplicate import field '" + imp.field + "'";
        if (a.glue.find(imp.field + ": " + imp.js_body) == std::string::npos)
            return "import '" + imp.field + "' is not bound by the glue";
    }
    for (const auto& e : a.exports) {
        if (e.kind != ExportKind::Func) continue;
        for (const auto& need : e.func.imports_needed)
            if (!fields.count(need.field)) return "function '" + e.symbol + "' needs undeclared import '" + need.field + "'";
    }
    return {};
}

}  // namespace fpwasm
