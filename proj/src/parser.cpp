#include "fpwasm/parser.hpp"

#include "fpwasm/errors.hpp"
#include "fpwasm/lexer.hpp"
#include "fpwasm/text.hpp"

#include <set>
#include <utility>
#include <vector>

namespace fpwasm {
namespace {

constexpr int max_nesting = 800;

bool is_assignment_operator(const Token& t) {
    if (t.type != TokenType::Punctuator) return false;
    static constexpr std::string_view ops[] = {"=",  "+=", "-=",  "*=", "/=", "%=",  "**=",
                                               "<<=", ">>=", ">>>=", "&=", "|=", "^="};
    for (auto op : ops)
        if (t.value == op) return true;
    return false;
}

int binary_precedence(const Token& t, bool no_in) {
    if (t.type == TokenType::Identifier && !t.escaped) {
        if (t.value == "instanceof") return 7;
        if (t.value == "in") return no_in ? 0 : 7;
        return 0;
    }
    if (t.type != TokenType::Punctuator) return 0;
    const std::string& v = t.value;
    if (v == "||") return 1;
    if (v == "&&") return 2;
    if (v == "|") return 3;
    if (v == "^") return 4;
    if (v == "&") return 5;
    if (v == "==" || v == "!=" || v == "===" || v == "!==") return 6;
    if (v == "<" || v == ">" || v == "<=" || v == ">=") return 7;
    if (v == "<<" || v == ">>" || v == ">>>") return 8;
    if (v == "+" || v == "-") return 9;
    if (v == "*" || v == "/" || v == "%") return 10;
    if (v == "**") return 11;
    return 0;
}

class Parser {
public:
    explicit Parser(std::u32string_view src) : lex_(src) { tok_ = lex_.next(); }

    NodePtr parse_program() {
        auto program = std::make_unique<Node>(NodeKind::Program, Span{0, lex_.source().size()});
        while (tok_.type != TokenType::EndOfInput) program->children.push_back(parse_statement_list_item());
        return program;
    }

private:
    struct State {
        std::size_t lex_pos;
        Token tok;
        std::size_t prev_end;
    };

    struct Context {
        bool in_function = false;
        bool in_async = false;
        bool in_generator = false;
        int iteration = 0;
        int switches = 0;
        std::vector<std::string> labels;
    };

    class DepthGuard {
    public:
        explicit DepthGuard(Parser& p) : p_(p) {
            if (++p_.depth_ > max_nesting) p_.fail("nesting too deep");
        }
        ~DepthGuard() { --p_.depth_; }

    private:
        Parser& p_;
    };

    // --- token plumbing -------------------------------------------------

    [[noreturn]] void fail(const std::string& message) const { throw ParseError(message, tok_.start); }
    [[noreturn]] void unexpected() const {
        if (tok_.type == TokenType::EndOfInput) fail("unexpected end of input");
        fail("unexpected token '" + tok_.value + "'");
    }

    void next() {
        prev_end_ = tok_.end;
        tok_ = lex_.next();
    }

    State save() const { return {lex_.position(), tok_, prev_end_}; }
    void restore(const State& s) {
        lex_.reset(s.lex_pos);
        tok_ = s.tok;
        prev_end_ = s.prev_end;
    }

    Token peek_token() {
        const std::size_t pos = lex_.position();
        Token t = lex_.next();
        lex_.reset(pos);
        return t;
    }

    bool is_punct(std::string_view p) const { return tok_.is_punct(p); }
    bool is_name(std::string_view n) const { return tok_.is_name(n); }
    bool eat_punct(std::string_view p) {
        if (!is_punct(p)) return false;
        next();
        return true;
    }
    void expect_punct(std::string_view p) {
        if (!is_punct(p)) unexpected();
        next();
    }
    void expect_name(std::string_view n) {
        if (!is_name(n)) unexpected();
        next();
    }

    void consume_semicolon() {
        if (is_punct(";")) {
            next();
            return;
        }
        if (is_punct("}") || tok_.type == TokenType::EndOfInput || tok_.newline_before) return;
        unexpected();
    }

    NodePtr make(NodeKind kind, std::size_t start) const {
        return std::make_unique<Node>(kind, Span{start, prev_end_});
    }

    bool is_identifier_token(const Token& t) const {
        if (t.type != TokenType::Identifier) return false;
        if (t.escaped) return true;
        if (is_reserved_word(t.value)) return false;
        if (t.value == "yield" && ctx_.in_generator) return false;
        if (t.value == "await" && ctx_.in_async) return false;
        return true;
    }

    NodePtr parse_identifier() {
        if (!is_identifier_token(tok_)) unexpected();
        const std::size_t start = tok_.start;
        std::string name = tok_.value;
        next();
        auto id = make(NodeKind::Identifier, start);
        id->name = std::move(name);
        return id;
    }

    // IdentifierName: reserved words allowed (property names).
    NodePtr parse_identifier_name() {
        if (tok_.type != TokenType::Identifier) unexpected();
        const std::size_t start = tok_.start;
        std::string name = tok_.value;
        next();
        auto id = make(NodeKind::Identifier, start);
        id->name = std::move(name);
        return id;
    }

    // --- statements -------------------------------------------------------

    bool at_lexical_declaration() {
        if (is_name("const")) return true;
        if (!is_name("let")) return false;
        const Token t = peek_token();
        return t.type == TokenType::Identifier || t.is_punct("[") || t.is_punct("{");
    }

    bool at_async_function() {
        if (!is_name("async")) return false;
        const Token t = peek_token();
        return t.is_name("function") && !t.newline_before;
    }

    NodePtr parse_statement_list_item() {
        if (is_name("function") || at_async_function()) return parse_function(true);
        if (is_name("class")) return parse_class(true);
        if (at_lexical_declaration()) return parse_variable_statement();
        if (is_name("import") || is_name("export")) fail("module syntax is not supported");
        return parse_statement();
    }

    NodePtr parse_statement() {
        DepthGuard guard(*this);
        const std::size_t start = tok_.start;
        if (tok_.type == TokenType::Punctuator) {
            if (is_punct("{")) return parse_block();
            if (is_punct(";")) {
                next();
                return make(NodeKind::EmptyStatement, start);
            }
        } else if (tok_.type == TokenType::Identifier && !tok_.escaped) {
            const std::string& v = tok_.value;
            if (v == "var") return parse_variable_statement();
            if (v == "if") return parse_if();
            if (v == "for") return parse_for();
            if (v == "while") return parse_while();
            if (v == "do") return parse_do_while();
            if (v == "continue" || v == "break") return parse_break_continue();
            if (v == "return") return parse_return();
            if (v == "with") return parse_with();
            if (v == "switch") return parse_switch();
            if (v == "throw") return parse_throw();
            if (v == "try") return parse_try();
            if (v == "debugger") {
                next();
                consume_semicolon();
                return make(NodeKind::DebuggerStatement, start);
            }
            if (v == "function") return parse_function(true);
            if (v == "class") return parse_class(true);
            if (v == "import" || v == "export") fail("module syntax is not supported");
        }
        auto expr = parse_expression(false);
        if (expr->is(NodeKind::Identifier) && is_punct(":") && expr->span.start == start) {
            next();
            for (const auto& l : ctx_.labels)
                if (l == expr->name) fail("duplicate label '" + l + "'");
            ctx_.labels.push_back(expr->name);
            NodePtr body;
            if (is_name("function"))
                body = parse_function(true);
            else
                body = parse_statement();
            ctx_.labels.pop_back();
            auto labeled = make(NodeKind::LabeledStatement, start);
            labeled->children.push_back(std::move(expr));
            labeled->children.push_back(std::move(body));
            return labeled;
        }
        consume_semicolon();
        auto stmt = make(NodeKind::ExpressionStatement, start);
        stmt->children.push_back(std::move(expr));
        return stmt;
    }

    NodePtr parse_block() {
        const std::size_t start = tok_.start;
        expect_punct("{");
        std::vector<NodePtr> body;
        while (!is_punct("}")) {
            if (tok_.type == TokenType::EndOfInput) unexpected();
            body.push_back(parse_statement_list_item());
        }
        next();
        auto block = make(NodeKind::BlockStatement, start);
        block->children = std::move(body);
        return block;
    }

    NodePtr parse_variable_declaration(bool no_in, bool allow_uninitialized_const) {
        const std::size_t start = tok_.start;
        std::string kind = tok_.value;
        next();
        auto decl = std::make_unique<Node>(NodeKind::VariableDeclaration, Span{start, start});
        decl->name = kind;
        do {
            const std::size_t dstart = tok_.start;
            auto id = parse_binding_target();
            NodePtr init;
            if (eat_punct("="))
                init = parse_assignment(no_in);
            else if (!id->is(NodeKind::Identifier) && !allow_uninitialized_const)
                fail("destructuring declaration requires an initializer");
            else if (kind == "const" && !allow_uninitialized_const)
                fail("missing initializer in const declaration");
            auto d = make(NodeKind::VariableDeclarator, dstart);
            d->children.push_back(std::move(id));
            d->children.push_back(std::move(init));
            decl->children.push_back(std::move(d));
        } while (eat_punct(","));
        decl->span.end = prev_end_;
        return decl;
    }

    NodePtr parse_variable_statement() {
        const std::size_t start = tok_.start;
        auto decl = parse_variable_declaration(false, false);
        consume_semicolon();
        decl->span = {start, prev_end_};
        return decl;
    }

    NodePtr parse_paren_expression() {
        expect_punct("(");
        auto e = parse_expression(false);
        expect_punct(")");
        return e;
    }

    NodePtr parse_if() {
        const std::size_t start = tok_.start;
        next();
        auto test = parse_paren_expression();
        auto cons = parse_statement();
        NodePtr alt;
        if (is_name("else")) {
            next();
            alt = parse_statement();
        }
        auto node = make(NodeKind::IfStatement, start);
        node->children.push_back(std::move(test));
        node->children.push_back(std::move(cons));
        node->children.push_back(std::move(alt));
        return node;
    }

    NodePtr parse_loop_body() {
        ++ctx_.iteration;
        auto body = parse_statement();
        --ctx_.iteration;
        return body;
    }

    NodePtr parse_while() {
        const std::size_t start = tok_.start;
        next();
        auto test = parse_paren_expression();
        auto body = parse_loop_body();
        auto node = make(NodeKind::WhileStatement, start);
        node->children.push_back(std::move(test));
        node->children.push_back(std::move(body));
        return node;
    }

    NodePtr parse_do_while() {
        const std::size_t start = tok_.start;
        next();
        auto body = parse_loop_body();
        expect_name("while");
        auto test = parse_paren_expression();
        eat_punct(";");
        auto node = make(NodeKind::DoWhileStatement, start);
        node->children.push_back(std::move(body));
        node->children.push_back(std::move(test));
        return node;
    }

    NodePtr parse_for() {
        const std::size_t start = tok_.start;
        next();
        if (is_name("await")) fail("for-await is not supported");
        expect_punct("(");
        NodePtr init;
        if (is_punct(";")) {
            // no init
        } else if (is_name("var") || at_lexical_declaration()) {
            init = parse_variable_declaration(true, true);
            if ((is_name("in") || is_name("of")) && init->children.size() == 1) {
                const bool of = is_name("of");
                if (of && init->child(0)->child(1)) fail("for-of declaration may not have an initializer");
                return parse_for_in_of(start, std::move(init), of);
            }
            for (const auto& d : init->children)
                if (!d->child(1) && (init->name == "const" || !d->child(0)->is(NodeKind::Identifier)))
                    fail("missing initializer in for declaration");
        } else {
            const std::size_t estart = tok_.start;
            init = parse_expression(true);
            if (is_name("in") || is_name("of")) {
                const bool of = is_name("of");
                auto target = to_assignment_target(std::move(init), estart);
                return parse_for_in_of(start, std::move(target), of);
            }
        }
        expect_punct(";");
        NodePtr test;
        if (!is_punct(";")) test = parse_expression(false);
        expect_punct(";");
        NodePtr update;
        if (!is_punct(")")) update = parse_expression(false);
        expect_punct(")");
        auto body = parse_loop_body();
        auto node = make(NodeKind::ForStatement, start);
        node->children.push_back(std::move(init));
        node->children.push_back(std::move(test));
        node->children.push_back(std::move(update));
        node->children.push_back(std::move(body));
        return node;
    }

    NodePtr parse_for_in_of(std::size_t start, NodePtr left, bool of) {
        next();
        auto right = of ? parse_assignment(false) : parse_expression(false);
        expect_punct(")");
        auto body = parse_loop_body();
        auto node = make(of ? NodeKind::ForOfStatement : NodeKind::ForInStatement, start);
        node->children.push_back(std::move(left));
        node->children.push_back(std::move(right));
        node->children.push_back(std::move(body));
        return node;
    }

    NodePtr parse_break_continue() {
        const std::size_t start = tok_.start;
        const bool is_break = tok_.value == "break";
        next();
        NodePtr label;
        if (tok_.type == TokenType::Identifier && !tok_.newline_before && is_identifier_token(tok_)) {
            label = parse_identifier();
            bool found = false;
            for (const auto& l : ctx_.labels)
                if (l == label->name) found = true;
            if (!found) fail("undefined label '" + label->name + "'");
        } else if (is_break ? (ctx_.iteration == 0 && ctx_.switches == 0) : ctx_.iteration == 0) {
            fail(is_break ? "illegal break statement" : "illegal continue statement");
        }
        consume_semicolon();
        auto node = make(is_break ? NodeKind::BreakStatement : NodeKind::ContinueStatement, start);
        node->children.push_back(std::move(label));
        return node;
    }

    NodePtr parse_return() {
        const std::size_t start = tok_.start;
        if (!ctx_.in_function) fail("illegal return statement");
        next();
        NodePtr arg;
        if (!is_punct(";") && !is_punct("}") && tok_.type != TokenType::EndOfInput && !tok_.newline_before)
            arg = parse_expression(false);
        consume_semicolon();
        auto node = make(NodeKind::ReturnStatement, start);
        node->children.push_back(std::move(arg));
        return node;
    }

    NodePtr parse_with() {
        const std::size_t start = tok_.start;
        next();
        auto obj = parse_paren_expression();
        auto body = parse_statement();
        auto node = make(NodeKind::WithStatement, start);
        node->children.push_back(std::move(obj));
        node->children.push_back(std::move(body));
        return node;
    }

    NodePtr parse_switch() {
        const std::size_t start = tok_.start;
        next();
        auto disc = parse_paren_expression();
        expect_punct("{");
        auto node = std::make_unique<Node>(NodeKind::SwitchStatement, Span{start, start});
        node->children.push_back(std::move(disc));
        ++ctx_.switches;
        bool seen_default = false;
        while (!eat_punct("}")) {
            const std::size_t cstart = tok_.start;
            NodePtr test;
            if (is_name("case")) {
                next();
                test = parse_expression(false);
            } else if (is_name("default")) {
                if (seen_default) fail("multiple defaults in switch");
                seen_default = true;
                next();
            } else {
                unexpected();
            }
            expect_punct(":");
            auto c = std::make_unique<Node>(NodeKind::SwitchCase, Span{cstart, cstart});
            c->children.push_back(std::move(test));
            while (!is_punct("}") && !is_name("case") && !is_name("default")) {
                if (tok_.type == TokenType::EndOfInput) unexpected();
                c->children.push_back(parse_statement_list_item());
            }
            c->span.end = prev_end_;
            node->children.push_back(std::move(c));
        }
        --ctx_.switches;
        node->span.end = prev_end_;
        return node;
    }

    NodePtr parse_throw() {
        const std::size_t start = tok_.start;
        next();
        if (tok_.newline_before) fail("illegal newline after throw");
        auto arg = parse_expression(false);
        consume_semicolon();
        auto node = make(NodeKind::ThrowStatement, start);
        node->children.push_back(std::move(arg));
        return node;
    }

    NodePtr parse_try() {
        const std::size_t start = tok_.start;
        next();
        auto block = parse_block();
        NodePtr handler;
        NodePtr finalizer;
        if (is_name("catch")) {
            const std::size_t cstart = tok_.start;
            next();
            NodePtr param;
            if (eat_punct("(")) {
                param = parse_binding_target();
                expect_punct(")");
            }
            auto body = parse_block();
            handler = make(NodeKind::CatchClause, cstart);
            handler->children.push_back(std::move(param));
            handler->children.push_back(std::move(body));
        }
        if (is_name("finally")) {
            next();
            finalizer = parse_block();
        }
        if (!handler && !finalizer) fail("missing catch or finally after try");
        auto node = make(NodeKind::TryStatement, start);
        node->children.push_back(std::move(block));
        node->children.push_back(std::move(handler));
        node->children.push_back(std::move(finalizer));
        return node;
    }

    // --- functions and classes ----------------------------------------------

    NodePtr parse_function(bool declaration) {
        const std::size_t start = tok_.start;
        bool is_async = false;
        if (is_name("async")) {
            is_async = true;
            next();
        }
        expect_name("function");
        const bool generator = eat_punct("*");
        NodePtr id;
        if (tok_.type == TokenType::Identifier && !is_punct("(")) {
            // a function's own name is bound outside its body context
            Context saved = ctx_;
            if (!declaration) {
                ctx_.in_generator = generator;
                ctx_.in_async = is_async;
            }
            id = parse_identifier();
            ctx_ = saved;
        } else if (declaration) {
            unexpected();
        }
        auto node = std::make_unique<Node>(declaration ? NodeKind::FunctionDeclaration : NodeKind::FunctionExpression,
                                           Span{start, start});
        node->is_async = is_async;
        node->is_generator = generator;
        node->children.push_back(std::move(id));
        parse_function_rest(*node, is_async, generator);
        node->span.end = prev_end_;
        return node;
    }

    // Parses `(params) { body }` into `fn` (params and body appended).
    void parse_function_rest(Node& fn, bool is_async, bool generator) {
        Context saved = std::move(ctx_);
        ctx_ = Context{};
        ctx_.in_function = true;
        ctx_.in_async = is_async;
        ctx_.in_generator = generator;
        expect_punct("(");
        while (!is_punct(")")) {
            if (is_punct("...")) {
                fn.children.push_back(parse_rest_element());
                if (!is_punct(")")) fail("rest parameter must be last");
                break;
            }
            fn.children.push_back(parse_binding_element());
            if (!is_punct(")")) expect_punct(",");
        }
        next();
        fn.children.push_back(parse_function_body());
        ctx_ = std::move(saved);
    }

    NodePtr parse_function_body() {
        const std::size_t start = tok_.start;
        expect_punct("{");
        auto block = std::make_unique<Node>(NodeKind::BlockStatement, Span{start, start});
        while (!is_punct("}")) {
            if (tok_.type == TokenType::EndOfInput) unexpected();
            block->children.push_back(parse_statement_list_item());
        }
        next();
        block->span.end = prev_end_;
        return block;
    }

    NodePtr parse_class(bool declaration) {
        const std::size_t start = tok_.start;
        expect_name("class");
        NodePtr id;
        if (tok_.type == TokenType::Identifier && !is_name("extends"))
            id = parse_identifier();
        else if (declaration)
            unexpected();
        NodePtr super_class;
        if (is_name("extends")) {
            next();
            super_class = parse_lhs_expression();
        }
        const std::size_t bstart = tok_.start;
        expect_punct("{");
        auto body = std::make_unique<Node>(NodeKind::ClassBody, Span{bstart, bstart});
        while (!is_punct("}")) {
            if (eat_punct(";")) continue;
            if (tok_.type == TokenType::EndOfInput) unexpected();
            body->children.push_back(parse_class_member());
        }
        next();
        body->span.end = prev_end_;
        auto node = make(declaration ? NodeKind::ClassDeclaration : NodeKind::ClassExpression, start);
        node->children.push_back(std::move(id));
        node->children.push_back(std::move(super_class));
        node->children.push_back(std::move(body));
        return node;
    }

    // Property key; sets `computed`. Accepts identifier names, strings,
    // numbers and `[expr]`.
    NodePtr parse_property_key(bool& computed) {
        computed = false;
        switch (tok_.type) {
        case TokenType::Identifier:
            return parse_identifier_name();
        case TokenType::String:
        case TokenType::Numeric:
            return parse_literal_token();
        case TokenType::Punctuator:
            if (is_punct("[")) {
                next();
                auto key = parse_assignment(false);
                expect_punct("]");
                computed = true;
                return key;
            }
            [[fallthrough]];
        default:
            unexpected();
        }
    }

    bool token_starts_property_name(const Token& t) const {
        return t.type == TokenType::Identifier || t.type == TokenType::String || t.type == TokenType::Numeric ||
               t.is_punct("[");
    }

    // Method-like prefixes (get/set/async/*) shared by classes and objects.
    struct MethodPrefix {
        std::string kind = "method";
        bool is_async = false;
        bool generator = false;
    };

    MethodPrefix parse_method_prefix() {
        MethodPrefix prefix;
        if ((is_name("get") || is_name("set")) && token_starts_property_name(peek_token())) {
            prefix.kind = tok_.value;
            next();
        } else if (is_name("async")) {
            const Token t = peek_token();
            if (!t.newline_before && (token_starts_property_name(t) || t.is_punct("*"))) {
                prefix.is_async = true;
                next();
            }
        }
        if (prefix.kind == "method" && eat_punct("*")) prefix.generator = true;
        return prefix;
    }

    NodePtr parse_method_function(std::size_t start, bool is_async, bool generator) {
        auto fn = std::make_unique<Node>(NodeKind::FunctionExpression, Span{start, start});
        fn->is_async = is_async;
        fn->is_generator = generator;
        fn->children.push_back(nullptr);
        parse_function_rest(*fn, is_async, generator);
        fn->span.end = prev_end_;
        return fn;
    }

    NodePtr parse_class_member() {
        const std::size_t start = tok_.start;
        bool is_static = false;
        if (is_name("static")) {
            const Token t = peek_token();
            if (!t.is_punct("(")) {
                is_static = true;
                next();
            }
        }
        MethodPrefix prefix = parse_method_prefix();
        bool computed = false;
        auto key = parse_property_key(computed);
        if (!is_punct("(")) fail("class fields are not supported");
        auto fn = parse_method_function(tok_.start, prefix.is_async, prefix.generator);
        auto node = make(NodeKind::MethodDefinition, start);
        node->computed = computed;
        node->is_static = is_static;
        node->name = prefix.kind;
        if (!computed && !is_static && prefix.kind == "method" && key->is(NodeKind::Identifier) &&
            key->name == "constructor")
            node->name = "constructor";
        node->children.push_back(std::move(key));
        node->children.push_back(std::move(fn));
        return node;
    }

    // --- patterns -----------------------------------------------------------

    NodePtr parse_binding_target() {
        if (is_punct("[")) return parse_array_pattern();
        if (is_punct("{")) return parse_object_pattern();
        return parse_identifier();
    }

    NodePtr parse_binding_element() {
        const std::size_t start = tok_.start;
        auto target = parse_binding_target();
        if (eat_punct("=")) {
            auto def = parse_assignment(false);
            auto node = make(NodeKind::AssignmentPattern, start);
            node->children.push_back(std::move(target));
            node->children.push_back(std::move(def));
            return node;
        }
        return target;
    }

    NodePtr parse_rest_element() {
        const std::size_t start = tok_.start;
        expect_punct("...");
        auto arg = parse_binding_target();
        auto node = make(NodeKind::RestElement, start);
        node->children.push_back(std::move(arg));
        return node;
    }

    NodePtr parse_array_pattern() {
        const std::size_t start = tok_.start;
        expect_punct("[");
        auto node = std::make_unique<Node>(NodeKind::ArrayPattern, Span{start, start});
        while (!is_punct("]")) {
            if (is_punct(",")) {
                next();
                node->children.push_back(nullptr);
                continue;
            }
            if (is_punct("...")) {
                node->children.push_back(parse_rest_element());
                break;
            }
            node->children.push_back(parse_binding_element());
            if (!is_punct("]")) expect_punct(",");
        }
        expect_punct("]");
        node->span.end = prev_end_;
        return node;
    }

    NodePtr parse_object_pattern() {
        const std::size_t start = tok_.start;
        expect_punct("{");
        auto node = std::make_unique<Node>(NodeKind::ObjectPattern, Span{start, start});
        while (!is_punct("}")) {
            if (is_punct("...")) {
                const std::size_t rstart = tok_.start;
                next();
                auto arg = parse_identifier();
                auto rest = make(NodeKind::RestElement, rstart);
                rest->children.push_back(std::move(arg));
                node->children.push_back(std::move(rest));
                break;
            }
            const std::size_t pstart = tok_.start;
            const Token key_tok = tok_;
            bool computed = false;
            auto key = parse_property_key(computed);
            auto prop = std::make_unique<Node>(NodeKind::Property, Span{pstart, pstart});
            prop->name = "init";
            prop->computed = computed;
            NodePtr value;
            if (eat_punct(":")) {
                value = parse_binding_element();
            } else {
                if (computed || !is_identifier_token(key_tok)) unexpected();
                prop->shorthand = true;
                auto id = clone_leaf(*key);
                if (eat_punct("=")) {
                    auto def = parse_assignment(false);
                    value = make(NodeKind::AssignmentPattern, pstart);
                    value->children.push_back(std::move(id));
                    value->children.push_back(std::move(def));
                } else {
                    value = std::move(id);
                }
            }
            prop->children.push_back(std::move(key));
            prop->children.push_back(std::move(value));
            prop->span.end = prev_end_;
            node->children.push_back(std::move(prop));
            if (!is_punct("}")) expect_punct(",");
        }
        expect_punct("}");
        node->span.end = prev_end_;
        return node;
    }

    static NodePtr clone_leaf(const Node& n) {
        auto c = std::make_unique<Node>(n.kind, n.span);
        c->name = n.name;
        c->raw = n.raw;
        c->literal_type = n.literal_type;
        c->string_value = n.string_value;
        c->number_value = n.number_value;
        return c;
    }

    // Reinterprets an expression (cover grammar) as an assignment target.
    NodePtr to_assignment_target(NodePtr expr, std::size_t start, bool binding = false) {
        switch (expr->kind) {
        case NodeKind::Identifier:
            return expr;
        case NodeKind::MemberExpression:
            if (binding) fail("invalid destructuring target");
            return expr;
        case NodeKind::ArrayExpression:
        case NodeKind::ArrayPattern: {
            expr->kind = NodeKind::ArrayPattern;
            for (std::size_t i = 0; i < expr->children.size(); ++i) {
                auto& el = expr->children[i];
                if (!el) continue;
                if (el->is(NodeKind::SpreadElement) || el->is(NodeKind::RestElement)) {
                    if (i + 1 != expr->children.size()) fail("rest element must be last");
                    el->kind = NodeKind::RestElement;
                    el->children[0] = to_assignment_target(std::move(el->children[0]), el->span.start, binding);
                } else {
                    el = to_assignment_target(std::move(el), el->span.start, binding);
                }
            }
            return expr;
        }
        case NodeKind::ObjectExpression:
        case NodeKind::ObjectPattern: {
            expr->kind = NodeKind::ObjectPattern;
            for (auto& prop : expr->children) {
                if (prop->is(NodeKind::SpreadElement) || prop->is(NodeKind::RestElement)) {
                    prop->kind = NodeKind::RestElement;
                    prop->children[0] = to_assignment_target(std::move(prop->children[0]), prop->span.start, binding);
                    continue;
                }
                if (prop->method || prop->name != "init") fail("invalid destructuring target");
                prop->children[1] = to_assignment_target(std::move(prop->children[1]), prop->span.start, binding);
            }
            return expr;
        }
        case NodeKind::AssignmentExpression:
        case NodeKind::AssignmentPattern:
            if (expr->name != "=" && expr->is(NodeKind::AssignmentExpression)) fail("invalid assignment target");
            expr->kind = NodeKind::AssignmentPattern;
            expr->name.clear();
            expr->children[0] = to_assignment_target(std::move(expr->children[0]), start, binding);
            return expr;
        default:
            throw ParseError("invalid assignment target", expr->span.start);
        }
    }

    // --- expressions --------------------------------------------------------

    NodePtr parse_expression(bool no_in) {
        const std::size_t start = tok_.start;
        auto first = parse_assignment(no_in);
        if (!is_punct(",")) return first;
        auto seq = std::make_unique<Node>(NodeKind::SequenceExpression, Span{start, start});
        seq->children.push_back(std::move(first));
        while (eat_punct(",")) seq->children.push_back(parse_assignment(no_in));
        seq->span.end = prev_end_;
        return seq;
    }

    NodePtr parse_arrow_body(Node& arrow, bool is_async) {
        Context saved = std::move(ctx_);
        ctx_ = Context{};
        ctx_.in_function = true;
        ctx_.in_async = is_async;
        NodePtr body;
        if (is_punct("{")) {
            body = parse_function_body();
        } else {
            arrow.expression_body = true;
            body = parse_assignment(saved_no_in_);
        }
        ctx_ = std::move(saved);
        return body;
    }

    // Attempts `(params) =>`, `ident =>`, `async (params) =>`, `async ident =>`.
    // Returns nullptr (with state restored) when the input is not an arrow.
    NodePtr try_parse_arrow(bool no_in) {
        const std::size_t start = tok_.start;
        if (failed_arrows_.count(start)) return nullptr;
        const State state = save();
        const Context outer = ctx_;
        bool is_async = false;
        std::vector<NodePtr> params;
        try {
            if (is_name("async")) {
                const Token t = peek_token();
                if (t.newline_before || !(t.is_punct("(") || (t.type == TokenType::Identifier && !t.escaped)))
                    throw ParseError("not an async arrow", start);
                is_async = true;
                next();
            }
            ctx_.in_async = is_async;
            if (is_punct("(")) {
                next();
                while (!is_punct(")")) {
                    if (is_punct("...")) {
                        params.push_back(parse_rest_element());
                        break;
                    }
                    params.push_back(parse_binding_element());
                    if (!is_punct(")")) expect_punct(",");
                }
                expect_punct(")");
            } else {
                params.push_back(parse_identifier());
            }
            ctx_ = outer;
            if (!is_punct("=>") || tok_.newline_before) throw ParseError("not an arrow", start);
        } catch (const ParseError&) {
            failed_arrows_.insert(start);
            restore(state);
            ctx_ = outer;
            return nullptr;
        }
        next();  // =>
        auto arrow = std::make_unique<Node>(NodeKind::ArrowFunctionExpression, Span{start, start});
        arrow->is_async = is_async;
        arrow->children.push_back(nullptr);
        for (auto& p : params) arrow->children.push_back(std::move(p));
        const bool saved_no_in = saved_no_in_;
        saved_no_in_ = no_in;
        arrow->children.push_back(parse_arrow_body(*arrow, is_async));
        saved_no_in_ = saved_no_in;
        arrow->span.end = prev_end_;
        return arrow;
    }

    NodePtr parse_assignment(bool no_in) {
        DepthGuard guard(*this);
        const std::size_t start = tok_.start;
        if (is_name("yield") && ctx_.in_generator) return parse_yield(no_in);
        if (is_punct("(") || is_name("async") ||
            (tok_.type == TokenType::Identifier && is_identifier_token(tok_) && peek_token().is_punct("=>"))) {
            if (auto arrow = try_parse_arrow(no_in)) return arrow;
        }
        auto lhs = parse_conditional(no_in);
        if (!is_assignment_operator(tok_)) return lhs;
        std::string op = tok_.value;
        if (op == "=") {
            lhs = to_assignment_target(std::move(lhs), start);
        } else if (!lhs->is(NodeKind::Identifier) && !lhs->is(NodeKind::MemberExpression)) {
            fail("invalid assignment target");
        }
        next();
        auto rhs = parse_assignment(no_in);
        auto node = make(NodeKind::AssignmentExpression, start);
        node->name = std::move(op);
        node->children.push_back(std::move(lhs));
        node->children.push_back(std::move(rhs));
        return node;
    }

    NodePtr parse_yield(bool no_in) {
        const std::size_t start = tok_.start;
        next();
        auto node = std::make_unique<Node>(NodeKind::YieldExpression, Span{start, start});
        NodePtr arg;
        if (!tok_.newline_before) {
            if (eat_punct("*")) {
                node->delegate = true;
                arg = parse_assignment(no_in);
            } else if (!is_punct(")") && !is_punct("]") && !is_punct("}") && !is_punct(",") && !is_punct(";") &&
                       !is_punct(":") && tok_.type != TokenType::EndOfInput && !is_name("in")) {
                arg = parse_assignment(no_in);
            }
        }
        node->children.push_back(std::move(arg));
        node->span.end = prev_end_;
        return node;
    }

    NodePtr parse_conditional(bool no_in) {
        const std::size_t start = tok_.start;
        auto test = parse_binary(no_in);
        if (!is_punct("?")) return test;
        next();
        auto cons = parse_assignment(false);
        expect_punct(":");
        auto alt = parse_assignment(no_in);
        auto node = make(NodeKind::ConditionalExpression, start);
        node->children.push_back(std::move(test));
        node->children.push_back(std::move(cons));
        node->children.push_back(std::move(alt));
        return node;
    }

    NodePtr parse_binary(bool no_in) {
        struct Frame {
            NodePtr left;
            std::string op;
            int prec;
            std::size_t start;
        };
        std::vector<Frame> stack;
        std::size_t operand_start = tok_.start;
        NodePtr operand = parse_unary();
        for (;;) {
            const int prec = binary_precedence(tok_, no_in);
            if (prec == 0) break;
            // `**` is right-associative; everything else folds left.
            while (!stack.empty() && (stack.back().prec > prec || (stack.back().prec == prec && prec != 11))) {
                Frame f = std::move(stack.back());
                stack.pop_back();
                operand = combine(std::move(f.left), f.op, std::move(operand), f.start);
                operand_start = f.start;
            }
            stack.push_back({std::move(operand), tok_.value, prec, operand_start});
            next();
            operand_start = tok_.start;
            operand = parse_unary();
        }
        while (!stack.empty()) {
            Frame f = std::move(stack.back());
            stack.pop_back();
            operand = combine(std::move(f.left), f.op, std::move(operand), f.start);
        }
        return operand;
    }

    // All folded operands end at the most recently consumed token, which
    // also covers a closing paren around the right operand.
    NodePtr combine(NodePtr left, const std::string& op, NodePtr right, std::size_t start) {
        const bool logical = op == "||" || op == "&&";
        auto node = std::make_unique<Node>(logical ? NodeKind::LogicalExpression : NodeKind::BinaryExpression,
                                           Span{start, prev_end_});
        node->name = op;
        node->children.push_back(std::move(left));
        node->children.push_back(std::move(right));
        return node;
    }

    NodePtr parse_unary() {
        const std::size_t start = tok_.start;
        if (tok_.type == TokenType::Punctuator) {
            const std::string& v = tok_.value;
            if (v == "!" || v == "~" || v == "+" || v == "-") {
                std::string op = v;
                next();
                auto arg = parse_unary();
                if (is_punct("**")) fail("unary operator before ** requires parentheses");
                auto node = make(NodeKind::UnaryExpression, start);
                node->name = std::move(op);
                node->prefix = true;
                node->children.push_back(std::move(arg));
                return node;
            }
            if (v == "++" || v == "--") {
                std::string op = v;
                next();
                const std::size_t astart = tok_.start;
                auto arg = parse_unary();
                if (!arg->is(NodeKind::Identifier) && !arg->is(NodeKind::MemberExpression))
                    throw ParseError("invalid update target", astart);
                auto node = make(NodeKind::UpdateExpression, start);
                node->name = std::move(op);
                node->prefix = true;
                node->children.push_back(std::move(arg));
                return node;
            }
        } else if (tok_.type == TokenType::Identifier && !tok_.escaped) {
            const std::string& v = tok_.value;
            if (v == "delete" || v == "void" || v == "typeof") {
                std::string op = v;
                next();
                auto arg = parse_unary();
                if (is_punct("**")) fail("unary operator before ** requires parentheses");
                auto node = make(NodeKind::UnaryExpression, start);
                node->name = std::move(op);
                node->prefix = true;
                node->children.push_back(std::move(arg));
                return node;
            }
            if (v == "await" && ctx_.in_async) {
                next();
                auto arg = parse_unary();
                auto node = make(NodeKind::AwaitExpression, start);
                node->children.push_back(std::move(arg));
                return node;
            }
        }
        auto expr = parse_lhs_expression(true);
        if ((is_punct("++") || is_punct("--")) && !tok_.newline_before) {
            if (!expr->is(NodeKind::Identifier) && !expr->is(NodeKind::MemberExpression)) fail("invalid update target");
            std::string op = tok_.value;
            next();
            auto node = make(NodeKind::UpdateExpression, start);
            node->name = std::move(op);
            node->children.push_back(std::move(expr));
            return node;
        }
        return expr;
    }

    NodePtr parse_arguments(Node& call) {
        expect_punct("(");
        while (!is_punct(")")) {
            if (is_punct("...")) {
                const std::size_t sstart = tok_.start;
                next();
                auto arg = parse_assignment(false);
                auto spread = make(NodeKind::SpreadElement, sstart);
                spread->children.push_back(std::move(arg));
                call.children.push_back(std::move(spread));
            } else {
                call.children.push_back(parse_assignment(false));
            }
            if (!is_punct(")")) expect_punct(",");
        }
        next();
        return nullptr;
    }

    NodePtr parse_new() {
        const std::size_t start = tok_.start;
        next();  // new
        if (is_punct(".")) {
            next();
            if (!is_name("target") || !ctx_.in_function) unexpected();
            auto meta = std::make_unique<Node>(NodeKind::Identifier, Span{start, start + 3});
            meta->name = "new";
            auto prop = parse_identifier_name();
            auto node = make(NodeKind::MetaProperty, start);
            node->children.push_back(std::move(meta));
            node->children.push_back(std::move(prop));
            return node;
        }
        const std::size_t cstart = tok_.start;
        NodePtr callee;
        if (is_name("new"))
            callee = parse_new();
        else
            callee = parse_primary();
        callee = parse_member_tail(std::move(callee), cstart, false);
        auto node = std::make_unique<Node>(NodeKind::NewExpression, Span{start, start});
        node->children.push_back(std::move(callee));
        if (is_punct("(")) parse_arguments(*node);
        node->span.end = prev_end_;
        return node;
    }

    NodePtr parse_lhs_expression(bool allow_call = true) {
        const std::size_t start = tok_.start;
        NodePtr expr;
        if (is_name("new")) {
            expr = parse_new();
        } else if (is_name("super")) {
            if (!ctx_.in_function) fail("'super' outside of function");
            next();
            expr = make(NodeKind::Super, start);
            if (!is_punct("(") && !is_punct(".") && !is_punct("[")) unexpected();
        } else {
            expr = parse_primary();
        }
        return parse_member_tail(std::move(expr), start, allow_call);
    }

    NodePtr parse_member_tail(NodePtr expr, std::size_t start, bool allow_call) {
        for (;;) {
            if (is_punct(".")) {
                const std::size_t dot = tok_.start;
                next();
                auto prop = parse_identifier_name();
                auto node = make(NodeKind::MemberExpression, start);
                node->punct_pos = dot;
                node->children.push_back(std::move(expr));
                node->children.push_back(std::move(prop));
                expr = std::move(node);
            } else if (is_punct("[")) {
                const std::size_t bracket = tok_.start;
                next();
                auto prop = parse_expression(false);
                expect_punct("]");
                auto node = make(NodeKind::MemberExpression, start);
                node->computed = true;
                node->punct_pos = bracket;
                node->children.push_back(std::move(expr));
                node->children.push_back(std::move(prop));
                expr = std::move(node);
            } else if (allow_call && is_punct("(")) {
                auto node = std::make_unique<Node>(NodeKind::CallExpression, Span{start, start});
                node->children.push_back(std::move(expr));
                parse_arguments(*node);
                node->span.end = prev_end_;
                expr = std::move(node);
            } else if (tok_.type == TokenType::Template) {
                auto quasi = parse_template();
                auto node = make(NodeKind::TaggedTemplateExpression, start);
                node->children.push_back(std::move(expr));
                node->children.push_back(std::move(quasi));
                expr = std::move(node);
            } else {
                return expr;
            }
        }
    }

    NodePtr parse_literal_token() {
        const std::size_t start = tok_.start;
        auto node = std::make_unique<Node>(NodeKind::Literal, Span{start, tok_.end});
        node->raw = tok_.value;
        if (tok_.type == TokenType::String) {
            node->literal_type = LiteralType::String;
            node->string_value = tok_.string_value;
            node->lone_surrogate = tok_.lone_surrogate;
        } else {
            node->literal_type = LiteralType::Number;
            node->number_value = tok_.number;
        }
        next();
        return node;
    }

    NodePtr parse_template() {
        const std::size_t start = tok_.start;
        auto node = std::make_unique<Node>(NodeKind::TemplateLiteral, Span{start, start});
        for (;;) {
            if (tok_.type != TokenType::Template) unexpected();
            const bool tail = tok_.template_tail;
            const std::size_t body_start = tok_.start + 1;
            const std::size_t body_end = tok_.end - (tail ? 1 : 2);
            auto el = std::make_unique<Node>(NodeKind::TemplateElement, Span{body_start, body_end});
            el->raw = tok_.value;
            el->prefix = tail;
            node->children.push_back(std::move(el));
            if (tail) {
                next();
                break;
            }
            next();
            node->children.push_back(parse_expression(false));
            if (!is_punct("}")) unexpected();
            tok_ = lex_.rescan_template(tok_);
        }
        node->span.end = prev_end_;
        return node;
    }

    NodePtr parse_array_literal() {
        const std::size_t start = tok_.start;
        expect_punct("[");
        auto node = std::make_unique<Node>(NodeKind::ArrayExpression, Span{start, start});
        while (!is_punct("]")) {
            if (is_punct(",")) {
                next();
                node->children.push_back(nullptr);
                continue;
            }
            if (is_punct("...")) {
                const std::size_t sstart = tok_.start;
                next();
                auto arg = parse_assignment(false);
                auto spread = make(NodeKind::SpreadElement, sstart);
                spread->children.push_back(std::move(arg));
                node->children.push_back(std::move(spread));
            } else {
                node->children.push_back(parse_assignment(false));
            }
            if (!is_punct("]")) expect_punct(",");
        }
        next();
        node->span.end = prev_end_;
        return node;
    }

    NodePtr parse_object_literal() {
        const std::size_t start = tok_.start;
        expect_punct("{");
        auto node = std::make_unique<Node>(NodeKind::ObjectExpression, Span{start, start});
        while (!is_punct("}")) {
            if (is_punct("...")) {
                const std::size_t sstart = tok_.start;
                next();
                auto arg = parse_assignment(false);
                auto spread = make(NodeKind::SpreadElement, sstart);
                spread->children.push_back(std::move(arg));
                node->children.push_back(std::move(spread));
            } else {
                node->children.push_back(parse_object_property());
            }
            if (!is_punct("}")) expect_punct(",");
        }
        next();
        node->span.end = prev_end_;
        return node;
    }

    NodePtr parse_object_property() {
        const std::size_t start = tok_.start;
        MethodPrefix prefix = parse_method_prefix();
        const Token key_tok = tok_;
        bool computed = false;
        auto key = parse_property_key(computed);
        auto prop = std::make_unique<Node>(NodeKind::Property, Span{start, start});
        prop->computed = computed;
        prop->name = prefix.kind == "method" ? "init" : prefix.kind;
        const bool plain = prefix.kind == "method" && !prefix.is_async && !prefix.generator;
        if (plain && eat_punct(":")) {
            prop->children.push_back(std::move(key));
            prop->children.push_back(parse_assignment(false));
        } else if (is_punct("(")) {
            prop->method = prefix.kind == "method";
            prop->children.push_back(std::move(key));
            prop->children.push_back(parse_method_function(tok_.start, prefix.is_async, prefix.generator));
        } else if (plain && !computed && is_identifier_token(key_tok)) {
            prop->shorthand = true;
            auto value = clone_leaf(*key);
            if (is_punct("=")) {
                // Cover grammar for `({a = 1} = obj)`; only valid as a pattern.
                next();
                auto def = parse_assignment(false);
                auto pattern = make(NodeKind::AssignmentPattern, start);
                pattern->children.push_back(std::move(value));
                pattern->children.push_back(std::move(def));
                value = std::move(pattern);
            }
            prop->children.push_back(std::move(key));
            prop->children.push_back(std::move(value));
        } else {
            unexpected();
        }
        prop->span.end = prev_end_;
        return prop;
    }

    NodePtr parse_primary() {
        const std::size_t start = tok_.start;
        switch (tok_.type) {
        case TokenType::Numeric:
        case TokenType::String:
            return parse_literal_token();
        case TokenType::Template:
            return parse_template();
        case TokenType::Identifier: {
            if (!tok_.escaped) {
                const std::string& v = tok_.value;
                if (v == "function") return parse_function(false);
                if (v == "class") return parse_class(false);
                if (v == "this") {
                    next();
                    return make(NodeKind::ThisExpression, start);
                }
                if (v == "null" || v == "true" || v == "false") {
                    auto node = std::make_unique<Node>(NodeKind::Literal, Span{start, tok_.end});
                    node->raw = v;
                    node->literal_type = v == "null" ? LiteralType::Null : LiteralType::Boolean;
                    node->bool_value = v == "true";
                    next();
                    return node;
                }
                if (v == "async" && at_async_function()) return parse_function(false);
                if (v == "import") fail("dynamic import is not supported");
            }
            return parse_identifier();
        }
        case TokenType::Punctuator:
            if (is_punct("(")) {
                next();
                auto e = parse_expression(false);
                expect_punct(")");
                return e;
            }
            if (is_punct("[")) return parse_array_literal();
            if (is_punct("{")) return parse_object_literal();
            if (is_punct("/") || is_punct("/=")) {
                tok_ = lex_.rescan_regex(tok_);
                auto node = std::make_unique<Node>(NodeKind::Literal, Span{start, tok_.end});
                node->raw = tok_.value;
                node->literal_type = LiteralType::RegExp;
                next();
                return node;
            }
            unexpected();
        default:
            unexpected();
        }
    }

    Lexer lex_;
    Token tok_;
    std::size_t prev_end_ = 0;
    Context ctx_;
    int depth_ = 0;
    bool saved_no_in_ = false;
    std::set<std::size_t> failed_arrows_;
};

}  // namespace

NodePtr parse_text(std::u32string_view text) {
    Parser parser(text);
    return parser.parse_program();
}

NodePtr parse_text(std::string_view utf8) {
    auto decoded = decode_utf8(utf8);
    if (!decoded) throw ParseError("input is not valid UTF-8", 0);
    return parse_text(std::u32string_view(*decoded));
}

NodePtr parse(const SourceScript& script) {
    if (script.byte_len() > max_script_bytes) throw OversizeError(script.byte_len());
    return parse_text(std::u32string_view(script.code_points()));
}

}  // namespace fpwasm
