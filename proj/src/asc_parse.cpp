#include "fpwasm/errors.hpp"
#include "fpwasm/lexer.hpp"
#include "fpwasm/text.hpp"
#include "fpwasm/translator.hpp"

#include <map>

namespace fpwasm {

namespace {

using Op = Expr::Op;

// Expression plus the facts needed for implicit conversions.
struct Typed {
    Expr expr;
    bool int_literal = false;  // may still become an f64 constant
    bool boolean = false;      // comparison or logical result
};

struct LocalInfo {
    std::uint32_t index;
    ValType type;
};

class AscParser {
public:
    explicit AscParser(std::u32string_view text) : lex_(text) { advance(); }

    FunctionIR run(std::string* name_out) {
        if (tok_.is_name("export")) advance();
        expect_name("function");
        if (tok_.type != TokenType::Identifier) fail("expected function name");
        const std::string name = tok_.value;
        advance();
        expect_punct("(");
        while (!tok_.is_punct(")")) {
            if (tok_.type != TokenType::Identifier) fail("expected parameter name");
            const std::string pname = tok_.value;
            advance();
            expect_punct(":");
            const ValType t = value_type();
            declare(pname, t, true);
            if (!tok_.is_punct(",")) break;
            advance();
        }
        expect_punct(")");
        expect_punct(":");
        f_.result = result_type();
        expect_punct("{");
        while (!tok_.is_punct("}")) statement(f_.body, 0);
        advance();
        while (tok_.is_punct(";")) advance();
        if (tok_.type != TokenType::EndOfInput) fail("unexpected text after function");
        if (name_out) *name_out = name;
        return std::move(f_);
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, tok_.start); }

    void advance() { tok_ = lex_.next(); }

    void expect_punct(std::string_view p) {
        if (!tok_.is_punct(p)) fail("expected '" + std::string(p) + "'");
        advance();
    }
    void expect_name(std::string_view n) {
        if (!tok_.is_name(n)) fail("expected '" + std::string(n) + "'");
        advance();
    }

    ValType value_type() {
        if (tok_.type != TokenType::Identifier) fail("expected type");
        const std::string t = tok_.value;
        advance();
        if (t == "i32" || t == "bool") return ValType::I32;
        if (t == "f64" || t == "number") return ValType::F64;
        fail("unsupported type '" + t + "'");
    }

    ResultType result_type() {
        if (tok_.is_name("void")) {
            advance();
            return ResultType::Void;
        }
        return value_type() == ValType::I32 ? ResultType::I32 : ResultType::F64;
    }

    void declare(const std::string& name, ValType t, bool param) {
        if (locals_.count(name)) fail("redeclaration of '" + name + "'");
        const auto index = static_cast<std::uint32_t>(f_.params.size() + f_.locals.size());
        if (param) {
            if (!f_.locals.empty()) fail("parameter after local");
            f_.params.push_back(t);
            f_.param_names.push_back(name);
        } else {
            f_.locals.push_back(t);
            f_.local_names.push_back(name);
        }
        locals_.emplace(name, LocalInfo{index, t});
    }

    const LocalInfo& lookup(const std::string& name) const {
        auto it = locals_.find(name);
        if (it == locals_.end()) fail("unknown identifier '" + name + "'");
        return it->second;
    }

    Expr coerce(Typed v, ValType to) const {
        if (v.expr.type == to) return std::move(v.expr);
        if (to == ValType::F64) {
            if (v.int_literal) return Expr::const_f64(static_cast<double>(v.expr.i32));
            return Expr::convert(std::move(v.expr));
        }
        fail("implicit f64 to i32 conversion");
    }

    Expr condition(Typed v) const {
        if (v.expr.type == ValType::I32) return std::move(v.expr);
        return Expr::compare(Op::Ne, std::move(v.expr), Expr::const_f64(0.0));
    }

    void end_statement() {
        if (tok_.is_punct(";")) {
            advance();
            return;
        }
        if (tok_.is_punct("}") || tok_.newline_before || tok_.type == TokenType::EndOfInput) return;
        fail("expected ';'");
    }

    std::vector<Stmt> body_statement(int loops) {
        std::vector<Stmt> out;
        statement(out, loops);
        return out;
    }

    void statement(std::vector<Stmt>& out, int loops) {
        if (tok_.is_punct("{")) {
            advance();
            while (!tok_.is_punct("}")) {
                if (tok_.type == TokenType::EndOfInput) fail("unterminated block");
                statement(out, loops);
            }
            advance();
            return;
        }
        if (tok_.is_punct(";")) {
            advance();
            return;
        }
        if (tok_.is_name("let") || tok_.is_name("const") || tok_.is_name("var")) {
            variable(out);
            end_statement();
            return;
        }
        if (tok_.is_name("return")) {
            advance();
            if (f_.result == ResultType::Void) {
                out.push_back(Stmt::ret());
            } else {
                const ValType t = f_.result == ResultType::I32 ? ValType::I32 : ValType::F64;
                out.push_back(Stmt::ret(coerce(expression(), t)));
            }
            end_statement();
            return;
        }
        if (tok_.is_name("if")) {
            advance();
            expect_punct("(");
            Expr test = condition(expression());
            expect_punct(")");
            auto then_body = body_statement(loops);
            std::vector<Stmt> else_body;
            if (tok_.is_name("else")) {
                advance();
                else_body = body_statement(loops);
            }
            out.push_back(Stmt::if_else(std::move(test), std::move(then_body), std::move(else_body)));
            return;
        }
        if (tok_.is_name("while")) {
            advance();
            expect_punct("(");
            Expr test = condition(expression());
            expect_punct(")");
            out.push_back(Stmt::loop_while(std::move(test), body_statement(loops + 1)));
            return;
        }
        if (tok_.is_name("for")) {
            advance();
            expect_punct("(");
            if (!tok_.is_punct(";")) {
                if (tok_.is_name("let") || tok_.is_name("var"))
                    variable(out);
                else
                    simple(out);
            }
            expect_punct(";");
            Expr test = Expr::const_i32(1);
            if (!tok_.is_punct(";")) test = condition(expression());
            expect_punct(";");
            std::vector<Stmt> update;
            if (!tok_.is_punct(")")) simple(update);
            expect_punct(")");
            auto body = body_statement(loops + 1);
            body.insert(body.end(), update.begin(), update.end());
            out.push_back(Stmt::loop_while(std::move(test), std::move(body)));
            return;
        }
        if (tok_.is_name("break")) {
            if (loops == 0) fail("break outside loop");
            advance();
            out.push_back(Stmt::break_loop());
            end_statement();
            return;
        }
        simple(out);
        end_statement();
    }

    void variable(std::vector<Stmt>& out) {
        advance();  // let/const/var
        if (tok_.type != TokenType::Identifier) fail("expected variable name");
        const std::string name = tok_.value;
        advance();
        std::optional<ValType> declared;
        if (tok_.is_punct(":")) {
            advance();
            declared = value_type();
        }
        expect_punct("=");
        Typed init = expression();
        const ValType t = declared.value_or(init.expr.type);
        Expr value = coerce(std::move(init), t);
        declare(name, t, false);
        out.push_back(Stmt::set_local(locals_.at(name).index, std::move(value)));
    }

    // Assignment or update statement.
    void simple(std::vector<Stmt>& out) {
        if (tok_.is_punct("++") || tok_.is_punct("--")) {
            const bool inc = tok_.value == "++";
            advance();
            if (tok_.type != TokenType::Identifier) fail("expected identifier");
            out.push_back(step(lookup(tok_.value), inc));
            advance();
            return;
        }
        if (tok_.type != TokenType::Identifier) fail("unsupported statement");
        const LocalInfo target = lookup(tok_.value);
        advance();
        if (tok_.is_punct("++") || tok_.is_punct("--")) {
            out.push_back(step(target, tok_.value == "++"));
            advance();
            return;
        }
        static const std::map<std::string, Op> compound{
            {"+=", Op::Add}, {"-=", Op::Sub}, {"*=", Op::Mul}, {"/=", Op::Div}, {"%=", Op::Rem}};
        if (tok_.is_punct("=")) {
            advance();
            out.push_back(Stmt::set_local(target.index, coerce(expression(), target.type)));
            return;
        }
        if (tok_.type == TokenType::Punctuator && compound.count(tok_.value)) {
            const Op op = compound.at(tok_.value);
            advance();
            Expr rhs = coerce(expression(), target.type);
            if (op == Op::Rem && target.type == ValType::F64) fail("f64 remainder");
            out.push_back(
                Stmt::set_local(target.index, Expr::binary(op, Expr::get_local(target.index, target.type), std::move(rhs))));
            return;
        }
        fail("unsupported statement");
    }

    Stmt step(const LocalInfo& v, bool inc) const {
        Expr one = v.type == ValType::I32 ? Expr::const_i32(1) : Expr::const_f64(1.0);
        return Stmt::set_local(v.index, Expr::binary(inc ? Op::Add : Op::Sub, Expr::get_local(v.index, v.type), std::move(one)));
    }

    // --- expressions -------------------------------------------------------

    Typed expression() { return conditional(); }

    Typed conditional() {
        Typed test = logical_or();
        if (!tok_.is_punct("?")) return test;
        advance();
        Typed a = conditional();
        expect_punct(":");
        Typed b = conditional();
        const ValType t = (a.expr.type == ValType::F64 || b.expr.type == ValType::F64) ? ValType::F64 : ValType::I32;
        Typed r;
        r.boolean = a.boolean && b.boolean;
        r.expr = Expr::select(condition(std::move(test)), coerce(std::move(a), t), coerce(std::move(b), t));
        return r;
    }

    Typed logical_or() {
        Typed lhs = logical_and();
        while (tok_.is_punct("||")) {
            advance();
            Typed rhs = logical_and();
            lhs = logic(std::move(lhs), std::move(rhs), false);
        }
        return lhs;
    }

    Typed logical_and() {
        Typed lhs = equality();
        while (tok_.is_punct("&&")) {
            advance();
            Typed rhs = equality();
            lhs = logic(std::move(lhs), std::move(rhs), true);
        }
        return lhs;
    }

    Typed logic(Typed lhs, Typed rhs, bool is_and) const {
        if (!lhs.boolean || !rhs.boolean) fail("logical operator on non-boolean operands");
        Typed r;
        r.boolean = true;
        if (is_and)
            r.expr = Expr::select(std::move(lhs.expr), std::move(rhs.expr), Expr::const_i32(0));
        else
            r.expr = Expr::select(std::move(lhs.expr), Expr::const_i32(1), std::move(rhs.expr));
        return r;
    }

    Typed compare_chain(Typed (AscParser::*next)(), const std::map<std::string, Op>& ops) {
        Typed lhs = (this->*next)();
        while (tok_.type == TokenType::Punctuator && ops.count(tok_.value)) {
            const Op op = ops.at(tok_.value);
            advance();
            Typed rhs = (this->*next)();
            const ValType t =
                (lhs.expr.type == ValType::F64 || rhs.expr.type == ValType::F64) ? ValType::F64 : ValType::I32;
            Typed r;
            r.boolean = true;
            r.expr = Expr::compare(op, coerce(std::move(lhs), t), coerce(std::move(rhs), t));
            lhs = std::move(r);
        }
        return lhs;
    }

    Typed equality() {
        static const std::map<std::string, Op> ops{{"==", Op::Eq}, {"===", Op::Eq}, {"!=", Op::Ne}, {"!==", Op::Ne}};
        return compare_chain(&AscParser::relational, ops);
    }

    Typed relational() {
        static const std::map<std::string, Op> ops{{"<", Op::Lt}, {"<=", Op::Le}, {">", Op::Gt}, {">=", Op::Ge}};
        return compare_chain(&AscParser::additive, ops);
    }

    Typed arithmetic_chain(Typed (AscParser::*next)(), const std::map<std::string, Op>& ops) {
        Typed lhs = (this->*next)();
        while (tok_.type == TokenType::Punctuator && ops.count(tok_.value)) {
            const Op op = ops.at(tok_.value);
            advance();
            Typed rhs = (this->*next)();
            const ValType t =
                (lhs.expr.type == ValType::F64 || rhs.expr.type == ValType::F64) ? ValType::F64 : ValType::I32;
            if (op == Op::Rem && t == ValType::F64) fail("f64 remainder");
            Typed r;
            r.expr = Expr::binary(op, coerce(std::move(lhs), t), coerce(std::move(rhs), t));
            lhs = std::move(r);
        }
        return lhs;
    }

    Typed additive() {
        static const std::map<std::string, Op> ops{{"+", Op::Add}, {"-", Op::Sub}};
        return arithmetic_chain(&AscParser::multiplicative, ops);
    }

    Typed multiplicative() {
        static const std::map<std::string, Op> ops{{"*", Op::Mul}, {"/", Op::Div}, {"%", Op::Rem}};
        return arithmetic_chain(&AscParser::unary, ops);
    }

    Typed unary() {
        if (tok_.is_punct("-")) {
            advance();
            Typed v = unary();
            if (v.int_literal) {
                v.expr.i32 = static_cast<std::int32_t>(0u - static_cast<std::uint32_t>(v.expr.i32));
                return v;
            }
            if (v.expr.op == Op::Const && v.expr.type == ValType::F64) {
                v.expr.f64 = -v.expr.f64;
                return v;
            }
            Typed r;
            r.expr = Expr::negate(std::move(v.expr));
            return r;
        }
        if (tok_.is_punct("+")) {
            advance();
            return unary();
        }
        if (tok_.is_punct("!")) {
            advance();
            Typed v = unary();
            Typed r;
            r.boolean = true;
            if (v.expr.type == ValType::I32)
                r.expr = Expr::compare(Op::Eq, std::move(v.expr), Expr::const_i32(0));
            else
                r.expr = Expr::compare(Op::Eq, std::move(v.expr), Expr::const_f64(0.0));
            return r;
        }
        if (tok_.is_punct("<")) {
            // <T>expr cast
            advance();
            const ValType t = value_type();
            expect_punct(">");
            Typed v = unary();
            Typed r;
            r.expr = coerce(std::move(v), t);
            return r;
        }
        return primary();
    }

    Typed primary() {
        Typed r;
        if (tok_.type == TokenType::Numeric) {
            const std::string raw = tok_.value;
            const double v = tok_.number;
            advance();
            const bool hex = raw.size() > 1 && raw[0] == '0' && (raw[1] == 'x' || raw[1] == 'X');
            const bool fractional = !hex && raw.find_first_of(".eE") != std::string::npos;
            if (fractional || v > 2147483647.0) {
                r.expr = Expr::const_f64(v);
            } else {
                r.expr = Expr::const_i32(static_cast<std::int32_t>(v));
                r.int_literal = true;
            }
            return r;
        }
        if (tok_.is_punct("(")) {
            advance();
            r = expression();
            expect_punct(")");
            return r;
        }
        if (tok_.type == TokenType::Identifier) {
            const std::string name = tok_.value;
            advance();
            if (name == "true" || name == "false") {
                r.expr = Expr::const_i32(name == "true" ? 1 : 0);
                r.boolean = true;
                return r;
            }
            if ((name == "f64" || name == "i32") && tok_.is_punct("(")) {
                advance();
                Typed v = expression();
                expect_punct(")");
                r.expr = coerce(std::move(v), name == "f64" ? ValType::F64 : ValType::I32);
                return r;
            }
            if (tok_.is_punct("(")) fail("calls are outside the supported grammar");
            const LocalInfo& info = lookup(name);
            r.expr = Expr::get_local(info.index, info.type);
            return r;
        }
        fail("unexpected token");
    }

    Lexer lex_;
    Token tok_;
    FunctionIR f_;
    std::map<std::string, LocalInfo> locals_;
};

}  // namespace

FunctionIR parse_assemblyscript_function(std::string_view text, std::string* name_out) {
    auto cps = decode_utf8(text);
    if (!cps) throw ParseError("invalid UTF-8", 0);
    return AscParser(*cps).run(name_out);
}

}  // namespace fpwasm
