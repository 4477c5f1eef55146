#include "fpwasm/ir.hpp"

#include "fpwasm/errors.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <utility>

namespace fpwasm {

std::string_view to_string(ValType t) noexcept { return t == ValType::I32 ? "i32" : "f64"; }

std::string_view to_string(ResultType t) noexcept {
    switch (t) {
    case ResultType::Void:
        return "void";
    case ResultType::I32:
        return "i32";
    case ResultType::F64:
        return "f64";
    }
    return "void";
}

std::string_view to_string(ExportKind k) noexcept {
    switch (k) {
    case ExportKind::ConstI32:
        return "const_i32";
    case ExportKind::ConstF64:
        return "const_f64";
    case ExportKind::ConstString:
        return "const_string";
    case ExportKind::StaticArrayI32:
        return "static_array_i32";
    case ExportKind::StaticArrayF64:
        return "static_array_f64";
    case ExportKind::Func:
        return "func";
    }
    return "func";
}

Expr Expr::const_i32(std::int32_t v) {
    Expr e;
    e.op = Op::Const;
    e.type = ValType::I32;
    e.i32 = v;
    return e;
}

Expr Expr::const_f64(double v) {
    Expr e;
    e.op = Op::Const;
    e.type = ValType::F64;
    e.f64 = v;
    return e;
}

Expr Expr::get_local(std::uint32_t index, ValType type) {
    Expr e;
    e.op = Op::Local;
    e.type = type;
    e.local = index;
    return e;
}

Expr Expr::binary(Op op, Expr lhs, Expr rhs) {
    Expr e;
    e.op = op;
    e.type = lhs.type;
    e.args.push_back(std::move(lhs));
    e.args.push_back(std::move(rhs));
    return e;
}

Expr Expr::compare(Op op, Expr lhs, Expr rhs) {
    Expr e;
    e.op = op;
    e.type = ValType::I32;
    e.operand_type = lhs.type;
    e.args.push_back(std::move(lhs));
    e.args.push_back(std::move(rhs));
    return e;
}

Expr Expr::negate(Expr operand) {
    Expr e;
    e.op = Op::Neg;
    e.type = operand.type;
    e.args.push_back(std::move(operand));
    return e;
}

Expr Expr::select(Expr test, Expr then_value, Expr else_value) {
    Expr e;
    e.op = Op::Select;
    e.type = then_value.type;
    e.args.push_back(std::move(test));
    e.args.push_back(std::move(then_value));
    e.args.push_back(std::move(else_value));
    return e;
}

Expr Expr::call(std::string callee, ResultType result, std::vector<Expr> args) {
    Expr e;
    e.op = Op::Call;
    e.callee = std::move(callee);
    e.call_result = result;
    e.type = result == ResultType::F64 ? ValType::F64 : ValType::I32;
    e.args = std::move(args);
    return e;
}

Expr Expr::convert(Expr operand) {
    Expr e;
    e.op = Op::ConvertI32;
    e.type = ValType::F64;
    e.operand_type = ValType::I32;
    e.args.push_back(std::move(operand));
    return e;
}

Stmt Stmt::eval(Expr e) {
    Stmt s;
    s.kind = Kind::Eval;
    s.value = std::move(e);
    s.has_value = true;
    return s;
}

Stmt Stmt::set_local(std::uint32_t index, Expr e) {
    Stmt s;
    s.kind = Kind::SetLocal;
    s.local = index;
    s.value = std::move(e);
    s.has_value = true;
    return s;
}

Stmt Stmt::if_else(Expr test, std::vector<Stmt> then_body, std::vector<Stmt> else_body) {
    Stmt s;
    s.kind = Kind::If;
    s.value = std::move(test);
    s.has_value = true;
    s.body = std::move(then_body);
    s.else_body = std::move(else_body);
    return s;
}

Stmt Stmt::loop(std::vector<Stmt> body) {
    Stmt s;
    s.kind = Kind::Loop;
    s.body = std::move(body);
    return s;
}

Stmt Stmt::loop_while(Expr test, std::vector<Stmt> body) {
    Stmt s;
    s.kind = Kind::Loop;
    s.value = std::move(test);
    s.has_value = true;
    s.body = std::move(body);
    return s;
}

Stmt Stmt::break_loop() {
    Stmt s;
    s.kind = Kind::Break;
    return s;
}

Stmt Stmt::ret() {
    Stmt s;
    s.kind = Kind::Return;
    return s;
}

Stmt Stmt::ret(Expr e) {
    Stmt s;
    s.kind = Kind::Return;
    s.value = std::move(e);
    s.has_value = true;
    return s;
}

ExportIR ExportIR::const_i32(std::string symbol, std::int32_t v) {
    ExportIR e;
    e.kind = ExportKind::ConstI32;
    e.symbol = std::move(symbol);
    e.i32 = v;
    return e;
}

ExportIR ExportIR::const_f64(std::string symbol, double v) {
    ExportIR e;
    e.kind = ExportKind::ConstF64;
    e.symbol = std::move(symbol);
    e.f64 = v;
    return e;
}

ExportIR ExportIR::const_string(std::string symbol, std::string v) {
    ExportIR e;
    e.kind = ExportKind::ConstString;
    e.symbol = std::move(symbol);
    e.str = std::move(v);
    return e;
}

ExportIR ExportIR::array_i32(std::string symbol, std::string getter, std::vector<std::int32_t> v) {
    ExportIR e;
    e.kind = ExportKind::StaticArrayI32;
    e.symbol = std::move(symbol);
    e.getter = std::move(getter);
    e.i32_array = std::move(v);
    return e;
}

ExportIR ExportIR::array_f64(std::string symbol, std::string getter, std::vector<double> v) {
    ExportIR e;
    e.kind = ExportKind::StaticArrayF64;
    e.symbol = std::move(symbol);
    e.getter = std::move(getter);
    e.f64_array = std::move(v);
    return e;
}

ExportIR ExportIR::function(std::string symbol, FunctionIR f) {
    ExportIR e;
    e.kind = ExportKind::Func;
    e.symbol = std::move(symbol);
    e.func = std::move(f);
    return e;
}

std::vector<std::string> ExportIR::exported_names() const {
    if (kind == ExportKind::StaticArrayI32 || kind == ExportKind::StaticArrayF64) return {getter};
    return {symbol};
}

bool is_valid_symbol(std::string_view s) noexcept {
    if (s.empty()) return false;
    auto head = [](char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_' || c == '$'; };
    if (!head(s[0])) return false;
    for (char c : s.substr(1))
        if (!head(c) && !(c >= '0' && c <= '9')) return false;
    return true;
}

namespace {

class Checker {
public:
    explicit Checker(const FunctionIR& f) : f_(f) {
        for (const auto& imp : f.imports_needed) imports_.emplace(imp.field, &imp);
    }

    std::string run() {
        if (imports_.size() != f_.imports_needed.size()) return "duplicate import field";
        for (const auto& imp : f_.imports_needed)
            if (!is_valid_symbol(imp.field)) return "invalid import field '" + imp.field + "'";
        check_block(f_.body, 0);
        return error_;
    }

private:
    void fail(std::string msg) {
        if (error_.empty()) error_ = std::move(msg);
    }

    const ValType* local_type(std::uint32_t index) const {
        if (index < f_.params.size()) return &f_.params[index];
        index -= static_cast<std::uint32_t>(f_.params.size());
        if (index < f_.locals.size()) return &f_.locals[index];
        return nullptr;
    }

    void check_block(const std::vector<Stmt>& block, int loop_depth) {
        for (const auto& s : block) check_stmt(s, loop_depth);
    }

    void check_stmt(const Stmt& s, int loop_depth) {
        switch (s.kind) {
        case Stmt::Kind::Eval:
            if (s.value.op == Expr::Op::Call && s.value.call_result == ResultType::Void)
                check_call(s.value);
            else
                check_expr(s.value);
            break;
        case Stmt::Kind::SetLocal: {
            const ValType* t = local_type(s.local);
            if (!t) return fail("local index out of range");
            check_expr(s.value);
            if (s.value.type != *t) fail("local type mismatch");
            break;
        }
        case Stmt::Kind::If:
            check_expr(s.value);
            if (s.value.type != ValType::I32) fail("if test must be i32");
            check_block(s.body, loop_depth);
            check_block(s.else_body, loop_depth);
            break;
        case Stmt::Kind::Loop:
            if (s.has_value) {
                check_expr(s.value);
                if (s.value.type != ValType::I32) fail("loop test must be i32");
            }
            check_block(s.body, loop_depth + 1);
            break;
        case Stmt::Kind::Break:
            if (loop_depth == 0) fail("break outside loop");
            break;
        case Stmt::Kind::Return:
            if (f_.result == ResultType::Void) {
                if (s.has_value) fail("value returned from void function");
            } else {
                if (!s.has_value) return fail("missing return value");
                check_expr(s.value);
                if ((f_.result == ResultType::I32) != (s.value.type == ValType::I32)) fail("return type mismatch");
            }
            break;
        }
    }

    void check_call(const Expr& e) {
        auto it = imports_.find(e.callee);
        if (it == imports_.end()) return fail("call to undeclared import '" + e.callee + "'");
        const ImportDecl& imp = *it->second;
        if (imp.result != e.call_result) return fail("import result mismatch for '" + e.callee + "'");
        if (imp.params.size() != e.args.size()) return fail("arity mismatch for '" + e.callee + "'");
        for (std::size_t i = 0; i < e.args.size(); ++i) {
            check_expr(e.args[i]);
            if (e.args[i].type != imp.params[i]) fail("argument type mismatch for '" + e.callee + "'");
        }
    }

    void check_expr(const Expr& e) {
        using Op = Expr::Op;
        switch (e.op) {
        case Op::Const:
            break;
        case Op::Local: {
            const ValType* t = local_type(e.local);
            if (!t) return fail("local index out of range");
            if (*t != e.type) fail("local type mismatch");
            break;
        }
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div:
        case Op::Rem:
            if (e.args.size() != 2) return fail("binary arity");
            check_expr(e.args[0]);
            check_expr(e.args[1]);
            if (e.args[0].type != e.type || e.args[1].type != e.type) fail("binary operand type mismatch");
            if (e.op == Op::Rem && e.type == ValType::F64) fail("f64 remainder has no WebAssembly instruction");
            break;
        case Op::Neg:
            if (e.args.size() != 1) return fail("unary arity");
            check_expr(e.args[0]);
            if (e.args[0].type != e.type) fail("negation type mismatch");
            break;
        case Op::Eq:
        case Op::Ne:
        case Op::Lt:
        case Op::Le:
        case Op::Gt:
        case Op::Ge:
            if (e.args.size() != 2) return fail("comparison arity");
            check_expr(e.args[0]);
            check_expr(e.args[1]);
            if (e.type != ValType::I32) fail("comparison must produce i32");
            if (e.args[0].type != e.operand_type || e.args[1].type != e.operand_type)
                fail("comparison operand type mismatch");
            break;
        case Op::Select:
            if (e.args.size() != 3) return fail("select arity");
            for (const auto& a : e.args) check_expr(a);
            if (e.args[0].type != ValType::I32) fail("select test must be i32");
            if (e.args[1].type != e.type || e.args[2].type != e.type) fail("select branch type mismatch");
            break;
        case Op::Call:
            if (e.call_result == ResultType::Void) return fail("void call used as a value");
            check_call(e);
            break;
        case Op::ConvertI32:
            if (e.args.size() != 1) return fail("convert arity");
            check_expr(e.args[0]);
            if (e.args[0].type != ValType::I32 || e.type != ValType::F64) fail("convert type mismatch");
            break;
        }
    }

    const FunctionIR& f_;
    std::map<std::string, const ImportDecl*> imports_;
    std::string error_;
};

enum class Flow { Normal, Break, Return };

class Interpreter {
public:
    Interpreter(const FunctionIR& f, const HostCall& host, std::uint64_t fuel) : f_(f), host_(host), fuel_(fuel) {}

    std::optional<Value> run(const std::vector<Value>& args) {
        if (args.size() != f_.params.size()) throw Trap("argument count mismatch");
        locals_ = args;
        for (ValType t : f_.locals) locals_.push_back(zero(t));
        if (exec_block(f_.body) == Flow::Return) return result_;
        if (f_.result != ResultType::Void) throw Trap("unreachable: function ended without a return value");
        return std::nullopt;
    }

private:
    static Value zero(ValType t) { return t == ValType::I32 ? Value{std::int32_t{0}} : Value{0.0}; }

    Flow exec_block(const std::vector<Stmt>& block) {
        for (const auto& s : block) {
            Flow flow = exec(s);
            if (flow != Flow::Normal) return flow;
        }
        return Flow::Normal;
    }

    void burn() {
        if (fuel_ == 0) throw Trap("fuel exhausted");
        --fuel_;
    }

    Flow exec(const Stmt& s) {
        burn();
        switch (s.kind) {
        case Stmt::Kind::Eval:
            eval(s.value);
            return Flow::Normal;
        case Stmt::Kind::SetLocal:
            locals_.at(s.local) = eval(s.value);
            return Flow::Normal;
        case Stmt::Kind::If:
            return exec_block(std::get<std::int32_t>(eval(s.value)) != 0 ? s.body : s.else_body);
        case Stmt::Kind::Loop:
            for (;;) {
                burn();
                if (s.has_value && std::get<std::int32_t>(eval(s.value)) == 0) return Flow::Normal;
                Flow flow = exec_block(s.body);
                if (flow == Flow::Break) return Flow::Normal;
                if (flow == Flow::Return) return flow;
            }
        case Stmt::Kind::Break:
            return Flow::Break;
        case Stmt::Kind::Return:
            if (s.has_value) result_ = eval(s.value);
            return Flow::Return;
        }
        return Flow::Normal;
    }

    static std::int32_t wrap(std::int64_t v) { return static_cast<std::int32_t>(static_cast<std::uint32_t>(v)); }

    Value eval(const Expr& e) {
        using Op = Expr::Op;
        switch (e.op) {
        case Op::Const:
            return e.type == ValType::I32 ? Value{e.i32} : Value{e.f64};
        case Op::Local:
            return locals_.at(e.local);
        case Op::Call: {
            std::vector<Value> args;
            for (const auto& a : e.args) args.push_back(eval(a));
            if (!host_) throw Trap("no host for import '" + e.callee + "'");
            Value v = host_(e.callee, args);
            if (e.call_result == ResultType::Void) return std::int32_t{0};
            return v;
        }
        case Op::Select:
            return std::get<std::int32_t>(eval(e.args[0])) != 0 ? eval(e.args[1]) : eval(e.args[2]);
        case Op::ConvertI32:
            return static_cast<double>(std::get<std::int32_t>(eval(e.args[0])));
        case Op::Neg: {
            Value v = eval(e.args[0]);
            if (e.type == ValType::I32) return wrap(-static_cast<std::int64_t>(std::get<std::int32_t>(v)));
            return -std::get<double>(v);
        }
        default:
            break;
        }
        const Value a = eval(e.args[0]);
        const Value b = eval(e.args[1]);
        if (e.is_comparison()) {
            bool r = false;
            if (e.operand_type == ValType::I32) {
                const auto x = std::get<std::int32_t>(a), y = std::get<std::int32_t>(b);
                r = compare(e.op, x, y);
            } else {
                r = compare(e.op, std::get<double>(a), std::get<double>(b));
            }
            return std::int32_t{r ? 1 : 0};
        }
        if (e.type == ValType::I32) {
            const std::int64_t x = std::get<std::int32_t>(a), y = std::get<std::int32_t>(b);
            switch (e.op) {
            case Op::Add:
                return wrap(x + y);
            case Op::Sub:
                return wrap(x - y);
            case Op::Mul:
                return wrap(x * y);
            case Op::Div:
                if (y == 0) throw Trap("integer divide by zero");
                if (x == std::numeric_limits<std::int32_t>::min() && y == -1) throw Trap("integer overflow");
                return wrap(x / y);
            case Op::Rem:
                if (y == 0) throw Trap("integer divide by zero");
                return wrap(x % y);
            default:
                break;
            }
        } else {
            const double x = std::get<double>(a), y = std::get<double>(b);
            switch (e.op) {
            case Op::Add:
                return x + y;
            case Op::Sub:
                return x - y;
            case Op::Mul:
                return x * y;
            case Op::Div:
                return x / y;
            case Op::Rem:
                return std::fmod(x, y);
            default:
                break;
            }
        }
        throw Trap("malformed expression");
    }

    template <typename T>
    static bool compare(Expr::Op op, T x, T y) {
        switch (op) {
        case Expr::Op::Eq:
            return x == y;
        case Expr::Op::Ne:
            return x != y;
        case Expr::Op::Lt:
            return x < y;
        case Expr::Op::Le:
            return x <= y;
        case Expr::Op::Gt:
            return x > y;
        case Expr::Op::Ge:
            return x >= y;
        default:
            return false;
        }
    }

    const FunctionIR& f_;
    const HostCall& host_;
    std::uint64_t fuel_;
    std::vector<Value> locals_;
    Value result_;
};

}  // namespace

std::string check_function(const FunctionIR& f) { return Checker(f).run(); }

std::optional<Value> interpret(const FunctionIR& f, const std::vector<Value>& args, const HostCall& host,
                               std::uint64_t fuel) {
    return Interpreter(f, host, fuel).run(args);
}

}  // namespace fpwasm
