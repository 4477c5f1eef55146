#include "fpwasm/text.hpp"
#include "fpwasm/wasm.hpp"

#include <charconv>
#include <cmath>

namespace fpwasm {

namespace {

std::string f64_literal(double v) {
    if (std::isnan(v)) return "NaN";
    if (std::isinf(v)) return v < 0 ? "-Infinity" : "Infinity";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

std::string_view type_name(ValType t) { return to_string(t); }

int precedence(Expr::Op op) {
    using Op = Expr::Op;
    switch (op) {
    case Op::Select:
        return 1;
    case Op::Eq:
    case Op::Ne:
        return 2;
    case Op::Lt:
    case Op::Le:
    case Op::Gt:
    case Op::Ge:
        return 3;
    case Op::Add:
    case Op::Sub:
        return 4;
    case Op::Mul:
    case Op::Div:
    case Op::Rem:
        return 5;
    case Op::Neg:
    case Op::ConvertI32:
        return 6;
    default:
        return 7;
    }
}

std::string_view op_text(Expr::Op op) {
    using Op = Expr::Op;
    switch (op) {
    case Op::Add:
        return "+";
    case Op::Sub:
        return "-";
    case Op::Mul:
        return "*";
    case Op::Div:
        return "/";
    case Op::Rem:
        return "%";
    case Op::Eq:
        return "==";
    case Op::Ne:
        return "!=";
    case Op::Lt:
        return "<";
    case Op::Le:
        return "<=";
    case Op::Gt:
        return ">";
    case Op::Ge:
        return ">=";
    default:
        return "?";
    }
}

class FunctionPrinter {
public:
    FunctionPrinter(const FunctionIR& f, std::string& out) : f_(f), out_(out) {}

    void print(std::string_view name) {
        out_ += "export function ";
        out_ += name;
        out_ += '(';
        for (std::size_t i = 0; i < f_.params.size(); ++i) {
            if (i) out_ += ", ";
            out_ += local_name(static_cast<std::uint32_t>(i));
            out_ += ": ";
            out_ += type_name(f_.params[i]);
        }
        out_ += "): ";
        out_ += to_string(f_.result);
        out_ += " {\n";
        declared_.assign(f_.locals.size(), false);
        block(f_.body, 1);
        out_ += "}\n";
    }

private:
    std::string local_name(std::uint32_t index) const {
        const auto np = static_cast<std::uint32_t>(f_.params.size());
        if (index < np) {
            if (index < f_.param_names.size() && !f_.param_names[index].empty()) return f_.param_names[index];
            return "p" + std::to_string(index);
        }
        const std::uint32_t li = index - np;
        if (li < f_.local_names.size() && !f_.local_names[li].empty()) return f_.local_names[li];
        return "l" + std::to_string(li);
    }

    ValType local_type(std::uint32_t index) const {
        const auto np = static_cast<std::uint32_t>(f_.params.size());
        return index < np ? f_.params[index] : f_.locals.at(index - np);
    }

    void indent(int depth) { out_.append(static_cast<std::size_t>(depth) * 2, ' '); }

    void block(const std::vector<Stmt>& stmts, int depth) {
        for (const auto& s : stmts) stmt(s, depth);
    }

    void stmt(const Stmt& s, int depth) {
        indent(depth);
        switch (s.kind) {
        case Stmt::Kind::Eval:
            out_ += expr(s.value, 0) + ";\n";
            break;
        case Stmt::Kind::SetLocal:
            set_local(s);
            break;
        case Stmt::Kind::If:
            out_ += "if (" + expr(s.value, 0) + ") {\n";
            block(s.body, depth + 1);
            indent(depth);
            if (s.else_body.empty()) {
                out_ += "}\n";
            } else {
                out_ += "} else {\n";
                block(s.else_body, depth + 1);
                indent(depth);
                out_ += "}\n";
            }
            break;
        case Stmt::Kind::Loop:
            out_ += "while (" + (s.has_value ? expr(s.value, 0) : std::string("true")) + ") {\n";
            block(s.body, depth + 1);
            indent(depth);
            out_ += "}\n";
            break;
        case Stmt::Kind::Break:
            out_ += "break;\n";
            break;
        case Stmt::Kind::Return:
            out_ += s.has_value ? "return " + expr(s.value, 0) + ";\n" : std::string("return;\n");
            break;
        }
    }

    void set_local(const Stmt& s) {
        const std::string name = local_name(s.local);
        const auto np = static_cast<std::uint32_t>(f_.params.size());
        // first assignment to a local declares it
        if (s.local >= np && !declared_[s.local - np]) {
            declared_[s.local - np] = true;
            out_ += "let " + name + ": " + std::string(type_name(local_type(s.local))) + " = " + expr(s.value, 0) +
                    ";\n";
            return;
        }
        const Expr& v = s.value;
        const bool self_update = (v.op == Expr::Op::Add || v.op == Expr::Op::Sub) && v.args.size() == 2 &&
                                 v.args[0].op == Expr::Op::Local && v.args[0].local == s.local;
        if (self_update) {
            const Expr& rhs = v.args[1];
            const bool one = rhs.op == Expr::Op::Const &&
                             (rhs.type == ValType::I32 ? rhs.i32 == 1 : rhs.f64 == 1.0);
            if (one) {
                out_ += name + (v.op == Expr::Op::Add ? "++;\n" : "--;\n");
            } else {
                out_ += name + (v.op == Expr::Op::Add ? " += " : " -= ") + expr(rhs, 0) + ";\n";
            }
            return;
        }
        out_ += name + " = " + expr(v, 0) + ";\n";
    }

    std::string expr(const Expr& e, int parent_prec, bool right_side = false) {
        using Op = Expr::Op;
        const int prec = precedence(e.op);
        std::string s;
        switch (e.op) {
        case Op::Const:
            if (e.type == ValType::I32)
                s = std::to_string(e.i32);
            else
                s = f64_literal(e.f64);
            // a negative literal binds like a unary minus
            if (!s.empty() && s[0] == '-' && parent_prec >= 6) s = "(" + s + ")";
            return s;
        case Op::Local:
            return local_name(e.local);
        case Op::Call: {
            s = e.callee + "(";
            for (std::size_t i = 0; i < e.args.size(); ++i) {
                if (i) s += ", ";
                s += expr(e.args[i], 0);
            }
            return s + ")";
        }
        case Op::Neg:
            s = "-" + expr(e.args[0], 6);
            break;
        case Op::ConvertI32:
            s = "<f64>" + expr(e.args[0], 6);
            break;
        case Op::Select:
            s = expr(e.args[0], 2) + " ? " + expr(e.args[1], 1) + " : " + expr(e.args[2], 1);
            break;
        default:
            s = expr(e.args[0], prec) + " " + std::string(op_text(e.op)) + " " + expr(e.args[1], prec, true);
            break;
        }
        if (prec < parent_prec || (right_side && prec == parent_prec)) return "(" + s + ")";
        return s;
    }

    const FunctionIR& f_;
    std::string& out_;
    std::vector<bool> declared_;
};

void emit_import(const ImportDecl& imp, std::string& out) {
    out += "@external(" + quote_js_string(imp.module) + ", " + quote_js_string(imp.field) + ")\n";
    out += "declare function " + imp.field + "(";
    for (std::size_t i = 0; i < imp.params.size(); ++i) {
        if (i) out += ", ";
        out += "p" + std::to_string(i) + ": " + std::string(type_name(imp.params[i]));
    }
    out += "): " + std::string(to_string(imp.result)) + ";\n";
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F fmt) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += fmt(v[i]);
    }
    return s;
}

}  // namespace

std::string emit_assemblyscript_text(const std::vector<ExportIR>& exports, const std::vector<ImportDecl>& imports) {
    std::string out;
    for (const auto& imp : imports) {
        emit_import(imp, out);
        out += '\n';
    }
    for (const auto& e : exports) {
        switch (e.kind) {
        case ExportKind::ConstI32:
            out += "export let " + e.symbol + ": i32 = " + std::to_string(e.i32) + ";\n";
            break;
        case ExportKind::ConstF64:
            out += "export let " + e.symbol + ": f64 = " + f64_literal(e.f64) + ";\n";
            break;
        case ExportKind::ConstString:
            out += "export const " + e.symbol + ": string = " + quote_js_string(e.str) + ";\n";
            break;
        case ExportKind::StaticArrayI32:
            out += "const " + e.symbol + ": StaticArray<i32> = [" +
                   join(e.i32_array, [](std::int32_t v) { return std::to_string(v); }) + "];\n";
            out += "export function " + e.getter + "(): i32 {\n  return changetype<i32>(" + e.symbol + ");\n}\n";
            break;
        case ExportKind::StaticArrayF64:
            out += "const " + e.symbol + ": StaticArray<f64> = [" + join(e.f64_array, f64_literal) + "];\n";
            out += "export function " + e.getter + "(): i32 {\n  return changetype<i32>(" + e.symbol + ");\n}\n";
            break;
        case ExportKind::Func:
            FunctionPrinter(e.func, out).print(e.symbol);
            break;
        }
    }
    return out;
}

}  // namespace fpwasm
