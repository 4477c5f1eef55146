#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fpwasm {

enum class ValType : std::uint8_t { I32, F64 };
enum class ResultType : std::uint8_t { Void, I32, F64 };

std::string_view to_string(ValType t) noexcept;
std::string_view to_string(ResultType t) noexcept;

/// Host function imported from the `js` namespace. `js_body` is the glue
/// callback source installed under `field` in the import object.
struct ImportDecl {
    std::string module = "js";
    std::string field;
    std::vector<ValType> params;
    ResultType result = ResultType::Void;
    std::string js_body;

    friend bool operator==(const ImportDecl&, const ImportDecl&) = default;
};

/// Expression tree. Binary arithmetic requires operands of the node's type;
/// comparisons take operands of `operand_type` and produce i32.
struct Expr {
    enum class Op : std::uint8_t {
        Const,
        Local,
        Add,
        Sub,
        Mul,
        Div,
        Rem,
        Neg,
        Eq,
        Ne,
        Lt,
        Le,
        Gt,
        Ge,
        Select,  // args: test (i32), then, else; lazily evaluated
        Call,    // import call by field name
        ConvertI32,  // i32 -> f64
    };

    Op op = Op::Const;
    ValType type = ValType::I32;
    ValType operand_type = ValType::I32;
    std::int32_t i32 = 0;
    double f64 = 0.0;
    std::uint32_t local = 0;
    std::string callee;
    /// Result of a Call; Void calls may only appear as Stmt::Eval roots.
    ResultType call_result = ResultType::Void;
    std::vector<Expr> args;

    static Expr const_i32(std::int32_t v);
    static Expr const_f64(double v);
    static Expr get_local(std::uint32_t index, ValType type);
    static Expr binary(Op op, Expr lhs, Expr rhs);
    static Expr compare(Op op, Expr lhs, Expr rhs);
    static Expr negate(Expr operand);
    static Expr select(Expr test, Expr then_value, Expr else_value);
    static Expr call(std::string callee, ResultType result, std::vector<Expr> args = {});
    static Expr convert(Expr operand);

    bool is_comparison() const noexcept { return op >= Op::Eq && op <= Op::Ge; }
    friend bool operator==(const Expr&, const Expr&) = default;
};

struct Stmt {
    enum class Kind : std::uint8_t {
        Eval,      // evaluate `value` and drop any result
        SetLocal,  // locals[local] = value
        If,        // value: i32 test
        Loop,      // repeat body until Break, or while `value` (if present) is nonzero
        Break,     // exits the innermost Loop
        Return,    // value present iff has_value
    };

    Kind kind = Kind::Eval;
    Expr value;
    bool has_value = false;
    std::uint32_t local = 0;
    std::vector<Stmt> body;
    std::vector<Stmt> else_body;

    static Stmt eval(Expr e);
    static Stmt set_local(std::uint32_t index, Expr e);
    static Stmt if_else(Expr test, std::vector<Stmt> then_body, std::vector<Stmt> else_body = {});
    static Stmt loop(std::vector<Stmt> body);
    static Stmt loop_while(Expr test, std::vector<Stmt> body);
    static Stmt break_loop();
    static Stmt ret();
    static Stmt ret(Expr e);

    friend bool operator==(const Stmt&, const Stmt&) = default;
};

/// Restricted function body. Locals are numbered after the parameters.
/// Names only affect the AssemblyScript rendering.
struct FunctionIR {
    std::vector<ValType> params;
    std::vector<std::string> param_names;
    ResultType result = ResultType::Void;
    std::vector<ValType> locals;
    std::vector<std::string> local_names;
    std::vector<Stmt> body;
    std::vector<ImportDecl> imports_needed;

    friend bool operator==(const FunctionIR&, const FunctionIR&) = default;
};

enum class ExportKind : std::uint8_t {
    ConstI32,
    ConstF64,
    ConstString,
    StaticArrayI32,
    StaticArrayF64,
    Func,
};

std::string_view to_string(ExportKind k) noexcept;

/// One module export. Static arrays are exported as a pointer-getter
/// function named `getter` returning the data offset.
struct ExportIR {
    ExportKind kind = ExportKind::ConstI32;
    std::string symbol;
    std::int32_t i32 = 0;
    double f64 = 0.0;
    std::string str;
    std::vector<std::int32_t> i32_array;
    std::vector<double> f64_array;
    std::string getter;
    FunctionIR func;

    static ExportIR const_i32(std::string symbol, std::int32_t v);
    static ExportIR const_f64(std::string symbol, double v);
    static ExportIR const_string(std::string symbol, std::string v);
    static ExportIR array_i32(std::string symbol, std::string getter, std::vector<std::int32_t> v);
    static ExportIR array_f64(std::string symbol, std::string getter, std::vector<double> v);
    static ExportIR function(std::string symbol, FunctionIR f);

    /// Names this export occupies in the module export table.
    std::vector<std::string> exported_names() const;

    friend bool operator==(const ExportIR&, const ExportIR&) = default;
};

/// True for `[A-Za-z_$][A-Za-z0-9_$]*`.
bool is_valid_symbol(std::string_view s) noexcept;

/// Checks locals, import references, and operand typing. Returns an empty
/// string when well-formed, otherwise a description of the first problem.
std::string check_function(const FunctionIR& f);

// --- interpretation ---------------------------------------------------------

using Value = std::variant<std::int32_t, double>;

/// Host side of an import call during interpretation.
using HostCall = std::function<Value(const std::string& field, const std::vector<Value>& args)>;

/// Executes with WebAssembly semantics (wrapping i32, trapping division).
/// `fuel` bounds the number of executed statements. Throws Trap on integer
/// division by zero or overflow and on fuel exhaustion.
std::optional<Value> interpret(const FunctionIR& f, const std::vector<Value>& args, const HostCall& host = {},
                               std::uint64_t fuel = 10'000'000);

}  // namespace fpwasm
