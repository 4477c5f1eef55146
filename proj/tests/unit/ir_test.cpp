#include "fpwasm/errors.hpp"
#include "fpwasm/ir.hpp"

#include <gtest/gtest.h>

#include <climits>

using namespace fpwasm;
using Op = Expr::Op;

namespace {

FunctionIR add_i32() {
    FunctionIR f;
    f.params = {ValType::I32, ValType::I32};
    f.param_names = {"a", "b"};
    f.result = ResultType::I32;
    f.body.push_back(Stmt::ret(Expr::binary(Op::Add, Expr::get_local(0, ValType::I32), Expr::get_local(1, ValType::I32))));
    return f;
}

// for (let i = 0; i < n; i++) body();
FunctionIR counted_loop(std::int32_t n) {
    FunctionIR f;
    f.locals = {ValType::I32};
    f.local_names = {"i"};
    f.imports_needed.push_back(ImportDecl{"js", "body_8", {}, ResultType::Void, "() => {}"});
    f.body.push_back(Stmt::set_local(0, Expr::const_i32(0)));
    f.body.push_back(Stmt::loop_while(
        Expr::compare(Op::Lt, Expr::get_local(0, ValType::I32), Expr::const_i32(n)),
        {Stmt::eval(Expr::call("body_8", ResultType::Void)),
         Stmt::set_local(0, Expr::binary(Op::Add, Expr::get_local(0, ValType::I32), Expr::const_i32(1)))}));
    return f;
}

}  // namespace

TEST(Ir, AddChecksAndRuns) {
    auto f = add_i32();
    EXPECT_EQ(check_function(f), "");
    auto r = interpret(f, {Value{2}, Value{3}});
    ASSERT_TRUE(r);
    EXPECT_EQ(std::get<std::int32_t>(*r), 5);
}

TEST(Ir, I32Wraps) {
    auto f = add_i32();
    auto r = interpret(f, {Value{INT_MAX}, Value{1}});
    EXPECT_EQ(std::get<std::int32_t>(*r), INT_MIN);
}

TEST(Ir, DivisionTraps) {
    FunctionIR f = add_i32();
    f.body.clear();
    f.body.push_back(Stmt::ret(Expr::binary(Op::Div, Expr::get_local(0, ValType::I32), Expr::get_local(1, ValType::I32))));
    EXPECT_THROW(interpret(f, {Value{1}, Value{0}}), Trap);
    EXPECT_THROW(interpret(f, {Value{INT_MIN}, Value{-1}}), Trap);
    EXPECT_EQ(std::get<std::int32_t>(*interpret(f, {Value{-7}, Value{2}})), -3);
}

TEST(Ir, LoopCallsBodyTenTimes) {
    auto f = counted_loop(10);
    EXPECT_EQ(check_function(f), "");
    int calls = 0;
    HostCall host = [&](const std::string& name, const std::vector<Value>&) -> Value {
        EXPECT_EQ(name, "body_8");
        ++calls;
        return Value{0};
    };
    interpret(f, {}, host);
    EXPECT_EQ(calls, 10);
}

TEST(Ir, FuelBoundsInfiniteLoop) {
    FunctionIR f;
    f.body.push_back(Stmt::loop({}));
    EXPECT_THROW(interpret(f, {}, {}, 1000), Trap);
}

TEST(Ir, CheckerRejectsIllTypedBodies) {
    FunctionIR f = add_i32();
    f.body.clear();
    f.body.push_back(Stmt::ret(Expr::binary(Op::Add, Expr::get_local(0, ValType::I32), Expr::const_f64(1.0))));
    EXPECT_NE(check_function(f), "");

    f.body.clear();
    f.body.push_back(Stmt::ret(Expr::get_local(7, ValType::I32)));
    EXPECT_NE(check_function(f), "");

    f.body.clear();
    f.body.push_back(Stmt::break_loop());
    EXPECT_NE(check_function(f), "");

    f.body.clear();
    f.body.push_back(Stmt::eval(Expr::call("undeclared", ResultType::Void)));
    EXPECT_NE(check_function(f), "");

    FunctionIR g;
    g.params = {ValType::F64, ValType::F64};
    g.result = ResultType::F64;
    g.body.push_back(Stmt::ret(Expr::binary(Op::Rem, Expr::get_local(0, ValType::F64), Expr::get_local(1, ValType::F64))));
    EXPECT_NE(check_function(g), "");
}

TEST(Ir, MissingReturnTraps) {
    FunctionIR f = add_i32();
    f.body.clear();
    EXPECT_EQ(check_function(f), "");
    EXPECT_THROW(interpret(f, {Value{1}, Value{2}}), Trap);
}

TEST(Ir, SelectIsLazy) {
    FunctionIR f;
    f.params = {ValType::I32};
    f.result = ResultType::I32;
    f.imports_needed.push_back(ImportDecl{"js", "boom", {}, ResultType::I32, ""});
    f.body.push_back(Stmt::ret(Expr::select(Expr::get_local(0, ValType::I32), Expr::const_i32(1),
                                            Expr::call("boom", ResultType::I32))));
    EXPECT_EQ(check_function(f), "");
    HostCall host = [](const std::string&, const std::vector<Value>&) -> Value {
        throw std::runtime_error("else branch evaluated");
    };
    EXPECT_EQ(std::get<std::int32_t>(*interpret(f, {Value{1}}, host)), 1);
}

TEST(Ir, SymbolValidity) {
    EXPECT_TRUE(is_valid_symbol("x_8"));
    EXPECT_TRUE(is_valid_symbol("$if_else_12"));
    EXPECT_FALSE(is_valid_symbol(""));
    EXPECT_FALSE(is_valid_symbol("8x"));
    EXPECT_FALSE(is_valid_symbol("a-b"));
}
