#pragma once

#include "fpwasm/source.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fpwasm {

// ESTree node kinds for the ES2017 script grammar.
enum class NodeKind : std::uint8_t {
    Program,
    // statements
    ExpressionStatement,
    BlockStatement,
    EmptyStatement,
    DebuggerStatement,
    WithStatement,
    ReturnStatement,
    LabeledStatement,
    BreakStatement,
    ContinueStatement,
    IfStatement,
    SwitchStatement,
    SwitchCase,
    ThrowStatement,
    TryStatement,
    CatchClause,
    WhileStatement,
    DoWhileStatement,
    ForStatement,
    ForInStatement,
    ForOfStatement,
    FunctionDeclaration,
    VariableDeclaration,
    VariableDeclarator,
    ClassDeclaration,
    ClassBody,
    MethodDefinition,
    // expressions
    Identifier,
    Literal,
    TemplateLiteral,
    TemplateElement,
    TaggedTemplateExpression,
    ThisExpression,
    Super,
    MetaProperty,
    ArrayExpression,
    ObjectExpression,
    Property,
    FunctionExpression,
    ArrowFunctionExpression,
    ClassExpression,
    UnaryExpression,
    UpdateExpression,
    BinaryExpression,
    LogicalExpression,
    AssignmentExpression,
    ConditionalExpression,
    CallExpression,
    NewExpression,
    MemberExpression,
    SequenceExpression,
    SpreadElement,
    AwaitExpression,
    YieldExpression,
    // patterns
    ArrayPattern,
    ObjectPattern,
    RestElement,
    AssignmentPattern,
};

std::string_view to_string(NodeKind kind) noexcept;

enum class LiteralType : std::uint8_t { None, String, Number, Boolean, Null, RegExp };

/// Syntax tree node with code point spans.
///
/// Children are stored in document order with a fixed slot layout per kind;
/// optional slots hold nullptr:
///   VariableDeclarator          [id, init?]
///   FunctionDeclaration/Expr    [id?, params..., body]
///   ArrowFunctionExpression     [nullptr, params..., body]
///   ClassDeclaration/Expr       [id?, superClass?, ClassBody]
///   MethodDefinition            [key, FunctionExpression]
///   Property                    [key, value]
///   CallExpression/New          [callee, args...]
///   MemberExpression            [object, property]
///   IfStatement                 [test, consequent, alternate?]
///   ForStatement                [init?, test?, update?, body]
///   ForIn/ForOf                 [left, right, body]
///   WhileStatement              [test, body]
///   DoWhileStatement            [body, test]
///   TryStatement                [block, handler?, finalizer?]
///   CatchClause                 [param?, body]
///   SwitchCase                  [test?, consequent...]
///   ConditionalExpression       [test, consequent, alternate]
///   Return/Break/Continue/Yield [argument?]
///   ArrayExpression/Pattern     holes are nullptr
struct Node {
    NodeKind kind = NodeKind::Program;
    Span span;
    std::vector<std::unique_ptr<Node>> children;

    /// Identifier name, operator, declaration kind (var/let/const), or
    /// property/method kind (init/get/set/constructor/method).
    std::string name;
    /// Raw source text of a Literal or TemplateElement.
    std::string raw;
    LiteralType literal_type = LiteralType::None;
    /// Decoded UTF-8 value of a string literal.
    std::string string_value;
    double number_value = 0.0;
    bool bool_value = false;
    /// True when a string literal contains unpaired surrogate escapes.
    bool lone_surrogate = false;

    bool computed = false;
    bool shorthand = false;
    bool method = false;
    bool is_static = false;
    bool is_async = false;
    bool is_generator = false;
    bool prefix = false;
    bool delegate = false;
    bool expression_body = false;
    /// Position of the `.` or `[` token of a MemberExpression.
    std::size_t punct_pos = 0;

    Node() = default;
    Node(NodeKind k, Span s) : kind(k), span(s) {}

    Node* child(std::size_t i) const noexcept {
        return i < children.size() ? children[i].get() : nullptr;
    }
    bool is(NodeKind k) const noexcept { return kind == k; }
    bool is_function() const noexcept {
        return kind == NodeKind::FunctionDeclaration || kind == NodeKind::FunctionExpression ||
               kind == NodeKind::ArrowFunctionExpression;
    }
    bool is_loop() const noexcept {
        return kind == NodeKind::ForStatement || kind == NodeKind::ForInStatement ||
               kind == NodeKind::ForOfStatement || kind == NodeKind::WhileStatement ||
               kind == NodeKind::DoWhileStatement;
    }

    // Function helpers (Function*/Arrow only).
    Node* function_id() const noexcept { return child(0); }
    Node* function_body() const noexcept { return children.back().get(); }
    std::span<const std::unique_ptr<Node>> function_params() const noexcept {
        return {children.data() + 1, children.size() - 2};
    }
};

using NodePtr = std::unique_ptr<Node>;

/// Pre-order walk in document order. The visitor returns false to skip the
/// node's children.
void walk(const Node& root, const std::function<bool(const Node& node, const Node* parent)>& visit);

/// Structural equality (kind, span, attributes, children).
bool structurally_equal(const Node& a, const Node& b);

}  // namespace fpwasm
