#include "fpwasm/ast.hpp"

#include <cmath>
#include <cstring>
#include <utility>
#include <vector>

namespace fpwasm {

std::string_view to_string(NodeKind kind) noexcept {
    switch (kind) {
#define FPWASM_KIND(k) \
    case NodeKind::k:  \
        return #k;
        FPWASM_KIND(Program)
        FPWASM_KIND(ExpressionStatement)
        FPWASM_KIND(BlockStatement)
        FPWASM_KIND(EmptyStatement)
        FPWASM_KIND(DebuggerStatement)
        FPWASM_KIND(WithStatement)
        FPWASM_KIND(ReturnStatement)
        FPWASM_KIND(LabeledStatement)
        FPWASM_KIND(BreakStatement)
        FPWASM_KIND(ContinueStatement)
        FPWASM_KIND(IfStatement)
        FPWASM_KIND(SwitchStatement)
        FPWASM_KIND(SwitchCase)
        FPWASM_KIND(ThrowStatement)
        FPWASM_KIND(TryStatement)
        FPWASM_KIND(CatchClause)
        FPWASM_KIND(WhileStatement)
        FPWASM_KIND(DoWhileStatement)
        FPWASM_KIND(ForStatement)
        FPWASM_KIND(ForInStatement)
        FPWASM_KIND(ForOfStatement)
        FPWASM_KIND(FunctionDeclaration)
        FPWASM_KIND(VariableDeclaration)
        FPWASM_KIND(VariableDeclarator)
        FPWASM_KIND(ClassDeclaration)
        FPWASM_KIND(ClassBody)
        FPWASM_KIND(MethodDefinition)
        FPWASM_KIND(Identifier)
        FPWASM_KIND(Literal)
        FPWASM_KIND(TemplateLiteral)
        FPWASM_KIND(TemplateElement)
        FPWASM_KIND(TaggedTemplateExpression)
        FPWASM_KIND(ThisExpression)
        FPWASM_KIND(Super)
        FPWASM_KIND(MetaProperty)
        FPWASM_KIND(ArrayExpression)
        FPWASM_KIND(ObjectExpression)
        FPWASM_KIND(Property)
        FPWASM_KIND(FunctionExpression)
        FPWASM_KIND(ArrowFunctionExpression)
        FPWASM_KIND(ClassExpression)
        FPWASM_KIND(UnaryExpression)
        FPWASM_KIND(UpdateExpression)
        FPWASM_KIND(BinaryExpression)
        FPWASM_KIND(LogicalExpression)
        FPWASM_KIND(AssignmentExpression)
        FPWASM_KIND(ConditionalExpression)
        FPWASM_KIND(CallExpression)
        FPWASM_KIND(NewExpression)
        FPWASM_KIND(MemberExpression)
        FPWASM_KIND(SequenceExpression)
        FPWASM_KIND(SpreadElement)
        FPWASM_KIND(AwaitExpression)
        FPWASM_KIND(YieldExpression)
        FPWASM_KIND(ArrayPattern)
        FPWASM_KIND(ObjectPattern)
        FPWASM_KIND(RestElement)
        FPWASM_KIND(AssignmentPattern)
#undef FPWASM_KIND
    }
    return "Unknown";
}

void walk(const Node& root, const std::function<bool(const Node& node, const Node* parent)>& visit) {
    // Explicit stack; deeply nested input must not exhaust the call stack.
    std::vector<std::pair<const Node*, const Node*>> stack{{&root, nullptr}};
    while (!stack.empty()) {
        auto [node, parent] = stack.back();
        stack.pop_back();
        if (!visit(*node, parent)) continue;
        for (auto it = node->children.rbegin(); it != node->children.rend(); ++it)
            if (*it) stack.emplace_back(it->get(), node);
    }
}

namespace {

bool same_number(double a, double b) {
    return std::memcmp(&a, &b, sizeof a) == 0 || (std::isnan(a) && std::isnan(b));
}

bool same_attributes(const Node& a, const Node& b) {
    return a.kind == b.kind && a.span == b.span && a.name == b.name && a.raw == b.raw &&
           a.literal_type == b.literal_type && a.string_value == b.string_value &&
           same_number(a.number_value, b.number_value) && a.bool_value == b.bool_value &&
           a.lone_surrogate == b.lone_surrogate && a.computed == b.computed && a.shorthand == b.shorthand &&
           a.method == b.method && a.is_static == b.is_static && a.is_async == b.is_async &&
           a.is_generator == b.is_generator && a.prefix == b.prefix && a.delegate == b.delegate &&
           a.expression_body == b.expression_body && a.punct_pos == b.punct_pos &&
           a.children.size() == b.children.size();
}

}  // namespace

bool structurally_equal(const Node& a, const Node& b) {
    std::vector<std::pair<const Node*, const Node*>> stack{{&a, &b}};
    while (!stack.empty()) {
        auto [x, y] = stack.back();
        stack.pop_back();
        if (!same_attributes(*x, *y)) return false;
        for (std::size_t i = 0; i < x->children.size(); ++i) {
            const Node* cx = x->children[i].get();
            const Node* cy = y->children[i].get();
            if (!cx || !cy) {
                if (cx != cy) return false;
                continue;
            }
            stack.emplace_back(cx, cy);
        }
    }
    return true;
}

}  // namespace fpwasm
