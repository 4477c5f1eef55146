#include <httplib.h>
#include <json.hpp>

#include "fpwasm/translator.hpp"

#include "fpwasm/errors.hpp"
#include "fpwasm/parser.hpp"
#include "fpwasm/text.hpp"
#include "fpwasm/wasm.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <regex>

namespace fpwasm {

std::string_view to_string(TranslationStatus s) noexcept {
    switch (s) {
    case TranslationStatus::Ok:
        return "ok";
    case TranslationStatus::Declined:
        return "declined";
    case TranslationStatus::Error:
        return "error";
    }
    return "error";
}

std::string_view to_string(TranslatorMode m) noexcept {
    switch (m) {
    case TranslatorMode::Stub:
        return "stub";
    case TranslatorMode::Service:
        return "service";
    case TranslatorMode::Off:
        return "off";
    }
    return "off";
}

TranslatorMode parse_translator_mode(std::string_view text) {
    if (text == "stub") return TranslatorMode::Stub;
    if (text == "service") return TranslatorMode::Service;
    if (text == "off") return TranslatorMode::Off;
    throw ConfigError("unknown translator mode '" + std::string(text) + "'");
}

std::string translation_prompt(std::string_view target_name) {
    return "Write the following JS function in AssemblyScript, name it " + std::string(target_name) +
           ", and export it. Only provide the code; no explanation or use case.";
}

namespace {

TranslationResult declined(std::string reason) {
    TranslationResult r;
    r.status = TranslationStatus::Declined;
    r.reason = std::move(reason);
    return r;
}

// Throwaway synthesis so that an Ok result can never fail module emission.
std::string synthesis_problem(const FunctionIR& f) {
    try {
        std::vector<ImportDecl> imports = f.imports_needed;
        auto img = synthesize({ExportIR::function("func_def_0", f)}, imports);
        auto problems = validate(decode(img.bytes));
        return problems.empty() ? std::string() : problems.front();
    } catch (const Error& e) {
        return e.what();
    }
}

struct Decline {
    std::string reason;
};

class StubLowering {
public:
    explicit StubLowering(const Node& fn) : fn_(fn) {}

    FunctionIR run() {
        if (fn_.is_async || fn_.is_generator) throw Decline{"async or generator function"};
        for (const auto& p : fn_.function_params()) {
            if (!p || !p->is(NodeKind::Identifier)) throw Decline{"non-identifier parameter"};
            if (params_.count(p->name)) throw Decline{"duplicate parameter"};
            const auto index = static_cast<std::uint32_t>(params_.size());
            params_.emplace(p->name, index);
            names_.push_back(p->name);
        }
        const Node* ret = return_expression();
        scan(*ret, false);
        const ValType t = uses_float_ ? ValType::F64 : ValType::I32;
        type_ = t;

        FunctionIR f;
        f.params.assign(names_.size(), t);
        f.param_names = names_;
        f.result = t == ValType::I32 ? ResultType::I32 : ResultType::F64;
        f.body.push_back(Stmt::ret(lower(*ret)));
        return f;
    }

private:
    const Node* return_expression() const {
        const Node* body = fn_.function_body();
        if (fn_.is(NodeKind::ArrowFunctionExpression) && fn_.expression_body) return body;
        if (!body || !body->is(NodeKind::BlockStatement) || body->children.size() != 1)
            throw Decline{"body is not a single return"};
        const Node* stmt = body->child(0);
        if (!stmt->is(NodeKind::ReturnStatement) || !stmt->child(0)) throw Decline{"body is not a single return"};
        return stmt->child(0);
    }

    static bool is_arith(std::string_view op) { return op == "+" || op == "-" || op == "*" || op == "/" || op == "%"; }
    static bool is_compare(std::string_view op) {
        return op == "<" || op == "<=" || op == ">" || op == ">=" || op == "==" || op == "===" || op == "!=" ||
               op == "!==";
    }

    // Validates the grammar and decides the numeric type. Comparisons are
    // only allowed as ternary tests since JS would return a boolean.
    void scan(const Node& n, bool test_position) {
        switch (n.kind) {
        case NodeKind::Identifier:
            if (!params_.count(n.name)) throw Decline{"free variable '" + n.name + "'"};
            return;
        case NodeKind::Literal: {
            if (n.literal_type != LiteralType::Number) throw Decline{"non-numeric literal"};
            const double v = n.number_value;
            if (v != std::floor(v) || std::fabs(v) > 2147483647.0) uses_float_ = true;
            return;
        }
        case NodeKind::UnaryExpression:
            if (n.name != "-") throw Decline{"unsupported unary operator " + n.name};
            scan(*n.child(0), false);
            return;
        case NodeKind::BinaryExpression:
            if (is_compare(n.name)) {
                if (!test_position) throw Decline{"comparison result used as a value"};
            } else if (!is_arith(n.name)) {
                throw Decline{"unsupported operator " + n.name};
            }
            if (n.name == "/") uses_float_ = true;
            scan(*n.child(0), false);
            scan(*n.child(1), false);
            return;
        case NodeKind::ConditionalExpression: {
            const Node* test = n.child(0);
            if (!test->is(NodeKind::BinaryExpression) || !is_compare(test->name))
                throw Decline{"ternary test is not a comparison"};
            scan(*test, true);
            scan(*n.child(1), false);
            scan(*n.child(2), false);
            return;
        }
        default:
            throw Decline{"unsupported expression " + std::string(to_string(n.kind))};
        }
    }

    Expr constant(double v) const {
        return type_ == ValType::I32 ? Expr::const_i32(static_cast<std::int32_t>(v)) : Expr::const_f64(v);
    }

    Expr lower(const Node& n) const {
        using Op = Expr::Op;
        switch (n.kind) {
        case NodeKind::Identifier:
            return Expr::get_local(params_.at(n.name), type_);
        case NodeKind::Literal:
            return constant(n.number_value);
        case NodeKind::UnaryExpression:
            return Expr::negate(lower(*n.child(0)));
        case NodeKind::BinaryExpression: {
            static const std::map<std::string, Op> ops{
                {"+", Op::Add}, {"-", Op::Sub}, {"*", Op::Mul}, {"/", Op::Div}, {"%", Op::Rem},
                {"<", Op::Lt},  {"<=", Op::Le}, {">", Op::Gt},  {">=", Op::Ge}, {"==", Op::Eq},
                {"===", Op::Eq}, {"!=", Op::Ne}, {"!==", Op::Ne}};
            const Op op = ops.at(n.name);
            if (op == Op::Rem) {
                // f64 has no remainder instruction; a variable divisor could trap
                const Node* d = n.child(1);
                if (type_ != ValType::I32) throw Decline{"% on fractional values"};
                const bool negated = d->is(NodeKind::UnaryExpression);
                const Node* lit = negated ? d->child(0) : d;
                if (!lit->is(NodeKind::Literal) || lit->number_value == 0)
                    throw Decline{"% needs a nonzero literal divisor"};
            }
            Expr lhs = lower(*n.child(0));
            Expr rhs = lower(*n.child(1));
            if (is_compare(n.name)) return Expr::compare(op, std::move(lhs), std::move(rhs));
            return Expr::binary(op, std::move(lhs), std::move(rhs));
        }
        case NodeKind::ConditionalExpression:
            return Expr::select(lower(*n.child(0)), lower(*n.child(1)), lower(*n.child(2)));
        default:
            throw Decline{"unsupported expression"};
        }
    }

    const Node& fn_;
    std::map<std::string, std::uint32_t> params_;
    std::vector<std::string> names_;
    bool uses_float_ = false;
    ValType type_ = ValType::I32;
};

const Node* find_function(const Node& program) {
    if (program.children.size() != 1) return nullptr;
    const Node* s = program.child(0);
    if (s->is(NodeKind::FunctionDeclaration)) return s;
    if (s->is(NodeKind::ExpressionStatement) && s->child(0)->is_function()) return s->child(0);
    return nullptr;
}

class StubTranslator : public Translator {
public:
    TranslationResult translate(const TranslationRequest& req) override { return translate_stub(req); }
    TranslatorMode mode() const noexcept override { return TranslatorMode::Stub; }
};

class OffTranslator : public Translator {
public:
    TranslationResult translate(const TranslationRequest&) override { return declined("translator disabled"); }
    TranslatorMode mode() const noexcept override { return TranslatorMode::Off; }
};

class ServiceTranslator : public Translator {
public:
    explicit ServiceTranslator(ServiceConfig config) : config_(std::move(config)) {
        static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
        std::smatch m;
        if (!std::regex_match(config_.endpoint, m, url))
            throw ConfigError("translator endpoint must be an http(s) URL: '" + config_.endpoint + "'");
        origin_ = m[1];
        path_ = m[2].matched ? std::string(m[2]) : std::string("/v1/chat/completions");
    }

    TranslatorMode mode() const noexcept override { return TranslatorMode::Service; }

    TranslationResult translate(const TranslationRequest& req) override {
        if (!is_valid_symbol(req.target_name)) return declined("invalid target name");
        nlohmann::json body{
            {"model", config_.model},
            {"messages",
             nlohmann::json::array({{{"role", "system"}, {"content", translation_prompt(req.target_name)}},
                                    {{"role", "user"}, {"content", req.function_source}}})},
            {"temperature", 0},
        };
        const auto timeout = std::min(req.timeout, config_.timeout);
        // one client per request keeps concurrent calls independent
        httplib::Client client(origin_);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        httplib::Headers headers;
        if (const char* token = std::getenv(config_.token_env.c_str()); token && *token)
            headers.emplace("Authorization", std::string("Bearer ") + token);

        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res) return transport_failure("request failed: " + httplib::to_string(res.error()));
        if (res->status != 200) return transport_failure("service returned HTTP " + std::to_string(res->status));

        std::string content;
        try {
            auto j = nlohmann::json::parse(res->body);
            content = j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const std::exception& e) {
            return transport_failure(std::string("malformed service response: ") + e.what());
        }
        return accept_service_output(std::move(content));
    }

private:
    TranslationResult transport_failure(std::string reason) const {
        TranslationResult r = declined(std::move(reason));
        if (config_.strict) r.status = TranslationStatus::Error;
        return r;
    }

    ServiceConfig config_;
    std::string origin_;
    std::string path_;
};

}  // namespace

TranslationResult translate_stub(const Node& function) {
    try {
        FunctionIR f = StubLowering(function).run();
        if (auto err = check_function(f); !err.empty()) return declined(err);
        if (auto err = synthesis_problem(f); !err.empty()) return declined(err);
        TranslationResult r;
        r.status = TranslationStatus::Ok;
        r.function_ir = std::move(f);
        return r;
    } catch (const Decline& d) {
        return declined(d.reason);
    }
}

TranslationResult translate_stub(const TranslationRequest& req) {
    if (!is_valid_symbol(req.target_name)) return declined("invalid target name");
    NodePtr program;
    const Node* fn = nullptr;
    for (const std::string& text : {req.function_source, "(" + req.function_source + ")"}) {
        try {
            program = parse_text(std::string_view(text));
        } catch (const Error&) {
            continue;
        }
        if ((fn = find_function(*program))) break;
    }
    if (!fn) return declined("source is not a single function");
    return translate_stub(*fn);
}

std::string extract_code_block(std::string_view text) {
    const auto open = text.find("```");
    if (open == std::string_view::npos) return std::string(text);
    auto line_end = text.find('\n', open);
    if (line_end == std::string_view::npos) return {};
    const auto close = text.find("```", line_end + 1);
    return std::string(text.substr(line_end + 1, close == std::string_view::npos ? std::string_view::npos
                                                                                 : close - line_end - 1));
}

TranslationResult accept_service_output(std::string raw_text) {
    TranslationResult r;
    r.raw_text = raw_text;
    try {
        FunctionIR f = parse_assemblyscript_function(extract_code_block(raw_text));
        if (auto err = check_function(f); !err.empty()) {
            r.reason = err;
            return r;
        }
        if (auto err = synthesis_problem(f); !err.empty()) {
            r.reason = err;
            return r;
        }
        r.status = TranslationStatus::Ok;
        r.function_ir = std::move(f);
    } catch (const Error& e) {
        r.reason = e.what();
    }
    return r;
}

std::unique_ptr<Translator> make_translator(TranslatorMode mode, const ServiceConfig& config) {
    switch (mode) {
    case TranslatorMode::Stub:
        return std::make_unique<StubTranslator>();
    case TranslatorMode::Service:
        return std::make_unique<ServiceTranslator>(config);
    case TranslatorMode::Off:
        break;
    }
    return std::make_unique<OffTranslator>();
}

TranslationResult MemoTranslator::translate(const TranslationRequest& req) {
    const std::string key = sha256_hex(req.function_source) + ":" + req.target_name;
    {
        std::lock_guard lock(mu_);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    }
    TranslationResult r = inner_->translate(req);
    // transport errors are not memoized so a later call can retry
    if (r.status != TranslationStatus::Error) {
        std::lock_guard lock(mu_);
        memo_.emplace(key, r);
    }
    return r;
}

}  // namespace fpwasm
