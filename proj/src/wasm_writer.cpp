#include "fpwasm/errors.hpp"
#include "fpwasm/wasm.hpp"

#include <cstring>
#include <map>
#include <set>
#include <utility>

namespace fpwasm {

namespace {

constexpr std::uint8_t type_i32 = 0x7F;
constexpr std::uint8_t type_f64 = 0x7C;
constexpr std::uint8_t block_void = 0x40;

namespace op {
constexpr std::uint8_t unreachable = 0x00;
constexpr std::uint8_t block = 0x02;
constexpr std::uint8_t loop = 0x03;
constexpr std::uint8_t if_ = 0x04;
constexpr std::uint8_t else_ = 0x05;
constexpr std::uint8_t end = 0x0B;
constexpr std::uint8_t br = 0x0C;
constexpr std::uint8_t br_if = 0x0D;
constexpr std::uint8_t ret = 0x0F;
constexpr std::uint8_t call = 0x10;
constexpr std::uint8_t drop = 0x1A;
constexpr std::uint8_t local_get = 0x20;
constexpr std::uint8_t local_set = 0x21;
constexpr std::uint8_t i32_const = 0x41;
constexpr std::uint8_t f64_const = 0x44;
constexpr std::uint8_t i32_eqz = 0x45;
constexpr std::uint8_t f64_neg = 0x9A;
constexpr std::uint8_t f64_convert_i32_s = 0xB7;
}  // namespace op

class Writer {
public:
    void u8(std::uint8_t b) { out.push_back(b); }
    void uleb(std::uint64_t v) {
        do {
            std::uint8_t b = v & 0x7F;
            v >>= 7;
            if (v) b |= 0x80;
            out.push_back(b);
        } while (v);
    }
    void sleb(std::int64_t v) {
        for (;;) {
            std::uint8_t b = v & 0x7F;
            v >>= 7;
            const bool done = (v == 0 && !(b & 0x40)) || (v == -1 && (b & 0x40));
            if (!done) b |= 0x80;
            out.push_back(b);
            if (done) return;
        }
    }
    void f64(double v) {
        std::uint8_t buf[8];
        std::memcpy(buf, &v, 8);
        out.insert(out.end(), buf, buf + 8);
    }
    void name(std::string_view s) {
        uleb(s.size());
        out.insert(out.end(), s.begin(), s.end());
    }
    void bytes(const std::vector<std::uint8_t>& b) { out.insert(out.end(), b.begin(), b.end()); }

    std::vector<std::uint8_t> out;
};

std::uint8_t valtype(ValType t) { return t == ValType::I32 ? type_i32 : type_f64; }

FuncType signature(const std::vector<ValType>& params, ResultType result) {
    FuncType t;
    for (ValType p : params) t.params.push_back(valtype(p));
    if (result == ResultType::I32) t.results.push_back(type_i32);
    if (result == ResultType::F64) t.results.push_back(type_f64);
    return t;
}

std::uint8_t binary_opcode(Expr::Op o, ValType t) {
    using Op = Expr::Op;
    if (t == ValType::I32) {
        switch (o) {
        case Op::Add:
            return 0x6A;
        case Op::Sub:
            return 0x6B;
        case Op::Mul:
            return 0x6C;
        case Op::Div:
            return 0x6D;
        case Op::Rem:
            return 0x6F;
        case Op::Eq:
            return 0x46;
        case Op::Ne:
            return 0x47;
        case Op::Lt:
            return 0x48;
        case Op::Gt:
            return 0x4A;
        case Op::Le:
            return 0x4C;
        case Op::Ge:
            return 0x4E;
        default:
            break;
        }
    } else {
        switch (o) {
        case Op::Add:
            return 0xA0;
        case Op::Sub:
            return 0xA1;
        case Op::Mul:
            return 0xA2;
        case Op::Div:
            return 0xA3;
        case Op::Eq:
            return 0x61;
        case Op::Ne:
            return 0x62;
        case Op::Lt:
            return 0x63;
        case Op::Gt:
            return 0x64;
        case Op::Le:
            return 0x65;
        case Op::Ge:
            return 0x66;
        default:
            break;
        }
    }
    throw EmitError("operator has no WebAssembly encoding for " + std::string(to_string(t)));
}

class TypeTable {
public:
    std::uint32_t intern(const FuncType& t) {
        for (std::uint32_t i = 0; i < types.size(); ++i)
            if (types[i] == t) return i;
        types.push_back(t);
        return static_cast<std::uint32_t>(types.size() - 1);
    }
    std::vector<FuncType> types;
};

// Lowers one FunctionIR body to instruction bytes.
class BodyLowering {
public:
    BodyLowering(const FunctionIR& f, const std::map<std::string, std::uint32_t>& import_index)
      : f_(f), import_index_(import_index) {}

    std::vector<std::uint8_t> run() {
        Writer w;
        // locals, grouped by runs of equal type
        std::vector<std::pair<std::uint32_t, std::uint8_t>> groups;
        for (ValType t : f_.locals) {
            if (!groups.empty() && groups.back().second == valtype(t))
                ++groups.back().first;
            else
                groups.emplace_back(1, valtype(t));
        }
        w.uleb(groups.size());
        for (auto [n, t] : groups) {
            w.uleb(n);
            w.u8(t);
        }
        code_ = &w;
        block(f_.body);
        if (f_.result != ResultType::Void) w.u8(op::unreachable);
        w.u8(op::end);
        return std::move(w.out);
    }

private:
    enum class Label { If, LoopExit, LoopHead };

    void block(const std::vector<Stmt>& stmts) {
        for (const auto& s : stmts) stmt(s);
    }

    void stmt(const Stmt& s) {
        Writer& w = *code_;
        switch (s.kind) {
        case Stmt::Kind::Eval:
            expr(s.value);
            if (!(s.value.op == Expr::Op::Call && s.value.call_result == ResultType::Void)) w.u8(op::drop);
            break;
        case Stmt::Kind::SetLocal:
            expr(s.value);
            w.u8(op::local_set);
            w.uleb(s.local);
            break;
        case Stmt::Kind::If:
            expr(s.value);
            w.u8(op::if_);
            w.u8(block_void);
            labels_.push_back(Label::If);
            block(s.body);
            if (!s.else_body.empty()) {
                w.u8(op::else_);
                block(s.else_body);
            }
            labels_.pop_back();
            w.u8(op::end);
            break;
        case Stmt::Kind::Loop:
            w.u8(op::block);
            w.u8(block_void);
            labels_.push_back(Label::LoopExit);
            w.u8(op::loop);
            w.u8(block_void);
            labels_.push_back(Label::LoopHead);
            if (s.has_value) {
                expr(s.value);
                w.u8(op::i32_eqz);
                w.u8(op::br_if);
                w.uleb(1);
            }
            block(s.body);
            w.u8(op::br);
            w.uleb(0);
            labels_.pop_back();
            w.u8(op::end);
            labels_.pop_back();
            w.u8(op::end);
            break;
        case Stmt::Kind::Break: {
            std::uint32_t depth = 0;
            bool found = false;
            for (auto it = labels_.rbegin(); it != labels_.rend(); ++it, ++depth) {
                if (*it == Label::LoopExit) {
                    found = true;
                    break;
                }
            }
            if (!found) throw EmitError("break outside loop");
            w.u8(op::br);
            w.uleb(depth);
            break;
        }
        case Stmt::Kind::Return:
            if (s.has_value) expr(s.value);
            w.u8(op::ret);
            break;
        }
    }

    void expr(const Expr& e) {
        Writer& w = *code_;
        using Op = Expr::Op;
        switch (e.op) {
        case Op::Const:
            if (e.type == ValType::I32) {
                w.u8(op::i32_const);
                w.sleb(e.i32);
            } else {
                w.u8(op::f64_const);
                w.f64(e.f64);
            }
            return;
        case Op::Local:
            w.u8(op::local_get);
            w.uleb(e.local);
            return;
        case Op::Neg:
            if (e.type == ValType::I32) {
                w.u8(op::i32_const);
                w.sleb(0);
                expr(e.args[0]);
                w.u8(binary_opcode(Op::Sub, ValType::I32));
            } else {
                expr(e.args[0]);
                w.u8(op::f64_neg);
            }
            return;
        case Op::Select:
            expr(e.args[0]);
            w.u8(op::if_);
            w.u8(valtype(e.type));
            labels_.push_back(Label::If);
            expr(e.args[1]);
            w.u8(op::else_);
            expr(e.args[2]);
            labels_.pop_back();
            w.u8(op::end);
            return;
        case Op::Call: {
            auto it = import_index_.find(e.callee);
            if (it == import_index_.end()) throw EmitError("call to undeclared import '" + e.callee + "'");
            for (const auto& a : e.args) expr(a);
            w.u8(op::call);
            w.uleb(it->second);
            return;
        }
        case Op::ConvertI32:
            expr(e.args[0]);
            w.u8(op::f64_convert_i32_s);
            return;
        default:
            expr(e.args[0]);
            expr(e.args[1]);
            w.u8(binary_opcode(e.op, e.is_comparison() ? e.operand_type : e.type));
            return;
        }
    }

    const FunctionIR& f_;
    const std::map<std::string, std::uint32_t>& import_index_;
    Writer* code_ = nullptr;
    std::vector<Label> labels_;
};

std::uint32_t align_up(std::uint64_t v, std::uint32_t a) {
    const std::uint64_t r = (v + a - 1) / a * a;
    if (r > 0xFFFFFFFFull) throw EmitError("memory layout exceeds 4 GiB");
    return static_cast<std::uint32_t>(r);
}

void section(Writer& module, std::uint8_t id, const Writer& content) {
    module.u8(id);
    module.uleb(content.out.size());
    module.bytes(content.out);
}

}  // namespace

const LayoutEntry* MemoryLayout::find(std::string_view symbol) const noexcept {
    for (const auto& e : entries)
        if (e.symbol == symbol) return &e;
    return nullptr;
}

std::string_view to_string(ExternKind k) noexcept {
    switch (k) {
    case ExternKind::Func:
        return "func";
    case ExternKind::Table:
        return "table";
    case ExternKind::Memory:
        return "memory";
    case ExternKind::Global:
        return "global";
    }
    return "func";
}

WasmModuleImage synthesize(const std::vector<ExportIR>& exports, const std::vector<ImportDecl>& imports) {
    WasmModuleImage image;
    image.imports = imports;

    std::set<std::string> names{"memory"};
    auto claim = [&](const std::string& name) {
        if (!is_valid_symbol(name)) throw EmitError("invalid export symbol '" + name + "'");
        if (!names.insert(name).second) throw EmitError("duplicate export symbol '" + name + "'");
    };

    TypeTable types;
    std::map<std::string, std::uint32_t> import_index;
    std::vector<std::uint32_t> import_types;
    for (const auto& imp : imports) {
        if (imp.module != "js") throw EmitError("imports must use the js namespace");
        if (!is_valid_symbol(imp.field)) throw EmitError("invalid import field '" + imp.field + "'");
        if (!import_index.emplace(imp.field, static_cast<std::uint32_t>(import_index.size())).second)
            throw EmitError("duplicate import field '" + imp.field + "'");
        import_types.push_back(types.intern(signature(imp.params, imp.result)));
    }
    const auto func_base = static_cast<std::uint32_t>(imports.size());

    // Layout pass.
    std::uint64_t cursor = 8;
    struct Segment {
        std::uint32_t offset;
        std::vector<std::uint8_t> bytes;
    };
    std::vector<Segment> segments;
    auto place = [&](const std::string& symbol, std::vector<std::uint8_t> bytes, std::uint32_t align) {
        const std::uint32_t offset = align_up(cursor, align);
        const auto len = static_cast<std::uint32_t>(bytes.size());
        image.layout.entries.push_back({symbol, offset, len});
        cursor = static_cast<std::uint64_t>(offset) + len;
        if (!bytes.empty()) segments.push_back({offset, std::move(bytes)});
        return offset;
    };

    struct GlobalDef {
        std::uint8_t type;
        std::int32_t i32;
        double f64;
    };
    std::vector<GlobalDef> globals;
    struct FuncDef {
        std::uint32_t type;
        std::vector<std::uint8_t> body;
    };
    std::vector<FuncDef> funcs;

    for (const auto& ex : exports) {
        switch (ex.kind) {
        case ExportKind::ConstI32:
            claim(ex.symbol);
            image.exports.push_back({ex.symbol, ExternKind::Global, static_cast<std::uint32_t>(globals.size())});
            globals.push_back({type_i32, ex.i32, 0.0});
            break;
        case ExportKind::ConstF64:
            claim(ex.symbol);
            image.exports.push_back({ex.symbol, ExternKind::Global, static_cast<std::uint32_t>(globals.size())});
            globals.push_back({type_f64, 0, ex.f64});
            break;
        case ExportKind::ConstString: {
            claim(ex.symbol);
            if (ex.str.size() > 0xFFFFFFFFull) throw EmitError("string too long");
            std::vector<std::uint8_t> bytes(4 + ex.str.size());
            const auto n = static_cast<std::uint32_t>(ex.str.size());
            for (int i = 0; i < 4; ++i) bytes[i] = static_cast<std::uint8_t>(n >> (8 * i));
            std::memcpy(bytes.data() + 4, ex.str.data(), ex.str.size());
            const std::uint32_t offset = place(ex.symbol, std::move(bytes), 4);
            image.exports.push_back({ex.symbol, ExternKind::Global, static_cast<std::uint32_t>(globals.size())});
            globals.push_back({type_i32, static_cast<std::int32_t>(offset), 0.0});
            break;
        }
        case ExportKind::StaticArrayI32:
        case ExportKind::StaticArrayF64: {
            claim(ex.getter);
            const bool is_f64 = ex.kind == ExportKind::StaticArrayF64;
            std::vector<std::uint8_t> bytes;
            if (is_f64) {
                bytes.resize(ex.f64_array.size() * 8);
                if (!bytes.empty()) std::memcpy(bytes.data(), ex.f64_array.data(), bytes.size());
            } else {
                bytes.resize(ex.i32_array.size() * 4);
                for (std::size_t i = 0; i < ex.i32_array.size(); ++i) {
                    const auto v = static_cast<std::uint32_t>(ex.i32_array[i]);
                    for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<std::uint8_t>(v >> (8 * b));
                }
            }
            const std::uint32_t offset = place(ex.symbol, std::move(bytes), is_f64 ? 8 : 4);
            Writer body;
            body.uleb(0);
            body.u8(op::i32_const);
            body.sleb(static_cast<std::int32_t>(offset));
            body.u8(op::end);
            image.exports.push_back(
                {ex.getter, ExternKind::Func, func_base + static_cast<std::uint32_t>(funcs.size())});
            funcs.push_back({types.intern(signature({}, ResultType::I32)), std::move(body.out)});
            break;
        }
        case ExportKind::Func: {
            claim(ex.symbol);
            for (const auto& needed : ex.func.imports_needed) {
                auto it = import_index.find(needed.field);
                if (it == import_index.end())
                    throw EmitError("function '" + ex.symbol + "' needs missing import '" + needed.field + "'");
                const ImportDecl& declared = imports[it->second];
                if (declared.params != needed.params || declared.result != needed.result)
                    throw EmitError("import signature mismatch for '" + needed.field + "'");
            }
            if (auto problem = check_function(ex.func); !problem.empty())
                throw EmitError("function '" + ex.symbol + "': " + problem);
            auto body = BodyLowering(ex.func, import_index).run();
            image.exports.push_back(
                {ex.symbol, ExternKind::Func, func_base + static_cast<std::uint32_t>(funcs.size())});
            funcs.push_back({types.intern(signature(ex.func.params, ex.func.result)), std::move(body)});
            break;
        }
        }
    }
    image.layout.next_free = align_up(cursor, 4);
    image.exports.insert(image.exports.begin(), ModuleExport{"memory", ExternKind::Memory, 0});
    const std::uint32_t pages = (image.layout.next_free + wasm_page_size - 1) / wasm_page_size;

    Writer m;
    m.bytes({0x00, 0x61, 0x73, 0x6D, 0x01, 0x00, 0x00, 0x00});

    if (!types.types.empty()) {
        Writer s;
        s.uleb(types.types.size());
        for (const auto& t : types.types) {
            s.u8(0x60);
            s.uleb(t.params.size());
            s.bytes(t.params);
            s.uleb(t.results.size());
            s.bytes(t.results);
        }
        section(m, 1, s);
    }
    if (!imports.empty()) {
        Writer s;
        s.uleb(imports.size());
        for (std::size_t i = 0; i < imports.size(); ++i) {
            s.name(imports[i].module);
            s.name(imports[i].field);
            s.u8(0x00);
            s.uleb(import_types[i]);
        }
        section(m, 2, s);
    }
    if (!funcs.empty()) {
        Writer s;
        s.uleb(funcs.size());
        for (const auto& f : funcs) s.uleb(f.type);
        section(m, 3, s);
    }
    {
        Writer s;
        s.uleb(1);
        s.u8(0x00);
        s.uleb(pages);
        section(m, 5, s);
    }
    if (!globals.empty()) {
        Writer s;
        s.uleb(globals.size());
        for (const auto& g : globals) {
            s.u8(g.type);
            s.u8(0x00);
            if (g.type == type_i32) {
                s.u8(op::i32_const);
                s.sleb(g.i32);
            } else {
                s.u8(op::f64_const);
                s.f64(g.f64);
            }
            s.u8(op::end);
        }
        section(m, 6, s);
    }
    {
        Writer s;
        s.uleb(image.exports.size());
        for (const auto& e : image.exports) {
            s.name(e.name);
            s.u8(static_cast<std::uint8_t>(e.kind));
            s.uleb(e.index);
        }
        section(m, 7, s);
    }
    if (!funcs.empty()) {
        Writer s;
        s.uleb(funcs.size());
        for (const auto& f : funcs) {
            s.uleb(f.body.size());
            s.bytes(f.body);
        }
        section(m, 10, s);
    }
    if (!segments.empty()) {
        Writer s;
        s.uleb(segments.size());
        for (const auto& seg : segments) {
            s.uleb(0);
            s.u8(op::i32_const);
            s.sleb(static_cast<std::int32_t>(seg.offset));
            s.u8(op::end);
            s.uleb(seg.bytes.size());
            s.bytes(seg.bytes);
        }
        section(m, 11, s);
    }
    image.bytes = std::move(m.out);
    return image;
}

}  // namespace fpwasm
