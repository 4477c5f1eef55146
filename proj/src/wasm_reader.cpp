#include "fpwasm/errors.hpp"
#include "fpwasm/text.hpp"
#include "fpwasm/wasm.hpp"

#include <cstring>
#include <set>
#include <sstream>

namespace fpwasm {

namespace {

constexpr std::uint8_t type_i32 = 0x7F;
constexpr std::uint8_t type_i64 = 0x7E;
constexpr std::uint8_t type_f32 = 0x7D;
constexpr std::uint8_t type_f64 = 0x7C;

bool is_valtype(std::uint8_t t) { return t == type_i32 || t == type_i64 || t == type_f32 || t == type_f64; }

class Reader {
public:
    Reader(std::span<const std::uint8_t> data, std::size_t pos, std::size_t end) : data_(data), pos_(pos), end_(end) {}

    std::size_t pos() const noexcept { return pos_; }
    std::size_t end() const noexcept { return end_; }
    bool done() const noexcept { return pos_ >= end_; }

    [[noreturn]] void fail(const std::string& msg, std::size_t at) const { throw DecodeError(msg, at); }
    [[noreturn]] void fail(const std::string& msg) const { throw DecodeError(msg, pos_); }

    std::uint8_t u8() {
        if (pos_ >= end_) fail(pos_ >= data_.size() ? "unexpected end of module" : "unexpected end of section");
        return data_[pos_++];
    }

    std::uint32_t u32() {
        const std::size_t start = pos_;
        std::uint64_t result = 0;
        for (int shift = 0;; shift += 7) {
            const std::uint8_t b = u8();
            if (shift == 28 && (b & 0x70)) fail("malformed LEB128: integer too large", start);
            result |= static_cast<std::uint64_t>(b & 0x7F) << shift;
            if (!(b & 0x80)) break;
            if (shift == 28) fail("malformed LEB128: integer representation too long", start);
        }
        return static_cast<std::uint32_t>(result);
    }

    std::int64_t sleb(int bits) {
        const std::size_t start = pos_;
        std::int64_t result = 0;
        int shift = 0;
        std::uint8_t b = 0;
        const int max_bytes = (bits + 6) / 7;
        for (int i = 0;; ++i) {
            b = u8();
            result |= static_cast<std::int64_t>(b & 0x7F) << shift;
            shift += 7;
            if (!(b & 0x80)) break;
            if (i + 1 == max_bytes) fail("malformed LEB128: integer representation too long", start);
        }
        if (shift < 64 && (b & 0x40)) result |= -(static_cast<std::int64_t>(1) << shift);
        if (bits == 32 && (result < INT32_MIN || result > INT32_MAX))
            fail("malformed LEB128: integer too large", start);
        return result;
    }

    double f64() {
        if (end_ - pos_ < 8 || pos_ + 8 > end_) fail("unexpected end of module");
        double v;
        std::memcpy(&v, data_.data() + pos_, 8);
        pos_ += 8;
        return v;
    }

    void skip(std::size_t n) {
        if (n > end_ - pos_) fail("unexpected end of module");
        pos_ += n;
    }

    std::string name() {
        const std::size_t start = pos_;
        const std::uint32_t n = u32();
        if (n > end_ - pos_) fail("unexpected end of module");
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        if (!decode_utf8(s)) fail("malformed UTF-8 encoding", start);
        return s;
    }

    std::vector<std::uint8_t> bytes(std::size_t n) {
        if (n > end_ - pos_) fail("unexpected end of module");
        std::vector<std::uint8_t> out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                      data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return out;
    }

    std::uint8_t valtype() {
        const std::size_t at = pos_;
        const std::uint8_t t = u8();
        if (!is_valtype(t)) fail("invalid value type", at);
        return t;
    }

    MemoryLimits limits() {
        const std::size_t at = pos_;
        const std::uint8_t flag = u8();
        MemoryLimits l;
        if (flag > 1) fail("invalid limits flag", at);
        l.min = u32();
        if (flag == 1) l.max = u32();
        return l;
    }

    // Constant expression; returns (valtype, i32 value, f64 value).
    DecodedGlobal const_expr() {
        DecodedGlobal g;
        const std::size_t at = pos_;
        const std::uint8_t opcode = u8();
        switch (opcode) {
        case 0x41:
            g.valtype = type_i32;
            g.i32 = static_cast<std::int32_t>(sleb(32));
            break;
        case 0x42:
            g.valtype = type_i64;
            sleb(64);
            break;
        case 0x43:
            g.valtype = type_f32;
            skip(4);
            break;
        case 0x44:
            g.valtype = type_f64;
            g.f64 = f64();
            break;
        case 0x23:
            g.valtype = 0;  // global.get: type resolved by the validator
            u32();
            break;
        default:
            fail("unsupported constant expression", at);
        }
        if (u8() != 0x0B) fail("constant expression missing end", pos_ - 1);
        return g;
    }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_;
    std::size_t end_;
};

}  // namespace

std::size_t DecodedModule::imported_function_count() const noexcept {
    std::size_t n = 0;
    for (const auto& imp : imports)
        if (imp.kind == ExternKind::Func) ++n;
    return n;
}

const ModuleExport* DecodedModule::find_export(std::string_view name) const noexcept {
    for (const auto& e : exports)
        if (e.name == name) return &e;
    return nullptr;
}

std::vector<std::uint8_t> DecodedModule::read_memory(std::uint32_t offset, std::uint32_t len) const {
    std::vector<std::uint8_t> out(len, 0);
    const std::uint64_t lo = offset, hi = static_cast<std::uint64_t>(offset) + len;
    // Later segments overwrite earlier ones, as at instantiation.
    for (const auto& seg : data) {
        const std::uint64_t s_lo = seg.offset, s_hi = seg.offset + static_cast<std::uint64_t>(seg.bytes.size());
        const std::uint64_t a = std::max(lo, s_lo), b = std::min(hi, s_hi);
        for (std::uint64_t p = a; p < b; ++p) out[p - lo] = seg.bytes[p - s_lo];
    }
    return out;
}

std::optional<std::string> DecodedModule::read_string(std::uint32_t offset) const {
    bool covered = false;
    for (const auto& seg : data)
        if (offset >= seg.offset && static_cast<std::uint64_t>(offset) + 4 <= seg.offset + seg.bytes.size())
            covered = true;
    if (!covered) return std::nullopt;
    std::uint64_t initialized_end = 0;
    for (const auto& seg : data) initialized_end = std::max<std::uint64_t>(initialized_end, seg.offset + seg.bytes.size());
    const auto header = read_memory(offset, 4);
    const std::uint32_t n = header[0] | (header[1] << 8) | (header[2] << 16) | (static_cast<std::uint32_t>(header[3]) << 24);
    if (static_cast<std::uint64_t>(offset) + 4 + n > initialized_end) return std::nullopt;
    const auto body = read_memory(offset + 4, n);
    return std::string(body.begin(), body.end());
}

DecodedModule decode(std::span<const std::uint8_t> bytes) {
    DecodedModule m;
    Reader top(bytes, 0, bytes.size());
    static constexpr std::uint8_t magic[4] = {0x00, 0x61, 0x73, 0x6D};
    static constexpr std::uint8_t version[4] = {0x01, 0x00, 0x00, 0x00};
    for (int i = 0; i < 4; ++i) {
        if (top.done()) top.fail("unexpected end of module");
        if (top.u8() != magic[i]) throw DecodeError("bad magic number", 0);
    }
    for (int i = 0; i < 4; ++i) {
        if (top.done()) top.fail("unexpected end of module");
        if (top.u8() != version[i]) throw DecodeError("unsupported version", 4);
    }

    int last_rank = 0;
    std::size_t function_count_declared = 0;
    bool saw_function_section = false;
    while (!top.done()) {
        const std::size_t section_start = top.pos();
        const std::uint8_t id = top.u8();
        const std::uint32_t size = top.u32();
        if (size > top.end() - top.pos()) top.fail("unexpected end of module", bytes.size());
        Reader r(bytes, top.pos(), top.pos() + size);
        top.skip(size);
        if (id > 11) throw DecodeError("unknown section id " + std::to_string(id), section_start);
        if (id != 0) {
            // Non-custom sections appear at most once, in id order.
            if (id <= last_rank) throw DecodeError("section out of order", section_start);
            last_rank = id;
        }
        m.section_ids.push_back(id);

        switch (id) {
        case 0:
            r.name();
            r.skip(r.end() - r.pos());
            break;
        case 1: {
            const std::uint32_t n = r.u32();
            for (std::uint32_t i = 0; i < n; ++i) {
                const std::size_t at = r.pos();
                if (r.u8() != 0x60) r.fail("expected function type", at);
                FuncType t;
                const std::uint32_t np = r.u32();
                for (std::uint32_t k = 0; k < np; ++k) t.params.push_back(r.valtype());
                const std::uint32_t nr = r.u32();
                if (nr > 1) r.fail("multiple results are not supported in WebAssembly 1.0", at);
                for (std::uint32_t k = 0; k < nr; ++k) t.results.push_back(r.valtype());
                m.types.push_back(std::move(t));
            }
            break;
        }
        case 2: {
            const std::uint32_t n = r.u32();
            for (std::uint32_t i = 0; i < n; ++i) {
                DecodedImport imp;
                imp.module = r.name();
                imp.field = r.name();
                const std::size_t at = r.pos();
                const std::uint8_t kind = r.u8();
                switch (kind) {
                case 0:
                    imp.kind = ExternKind::Func;
                    imp.type_index = r.u32();
                    break;
                case 1:
                    imp.kind = ExternKind::Table;
                    if (r.u8() != 0x70) r.fail("invalid table element type", r.pos() - 1);
                    r.limits();
                    break;
                case 2:
                    imp.kind = ExternKind::Memory;
                    m.memories.push_back(r.limits());
                    break;
                case 3:
                    imp.kind = ExternKind::Global;
                    r.valtype();
                    if (r.u8() > 1) r.fail("invalid mutability", r.pos() - 1);
                    break;
                default:
                    r.fail("invalid import kind", at);
                }
                m.imports.push_back(std::move(imp));
            }
            break;
        }
        case 3: {
            saw_function_section = true;
            const std::uint32_t n = r.u32();
            for (std::uint32_t i = 0; i < n; ++i) m.functions.push_back(r.u32());
            function_count_declared = n;
            break;
        }
        case 4: {
            const std::uint32_t n = r.u32();
            for (std::uint32_t i = 0; i < n; ++i) {
                if (r.u8() != 0x70) r.fail("invalid table element type", r.pos() - 1);
                r.limits();
            }
            break;
        }
        case 5: {
            const std::uint32_t n = r.u32();
            for (std::uint32_t i = 0; i < n; ++i) m.memories.push_back(r.limits());
            break;
        }
        case 6: {
            const std::uint32_t n = r.u32();
            for (std::uint32_t i = 0; i < n; ++i) {
                const std::uint8_t t = r.valtype();
                const std::size_t at = r.pos();
                const std::uint8_t mut = r.u8();
                if (mut > 1) r.fail("invalid mutability", at);
                const std::size_t init_at = r.pos();
                DecodedGlobal g = r.const_expr();
                if (g.valtype != 0 && g.valtype != t) r.fail("global initializer type mismatch", init_at);
                g.valtype = t;
                g.is_mutable = mut == 1;
                m.globals.push_back(g);
            }
            break;
        }
        case 7: {
            const std::uint32_t n = r.u32();
            for (std::uint32_t i = 0; i < n; ++i) {
                ModuleExport e;
                e.name = r.name();
                const std::size_t at = r.pos();
                const std::uint8_t kind = r.u8();
                if (kind > 3) r.fail("invalid export kind", at);
                e.kind = static_cast<ExternKind>(kind);
                e.index = r.u32();
                m.exports.push_back(std::move(e));
            }
            break;
        }
        case 8:
            m.start = r.u32();
            break;
        case 9: {
            const std::uint32_t n = r.u32();
            for (std::uint32_t i = 0; i < n; ++i) {
                const std::size_t at = r.pos();
                if (r.u32() != 0) r.fail("unsupported element segment", at);
                r.const_expr();
                const std::uint32_t k = r.u32();
                for (std::uint32_t j = 0; j < k; ++j) r.u32();
            }
            break;
        }
        case 10: {
            const std::uint32_t n = r.u32();
            if (n != function_count_declared)
                throw DecodeError("function and code section have inconsistent lengths", section_start);
            for (std::uint32_t i = 0; i < n; ++i) {
                const std::uint32_t body_size = r.u32();
                if (body_size > r.end() - r.pos()) r.fail("function body exceeds section");
                Reader b(bytes, r.pos(), r.pos() + body_size);
                r.skip(body_size);
                DecodedBody body;
                const std::uint32_t groups = b.u32();
                std::uint64_t total = 0;
                for (std::uint32_t g = 0; g < groups; ++g) {
                    const std::uint32_t count = b.u32();
                    total += count;
                    if (total > 50000) b.fail("too many locals");
                    body.locals.emplace_back(count, b.valtype());
                }
                body.code_offset = b.pos();
                body.code = b.bytes(b.end() - b.pos());
                if (body.code.empty() || body.code.back() != 0x0B) b.fail("function body must end with end");
                m.bodies.push_back(std::move(body));
            }
            break;
        }
        case 11: {
            const std::uint32_t n = r.u32();
            for (std::uint32_t i = 0; i < n; ++i) {
                const std::size_t at = r.pos();
                if (r.u32() != 0) r.fail("unsupported data segment", at);
                const std::size_t expr_at = r.pos();
                DecodedGlobal off = r.const_expr();
                if (off.valtype != type_i32) r.fail("data offset must be i32.const", expr_at);
                DecodedData d;
                d.offset = static_cast<std::uint32_t>(off.i32);
                d.bytes = r.bytes(r.u32());
                m.data.push_back(std::move(d));
            }
            break;
        }
        }
        if (!r.done()) throw DecodeError("section size mismatch", r.pos());
    }
    if (saw_function_section && function_count_declared != m.bodies.size())
        throw DecodeError("function and code section have inconsistent lengths", bytes.size());
    return m;
}

// --- validation ----------------------------------------------------------------

namespace {

constexpr std::uint8_t unknown_type = 0;

class BodyValidator {
public:
    BodyValidator(const DecodedModule& m, const std::vector<std::uint32_t>& func_types, const FuncType& sig,
                  const DecodedBody& body)
      : m_(m), func_types_(func_types), sig_(sig), body_(body) {
        locals_ = sig.params;
        for (auto [count, t] : body.locals) locals_.insert(locals_.end(), count, t);
    }

    std::string run() {
        try {
            push_ctrl(Kind::Function, sig_.results);
            std::size_t pc = 0;
            const auto& code = body_.code;
            while (pc < code.size()) {
                pc_ = pc;
                Reader r(std::span<const std::uint8_t>(code), pc, code.size());
                step(r);
                pc = r.pos();
                if (ctrls_.empty()) {
                    if (pc != code.size()) fail("instructions after function end");
                    return {};
                }
            }
            fail("function body ended without end");
        } catch (const DecodeError& e) {
            std::ostringstream msg;
            msg << e.what() << " in body at byte " << body_.code_offset + pc_;
            return msg.str();
        }
    }

private:
    enum class Kind { Function, Block, Loop, If, Else };
    struct Ctrl {
        Kind kind;
        std::vector<std::uint8_t> results;
        std::size_t height;
        bool unreachable;
    };

    [[noreturn]] void fail(const std::string& msg) const { throw DecodeError(msg, body_.code_offset + pc_); }

    void push(std::uint8_t t) { stack_.push_back(t); }
    std::uint8_t pop() {
        const Ctrl& c = ctrls_.back();
        if (stack_.size() == c.height) {
            if (c.unreachable) return unknown_type;
            fail("type mismatch: operand stack underflow");
        }
        const std::uint8_t t = stack_.back();
        stack_.pop_back();
        return t;
    }
    std::uint8_t pop(std::uint8_t expected) {
        const std::uint8_t t = pop();
        if (t != unknown_type && expected != unknown_type && t != expected) fail("type mismatch");
        return t == unknown_type ? expected : t;
    }

    void push_ctrl(Kind kind, std::vector<std::uint8_t> results) {
        ctrls_.push_back({kind, std::move(results), stack_.size(), false});
    }

    Ctrl pop_ctrl() {
        if (ctrls_.empty()) fail("control stack underflow");
        const Ctrl c = ctrls_.back();
        for (auto it = c.results.rbegin(); it != c.results.rend(); ++it) pop(*it);
        if (stack_.size() != c.height) fail("type mismatch: values remaining on stack at end of block");
        ctrls_.pop_back();
        return c;
    }

    void set_unreachable() {
        stack_.resize(ctrls_.back().height);
        ctrls_.back().unreachable = true;
    }

    const std::vector<std::uint8_t>& label_types(std::uint32_t depth) {
        if (depth >= ctrls_.size()) fail("unknown label");
        const Ctrl& c = ctrls_[ctrls_.size() - 1 - depth];
        static const std::vector<std::uint8_t> none;
        return c.kind == Kind::Loop ? none : c.results;
    }

    std::vector<std::uint8_t> block_type(Reader& r) {
        const std::uint8_t b = r.u8();
        if (b == 0x40) return {};
        if (is_valtype(b)) return {b};
        fail("unsupported block type");
    }

    std::uint8_t local_type(std::uint32_t idx) {
        if (idx >= locals_.size()) fail("unknown local");
        return locals_[idx];
    }

    void binop(std::uint8_t t) {
        pop(t);
        pop(t);
        push(t);
    }
    void cmpop(std::uint8_t t) {
        pop(t);
        pop(t);
        push(type_i32);
    }
    void unop(std::uint8_t in, std::uint8_t out) {
        pop(in);
        push(out);
    }

    void step(Reader& r) {
        const std::uint8_t opcode = r.u8();
        switch (opcode) {
        case 0x00:  // unreachable
            set_unreachable();
            return;
        case 0x01:  // nop
            return;
        case 0x02:
        case 0x03: {
            auto results = block_type(r);
            push_ctrl(opcode == 0x02 ? Kind::Block : Kind::Loop, std::move(results));
            return;
        }
        case 0x04: {
            auto results = block_type(r);
            pop(type_i32);
            push_ctrl(Kind::If, std::move(results));
            return;
        }
        case 0x05: {
            if (ctrls_.back().kind != Kind::If) fail("else without if");
            Ctrl c = pop_ctrl();
            push_ctrl(Kind::Else, c.results);
            return;
        }
        case 0x0B: {
            Ctrl c = pop_ctrl();
            if (c.kind == Kind::If && !c.results.empty()) fail("type mismatch: if without else must not yield a value");
            for (auto t : c.results) push(t);
            return;
        }
        case 0x0C: {
            const auto& types = label_types(r.u32());
            for (auto it = types.rbegin(); it != types.rend(); ++it) pop(*it);
            set_unreachable();
            return;
        }
        case 0x0D: {
            const std::uint32_t depth = r.u32();
            pop(type_i32);
            const auto types = label_types(depth);
            for (auto it = types.rbegin(); it != types.rend(); ++it) pop(*it);
            for (auto t : types) push(t);
            return;
        }
        case 0x0F:
            for (auto it = sig_.results.rbegin(); it != sig_.results.rend(); ++it) pop(*it);
            set_unreachable();
            return;
        case 0x10: {
            const std::uint32_t idx = r.u32();
            if (idx >= func_types_.size()) fail("unknown function");
            const FuncType& t = m_.types[func_types_[idx]];
            for (auto it = t.params.rbegin(); it != t.params.rend(); ++it) pop(*it);
            for (auto v : t.results) push(v);
            return;
        }
        case 0x1A:
            pop();
            return;
        case 0x1B: {
            pop(type_i32);
            const std::uint8_t a = pop();
            const std::uint8_t b = pop(a);
            push(a == unknown_type ? b : a);
            return;
        }
        case 0x20:
            push(local_type(r.u32()));
            return;
        case 0x21:
            pop(local_type(r.u32()));
            return;
        case 0x22: {
            const std::uint8_t t = local_type(r.u32());
            pop(t);
            push(t);
            return;
        }
        case 0x23: {
            const std::uint32_t idx = r.u32();
            if (idx >= m_.globals.size()) fail("unknown global");
            push(m_.globals[idx].valtype);
            return;
        }
        case 0x41:
            r.sleb(32);
            push(type_i32);
            return;
        case 0x44:
            r.f64();
            push(type_f64);
            return;
        case 0x45:
            unop(type_i32, type_i32);
            return;
        default:
            break;
        }
        if (opcode >= 0x46 && opcode <= 0x4F) return cmpop(type_i32);
        if (opcode >= 0x61 && opcode <= 0x66) return cmpop(type_f64);
        if (opcode >= 0x6A && opcode <= 0x78) return binop(type_i32);
        if (opcode >= 0x67 && opcode <= 0x69) return unop(type_i32, type_i32);
        if (opcode >= 0x99 && opcode <= 0x9F) return unop(type_f64, type_f64);
        if (opcode >= 0xA0 && opcode <= 0xA6) return binop(type_f64);
        if (opcode == 0xB7) return unop(type_i32, type_f64);
        if (opcode == 0xAA) return unop(type_f64, type_i32);
        std::ostringstream msg;
        msg << "unsupported opcode 0x" << std::hex << static_cast<int>(opcode);
        fail(msg.str());
    }

    const DecodedModule& m_;
    const std::vector<std::uint32_t>& func_types_;
    const FuncType& sig_;
    const DecodedBody& body_;
    std::vector<std::uint8_t> locals_;
    std::vector<std::uint8_t> stack_;
    std::vector<Ctrl> ctrls_;
    std::size_t pc_ = 0;
};

}  // namespace

std::vector<std::string> validate(const DecodedModule& m) {
    std::vector<std::string> problems;
    // Function index space: imported functions first, then defined ones.
    std::vector<std::uint32_t> func_type_index;
    for (const auto& imp : m.imports) {
        if (imp.kind != ExternKind::Func) continue;
        if (imp.type_index >= m.types.size()) {
            problems.push_back("import '" + imp.field + "' references unknown type");
            return problems;
        }
        func_type_index.push_back(imp.type_index);
    }
    for (std::uint32_t t : m.functions) {
        if (t >= m.types.size()) {
            problems.push_back("function references unknown type");
            return problems;
        }
        func_type_index.push_back(t);
    }
    if (m.memories.size() != 1) problems.push_back("module must declare exactly one memory");
    std::set<std::string> names;
    bool memory_exported = false;
    for (const auto& e : m.exports) {
        if (!names.insert(e.name).second) problems.push_back("duplicate export name '" + e.name + "'");
        std::size_t limit = 0;
        switch (e.kind) {
        case ExternKind::Func:
            limit = func_type_index.size();
            break;
        case ExternKind::Memory:
            limit = m.memories.size();
            if (e.name == "memory") memory_exported = true;
            break;
        case ExternKind::Global:
            limit = m.globals.size();
            break;
        case ExternKind::Table:
            limit = 0;
            break;
        }
        if (e.index >= limit) problems.push_back("export '" + e.name + "' references an unknown index");
    }
    if (!memory_exported) problems.push_back("memory is not exported as \"memory\"");
    if (!m.memories.empty()) {
        const std::uint64_t mem_bytes = static_cast<std::uint64_t>(m.memories[0].min) * wasm_page_size;
        for (const auto& d : m.data)
            if (d.offset + static_cast<std::uint64_t>(d.bytes.size()) > mem_bytes)
                problems.push_back("data segment at " + std::to_string(d.offset) + " exceeds initial memory");
        if (m.memories[0].max && *m.memories[0].max < m.memories[0].min)
            problems.push_back("memory maximum below minimum");
    }
    if (m.start && *m.start >= func_type_index.size()) problems.push_back("unknown start function");

    const std::size_t imported = m.imported_function_count();
    for (std::size_t i = 0; i < m.bodies.size(); ++i) {
        BodyValidator v(m, func_type_index, m.types[m.functions[i]], m.bodies[i]);
        if (auto err = v.run(); !err.empty())
            problems.push_back("function " + std::to_string(imported + i) + ": " + err);
    }
    return problems;
}

}  // namespace fpwasm
