#pragma once

#include "fpwasm/ir.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fpwasm {

/// Offsets 0..7 are a null guard; every entry is 4-byte aligned (8 for f64
/// arrays) and entries never overlap.
struct LayoutEntry {
    std::string symbol;
    std::uint32_t offset = 0;
    std::uint32_t byte_len = 0;

    friend bool operator==(const LayoutEntry&, const LayoutEntry&) = default;
};

struct MemoryLayout {
    std::vector<LayoutEntry> entries;
    std::uint32_t next_free = 8;

    const LayoutEntry* find(std::string_view symbol) const noexcept;
};

enum class ExternKind : std::uint8_t { Func = 0, Table = 1, Memory = 2, Global = 3 };

std::string_view to_string(ExternKind k) noexcept;

struct ModuleExport {
    std::string name;
    ExternKind kind = ExternKind::Func;
    std::uint32_t index = 0;

    friend bool operator==(const ModuleExport&, const ModuleExport&) = default;
};

struct WasmModuleImage {
    std::vector<std::uint8_t> bytes;
    MemoryLayout layout;
    std::vector<ModuleExport> exports;
    std::vector<ImportDecl> imports;
};

inline constexpr std::uint32_t wasm_page_size = 65536;

/// Builds one module holding every export and import. Strings are stored as
/// [u32 LE byte length][UTF-8 bytes]; numeric constants become immutable
/// globals; string symbols are i32 globals holding their layout offset.
/// Throws EmitError on duplicate or invalid symbols and ill-typed IR.
WasmModuleImage synthesize(const std::vector<ExportIR>& exports, const std::vector<ImportDecl>& imports);

// --- decoding -----------------------------------------------------------------

struct FuncType {
    std::vector<std::uint8_t> params;   // value type bytes (0x7F i32, 0x7C f64, ...)
    std::vector<std::uint8_t> results;

    friend bool operator==(const FuncType&, const FuncType&) = default;
};

struct DecodedImport {
    std::string module;
    std::string field;
    ExternKind kind = ExternKind::Func;
    std::uint32_t type_index = 0;  // functions only
};

struct DecodedGlobal {
    std::uint8_t valtype = 0x7F;
    bool is_mutable = false;
    std::int32_t i32 = 0;
    double f64 = 0.0;
};

struct DecodedData {
    std::uint32_t offset = 0;
    std::vector<std::uint8_t> bytes;
};

struct DecodedBody {
    std::vector<std::pair<std::uint32_t, std::uint8_t>> locals;  // (count, valtype)
    std::vector<std::uint8_t> code;                                 // instructions including final `end`
    std::size_t code_offset = 0;                                    // module offset of `code[0]`
};

struct MemoryLimits {
    std::uint32_t min = 0;
    std::optional<std::uint32_t> max;
};

/// Section inventory and contents of a WebAssembly 1.0 binary.
struct DecodedModule {
    std::vector<std::uint8_t> section_ids;
    std::vector<FuncType> types;
    std::vector<DecodedImport> imports;
    std::vector<std::uint32_t> functions;  // type index per defined function
    std::vector<MemoryLimits> memories;
    std::vector<DecodedGlobal> globals;
    std::vector<ModuleExport> exports;
    std::vector<DecodedBody> bodies;
    std::vector<DecodedData> data;
    std::optional<std::uint32_t> start;

    std::size_t imported_function_count() const noexcept;
    const ModuleExport* find_export(std::string_view name) const noexcept;
    /// Reads the length-prefixed string at `offset` from the data segments.
    std::optional<std::string> read_string(std::uint32_t offset) const;
    /// Reads `len` bytes at `offset` from the data segments (zero-filled
    /// where no segment covers the range).
    std::vector<std::uint8_t> read_memory(std::uint32_t offset, std::uint32_t len) const;
};

/// Throws DecodeError carrying the byte offset of the first fault.
DecodedModule decode(std::span<const std::uint8_t> bytes);

/// Structural validation of a decoded module: index spaces, unique export
/// names, a single memory covering every data segment, and operand-stack
/// type checking of function bodies. Returns the problems found.
std::vector<std::string> validate(const DecodedModule& module);

/// AssemblyScript rendering of the IR in the listing style. Returns an
/// empty string for empty input.
std::string emit_assemblyscript_text(const std::vector<ExportIR>& exports, const std::vector<ImportDecl>& imports);

}  // namespace fpwasm
