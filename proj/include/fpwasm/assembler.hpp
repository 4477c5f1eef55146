#pragma once

#include "fpwasm/rules.hpp"
#include "fpwasm/source.hpp"
#include "fpwasm/wasm.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fpwasm {

struct DroppedArtifact {
    TransformArtifact artifact;
    std::string reason;

    friend bool operator==(const DroppedArtifact&, const DroppedArtifact&) = default;
};

/// `kept` spans are pairwise disjoint and sorted by start.
struct PatchPlan {
    std::vector<TransformArtifact> kept;
    std::vector<DroppedArtifact> dropped;
    WasmModuleImage module;
};

/// Greedy sweep by (start asc, length desc, rule order asc). An artifact is
/// kept iff it intersects no kept span and reuses no kept export or import
/// name. `module` is left empty.
PatchPlan filter_overlaps(std::vector<TransformArtifact> artifacts);

/// filter_overlaps followed by synthesis of the kept artifacts' module.
/// Throws EmitError when the kept IR cannot be encoded.
PatchPlan plan_patch(std::vector<TransformArtifact> artifacts);

struct ObfuscatedScript {
    std::string text;
    std::vector<std::uint8_t> embedded_module;
    std::string original_id;
};

/// Splices kept glue into the original text and wraps it in the
/// asynchronous instantiation runtime. Without kept artifacts the original
/// text is returned unchanged and `embedded_module` is empty. Throws
/// AssembleError when glue references a name the module does not export or
/// binds an import the module does not declare.
ObfuscatedScript assemble(const SourceScript& script, const PatchPlan& plan);

/// The patched body alone: original text with each kept span replaced.
std::string patch_body(const SourceScript& script, const std::vector<TransformArtifact>& kept);

/// Parses the embedded byte-array literal out of assembled text. Throws
/// ExtractError when it is missing or malformed.
std::vector<std::uint8_t> extract_embedded_bytes(std::string_view text);
std::vector<std::uint8_t> embedded_bytes_roundtrip(const ObfuscatedScript& obf);

/// Kept/dropped report written next to converted scripts.
std::string plan_report_json(const SourceScript& script, const PatchPlan& plan);

}  // namespace fpwasm
