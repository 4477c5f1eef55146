#include "fpwasm/assembler.hpp"

#include "fpwasm/errors.hpp"
#include "fpwasm/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <regex>
#include <set>

namespace fpwasm {

namespace {

std::string describe(const TransformArtifact& a) {
    return std::string(to_string(a.rule)) + "@[" + std::to_string(a.span.start) + "," + std::to_string(a.span.end) +
           ")";
}

std::vector<std::string> names_of(const TransformArtifact& a) {
    std::vector<std::string> out;
    for (const auto& e : a.exports)
        for (auto& n : e.exported_names()) out.push_back(std::move(n));
    for (const auto& i : a.imports) out.push_back("js." + i.field);
    return out;
}

constexpr std::string_view bytes_open = "const __fp_bytes = new Uint8Array([";
constexpr std::string_view bytes_close = "]);";

}  // namespace

PatchPlan filter_overlaps(std::vector<TransformArtifact> artifacts) {
    std::stable_sort(artifacts.begin(), artifacts.end(), [](const TransformArtifact& a, const TransformArtifact& b) {
        if (a.span.start != b.span.start) return a.span.start < b.span.start;
        if (a.span.length() != b.span.length()) return a.span.length() > b.span.length();
        return static_cast<int>(a.rule) < static_cast<int>(b.rule);
    });
    PatchPlan plan;
    std::set<std::string> taken;
    for (auto& a : artifacts) {
        // kept spans are disjoint and start-ordered, so the last one has the furthest end
        if (!plan.kept.empty() && plan.kept.back().span.intersects(a.span)) {
            std::string reason = "overlaps " + describe(plan.kept.back());
            plan.dropped.push_back({std::move(a), std::move(reason)});
            continue;
        }
        const auto names = names_of(a);
        auto clash = std::find_if(names.begin(), names.end(), [&](const std::string& n) { return taken.count(n); });
        if (clash != names.end()) {
            std::string reason = "duplicate name " + *clash;
            plan.dropped.push_back({std::move(a), std::move(reason)});
            continue;
        }
        taken.insert(names.begin(), names.end());
        plan.kept.push_back(std::move(a));
    }
    return plan;
}

PatchPlan plan_patch(std::vector<TransformArtifact> artifacts) {
    PatchPlan plan = filter_overlaps(std::move(artifacts));
    std::vector<ExportIR> exports;
    std::vector<ImportDecl> imports;
    for (const auto& a : plan.kept) {
        exports.insert(exports.end(), a.exports.begin(), a.exports.end());
        imports.insert(imports.end(), a.imports.begin(), a.imports.end());
    }
    plan.module = synthesize(exports, imports);
    return plan;
}

std::string patch_body(const SourceScript& script, const std::vector<TransformArtifact>& kept) {
    const std::u32string& text = script.code_points();
    std::string out;
    out.reserve(script.byte_len());
    std::size_t cursor = 0;
    for (const auto& a : kept) {
        if (a.span.start < cursor || a.span.end > text.size())
            throw AssembleError("artifact " + describe(a) + " is out of order or out of range");
        out += slice(text, Span{cursor, a.span.start});
        out += a.glue;
        cursor = a.span.end;
    }
    out += slice(text, Span{cursor, text.size()});
    return out;
}

ObfuscatedScript assemble(const SourceScript& script, const PatchPlan& plan) {
    ObfuscatedScript obf;
    obf.original_id = script.id();
    if (plan.kept.empty()) {
        obf.text = script.text();
        return obf;
    }

    std::set<std::string> exported;
    for (const auto& e : plan.module.exports) exported.insert(e.name);
    std::set<std::string> declared_imports;
    for (const auto& i : plan.module.imports) declared_imports.insert(i.field);
    static const std::regex ref(R"(instance\.exports\.([A-Za-z_$][A-Za-z0-9_$]*))");
    for (const auto& a : plan.kept) {
        for (auto it = std::sregex_iterator(a.glue.begin(), a.glue.end(), ref); it != std::sregex_iterator(); ++it)
            if (!exported.count((*it)[1]))
                throw AssembleError(describe(a) + " references missing export '" + std::string((*it)[1]) + "'");
        for (const auto& i : a.imports)
            if (!declared_imports.count(i.field))
                throw AssembleError(describe(a) + " binds undeclared import '" + i.field + "'");
    }

    const auto& bytes = plan.module.bytes;
    std::string byte_list;
    byte_list.reserve(bytes.size() * 4);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        if (i) byte_list += ',';
        byte_list += std::to_string(bytes[i]);
    }

    std::string imports_js;
    for (const auto& i : plan.module.imports) {
        const std::string key = quote_js_string(i.field);
        imports_js += "      " + key + ": (...a) => __fp_slots[" + key + "](...a),\n";
    }

    std::string& t = obf.text;
    t += "(async () => {\n";
    t += "  ";
    t += bytes_open;
    t += byte_list;
    t += bytes_close;
    t += "\n";
    // import slots are bound per call by the glue, so closures see the live scope
    t += "  const __fp_slots = Object.create(null);\n";
    t += "  const __fp = {\n"
         "    run(closures, thunk) {\n"
         "      const saved = {};\n"
         "      for (const k in closures) { saved[k] = __fp_slots[k]; __fp_slots[k] = closures[k]; }\n"
         "      try { return thunk(); } finally { for (const k in saved) __fp_slots[k] = saved[k]; }\n"
         "    },\n"
         "  };\n";
    t += "  const importObject = {\n    js: {\n" + imports_js + "    },\n  };\n";
    t += "  const { instance } = await WebAssembly.instantiate(__fp_bytes, importObject);\n";
    t += "  const memory = instance.exports.memory;\n";
    t += "  const __fp_decoder = new TextDecoder();\n";
    t += "  const getString = (p) => {\n"
         "    const offset = typeof p === \"number\" ? p : p.value;\n"
         "    const len = new DataView(memory.buffer).getUint32(offset, true);\n"
         "    return __fp_decoder.decode(new Uint8Array(memory.buffer, offset + 4, len));\n"
         "  };\n";
    t += "  const globalObject = typeof window !== 'undefined' ? window : globalThis;\n";
    t += "  (function () {\n";
    t += patch_body(script, plan.kept);
    t += "\n  }).call(this);\n";
    t += "})();\n";

    obf.embedded_module = bytes;
    return obf;
}

std::vector<std::uint8_t> extract_embedded_bytes(std::string_view text) {
    const auto open = text.find(bytes_open);
    if (open == std::string_view::npos) throw ExtractError("embedded byte array not found");
    const std::size_t start = open + bytes_open.size();
    const auto close = text.find(bytes_close, start);
    if (close == std::string_view::npos) throw ExtractError("embedded byte array is not terminated");
    std::vector<std::uint8_t> out;
    std::string_view list = text.substr(start, close - start);
    if (list.empty()) return out;
    std::size_t pos = 0;
    while (pos <= list.size()) {
        const auto comma = std::min(list.find(',', pos), list.size());
        std::string_view item = list.substr(pos, comma - pos);
        unsigned value = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
        if (ec != std::errc() || ptr != item.data() + item.size() || item.empty() || value > 255)
            throw ExtractError("malformed byte '" + std::string(item) + "' at offset " + std::to_string(start + pos));
        out.push_back(static_cast<std::uint8_t>(value));
        pos = comma + 1;
    }
    return out;
}

std::vector<std::uint8_t> embedded_bytes_roundtrip(const ObfuscatedScript& obf) {
    return extract_embedded_bytes(obf.text);
}

std::string plan_report_json(const SourceScript& script, const PatchPlan& plan) {
    using nlohmann::json;
    auto artifact_json = [](const TransformArtifact& a) {
        json exports = json::array();
        for (const auto& e : a.exports) exports.push_back({{"symbol", e.symbol}, {"kind", to_string(e.kind)}});
        json imports = json::array();
        for (const auto& i : a.imports) imports.push_back(i.field);
        return json{{"rule", to_string(a.rule)},
                    {"start", a.span.start},
                    {"end", a.span.end},
                    {"exports", exports},
                    {"imports", imports}};
    };
    json kept = json::array();
    for (const auto& a : plan.kept) kept.push_back(artifact_json(a));
    json dropped = json::array();
    for (const auto& d : plan.dropped) {
        json j = artifact_json(d.artifact);
        j["reason"] = d.reason;
        dropped.push_back(std::move(j));
    }
    json doc{{"script_id", script.id()},
             {"kept", kept},
             {"dropped", dropped},
             {"module_bytes", plan.module.bytes.size()},
             {"memory_next_free", plan.module.layout.next_free}};
    return doc.dump(2) + "\n";
}

}  // namespace fpwasm
