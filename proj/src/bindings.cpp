#include "fpwasm/assembler.hpp"
#include "fpwasm/corpus.hpp"
#include "fpwasm/errors.hpp"
#include "fpwasm/harness.hpp"
#include "fpwasm/metrics.hpp"
#include "fpwasm/parser.hpp"
#include "fpwasm/pipeline.hpp"
#include "fpwasm/signals.hpp"
#include "fpwasm/translator.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

namespace py = pybind11;
using namespace fpwasm;

namespace {

py::object from_json(const std::string& text) {
    return py::module_::import("json").attr("loads")(text);
}

py::bytes to_bytes(const std::vector<std::uint8_t>& v) {
    return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

RuleSet rules_from(const std::optional<std::vector<std::string>>& names) {
    if (!names) return all_rule_set();
    RuleSet out;
    for (const auto& n : *names) out.insert(parse_rule_id(n));
    return out;
}

ObfuscatedScript obfuscated_from(const std::string& text, const std::optional<py::bytes>& wasm) {
    ObfuscatedScript obf{text, {}, {}};
    if (wasm) {
        const std::string b = *wasm;
        obf.embedded_module.assign(b.begin(), b.end());
    } else {
        try {
            obf.embedded_module = extract_embedded_bytes(text);
        } catch (const ExtractError&) {
        }
    }
    return obf;
}

py::dict outcome_dict(const ValidationOutcome& o) {
    py::dict d;
    d["success"] = o.success();
    d["stage1_compile"] = std::string(to_string(o.stage1_compile));
    d["stage2_parse"] = std::string(to_string(o.stage2_parse));
    d["stage3_execute"] = std::string(to_string(o.stage3_execute));
    d["error"] = o.error ? py::object(py::str(*o.error)) : py::object(py::none());
    return d;
}

py::dict convert(const std::string& text, const std::optional<std::vector<std::string>>& rules,
                 const std::string& translator, bool dom) {
    PipelineConfig cfg;
    cfg.rules = rules_from(rules);
    cfg.rule_config.dom_available = dom;
    std::unique_ptr<Translator> tr;
    if (parse_translator_mode(translator) == TranslatorMode::Stub) {
        tr = make_translator(TranslatorMode::Stub);
        cfg.translator = tr.get();
    } else if (parse_translator_mode(translator) == TranslatorMode::Service) {
        throw ConfigError("the service translator is only available from the command line");
    }
    const SourceScript script(text);
    ScriptResult r = [&] {
        py::gil_scoped_release release;
        return run_script(script, cfg);
    }();
    py::dict d;
    d["report"] = from_json(report_json(r.report));
    d["text"] = r.output ? py::object(py::str(r.output->text)) : py::object(py::none());
    d["wasm"] = r.output ? py::object(to_bytes(r.output->embedded_module)) : py::object(py::none());
    d["plan"] = r.output ? from_json(plan_report_json(script, r.plan)) : py::object(py::none());
    d["validation"] = outcome_dict(r.outcome);
    return d;
}

}  // namespace

PYBIND11_MODULE(_fpwasm, m) {
    m.doc() = "JavaScript to WebAssembly conversion core";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", base.ptr());
    py::register_exception<OversizeError>(m, "OversizeError", base.ptr());
    py::register_exception<RangeError>(m, "RangeError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ProtocolError>(m, "ProtocolError", base.ptr());
    py::register_exception<InsufficientPool>(m, "InsufficientPool", base.ptr());

    m.def("rule_names", [] {
        std::vector<std::string> out;
        for (RuleId r : all_rules()) out.emplace_back(to_string(r));
        return out;
    });
    m.def("script_id", [](const std::string& text) { return SourceScript(text).id(); }, py::arg("text"));
    m.def("check_syntax", [](const std::string& text) { parse_text(std::string_view(text)); }, py::arg("text"),
          "Raises ParseError when `text` is not a parsable script.");

    m.def("convert", &convert, py::arg("text"), py::arg("rules") = py::none(), py::arg("translator") = "stub",
          py::arg("dom") = true,
          "Runs the pipeline without stage 3. Returns text, wasm, plan, report and validation; text, wasm and "
          "plan are None for excluded scripts.");
    m.def(
        "validate",
        [](const std::string& text, std::optional<py::bytes> wasm) {
            return outcome_dict(validate(obfuscated_from(text, wasm), nullptr));
        },
        py::arg("text"), py::arg("wasm") = py::none());

    m.def(
        "extract_tuples", [](const std::string& text) { return extract_tuples(*parse_text(std::string_view(text))); },
        py::arg("text"));
    m.def(
        "evasion_report",
        [](const std::string& original, const std::string& converted,
           const std::optional<std::vector<std::string>>& watchlist) {
            std::vector<AstTuple> wl;
            if (watchlist)
                for (const auto& t : *watchlist) wl.push_back(AstTuple::parse(t));
            else
                wl = default_watchlist();
            return from_json(signal_report_json(evasion_report(SourceScript(original),
                                                               obfuscated_from(converted, std::nullopt), wl)));
        },
        py::arg("original"), py::arg("converted"), py::arg("watchlist") = py::none());
    m.def("default_watchlist", [] {
        std::vector<std::string> out;
        for (const auto& t : default_watchlist()) out.push_back(t.rendered());
        return out;
    });

    m.def(
        "detect_categories",
        [](const std::string& text) {
            std::vector<std::string> out;
            for (Category c : detect_categories(text)) out.emplace_back(to_string(c));
            return out;
        },
        py::arg("text"));
    m.def("largest_remainder", &largest_remainder, py::arg("weights"), py::arg("total"));
    m.def(
        "mean_sd",
        [](const std::vector<double>& v) {
            const auto r = mean_sd(v);
            return py::make_tuple(r.mean, r.sd);
        },
        py::arg("values"), "Mean and sample standard deviation.");

    m.def(
        "encode_request",
        [](const std::string& id, const std::string& script, int timeout_ms, bool collect_fingerprint,
           bool monitor_apis) {
            return encode_request(HarnessRequest{id, script, timeout_ms, collect_fingerprint, monitor_apis});
        },
        py::arg("id"), py::arg("script"), py::arg("timeout_ms") = 5000, py::arg("collect_fingerprint") = false,
        py::arg("monitor_apis") = false, "One protocol line for the runtime harness, without newline.");
    m.def(
        "parse_response",
        [](const std::string& line) {
            // re-encode so field names and defaults match the wire format
            return from_json(encode_response(parse_response(line)));
        },
        py::arg("line"));
}
