#include "fpwasm/corpus.hpp"

#include "fpwasm/errors.hpp"
#include "fpwasm/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

namespace fpwasm {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::string_view to_string(Category c) noexcept {
    switch (c) {
    case Category::Canvas: return "Canvas";
    case Category::WebRTC: return "WebRTC";
    case Category::CanvasFont: return "CanvasFont";
    case Category::AudioContext: return "AudioContext";
    }
    return "?";
}

std::optional<Category> parse_category(std::string_view name) {
    for (Category c : all_categories)
        if (to_string(c) == name) return c;
    return std::nullopt;
}

std::string_view to_string(Label l) noexcept {
    return l == Label::Fingerprinting ? "fingerprinting" : "non_fingerprinting";
}

// --- chunk format -----------------------------------------------------------

namespace {

const char* const meta_keys[] = {"captured_at", "mime", "status", "initiator"};

ojson record_json(const CorpusRecord& r) {
    const auto& s = r.script;
    ojson j;
    j["id"] = s.id();
    j["origin"] = s.origin() ? ojson(*s.origin()) : ojson(nullptr);
    for (const char* k : meta_keys) {
        auto it = s.meta().find(k);
        j[k] = it == s.meta().end() ? ojson(nullptr) : ojson(it->second);
        if (std::string_view(k) == "mime") j["size"] = s.byte_len();
    }
    auto wf = s.meta().find("wasm_flag");
    j["wasm_flag"] = wf != s.meta().end() && wf->second == "true";
    j["label"] = r.label ? ojson(std::string(to_string(*r.label))) : ojson(nullptr);
    j["categories"] = ojson::array();
    for (Category c : r.categories) j["categories"].push_back(std::string(to_string(c)));
    j["text"] = s.text();
    return j;
}

CorpusRecord record_from_json(const ojson& j) {
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string())
        throw ConfigError("corpus record without a text field");
    std::map<std::string, std::string> meta;
    for (const char* k : meta_keys) {
        if (!j.contains(k) || j[k].is_null()) continue;
        meta[k] = j[k].is_string() ? j[k].get<std::string>() : j[k].dump();
    }
    meta["wasm_flag"] = j.value("wasm_flag", false) ? "true" : "false";
    std::optional<std::string> origin;
    if (j.contains("origin") && j["origin"].is_string()) origin = j["origin"].get<std::string>();
    const std::string text = j["text"].get<std::string>();
    if (!decode_utf8(text)) throw ConfigError("corpus record text is not valid UTF-8");
    CorpusRecord r{SourceScript(text, std::move(origin), std::move(meta)), std::nullopt, {}};
    if (j.contains("id") && j["id"].is_string() && j["id"].get<std::string>() != r.script.id())
        throw ConfigError("corpus record id does not match its text");
    if (j.contains("label") && j["label"].is_string()) {
        const auto l = j["label"].get<std::string>();
        if (l == "fingerprinting") r.label = Label::Fingerprinting;
        else if (l == "non_fingerprinting") r.label = Label::NonFingerprinting;
        else throw ConfigError("unknown label " + l);
    }
    if (j.contains("categories") && j["categories"].is_array()) {
        for (const auto& c : j["categories"]) {
            auto cat = c.is_string() ? parse_category(c.get<std::string>()) : std::nullopt;
            if (!cat) throw ConfigError("unknown category " + c.dump());
            r.categories.push_back(*cat);
        }
        std::sort(r.categories.begin(), r.categories.end());
    }
    return r;
}

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool is_chunk_name(const fs::path& p, long* k = nullptr) {
    static const std::regex re("corpus-([0-9]+)\\.json");
    std::smatch m;
    const std::string name = p.filename().string();
    if (!std::regex_match(name, m, re)) return false;
    if (k) *k = std::stol(m[1]);
    return true;
}

bool is_script_name(const fs::path& p) {
    const auto ext = p.extension().string();
    return ext == ".js" || ext == ".mjs" || ext == ".cjs";
}

}  // namespace

std::string record_to_json(const CorpusRecord& r) { return record_json(r).dump(); }

std::vector<fs::path> write_chunks(const std::vector<CorpusRecord>& records, const fs::path& dir,
                                   std::size_t chunk_size) {
    if (chunk_size == 0) throw RangeError("chunk size must be positive");
    fs::create_directories(dir);
    std::vector<fs::path> out;
    for (std::size_t start = 0, k = 0; start < records.size() || (records.empty() && k == 0); start += chunk_size, ++k) {
        ojson arr = ojson::array();
        for (std::size_t i = start; i < std::min(records.size(), start + chunk_size); ++i)
            arr.push_back(record_json(records[i]));
        const fs::path p = dir / ("corpus-" + std::to_string(k) + ".json");
        std::ofstream o(p, std::ios::binary);
        o << arr.dump(1) << '\n';
        if (!o) throw Error("cannot write " + p.string());
        out.push_back(p);
        if (records.empty()) break;
    }
    return out;
}

std::vector<CorpusRecord> read_chunk(const fs::path& file) {
    ojson arr;
    try {
        arr = ojson::parse(read_bytes(file));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
    if (!arr.is_array()) throw ConfigError(file.string() + ": chunk is not a JSON array");
    std::vector<CorpusRecord> out;
    out.reserve(arr.size());
    for (const auto& j : arr) out.push_back(record_from_json(j));
    return out;
}

std::vector<CorpusRecord> read_chunks(const fs::path& dir) {
    std::vector<std::pair<long, fs::path>> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        long k = 0;
        if (e.is_regular_file() && is_chunk_name(e.path(), &k)) files.emplace_back(k, e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<CorpusRecord> out;
    for (const auto& [k, p] : files) {
        auto part = read_chunk(p);
        std::move(part.begin(), part.end(), std::back_inserter(out));
    }
    return out;
}

// --- ingest -----------------------------------------------------------------

IngestResult ingest(const std::vector<fs::path>& paths, unsigned workers) {
    IngestResult result;
    std::vector<fs::path> files;
    for (const auto& p : paths) {
        std::error_code ec;
        if (fs::is_directory(p, ec)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::recursive_directory_iterator(p, ec))
                if (e.is_regular_file() && (is_script_name(e.path()) || is_chunk_name(e.path())))
                    found.push_back(e.path());
            if (ec) result.skipped.emplace_back(p.string(), ec.message());
            std::sort(found.begin(), found.end());
            files.insert(files.end(), found.begin(), found.end());
        } else {
            files.push_back(p);
        }
    }

    struct Slot {
        std::vector<CorpusRecord> records;
        std::string error;
    };
    std::vector<Slot> slots(files.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < files.size();) {
            const fs::path& f = files[i];
            try {
                if (is_chunk_name(f)) {
                    slots[i].records = read_chunk(f);
                    continue;
                }
                std::string bytes = read_bytes(f);
                if (!decode_utf8(bytes)) throw Error("not valid UTF-8");
                std::map<std::string, std::string> meta{{"mime", "application/javascript"}};
                SourceScript s(std::move(bytes), fs::absolute(f).lexically_normal().string(), std::move(meta));
                s.meta()["wasm_flag"] = s.text().find("WebAssembly") != std::string::npos ? "true" : "false";
                slots[i].records.push_back({std::move(s), std::nullopt, {}});
            } catch (const std::exception& e) {
                slots[i].error = e.what();
            }
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(files.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();

    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < files.size(); ++i) {
        if (!slots[i].error.empty()) {
            result.skipped.emplace_back(files[i].string(), slots[i].error);
            continue;
        }
        for (auto& r : slots[i].records) {
            if (!seen.insert(r.script.id()).second) {
                ++result.dup_count;
                continue;
            }
            result.records.push_back(std::move(r));
        }
    }
    return result;
}

// --- labeling ---------------------------------------------------------------

namespace {

bool word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '$';
}

std::unordered_set<std::string_view> words_of(std::string_view t) {
    std::unordered_set<std::string_view> out;
    for (std::size_t i = 0; i < t.size();) {
        if (!word_char(t[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < t.size() && word_char(t[j])) ++j;
        out.insert(t.substr(i, j - i));
        i = j;
    }
    return out;
}

std::size_t skip_ws(std::string_view t, std::size_t i) {
    while (i < t.size() && (t[i] == ' ' || t[i] == '\t' || t[i] == '\n' || t[i] == '\r')) ++i;
    return i;
}

// Raw contents of the quoted literal starting at t[i], or nullopt. `end`
// receives the index past the closing quote.
std::optional<std::string_view> string_literal_at(std::string_view t, std::size_t i, std::size_t& end) {
    if (i >= t.size() || (t[i] != '"' && t[i] != '\'' && t[i] != '`')) return std::nullopt;
    const char q = t[i];
    for (std::size_t j = i + 1; j < t.size(); ++j) {
        if (t[j] == '\\') {
            ++j;
        } else if (q == '`' && t[j] == '$' && j + 1 < t.size() && t[j + 1] == '{') {
            return std::nullopt;
        } else if (t[j] == q) {
            end = j + 1;
            return t.substr(i + 1, j - i - 1);
        } else if (t[j] == '\n' && q != '`') {
            return std::nullopt;
        }
    }
    return std::nullopt;
}

std::size_t code_point_count(std::string_view s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
        return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
    }));
}

std::size_t longest_assigned(std::string_view t, std::string_view name) {
    std::size_t best = 0;
    for (std::size_t p = t.find(name); p != std::string_view::npos; p = t.find(name, p + 1)) {
        if ((p > 0 && word_char(t[p - 1])) || (p + name.size() < t.size() && word_char(t[p + name.size()]))) continue;
        std::size_t i = skip_ws(t, p + name.size());
        if (i >= t.size() || t[i] != '=' || (i + 1 < t.size() && t[i + 1] == '=')) continue;
        std::size_t end = 0;
        if (auto lit = string_literal_at(t, skip_ws(t, i + 1), end)) best = std::max(best, code_point_count(*lit));
    }
    return best;
}

std::size_t longest_text_arg(std::string_view t) {
    std::size_t best = 0;
    for (std::string_view callee : {"fillText", "strokeText"}) {
        for (std::size_t p = t.find(callee); p != std::string_view::npos; p = t.find(callee, p + 1)) {
            std::size_t i = skip_ws(t, p + callee.size());
            if (i >= t.size() || t[i] != '(') continue;
            std::size_t end = 0;
            const std::size_t a = skip_ws(t, i + 1);
            if (auto lit = string_literal_at(t, a, end)) {
                best = std::max(best, code_point_count(*lit));
                continue;
            }
            // an identifier argument counts every literal assigned to that name
            std::size_t b = a;
            while (b < t.size() && word_char(t[b])) ++b;
            if (b > a) best = std::max(best, longest_assigned(t, t.substr(a, b - a)));
        }
    }
    return best;
}

std::size_t distinct_fonts(std::string_view t) {
    std::set<std::string_view> assigned;
    for (std::size_t p = t.find(".font"); p != std::string_view::npos; p = t.find(".font", p + 1)) {
        std::size_t i = skip_ws(t, p + 5);
        if (i >= t.size() || t[i] != '=' || (i + 1 < t.size() && t[i + 1] == '=')) continue;
        std::size_t end = 0;
        if (auto lit = string_literal_at(t, skip_ws(t, i + 1), end)) assigned.insert(*lit);
    }
    std::size_t best = assigned.size();
    for (std::size_t p = t.find('['); p != std::string_view::npos; p = t.find('[', p + 1)) {
        std::set<std::string_view> items;
        std::size_t i = skip_ws(t, p + 1);
        bool ok = true;
        while (ok && i < t.size() && t[i] != ']') {
            std::size_t end = 0;
            auto lit = string_literal_at(t, i, end);
            if (!lit) {
                ok = false;
                break;
            }
            items.insert(*lit);
            i = skip_ws(t, end);
            if (i < t.size() && t[i] == ',') i = skip_ws(t, i + 1);
        }
        if (ok) best = std::max(best, items.size());
    }
    return best;
}

}  // namespace

LabelRules LabelRules::defaults() {
    LabelRules r;
    r.rules.push_back({Category::Canvas, {{"toDataURL", "getImageData"}, {"fillText", "strokeText"}}, 10, 0});
    r.rules.push_back({Category::WebRTC,
                       {{"RTCPeerConnection"}, {"createDataChannel", "createOffer"}, {"onicecandidate"}}, 0, 0});
    r.rules.push_back({Category::CanvasFont, {{"measureText"}}, 0, 20});
    r.rules.push_back({Category::AudioContext,
                       {{"AudioContext", "OfflineAudioContext"},
                        {"createOscillator", "createDynamicsCompressor"},
                        {"getFloatFrequencyData", "getChannelData"}},
                       0, 0});
    return r;
}

LabelRules LabelRules::from_json(std::string_view text) {
    LabelRules out;
    try {
        const auto arr = nlohmann::json::parse(text);
        if (!arr.is_array()) throw ConfigError("label rules must be a JSON array");
        for (const auto& j : arr) {
            auto cat = parse_category(j.at("category").get<std::string>());
            if (!cat) throw ConfigError("unknown category in label rules: " + j.at("category").dump());
            CategoryRule rule{*cat, j.value("all_of", std::vector<std::vector<std::string>>{}),
                              j.value("min_text_arg_len", std::size_t{0}), j.value("min_distinct_fonts", std::size_t{0})};
            out.rules.push_back(std::move(rule));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("label rules: ") + e.what());
    }
    return out;
}

std::vector<Category> detect_categories(std::string_view text, const LabelRules& rules) {
    const auto words = words_of(text);
    std::set<Category> found;
    for (const auto& rule : rules.rules) {
        const bool clauses = std::all_of(rule.clauses.begin(), rule.clauses.end(), [&](const auto& clause) {
            return std::any_of(clause.begin(), clause.end(), [&](const std::string& w) { return words.count(w) > 0; });
        });
        if (!clauses) continue;
        if (rule.min_text_arg_len > 0 && longest_text_arg(text) < rule.min_text_arg_len) continue;
        if (rule.min_distinct_fonts > 0 && distinct_fonts(text) < rule.min_distinct_fonts) continue;
        found.insert(rule.category);
    }
    return {found.begin(), found.end()};
}

CorpusRecord label(CorpusRecord record, const LabelRules& rules) {
    record.categories = detect_categories(record.script.text(), rules);
    record.label = record.categories.empty() ? Label::NonFingerprinting : Label::Fingerprinting;
    return record;
}

// --- sampling ---------------------------------------------------------------

std::vector<std::size_t> largest_remainder(const std::vector<std::size_t>& weights, std::size_t total) {
    using u128 = unsigned __int128;
    const u128 sum = std::accumulate(weights.begin(), weights.end(), u128{0});
    std::vector<std::size_t> out(weights.size(), 0);
    if (sum == 0) return out;
    std::vector<u128> rem(weights.size());
    std::size_t given = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const u128 num = u128{total} * weights[i];
        out[i] = static_cast<std::size_t>(num / sum);
        rem[i] = num % sum;
        given += out[i];
    }
    std::vector<std::size_t> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; given < total; ++k, ++given) ++out[order[k]];
    return out;
}

std::vector<std::size_t> stratum_quotas(const std::vector<std::size_t>& weights, const std::vector<std::size_t>& pools,
                                        std::size_t total, bool strict, std::vector<std::string>* warnings,
                                        const std::vector<std::string>& names) {
    if (weights.size() != pools.size()) throw RangeError("stratum_quotas: weights and pools differ in length");
    auto q = largest_remainder(weights, total);
    std::size_t shortfall = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (q[i] <= pools[i]) continue;
        const std::string msg = (i < names.size() ? names[i] : "stratum " + std::to_string(i)) + ": pool " + std::to_string(pools[i]) +
                                " below quota " + std::to_string(q[i]);
        if (strict) throw InsufficientPool(msg);
        if (warnings) warnings->push_back(msg + "; shortfall reassigned");
        shortfall += q[i] - pools[i];
        q[i] = pools[i];
    }
    if (shortfall == 0) return q;
    std::vector<std::size_t> spare(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) spare[i] = pools[i] - q[i];
    const std::size_t capacity = std::accumulate(spare.begin(), spare.end(), std::size_t{0});
    if (capacity < shortfall && warnings)
        warnings->push_back("fingerprinting pools hold " + std::to_string(capacity + total - shortfall) +
                            " scripts, fewer than " + std::to_string(total));
    const auto extra = largest_remainder(spare, std::min(shortfall, capacity));
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += extra[i];
    return q;
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    // reject the top partial block so every residue is equally likely
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    for (;;) {
        const std::uint64_t x = rng();
        if (x < limit) return x % bound;
    }
}

std::vector<std::size_t> reservoir_indices(std::size_t stream_len, std::size_t k, std::mt19937_64& rng) {
    std::vector<std::size_t> res;
    res.reserve(std::min(stream_len, k));
    for (std::size_t i = 0; i < stream_len; ++i) {
        if (i < k) {
            res.push_back(i);
            continue;
        }
        const std::uint64_t j = uniform_below(rng, i + 1);
        if (j < k) res[j] = i;
    }
    return res;
}

namespace {

std::mt19937_64 stream_rng(std::uint64_t seed, std::size_t subset, std::size_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(subset), static_cast<std::uint32_t>(stream)};
    return std::mt19937_64(seq);
}

}  // namespace

SampleResult sample(const std::vector<CorpusRecord>& records, std::size_t n_subsets, std::uint64_t seed,
                    const SampleConfig& config) {
    SampleResult out;
    constexpr std::size_t n_strata = std::size(all_categories);
    std::vector<std::vector<const std::string*>> strata(n_strata);
    std::vector<const std::string*> non_fp;
    for (const auto& r : records) {
        CorpusRecord labeled;
        const CorpusRecord* use = &r;
        if (!r.label) {
            labeled = label(r);
            use = &labeled;
        }
        if (use->categories.empty()) non_fp.push_back(&r.script.id());
        else strata[static_cast<std::size_t>(use->categories.front())].push_back(&r.script.id());
    }
    std::vector<std::size_t> pools(n_strata);
    for (std::size_t c = 0; c < n_strata; ++c) {
        pools[c] = strata[c].size();
        out.pools[all_categories[c]] = pools[c];
    }
    if (!config.weights.empty() && config.weights.size() != n_strata)
        throw ConfigError("quota weights need one entry per category");
    std::vector<std::string> names;
    for (Category c : all_categories) names.emplace_back(to_string(c));
    const auto quotas = stratum_quotas(config.weights.empty() ? pools : config.weights, pools, config.fp_total,
                                       config.strict, &out.warnings, names);
    if (non_fp.size() < config.non_fp_total) {
        const std::string msg = "non-fingerprinting pool holds " + std::to_string(non_fp.size()) + ", fewer than " +
                                std::to_string(config.non_fp_total);
        if (config.strict) throw InsufficientPool(msg);
        out.warnings.push_back(msg);
    }

    for (std::size_t i = 1; i <= n_subsets; ++i) {
        SampleSubset s;
        s.index = i;
        s.seed = seed;
        for (std::size_t c = 0; c < n_strata; ++c) {
            s.quotas[all_categories[c]] = quotas[c];
            auto rng = stream_rng(seed, i, c + 1);
            for (std::size_t k : reservoir_indices(strata[c].size(), quotas[c], rng)) s.fp.push_back(*strata[c][k]);
        }
        auto rng = stream_rng(seed, i, 0);
        for (std::size_t k : reservoir_indices(non_fp.size(), config.non_fp_total, rng)) s.non_fp.push_back(*non_fp[k]);
        out.subsets.push_back(std::move(s));
    }
    return out;
}

std::string subset_to_json(const SampleSubset& s) {
    ojson j;
    j["index"] = s.index;
    j["seed"] = s.seed;
    j["quotas"] = ojson::object();
    for (Category c : all_categories) {
        auto it = s.quotas.find(c);
        j["quotas"][std::string(to_string(c))] = it == s.quotas.end() ? 0 : it->second;
    }
    j["fp"] = s.fp;
    j["non_fp"] = s.non_fp;
    return j.dump(2) + "\n";
}

}  // namespace fpwasm
