#pragma once

#include "fpwasm/source.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace fpwasm {

/// Stratum order used for quotas and primary-category assignment.
enum class Category { Canvas, WebRTC, CanvasFont, AudioContext };

inline constexpr Category all_categories[] = {Category::Canvas, Category::WebRTC, Category::CanvasFont,
                                              Category::AudioContext};

std::string_view to_string(Category c) noexcept;
std::optional<Category> parse_category(std::string_view name);

enum class Label { Fingerprinting, NonFingerprinting };

std::string_view to_string(Label l) noexcept;

/// `label` is empty until labeling; once set, it is Fingerprinting iff
/// `categories` is non-empty. `categories` is sorted in stratum order.
struct CorpusRecord {
    SourceScript script;
    std::optional<Label> label;
    std::vector<Category> categories;
};

struct IngestResult {
    std::vector<CorpusRecord> records;
    std::size_t dup_count = 0;
    std::vector<std::pair<std::string, std::string>> skipped;  // path, reason
};

/// Reads files and directories (recursively, in sorted path order). Files
/// named corpus-<k>.json are read as chunks; everything else is one script.
/// Records keep first-seen order; later duplicates by id are counted and
/// dropped. Undecodable or unreadable files land in `skipped`.
IngestResult ingest(const std::vector<std::filesystem::path>& paths, unsigned workers = 1);

inline constexpr std::size_t default_chunk_size = 10000;

/// Writes corpus-0.json, corpus-1.json, ... and returns the written paths.
std::vector<std::filesystem::path> write_chunks(const std::vector<CorpusRecord>& records,
                                                const std::filesystem::path& dir,
                                                std::size_t chunk_size = default_chunk_size);
std::vector<CorpusRecord> read_chunk(const std::filesystem::path& file);
/// All corpus-<k>.json files in `dir`, concatenated in ascending k.
std::vector<CorpusRecord> read_chunks(const std::filesystem::path& dir);

std::string record_to_json(const CorpusRecord& r);

/// One category rule: every clause must have at least one of its words
/// present as an identifier-like token.
struct CategoryRule {
    Category category;
    std::vector<std::vector<std::string>> clauses;
    /// Canvas: some fillText/strokeText call has a text argument of at least
    /// this many code points. An identifier argument stands for any string
    /// literal assigned to that name.
    std::size_t min_text_arg_len = 0;
    /// CanvasFont: distinct font candidates required, counting literal
    /// `.font = "..."` values or the string elements of one array literal,
    /// whichever is larger.
    std::size_t min_distinct_fonts = 0;
};

struct LabelRules {
    std::vector<CategoryRule> rules;

    static LabelRules defaults();
    /// JSON array of {"category", "all_of": [[word...]...], "min_text_arg_len",
    /// "min_distinct_fonts"}. Throws ConfigError.
    static LabelRules from_json(std::string_view json);
};

std::vector<Category> detect_categories(std::string_view text, const LabelRules& rules = LabelRules::defaults());
CorpusRecord label(CorpusRecord record, const LabelRules& rules = LabelRules::defaults());

/// Largest-remainder apportionment of `total` over `weights`, exact integer
/// arithmetic, remainder ties to the lower index.
std::vector<std::size_t> largest_remainder(const std::vector<std::size_t>& weights, std::size_t total);

/// Draw in [0, bound) by rejection, so results do not depend on the standard
/// library's distribution implementation. bound > 0.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

/// Algorithm R over a stream of `stream_len` items keeping `k`; the output
/// keeps reservoir slot order. Fewer than k items returns them all.
std::vector<std::size_t> reservoir_indices(std::size_t stream_len, std::size_t k, std::mt19937_64& rng);

/// Quotas proportional to `weights` by largest remainder, each capped at its
/// pool. Any shortfall is reassigned by largest remainder over the spare
/// capacity of the other strata and reported in `warnings`. Throws
/// InsufficientPool instead when `strict`.
std::vector<std::size_t> stratum_quotas(const std::vector<std::size_t>& weights, const std::vector<std::size_t>& pools,
                                        std::size_t total, bool strict, std::vector<std::string>* warnings,
                                        const std::vector<std::string>& names = {});

struct SampleConfig {
    std::size_t fp_total = 400;
    std::size_t non_fp_total = 100;
    /// Quota weights in stratum order; empty means the observed pool sizes.
    std::vector<std::size_t> weights;
    /// Throw InsufficientPool instead of redistributing.
    bool strict = false;
};

struct SampleSubset {
    std::size_t index = 0;  // 1-based
    std::uint64_t seed = 0;
    std::map<Category, std::size_t> quotas;
    std::vector<std::string> fp;
    std::vector<std::string> non_fp;
};

struct SampleResult {
    std::vector<SampleSubset> subsets;
    std::map<Category, std::size_t> pools;
    std::vector<std::string> warnings;
};

/// Fingerprinting records are stratified by their first category; each
/// stratum and the non-fingerprinting pool are drawn by Algorithm R with a
/// per-subset seed derived from (seed, index). Unlabeled records are labeled
/// with the default rules first.
SampleResult sample(const std::vector<CorpusRecord>& records, std::size_t n_subsets, std::uint64_t seed,
                    const SampleConfig& config = {});

std::string subset_to_json(const SampleSubset& s);

}  // namespace fpwasm
