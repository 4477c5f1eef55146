#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace fpwasm {

/// Scripts larger than this many UTF-8 bytes are excluded at intake.
inline constexpr std::size_t max_script_bytes = 100 * 1024;

/// Half-open range of code point indices into a script's text.
struct Span {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t length() const noexcept { return end - start; }
    bool empty() const noexcept { return start == end; }
    bool contains(const Span& other) const noexcept {
        return start <= other.start && other.end <= end;
    }
    bool intersects(const Span& other) const noexcept {
        return std::max(start, other.start) < std::min(end, other.end);
    }

    friend bool operator==(const Span&, const Span&) = default;
};

/// Script text plus provenance. The text is normalized on construction
/// (CRLF and lone CR become LF, a leading BOM is dropped) and `id` is the
/// SHA-256 of the normalized UTF-8 bytes.
class SourceScript {
public:
    SourceScript() = default;
    explicit SourceScript(std::string text, std::optional<std::string> origin = std::nullopt,
                          std::map<std::string, std::string> meta = {});

    const std::string& id() const noexcept { return id_; }
    const std::string& text() const noexcept { return text_; }
    const std::u32string& code_points() const noexcept { return code_points_; }
    std::size_t byte_len() const noexcept { return text_.size(); }
    std::size_t length() const noexcept { return code_points_.size(); }
    const std::optional<std::string>& origin() const noexcept { return origin_; }
    const std::map<std::string, std::string>& meta() const noexcept { return meta_; }
    std::map<std::string, std::string>& meta() noexcept { return meta_; }

private:
    std::string id_;
    std::string text_;
    std::u32string code_points_;
    std::optional<std::string> origin_;
    std::map<std::string, std::string> meta_;
};

/// CRLF/CR to LF and BOM removal. Input must already be valid UTF-8.
std::string normalize_text(std::string_view text);

/// Exact substring by code point span. Throws RangeError on invalid spans.
std::string slice(const SourceScript& script, Span span);
std::string slice(std::u32string_view text, Span span);

}  // namespace fpwasm
