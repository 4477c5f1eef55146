#include "fpwasm/source.hpp"

#include "fpwasm/errors.hpp"
#include "fpwasm/text.hpp"

namespace fpwasm {

std::string normalize_text(std::string_view text) {
    if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
        static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF)
        text.remove_prefix(3);
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\r') {
            out.push_back('\n');
            if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        } else {
            out.push_back(text[i]);
        }
    }
    return out;
}

SourceScript::SourceScript(std::string text, std::optional<std::string> origin,
                           std::map<std::string, std::string> meta)
  : text_(normalize_text(text)), origin_(std::move(origin)), meta_(std::move(meta)) {
    auto decoded = decode_utf8(text_);
    if (!decoded) throw Error("script text is not valid UTF-8");
    code_points_ = std::move(*decoded);
    id_ = sha256_hex(text_);
}

std::string slice(std::u32string_view text, Span span) {
    if (span.start > span.end || span.end > text.size())
        throw RangeError("span [" + std::to_string(span.start) + "," + std::to_string(span.end) +
                         ") outside text of length " + std::to_string(text.size()));
    return encode_utf8(text.substr(span.start, span.length()));
}

std::string slice(const SourceScript& script, Span span) {
    return slice(std::u32string_view(script.code_points()), span);
}

}  // namespace fpwasm
