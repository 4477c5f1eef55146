#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace fpwasm {

/// Strict UTF-8 decode; nullopt on malformed input (overlongs, surrogates,
/// truncation).
std::optional<std::u32string> decode_utf8(std::string_view bytes);

/// Encodes code points as UTF-8. Lone surrogates are emitted as three-byte
/// sequences so that slices of parsed text round-trip.
std::string encode_utf8(std::u32string_view text);
void append_utf8(std::string& out, char32_t cp);

std::string sha256_hex(std::string_view bytes);

/// JSON-style double-quoted string literal with escapes, safe to embed in
/// script source and AssemblyScript text.
std::string quote_js_string(std::string_view utf8);

}  // namespace fpwasm
