#pragma once

#include "fpwasm/ast.hpp"
#include "fpwasm/source.hpp"

#include <string_view>

namespace fpwasm {

/// Parses an intake script. Throws OversizeError past the 100 KiB limit and
/// ParseError for anything outside the ES2017 script grammar (including
/// module syntax).
NodePtr parse(const SourceScript& script);

/// Parses arbitrary text without the intake size limit (used to re-parse
/// converted output).
NodePtr parse_text(std::u32string_view text);
NodePtr parse_text(std::string_view utf8);

}  // namespace fpwasm
