#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace fpwasm {

enum class TokenType : std::uint8_t {
    EndOfInput,
    Identifier,  // includes reserved words; the parser classifies them
    Punctuator,
    Numeric,
    String,
    Template,
    RegExp,
};

struct Token {
    TokenType type = TokenType::EndOfInput;
    std::size_t start = 0;
    std::size_t end = 0;
    /// Identifier name (escapes decoded), punctuator text, or raw literal text.
    std::string value;
    bool newline_before = false;
    /// Identifier spelled with \u escapes; never a keyword.
    bool escaped = false;

    std::string string_value;
    bool lone_surrogate = false;
    double number = 0.0;
    /// Template chunk ends with a backquote rather than `${`.
    bool template_tail = false;

    bool is_punct(std::string_view p) const noexcept {
        return type == TokenType::Punctuator && value == p;
    }
    bool is_name(std::string_view n) const noexcept {
        return type == TokenType::Identifier && !escaped && value == n;
    }
};

/// On-demand ECMAScript tokenizer over code points. Regular expressions and
/// template continuations are context dependent and are produced by the
/// rescan entry points, driven by the parser.
class Lexer {
public:
    explicit Lexer(std::u32string_view source) : src_(source) {}

    Token next();
    /// Re-reads a `/` or `/=` token as a regular expression literal.
    Token rescan_regex(const Token& slash);
    /// Re-reads a `}` token as the continuation of a template literal.
    Token rescan_template(const Token& rbrace);

    std::size_t position() const noexcept { return pos_; }
    void reset(std::size_t pos) noexcept { pos_ = pos; }
    std::u32string_view source() const noexcept { return src_; }

private:
    bool skip_trivia();  // returns true if a line terminator was crossed
    Token scan_identifier(std::size_t start);
    Token scan_number(std::size_t start);
    Token scan_string(std::size_t start);
    Token scan_template_chunk(std::size_t start, std::size_t body_start);
    Token scan_punctuator(std::size_t start);
    char32_t scan_escape_in_identifier();
    [[noreturn]] void fail(const std::string& message, std::size_t at) const;

    char32_t peek(std::size_t ahead = 0) const noexcept {
        return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : U'\0';
    }
    bool at_end(std::size_t ahead = 0) const noexcept { return pos_ + ahead >= src_.size(); }

    std::u32string_view src_;
    std::size_t pos_ = 0;
};

bool is_line_terminator(char32_t c) noexcept;
bool is_whitespace(char32_t c) noexcept;
bool is_identifier_start(char32_t c) noexcept;
bool is_identifier_part(char32_t c) noexcept;

/// True for names usable as plain identifiers (not reserved words).
bool is_reserved_word(std::string_view name) noexcept;

}  // namespace fpwasm
