#include "fpwasm/lexer.hpp"

#include "fpwasm/errors.hpp"
#include "fpwasm/text.hpp"

#include <array>
#include <cmath>
#include <cstdlib>

namespace fpwasm {

bool is_line_terminator(char32_t c) noexcept {
    return c == U'\n' || c == U'\r' || c == 0x2028 || c == 0x2029;
}

bool is_whitespace(char32_t c) noexcept {
    switch (c) {
    case U'\t': case 0x0B: case 0x0C: case U' ': case 0xA0: case 0xFEFF: case 0x1680:
    case 0x202F: case 0x205F: case 0x3000:
        return true;
    default:
        return c >= 0x2000 && c <= 0x200A;
    }
}

// Non-ASCII code points are accepted as identifier characters unless they are
// whitespace or line terminators; the corpus never relies on finer Unicode
// property distinctions.
bool is_identifier_start(char32_t c) noexcept {
    if (c < 0x80)
        return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || c == U'$' || c == U'_';
    return !is_whitespace(c) && !is_line_terminator(c);
}

bool is_identifier_part(char32_t c) noexcept {
    if (c < 0x80) return is_identifier_start(c) || (c >= U'0' && c <= U'9');
    return c == 0x200C || c == 0x200D || is_identifier_start(c);
}

bool is_reserved_word(std::string_view name) noexcept {
    static constexpr std::array<std::string_view, 36> words = {
        "break",  "case",   "catch",  "class",  "const",    "continue", "debugger", "default", "delete",
        "do",     "else",   "export", "extends", "finally", "for",      "function", "if",      "import",
        "in",     "instanceof", "new", "return", "super",   "switch",   "this",     "throw",   "try",
        "typeof", "var",    "void",   "while",  "with",     "null",     "true",     "false",   "enum"};
    for (auto w : words)
        if (w == name) return true;
    return false;
}

namespace {

bool is_decimal(char32_t c) { return c >= U'0' && c <= U'9'; }

int hex_value(char32_t c) {
    if (c >= U'0' && c <= U'9') return static_cast<int>(c - U'0');
    if (c >= U'a' && c <= U'f') return static_cast<int>(c - U'a' + 10);
    if (c >= U'A' && c <= U'F') return static_cast<int>(c - U'A' + 10);
    return -1;
}

}  // namespace

void Lexer::fail(const std::string& message, std::size_t at) const { throw ParseError(message, at); }

bool Lexer::skip_trivia() {
    bool newline = false;
    while (!at_end()) {
        const char32_t c = peek();
        if (is_whitespace(c)) {
            ++pos_;
        } else if (is_line_terminator(c)) {
            newline = true;
            ++pos_;
        } else if (c == U'/' && peek(1) == U'/') {
            pos_ += 2;
            while (!at_end() && !is_line_terminator(peek())) ++pos_;
        } else if (c == U'/' && peek(1) == U'*') {
            const std::size_t open = pos_;
            pos_ += 2;
            for (;;) {
                if (at_end()) fail("unterminated comment", open);
                if (peek() == U'*' && peek(1) == U'/') {
                    pos_ += 2;
                    break;
                }
                if (is_line_terminator(peek())) newline = true;
                ++pos_;
            }
        } else {
            break;
        }
    }
    return newline;
}

Token Lexer::next() {
    const bool newline = skip_trivia();
    Token tok;
    if (at_end()) {
        tok.type = TokenType::EndOfInput;
        tok.start = tok.end = pos_;
        tok.newline_before = newline;
        return tok;
    }
    const std::size_t start = pos_;
    const char32_t c = peek();
    if (is_identifier_start(c) || c == U'\\')
        tok = scan_identifier(start);
    else if (is_decimal(c) || (c == U'.' && is_decimal(peek(1))))
        tok = scan_number(start);
    else if (c == U'"' || c == U'\'')
        tok = scan_string(start);
    else if (c == U'`') {
        ++pos_;
        tok = scan_template_chunk(start, pos_);
    } else
        tok = scan_punctuator(start);
    tok.newline_before = newline;
    return tok;
}

char32_t Lexer::scan_escape_in_identifier() {
    const std::size_t at = pos_;
    if (peek() != U'\\' || peek(1) != U'u') fail("invalid identifier escape", at);
    pos_ += 2;
    char32_t cp = 0;
    if (peek() == U'{') {
        ++pos_;
        int digits = 0;
        while (!at_end() && peek() != U'}') {
            const int h = hex_value(peek());
            if (h < 0) fail("invalid unicode escape", at);
            cp = cp * 16 + static_cast<char32_t>(h);
            if (cp > 0x10FFFF) fail("unicode escape out of range", at);
            ++pos_;
            ++digits;
        }
        if (at_end() || digits == 0) fail("invalid unicode escape", at);
        ++pos_;
    } else {
        for (int i = 0; i < 4; ++i) {
            const int h = hex_value(peek());
            if (h < 0) fail("invalid unicode escape", at);
            cp = cp * 16 + static_cast<char32_t>(h);
            ++pos_;
        }
    }
    return cp;
}

Token Lexer::scan_identifier(std::size_t start) {
    Token tok;
    tok.type = TokenType::Identifier;
    tok.start = start;
    bool first = true;
    while (!at_end()) {
        char32_t c = peek();
        if (c == U'\\') {
            c = scan_escape_in_identifier();
            if (first ? !is_identifier_start(c) : !is_identifier_part(c))
                fail("invalid identifier escape", start);
            tok.escaped = true;
            append_utf8(tok.value, c);
        } else if (first ? is_identifier_start(c) : is_identifier_part(c)) {
            append_utf8(tok.value, c);
            ++pos_;
        } else {
            break;
        }
        first = false;
    }
    tok.end = pos_;
    return tok;
}

Token Lexer::scan_number(std::size_t start) {
    Token tok;
    tok.type = TokenType::Numeric;
    tok.start = start;
    auto radix_digits = [&](int radix) {
        double value = 0;
        int count = 0;
        while (!at_end()) {
            const int h = hex_value(peek());
            if (h < 0 || h >= radix) break;
            value = value * radix + h;
            ++pos_;
            ++count;
        }
        if (count == 0) fail("missing digits in numeric literal", start);
        return value;
    };
    const char32_t c0 = peek();
    const char32_t c1 = peek(1);
    if (c0 == U'0' && (c1 == U'x' || c1 == U'X')) {
        pos_ += 2;
        tok.number = radix_digits(16);
    } else if (c0 == U'0' && (c1 == U'o' || c1 == U'O')) {
        pos_ += 2;
        tok.number = radix_digits(8);
    } else if (c0 == U'0' && (c1 == U'b' || c1 == U'B')) {
        pos_ += 2;
        tok.number = radix_digits(2);
    } else {
        bool legacy_octal = c0 == U'0' && is_decimal(c1);
        if (legacy_octal) {
            std::size_t p = pos_ + 1;
            while (p < src_.size() && is_decimal(src_[p])) {
                if (src_[p] >= U'8') legacy_octal = false;
                ++p;
            }
        }
        if (legacy_octal) {
            ++pos_;
            tok.number = radix_digits(8);
        } else {
            std::string ascii;
            while (!at_end() && is_decimal(peek())) ascii.push_back(static_cast<char>(peek())), ++pos_;
            if (peek() == U'.') {
                ascii.push_back('.');
                ++pos_;
                while (!at_end() && is_decimal(peek())) ascii.push_back(static_cast<char>(peek())), ++pos_;
            }
            if (peek() == U'e' || peek() == U'E') {
                ascii.push_back('e');
                ++pos_;
                if (peek() == U'+' || peek() == U'-') ascii.push_back(static_cast<char>(peek())), ++pos_;
                if (!is_decimal(peek())) fail("missing exponent digits", start);
                while (!at_end() && is_decimal(peek())) ascii.push_back(static_cast<char>(peek())), ++pos_;
            }
            tok.number = std::strtod(ascii.c_str(), nullptr);
        }
    }
    if (!at_end() && (is_identifier_start(peek()) || is_decimal(peek())))
        fail("identifier directly after number", pos_);
    tok.end = pos_;
    tok.value = encode_utf8(src_.substr(start, pos_ - start));
    return tok;
}

Token Lexer::scan_string(std::size_t start) {
    Token tok;
    tok.type = TokenType::String;
    tok.start = start;
    const char32_t quote = peek();
    ++pos_;
    char32_t pending_high = 0;  // unpaired high surrogate from an escape
    auto flush_high = [&] {
        if (pending_high) {
            append_utf8(tok.string_value, pending_high);
            tok.lone_surrogate = true;
            pending_high = 0;
        }
    };
    auto emit = [&](char32_t cp, bool from_escape) {
        if (from_escape && cp >= 0xD800 && cp <= 0xDBFF) {
            flush_high();
            pending_high = cp;
            return;
        }
        if (from_escape && cp >= 0xDC00 && cp <= 0xDFFF && pending_high) {
            cp = 0x10000 + ((pending_high - 0xD800) << 10) + (cp - 0xDC00);
            pending_high = 0;
        } else {
            flush_high();
            if (cp >= 0xD800 && cp <= 0xDFFF) tok.lone_surrogate = true;
        }
        append_utf8(tok.string_value, cp);
    };
    for (;;) {
        if (at_end()) fail("unterminated string literal", start);
        const char32_t c = peek();
        if (c == quote) {
            ++pos_;
            break;
        }
        if (c == U'\n' || c == U'\r') fail("unterminated string literal", start);
        if (c != U'\\') {
            emit(c, false);
            ++pos_;
            continue;
        }
        ++pos_;
        if (at_end()) fail("unterminated string literal", start);
        const char32_t e = peek();
        ++pos_;
        switch (e) {
        case U'n': emit(U'\n', false); break;
        case U't': emit(U'\t', false); break;
        case U'r': emit(U'\r', false); break;
        case U'b': emit(U'\b', false); break;
        case U'f': emit(U'\f', false); break;
        case U'v': emit(U'\v', false); break;
        case U'\r':
            if (peek() == U'\n') ++pos_;
            break;
        case U'\n': case 0x2028: case 0x2029:
            break;
        case U'x': {
            const int h1 = hex_value(peek());
            const int h2 = hex_value(peek(1));
            if (h1 < 0 || h2 < 0) fail("invalid hex escape", pos_ - 2);
            pos_ += 2;
            emit(static_cast<char32_t>(h1 * 16 + h2), false);
            break;
        }
        case U'u': {
            pos_ -= 2;
            const char32_t cp = scan_escape_in_identifier();
            emit(cp, true);
            break;
        }
        default:
            if (e >= U'0' && e <= U'7') {
                unsigned value = e - U'0';
                const int max_digits = e <= U'3' ? 3 : 2;
                int digits = 1;
                while (digits < max_digits && peek() >= U'0' && peek() <= U'7') {
                    value = value * 8 + (peek() - U'0');
                    ++pos_;
                    ++digits;
                }
                emit(value, false);
            } else {
                emit(e, false);
            }
        }
    }
    flush_high();
    tok.end = pos_;
    tok.value = encode_utf8(src_.substr(start, pos_ - start));
    return tok;
}

Token Lexer::scan_template_chunk(std::size_t start, std::size_t body_start) {
    Token tok;
    tok.type = TokenType::Template;
    tok.start = start;
    pos_ = body_start;
    for (;;) {
        if (at_end()) fail("unterminated template literal", start);
        const char32_t c = peek();
        if (c == U'`') {
            tok.template_tail = true;
            tok.value = encode_utf8(src_.substr(body_start, pos_ - body_start));
            ++pos_;
            break;
        }
        if (c == U'$' && peek(1) == U'{') {
            tok.value = encode_utf8(src_.substr(body_start, pos_ - body_start));
            pos_ += 2;
            break;
        }
        if (c == U'\\') ++pos_;
        ++pos_;
    }
    tok.end = pos_;
    return tok;
}

Token Lexer::rescan_template(const Token& rbrace) {
    return scan_template_chunk(rbrace.start, rbrace.start + 1);
}

Token Lexer::rescan_regex(const Token& slash) {
    Token tok;
    tok.type = TokenType::RegExp;
    tok.start = slash.start;
    tok.newline_before = slash.newline_before;
    pos_ = slash.start + 1;
    bool in_class = false;
    for (;;) {
        if (at_end() || is_line_terminator(peek())) fail("unterminated regular expression", slash.start);
        const char32_t c = peek();
        ++pos_;
        if (c == U'\\') {
            if (at_end() || is_line_terminator(peek())) fail("unterminated regular expression", slash.start);
            ++pos_;
        } else if (c == U'[') {
            in_class = true;
        } else if (c == U']') {
            in_class = false;
        } else if (c == U'/' && !in_class) {
            break;
        }
    }
    while (!at_end() && is_identifier_part(peek())) ++pos_;
    tok.end = pos_;
    tok.value = encode_utf8(src_.substr(tok.start, tok.end - tok.start));
    return tok;
}

Token Lexer::scan_punctuator(std::size_t start) {
    static constexpr std::array<std::u32string_view, 50> puncts = {
        U">>>=", U"...", U"===", U"!==", U"**=", U"<<=", U">>=", U">>>", U"=>", U"==", U"!=", U"<=",
        U">=",   U"&&",  U"||",  U"++",  U"--",  U"<<",  U">>",  U"+=",  U"-=", U"*=", U"/=", U"%=",
        U"&=",   U"|=",  U"^=",  U"**",  U"{",   U"}",   U"(",   U")",   U"[",  U"]",  U";",  U",",
        U"<",    U">",   U"+",   U"-",   U"*",   U"/",   U"%",   U"&",   U"|",  U"^",  U"!",  U"~",
        U"?",    U":"};
    const auto rest = src_.substr(start);
    for (auto p : puncts) {
        if (rest.substr(0, p.size()) == p) {
            Token tok;
            tok.type = TokenType::Punctuator;
            tok.start = start;
            pos_ = start + p.size();
            tok.end = pos_;
            tok.value = encode_utf8(p);
            return tok;
        }
    }
    if (rest.front() == U'=' || rest.front() == U'.') {
        Token tok;
        tok.type = TokenType::Punctuator;
        tok.start = start;
        pos_ = start + 1;
        tok.end = pos_;
        tok.value = rest.front() == U'=' ? "=" : ".";
        return tok;
    }
    fail("unexpected character", start);
}

}  // namespace fpwasm
