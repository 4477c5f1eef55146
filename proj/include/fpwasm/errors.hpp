#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fpwasm {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Syntax outside the supported ES2017 script grammar. `offset` is a code
/// point index into the input.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t offset)
      : Error(message + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class OversizeError : public Error {
public:
    explicit OversizeError(std::size_t byte_len)
      : Error("script of " + std::to_string(byte_len) + " bytes exceeds the intake limit"),
        byte_len_(byte_len) {}

    std::size_t byte_len() const noexcept { return byte_len_; }

private:
    std::size_t byte_len_;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class EmitError : public Error {
public:
    using Error::Error;
};

/// Malformed WebAssembly binary; `offset` is the byte position of the fault.
class DecodeError : public Error {
public:
    DecodeError(const std::string& message, std::size_t offset)
      : Error(message + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// WebAssembly trap raised while interpreting FunctionIR.
class Trap : public Error {
public:
    using Error::Error;
};

class AssembleError : public Error {
public:
    using Error::Error;
};

class ExtractError : public Error {
public:
    using Error::Error;
};

class TranslatorUnavailable : public Error {
public:
    using Error::Error;
};

class HarnessUnavailable : public Error {
public:
    using Error::Error;
};

/// Harness output that is not a well-formed protocol line.
class ProtocolError : public Error {
public:
    using Error::Error;
};

class InsufficientPool : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace fpwasm
