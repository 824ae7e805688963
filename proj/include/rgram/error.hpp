#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rgram {

/// Base of every error the library throws. The category maps onto the CLI's
/// exit codes (I/O errors exit 2, data and validation errors exit 3).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid UTF-8; `offset` is the byte offset of the offending sequence.
class DecodeError : public DataError {
public:
    DecodeError(std::size_t offset, const std::string& what)
        : DataError("invalid UTF-8 at byte " + std::to_string(offset) + ": " + what),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Malformed file content; `line` is 1-based, 0 when not line oriented.
class ParseError : public DataError {
public:
    ParseError(std::size_t line, const std::string& what)
        : DataError(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class VersionError : public DataError {
public:
    using DataError::DataError;
};

class ValidationError : public DataError {
public:
    using DataError::DataError;
};

class DomainError : public DataError {
public:
    using DataError::DataError;
};

class LookupError : public DataError {
public:
    using DataError::DataError;
};

}  // namespace rgram
