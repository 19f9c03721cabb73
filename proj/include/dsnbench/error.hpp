#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dsnbench {

/// Base error for everything the toolkit can reject at runtime.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Parse failure in a wire document; carries the byte offset of the defect.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t byte_offset)
        : Error(what + " (byte " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}

    std::size_t byte_offset() const { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

} // namespace dsnbench
