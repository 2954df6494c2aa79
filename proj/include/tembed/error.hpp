#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tembed {

/// Malformed input stream; carries the byte offset at which parsing failed.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Non-finite value or singular normalization inside the numeric core.
class NumericFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape, dimension or table mismatch between cooperating objects.
class StructuralError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// The data cannot support the requested operation (e.g. too few samples).
class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An evaluation protocol precondition is violated.
class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace tembed
