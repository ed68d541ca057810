#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nilm {

enum class ErrorKind {
    DimensionMismatch,
    InvalidArgument,
    Parse,
    Io,
    CorruptFile,
    VersionMismatch,
    NoPositiveSamples,
    SingleClass,
    GradientCheck,
};

std::string_view to_string(ErrorKind kind);

// Every failure the library reports carries a kind so callers (and the CLI)
// can branch on it without parsing the message.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace nilm
