#include "nilm/error.hpp"

namespace nilm {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::DimensionMismatch: return "dimension-mismatch";
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Io: return "io";
        case ErrorKind::CorruptFile: return "corrupt-file";
        case ErrorKind::VersionMismatch: return "version-mismatch";
        case ErrorKind::NoPositiveSamples: return "no-positive-samples";
        case ErrorKind::SingleClass: return "single-class";
        case ErrorKind::GradientCheck: return "gradient-check";
    }
    return "unknown";
}

}  // namespace nilm
