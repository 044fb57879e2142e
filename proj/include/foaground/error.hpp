#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace foaground {

enum class ErrorKind {
    Range,
    Shape,
    Degenerate,
    Projection,
    Config,
    Length,
    Geometry,
    Estimation,
    Numeric,
    Training,
    Format,
    Parse,
    Validation,
    Generation,
    Lookup,
    Alignment,
    Io,
    Usage,
    Input,
    Grounding,
    Evaluation,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Range: return "range";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::Degenerate: return "degenerate-input";
        case ErrorKind::Projection: return "projection";
        case ErrorKind::Config: return "configuration";
        case ErrorKind::Length: return "length";
        case ErrorKind::Geometry: return "geometry";
        case ErrorKind::Estimation: return "estimation";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::Training: return "training";
        case ErrorKind::Format: return "format";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Validation: return "validation";
        case ErrorKind::Generation: return "generation";
        case ErrorKind::Lookup: return "lookup";
        case ErrorKind::Alignment: return "alignment";
        case ErrorKind::Io: return "i/o";
        case ErrorKind::Usage: return "usage";
        case ErrorKind::Input: return "input";
        case ErrorKind::Grounding: return "grounding";
        case ErrorKind::Evaluation: return "evaluation";
    }
    return "unknown";
}

}  // namespace foaground
