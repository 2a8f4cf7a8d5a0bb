#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace caz {

enum class ErrorKind {
    Validation,
    Format,
    Io,
    DegenerateDispersion,
    DegenerateDirection,
    NoAllocationDetected,
    NoHandoffFound,
    SingleRegion,
    NoValidFractions,
    DimensionMismatch,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Validation: return "ValidationError";
    case ErrorKind::Format: return "FormatError";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::DegenerateDispersion: return "DegenerateDispersion";
    case ErrorKind::DegenerateDirection: return "DegenerateDirection";
    case ErrorKind::NoAllocationDetected: return "NoAllocationDetected";
    case ErrorKind::NoHandoffFound: return "NoHandoffFound";
    case ErrorKind::SingleRegion: return "SingleRegion";
    case ErrorKind::NoValidFractions: return "NoValidFractions";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    }
    return "Error";
}

// Degenerate-computation errors map to CLI exit code 3; everything else that
// is about the input data maps to 2.
constexpr bool is_degenerate(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::DegenerateDispersion:
    case ErrorKind::DegenerateDirection:
    case ErrorKind::NoAllocationDetected:
    case ErrorKind::NoHandoffFound:
    case ErrorKind::SingleRegion:
    case ErrorKind::NoValidFractions:
        return true;
    default:
        return false;
    }
}

// Single exception type for the library. `what()` is "<Kind>: <detail>" so
// the kind name is always visible in diagnostics.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& detail, std::optional<std::size_t> layer = std::nullopt)
        : std::runtime_error(format(kind, detail, layer)), kind_(kind), detail_(detail), layer_(layer) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }
    std::optional<std::size_t> layer() const noexcept { return layer_; }

    // Re-raise with the offending layer index attached.
    Error at_layer(std::size_t layer) const { return Error(kind_, detail_, layer); }

private:
    static std::string format(ErrorKind kind, const std::string& detail, std::optional<std::size_t> layer) {
        std::string msg(to_string(kind));
        if (layer) msg += " at layer " + std::to_string(*layer);
        if (!detail.empty()) msg += ": " + detail;
        return msg;
    }

    ErrorKind kind_;
    std::string detail_;
    std::optional<std::size_t> layer_;
};

// Shared degeneracy threshold for every denominator in the library.
inline constexpr double kDegenerateEps = 1e-12;

} // namespace caz
