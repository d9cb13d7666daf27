#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace roving {

enum class Errc {
    InvalidSpec,
    RowSumExceedsOne,
    AbsorbingRouting,
    NoExternalArrivals,
    NegativeParameter,
    SingularSystem,
    UnstableLoad,
    NegativeInput,
    IndexOutOfRange,
    UOutOfRange,
    EmptyPath,
    ElapsedFractionOverflow,
    DegenerateDelta,
    DegenerateSigma,
    DeadQueue,
    LoadOutOfRange,
    NonGatedDiscipline,
    NonPoissonArrivals,
    DegenerateShape,
    UnstableDetected,
    UnknownPreset,
    ConfigError,
    UnroutedHop,
    FullCycleHop,
};

constexpr std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::InvalidSpec: return "InvalidSpec";
        case Errc::RowSumExceedsOne: return "RowSumExceedsOne";
        case Errc::AbsorbingRouting: return "AbsorbingRouting";
        case Errc::NoExternalArrivals: return "NoExternalArrivals";
        case Errc::NegativeParameter: return "NegativeParameter";
        case Errc::SingularSystem: return "SingularSystem";
        case Errc::UnstableLoad: return "UnstableLoad";
        case Errc::NegativeInput: return "NegativeInput";
        case Errc::IndexOutOfRange: return "IndexOutOfRange";
        case Errc::UOutOfRange: return "UOutOfRange";
        case Errc::EmptyPath: return "EmptyPath";
        case Errc::ElapsedFractionOverflow: return "ElapsedFractionOverflow";
        case Errc::DegenerateDelta: return "DegenerateDelta";
        case Errc::DegenerateSigma: return "DegenerateSigma";
        case Errc::DeadQueue: return "DeadQueue";
        case Errc::LoadOutOfRange: return "LoadOutOfRange";
        case Errc::NonGatedDiscipline: return "NonGatedDiscipline";
        case Errc::NonPoissonArrivals: return "NonPoissonArrivals";
        case Errc::DegenerateShape: return "DegenerateShape";
        case Errc::UnstableDetected: return "UnstableDetected";
        case Errc::UnknownPreset: return "UnknownPreset";
        case Errc::ConfigError: return "ConfigError";
        case Errc::UnroutedHop: return "UnroutedHop";
        case Errc::FullCycleHop: return "FullCycleHop";
    }
    return "Unknown";
}

/// Every failure in the library is reported as an `Error` carrying a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string &what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

    /// Degeneracies of the limit laws, as opposed to bad input.
    [[nodiscard]] bool numerical() const noexcept {
        return code_ == Errc::DegenerateDelta || code_ == Errc::DegenerateSigma ||
               code_ == Errc::DegenerateShape || code_ == Errc::SingularSystem ||
               code_ == Errc::ElapsedFractionOverflow || code_ == Errc::UnstableDetected;
    }

private:
    Errc code_;
};

/// Non-fatal condition attached to a result.
struct Warning {
    Errc code;
    std::string message;
};

using Warnings = std::vector<Warning>;

}  // namespace roving
