#include "amip/error.hpp"

namespace amip {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Schema: return "schema";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Config: return "config";
        case ErrorKind::Bounds: return "bounds";
        case ErrorKind::DegenerateDesign: return "degenerate-design";
        case ErrorKind::InsufficientData: return "insufficient-data";
        case ErrorKind::DegenerateSubset: return "degenerate-subset";
        case ErrorKind::WeakInstrument: return "weak-instrument";
        case ErrorKind::SingularJacobian: return "singular-jacobian";
        case ErrorKind::SolverFailure: return "solver-failure";
        case ErrorKind::MissingGradient: return "missing-gradient";
        case ErrorKind::AlphaTooSmall: return "alpha-too-small";
        case ErrorKind::EnumerationTooLarge: return "enumeration-too-large";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

bool Error::is_usage_error() const noexcept {
    switch (kind_) {
        case ErrorKind::Schema:
        case ErrorKind::Parse:
        case ErrorKind::Config:
        case ErrorKind::Bounds:
        case ErrorKind::InsufficientData:
        case ErrorKind::Io:
            return true;
        default:
            return false;
    }
}

}  // namespace amip
