#include "pqa/error.hpp"

namespace pqa {

const char *error_code_name(ErrorCode c) {
    switch (c) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnboundVariable: return "UnboundVariable";
    case ErrorCode::UnguardedRecursion: return "UnguardedRecursion";
    case ErrorCode::BadProbability: return "BadProbability";
    case ErrorCode::UnknownAction: return "UnknownAction";
    case ErrorCode::UnknownRegister: return "UnknownRegister";
    case ErrorCode::RegistryError: return "RegistryError";
    case ErrorCode::NonUnitary: return "NonUnitary";
    case ErrorCode::NonProjector: return "NonProjector";
    case ErrorCode::ZeroProbabilityBranch: return "ZeroProbabilityBranch";
    case ErrorCode::RegisterNameClash: return "RegisterNameClash";
    case ErrorCode::RegisterMismatch: return "RegisterMismatch";
    case ErrorCode::NotStatic: return "NotStatic";
    case ErrorCode::NotDynamic: return "NotDynamic";
    case ErrorCode::IncompatibleRegistries: return "IncompatibleRegistries";
    case ErrorCode::DivergenceWithoutExit: return "DivergenceWithoutExit";
    case ErrorCode::NotClosed: return "NotClosed";
    case ErrorCode::RecursionPresent: return "RecursionPresent";
    case ErrorCode::StuckTerm: return "StuckTerm";
    case ErrorCode::OpenProblem: return "OpenProblem";
    case ErrorCode::NoMatch: return "NoMatch";
    case ErrorCode::SideConditionFailed: return "SideConditionFailed";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::OutOfRange: return "OutOfRange";
    }
    return "Unknown";
}

static std::string decorate(ErrorCode code, const std::string &msg, int line, int col) {
    std::string s = error_code_name(code);
    if (line > 0)
        s += " at " + std::to_string(line) + ":" + std::to_string(col);
    return s + ": " + msg;
}

Error::Error(ErrorCode code, const std::string &msg, int line, int col)
    : std::runtime_error(decorate(code, msg, line, col)), code_(code), line_(line), col_(col), detail_(msg) {}

}  // namespace pqa
