#pragma once

#include <stdexcept>
#include <string>

namespace pqa {

enum class ErrorCode {
    SyntaxError,
    UnboundVariable,
    UnguardedRecursion,
    BadProbability,
    UnknownAction,
    UnknownRegister,
    RegistryError,
    NonUnitary,
    NonProjector,
    ZeroProbabilityBranch,
    RegisterNameClash,
    RegisterMismatch,
    NotStatic,
    NotDynamic,
    IncompatibleRegistries,
    DivergenceWithoutExit,
    NotClosed,
    RecursionPresent,
    StuckTerm,
    OpenProblem,
    NoMatch,
    SideConditionFailed,
    InvalidState,
    OutOfRange,
};

const char *error_code_name(ErrorCode c);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &msg, int line = 0, int col = 0);

    ErrorCode code() const { return code_; }
    int line() const { return line_; }
    int col() const { return col_; }
    const std::string &detail() const { return detail_; }

private:
    ErrorCode code_;
    int line_;
    int col_;
    std::string detail_;
};

}  // namespace pqa
