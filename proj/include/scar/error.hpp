#pragma once

#include <stdexcept>
#include <string>

namespace scar {

// Numeric values double as CLI exit codes.
enum class ErrorKind : int {
    Config = 2,
    Solver = 3,
    Analysis = 4,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Solver: return "solver";
    case ErrorKind::Analysis: return "analysis";
    }
    return "unknown";
}

} // namespace scar
