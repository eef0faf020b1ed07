#pragma once

#include <stdexcept>
#include <string>

namespace omniflow {

// Failure classes; the CLI maps each to a distinct exit code.
enum class ErrorClass { input, config, numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& what)
        : std::runtime_error(what), class_(cls) {}

    ErrorClass error_class() const noexcept { return class_; }

private:
    ErrorClass class_;
};

struct InputError : Error {
    explicit InputError(const std::string& what) : Error(ErrorClass::input, what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorClass::config, what) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error(ErrorClass::numeric, what) {}
};

struct DimensionMismatch : InputError {
    using InputError::InputError;
};

// z_s == 1 has no catadioptric image.
struct SingularPointError : NumericError {
    using NumericError::NumericError;
};

// cos(c) <= 0 in the forward gnomonic map.
struct BehindTangentPlaneError : NumericError {
    using NumericError::NumericError;
};

struct ZeroNormError : NumericError {
    using NumericError::NumericError;
};

struct InvalidDensityError : NumericError {
    using NumericError::NumericError;
};

struct FloMagicError : InputError {
    using InputError::InputError;
};

struct FloTruncatedError : InputError {
    using InputError::InputError;
};

struct FloDimensionError : InputError {
    using InputError::InputError;
};

struct BackendError : NumericError {
    BackendError(int patch, const std::string& what)
        : NumericError("patch " + std::to_string(patch) + ": " + what), patch_(patch) {}

    int patch() const noexcept { return patch_; }

private:
    int patch_;
};

inline const char* to_string(ErrorClass cls) {
    switch (cls) {
    case ErrorClass::input: return "input";
    case ErrorClass::config: return "config";
    case ErrorClass::numeric: return "numeric";
    }
    return "unknown";
}

} // namespace omniflow
