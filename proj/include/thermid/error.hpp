#pragma once

#include <stdexcept>
#include <string>

namespace thermid {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad command line or unknown option value. The CLI maps this to exit code 1.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Malformed input data, schema mismatch or violated precondition on data.
class DataError : public Error {
public:
    using Error::Error;
};

/// Failure inside the subspace identification, tagged with the stage that failed.
class IdentificationError : public Error {
public:
    enum class Stage { input_check, decomposition, order_selection, regression, gain };

    IdentificationError(Stage stage, const std::string& what)
        : Error(std::string(stage_name(stage)) + ": " + what), stage_(stage) {}

    Stage stage() const noexcept { return stage_; }

    /// Same stage, message prefixed with `context` (e.g. "fold 3: ").
    IdentificationError with_context(const std::string& context) const {
        return IdentificationError(stage_, context + what(), Raw{});
    }

    static const char* stage_name(Stage s) noexcept {
        switch (s) {
        case Stage::input_check: return "input check";
        case Stage::decomposition: return "QR decomposition";
        case Stage::order_selection: return "order selection";
        case Stage::regression: return "state regression";
        case Stage::gain: return "Kalman gain";
        }
        return "unknown";
    }

private:
    struct Raw {};
    IdentificationError(Stage stage, const std::string& message, Raw)
        : Error(message), stage_(stage) {}

    Stage stage_;
};

} // namespace thermid
