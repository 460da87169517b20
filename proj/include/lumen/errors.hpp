#pragma once

#include <stdexcept>
#include <string>

namespace lumen {

// Base of every error raised by the simulator. Subclasses name the contract
// that was violated so callers (and the CLI exit-code mapping) can dispatch.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DesignError : public Error { using Error::Error; };
class OutOfRangeError : public Error { using Error::Error; };
class RangeExceededError : public Error { using Error::Error; };
class DegenerateLayoutError : public Error { using Error::Error; };
class DecompositionError : public Error { using Error::Error; };
class NotApplicableError : public Error { using Error::Error; };
class CapacityError : public Error {
public:
    CapacityError(const std::string& what, int max_feasible)
        : Error(what), max_feasible_(max_feasible) {}
    [[nodiscard]] int max_feasible() const { return max_feasible_; }

private:
    int max_feasible_;
};
class ShapeError : public Error { using Error::Error; };
class DomainError : public Error { using Error::Error; };
class InfeasibleLinkError : public Error { using Error::Error; };
class DataError : public Error { using Error::Error; };
class FoldError : public Error { using Error::Error; };
class DegenerateClusterError : public Error { using Error::Error; };
class ScheduleError : public Error { using Error::Error; };
class CalibrationError : public Error { using Error::Error; };
class CapabilityError : public Error { using Error::Error; };

// Configuration / manifest problems. `field()` names the offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
    [[nodiscard]] const std::string& field() const { return field_; }

private:
    std::string field_;
};

}  // namespace lumen
