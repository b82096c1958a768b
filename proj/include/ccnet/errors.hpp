#pragma once

#include <stdexcept>
#include <string>

namespace ccnet {

// Root of every error thrown by the library. `kind()` is a stable tag the CLI
// and tests can match on without parsing messages.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

// Invalid user input (bad parameters, malformed files). Maps to CLI exit 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

class HeavyTrafficViolation : public ConfigError {
public:
    HeavyTrafficViolation(std::string identity, double residual)
        : ConfigError("HeavyTrafficViolation",
                      identity + " violated, residual " + std::to_string(residual)),
          identity_(std::move(identity)), residual_(residual) {}
    const std::string& identity() const noexcept { return identity_; }
    double residual() const noexcept { return residual_; }

private:
    std::string identity_;
    double residual_;
};

// Numerical or runtime failure inside a stage. Maps to CLI exit 3.
class NumericError : public Error {
public:
    using Error::Error;
};

// Wraps a failure with the experiment stage that produced it. `config_cause`
// marks failures rooted in invalid input.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what, bool config_cause = false)
        : Error("StageError", stage + ": " + what), stage_(std::move(stage)), config_cause_(config_cause) {}
    const std::string& stage() const noexcept { return stage_; }
    bool config_cause() const noexcept { return config_cause_; }

private:
    std::string stage_;
    bool config_cause_;
};

}  // namespace ccnet
