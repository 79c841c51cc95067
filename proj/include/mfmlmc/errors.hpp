#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfmlmc {

/// Invalid user-supplied configuration (counts, tolerances, model parameters).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A caller broke a precondition of an internal interface (mismatched series, empty lists).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// The exact-moment oracle is undefined for the requested parameters.
class OracleError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A particle state became non-finite during time stepping.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int level, std::size_t step, std::size_t sample)
        : std::runtime_error("non-finite particle state at level " + std::to_string(level) +
                             ", step " + std::to_string(step) + ", sample " +
                             std::to_string(sample)),
          level_(level), step_(step), sample_(sample) {}

    int level() const noexcept { return level_; }
    std::size_t step() const noexcept { return step_; }
    std::size_t sample() const noexcept { return sample_; }

private:
    int level_;
    std::size_t step_;
    std::size_t sample_;
};

/// A required cached reference run does not exist on disk.
class MissingReferenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mfmlmc
