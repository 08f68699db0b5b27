#ifndef MOPAC_ERRORS_HPP
#define MOPAC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mopac {

// Precondition or shape violation at a module boundary.
class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& msg) : std::logic_error(msg) {}
};

// Non-finite losses/gradients during optimization.
class TrainingDivergence : public std::runtime_error {
public:
    explicit TrainingDivergence(const std::string& msg) : std::runtime_error(msg) {}
};

class InsufficientData : public std::runtime_error {
public:
    explicit InsufficientData(const std::string& msg) : std::runtime_error(msg) {}
};

class EmptyBufferError : public std::runtime_error {
public:
    explicit EmptyBufferError(const std::string& msg) : std::runtime_error(msg) {}
};

class EnvironmentFault : public std::runtime_error {
public:
    explicit EnvironmentFault(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigurationError : public std::runtime_error {
public:
    explicit ConfigurationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Model rollout produced a non-finite prediction and was abandoned.
class RolloutAborted : public std::runtime_error {
public:
    explicit RolloutAborted(const std::string& msg) : std::runtime_error(msg) {}
};

// Exact DP asked for a problem too large to enumerate.
class ScenarioSizeError : public std::runtime_error {
public:
    explicit ScenarioSizeError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace mopac

#endif
