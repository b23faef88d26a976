#pragma once

#include <stdexcept>
#include <string>

namespace poseagent {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Point set too small or rank-deficient for a rigid fit.
struct DegenerateInput : Error {
    explicit DegenerateInput(const std::string& what) : Error(what) {}
};

/// Hypothesis sampling could not produce a non-degenerate pose.
struct SamplingExhausted : Error {
    explicit SamplingExhausted(const std::string& what) : Error(what) {}
};

/// A configuration value is outside its documented range.
struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Softmax selection requested over an empty action set.
struct EmptyActionSet : Error {
    explicit EmptyActionSet(const std::string& what) : Error(what) {}
};

/// Parameter/gradient vector sizes disagree.
struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& what) : Error(what) {}
};

}  // namespace poseagent
