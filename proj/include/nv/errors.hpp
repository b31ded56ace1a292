#pragma once

#include <stdexcept>
#include <string>

namespace nv {

/// Rate combination with no valid steady state (e.g. population trapped
/// in the singlet because both deshelving rates vanish).
struct DegenerateModelError : std::runtime_error {
  explicit DegenerateModelError(const std::string& what) : std::runtime_error(what) {}
};

/// Calibration carries no spin contrast; none of the estimators are defined.
struct NoContrastError : std::runtime_error {
  explicit NoContrastError(const std::string& what) : std::runtime_error(what) {}
};

/// The likelihood score function has no sign change in the search bracket.
struct NoRootError : std::runtime_error {
  explicit NoRootError(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidParameterError : std::invalid_argument {
  explicit InvalidParameterError(const std::string& what) : std::invalid_argument(what) {}
};

/// Malformed on-disk data; message names the offending field / line / offset.
struct SchemaError : std::runtime_error {
  explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nv
