#pragma once

#include <stdexcept>
#include <string>

namespace chaosfork {

/// Raised when a run leaves the regime where its numerics are trustworthy:
/// a state reaching the grid edge, a diverging trajectory, a norm that drifts.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace chaosfork
