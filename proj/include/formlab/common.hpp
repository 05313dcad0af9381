#pragma once

#include <stdexcept>

namespace formlab {

inline constexpr const char* kVersion = "0.1.0";

/// Operational failure: solver breakdown, non-finite data, inadmissible state.
/// Precondition violations on arguments throw std::invalid_argument instead.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace formlab
