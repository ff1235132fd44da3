#pragma once

#include <stdexcept>
#include <string>

namespace ppt {

// Failure classes the CLI maps onto distinct exit codes. Precondition
// violations inside the numeric and compression kernels throw
// std::invalid_argument / std::out_of_range instead.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class WeightsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ScheduleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite activation or otherwise pathological numeric state.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ppt
