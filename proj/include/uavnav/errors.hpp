#ifndef UAVNAV_ERRORS_HPP
#define UAVNAV_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace uavnav {

// Caller broke a precondition (bad index, stepping a finished episode, shape mismatch).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid or unparsable configuration; message names the key and line when known.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss, gradient or activation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Corrupt, truncated or incompatible checkpoint file.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace uavnav

#endif  // UAVNAV_ERRORS_HPP
