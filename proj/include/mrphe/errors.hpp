#pragma once

#include <stdexcept>
#include <string>

namespace mrphe {

// Each error category maps to one CLI exit code (see ExitCode).
enum class ExitCode : int {
  Ok = 0,
  Config = 2,
  Data = 3,
  Transport = 4,
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A caller handed an unnormalized embedding to an operation that needs unit vectors.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

struct TransportError : std::runtime_error {
  TransportError(const std::string& what, int attempts, int last_status)
      : std::runtime_error(what), attempts(attempts), last_status(last_status) {}
  int attempts;
  int last_status;  // HTTP status, or -1 when no response arrived
};

}  // namespace mrphe
