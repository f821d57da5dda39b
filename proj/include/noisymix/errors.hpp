#pragma once

#include <stdexcept>
#include <string>

namespace noisymix {

// Error taxonomy. Contract/config errors map to CLI exit code 1,
// acceptance-assertion failures in the theory lab to exit code 2.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct dimension_error : error {
  using error::error;
};

struct contract_error : error {
  using error::error;
};

struct config_error : error {
  using error::error;
};

struct parameter_error : error {
  using error::error;
};

struct numerical_error : error {
  using error::error;
};

struct format_error : error {
  using error::error;
};

struct sampling_error : error {
  using error::error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw contract_error(msg);
}

}  // namespace noisymix
