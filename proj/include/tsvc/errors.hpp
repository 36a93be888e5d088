#ifndef TSVC_ERRORS_HPP
#define TSVC_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace tsvc {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input: non-finite values, bad shapes, values outside the family's support.
struct InvalidInput : Error {
  explicit InvalidInput(const std::string& what) : Error(what) {}
};

// Design matrix is not of full column rank; `columns` lists the dependent columns.
struct RankDeficient : Error {
  std::vector<int> columns;
  RankDeficient(const std::string& what, std::vector<int> cols)
      : Error(what), columns(std::move(cols)) {}
};

// Invalid fitting or CI configuration (constraint sets, levels, replicate counts).
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace tsvc

#endif
