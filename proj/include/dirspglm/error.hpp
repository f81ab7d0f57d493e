#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dirspglm {

enum class ErrorKind {
  domain,              // non-finite or otherwise invalid argument
  boundary,            // mean outside the open support interval
  degenerate_baseline, // baseline puts mass on fewer than two points
  singular_information,
  design,              // rank-deficient or malformed design matrix
  invalid_input,       // malformed data, config, or file
  sampler,             // MCMC could not make progress
  not_converged,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Library-wide exception. `origin` names the module that raised it so the
/// CLI can surface it in its machine-readable error report.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string origin, const std::string& message)
      : std::runtime_error(message), kind_(kind), origin_(std::move(origin)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& origin() const noexcept { return origin_; }

 private:
  ErrorKind kind_;
  std::string origin_;
};

}  // namespace dirspglm
