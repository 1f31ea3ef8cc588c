#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace survbench {

/// Failure categories raised by the library. The C API maps each one onto a
/// stable status code, so the numbering here is part of the ABI.
enum class Errc : int {
  invalid_argument = 1,
  parse = 2,
  structure = 3,
  domain = 4,
  support = 5,
  fit_failure = 6,
  selection = 7,
  bandwidth = 8,
  sampler_stall = 9,
  model = 10,
  size = 11,
  infeasible = 12,
  degenerate = 13,
  io = 14,
  summary = 15,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace survbench
