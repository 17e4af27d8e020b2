#pragma once

#include <vector>

#include "proxopt/errors.hpp"
#include "proxopt/types.hpp"

namespace proxopt {

/// One logged iterate. kkt_norm is ‖F(z_k)‖; in the gradient phase it equals
/// the residual because iterates are feasible and λ = λ_x.
struct TraceRow {
  long k = 0;
  Phase phase = Phase::gpa;
  double f = 0.0;
  double residual = 0.0;
  double step_len = 0.0;
  bool descent_ok = true;
  bool residual_ineq_ok = true;
  double kkt_norm = 0.0;
  Vector x;
};

using IterationTrace = std::vector<TraceRow>;

/// Raised when an iteration budget runs out; carries the partial trace.
class MaxStepsExceeded : public Error {
 public:
  MaxStepsExceeded(const std::string& message, IterationTrace trace)
      : Error(ErrorKind::MaxStepsExceeded, message), trace_(std::move(trace)) {}

  const IterationTrace& trace() const noexcept { return trace_; }

 private:
  IterationTrace trace_;
};

}  // namespace proxopt
