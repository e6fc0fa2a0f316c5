#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "srlgnn/tensor/tape.hpp"

namespace srlgnn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

/// Compares `analytic` against central differences of `eval` with respect
/// to every element of `x`. `eval` must read `x` (which is perturbed in
/// place and restored) and return the scalar objective.
template <typename T, typename Eval>
GradCheckResult compare_with_finite_differences(const Tensor<T>& analytic, Tensor<T>& x,
                                                Eval&& eval, double eps = 1e-4) {
  if (analytic.shape() != x.shape()) {
    throw ShapeError("grad_check: gradient shape " + shape_string(analytic.shape()) +
                     " vs input " + shape_string(x.shape()));
  }
  GradCheckResult result;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T saved = x[i];
    x[i] = saved + static_cast<T>(eps);
    const double up = static_cast<double>(eval());
    x[i] = saved - static_cast<T>(eps);
    const double down = static_cast<double>(eval());
    x[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("grad_check: non-finite objective at element " + std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * eps);
    const double err = relative_error(static_cast<double>(analytic[i]), numeric);
    if (err > result.max_rel_error || i == 0) {
      result = {err, i, static_cast<double>(analytic[i]), numeric};
    }
  }
  return result;
}

/// Checks the tape gradient of a scalar-valued `f(tape, x)` at `x`.
template <typename T>
GradCheckResult grad_check(const std::function<Var<T>(Tape<T>&, Var<T>)>& f, Tensor<T> x,
                           double eps = 1e-4) {
  Tensor<T> analytic;
  {
    Tape<T> tape;
    auto in = tape.variable(x);
    auto out = f(tape, in);
    tape.backward(out);
    analytic = tape.grad(in);
  }
  return compare_with_finite_differences(
      analytic, x,
      [&] {
        Tape<T> tape;
        return f(tape, tape.constant(x)).value()[0];
      },
      eps);
}

}  // namespace srlgnn
