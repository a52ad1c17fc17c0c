#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace prism::testutil {

// Central finite differences as the independent gradient oracle: for every
// scalar coordinate of every parameter, perturb by +/-h, rebuild the forward
// pass, and compare the two-sided slope against the recorded gradient.
struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // "param[i]" of the worst coordinate
  int checked = 0;
};

// `forward` must rebuild the scalar loss from the current parameter values.
inline GradCheckResult finite_difference_check(ParamStore& params,
                                               const std::function<double()>& forward,
                                               double h = 1e-5, double denom_floor = 1e-8) {
  // Record analytic gradients first so perturbed passes cannot disturb them.
  std::vector<Value> analytic;
  for (const auto& p : params.all()) analytic.push_back(p->grad);

  GradCheckResult result;
  for (size_t pi = 0; pi < params.all().size(); ++pi) {
    Parameter& p = *params.all()[pi];
    for (size_t i = 0; i < p.value.data.size(); ++i) {
      const double keep = p.value.data[i];
      p.value.data[i] = keep + h;
      const double up = forward();
      p.value.data[i] = keep - h;
      const double down = forward();
      p.value.data[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double an = analytic[pi].data[i];
      const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), denom_floor});
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst = p.name + "[" + std::to_string(i) + "]";
      }
      ++result.checked;
    }
  }
  return result;
}

inline bool close(double a, double b, double tol = 1e-12) { return std::abs(a - b) <= tol; }

}  // namespace prism::testutil
