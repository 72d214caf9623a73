#pragma once

#include <functional>
#include <string>
#include <vector>

#include "migate/autograd.hpp"

namespace migate {

struct GradCheckEntry {
  std::string param;
  size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  bool pass = false;
  double max_rel_err = 0.0;
  GradCheckEntry worst;
  size_t checked = 0;
};

// f: evaluates the scalar loss at the given parameter values.
// g: returns the analytic gradient per parameter (same shapes).
// Central differences (f(th+eps) - f(th-eps)) / 2eps per entry; relative
// error uses |a - n| / max(1, |a|, |n|) so near-zero gradients are compared
// absolutely. Throws NumericError if the loss is non-finite at any probe,
// naming the parameter entry being perturbed.
using ScalarFn = std::function<double(const std::vector<Tensor>&)>;
using GradFn = std::function<std::vector<Tensor>(const std::vector<Tensor>&)>;

GradCheckReport grad_check(const ScalarFn& f, const GradFn& g,
                           const std::vector<Tensor>& params,
                           const std::vector<std::string>& names, double eps,
                           double tol);

// Convenience wrapper for losses expressible as one graph: the builder maps
// leaf vars over `params` to a scalar var.
using GraphFn = std::function<Var(const std::vector<Var>&)>;

GradCheckReport grad_check_graph(const GraphFn& build,
                                 const std::vector<Tensor>& params,
                                 const std::vector<std::string>& names,
                                 double eps, double tol);

}  // namespace migate
