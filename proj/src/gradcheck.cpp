#include "migate/gradcheck.hpp"

#include <cmath>

namespace migate {

GradCheckReport grad_check(const ScalarFn& f, const GradFn& g,
                           const std::vector<Tensor>& params,
                           const std::vector<std::string>& names, double eps,
                           double tol) {
  std::vector<Tensor> analytic = g(params);
  if (analytic.size() != params.size())
    throw DimensionError("grad_check: gradient count mismatch");

  GradCheckReport report;
  std::vector<Tensor> probe;
  probe.reserve(params.size());
  for (const auto& p : params) probe.push_back(p.clone());

  for (size_t pi = 0; pi < params.size(); ++pi) {
    require_same_shape(params[pi], analytic[pi], "grad_check");
    std::string name = pi < names.size() ? names[pi] : "param" + std::to_string(pi);
    for (size_t i = 0; i < params[pi].size(); ++i) {
      double theta = params[pi][i];
      probe[pi].set(i, theta + eps);
      double fplus = f(probe);
      probe[pi].set(i, theta - eps);
      double fminus = f(probe);
      probe[pi].set(i, theta);
      if (!std::isfinite(fplus) || !std::isfinite(fminus))
        throw NumericError("grad_check: non-finite loss while perturbing " +
                           name + "[" + std::to_string(i) + "]");
      double numeric = (fplus - fminus) / (2.0 * eps);
      double a = analytic[pi][i];
      double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
      double rel = std::fabs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = {name, i, a, numeric, rel};
      }
    }
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

GradCheckReport grad_check_graph(const GraphFn& build,
                                 const std::vector<Tensor>& params,
                                 const std::vector<std::string>& names,
                                 double eps, double tol) {
  auto eval = [&build](const std::vector<Tensor>& p) {
    std::vector<Var> leaves;
    leaves.reserve(p.size());
    for (const auto& t : p) leaves.push_back(constant(t.clone()));
    Var root = build(leaves);
    if (root->value.size() != 1)
      throw DimensionError("grad_check: loss must be scalar");
    return root->value[0];
  };
  auto grads = [&build](const std::vector<Tensor>& p) {
    std::vector<Var> leaves;
    leaves.reserve(p.size());
    for (const auto& t : p) leaves.push_back(leaf(t.clone()));
    Var root = build(leaves);
    backward(root);
    std::vector<Tensor> out;
    out.reserve(leaves.size());
    for (auto& l : leaves)
      out.push_back(l->grad.empty() ? Tensor(l->value.shape()) : l->grad);
    return out;
  };
  return grad_check(eval, grads, params, names, eps, tol);
}

}  // namespace migate
