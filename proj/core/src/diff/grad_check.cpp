#include "came/diff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace came::diff {
namespace {

double evaluate(const LossBuilder& builder) {
  Graph g(Graph::Mode::kInference);
  const double v = builder(g).value().item();
  if (!std::isfinite(v)) throw std::runtime_error("grad_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check_against(const LossBuilder& loss_builder, std::span<Parameter* const> params,
                                   std::span<const NumArray> analytic, double h, double tol) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: step h must be positive");
  if (analytic.size() != params.size()) throw std::invalid_argument("grad_check: one analytic gradient per parameter");
  evaluate(loss_builder);
  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Parameter& param = *params[p];
    for (std::size_t i = 0; i < param.value.size(); ++i) {
      const double orig = param.value[i];
      param.value[i] = orig + h;
      const double up = evaluate(loss_builder);
      param.value[i] = orig - h;
      const double down = evaluate(loss_builder);
      param.value[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p].size() == param.value.size() ? analytic[p][i] : 0.0;
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (report.checked == 1 || rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = param.name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

GradCheckReport grad_check(const LossBuilder& loss_builder, std::span<Parameter* const> params, double h, double tol) {
  for (Parameter* p : params) p->zero_grad();
  {
    Graph g;
    Var loss = loss_builder(g);
    if (!std::isfinite(loss.value().item())) throw std::runtime_error("grad_check: loss is not finite");
    g.backward(loss);
  }
  std::vector<NumArray> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);
  return grad_check_against(loss_builder, params, analytic, h, tol);
}

}  // namespace came::diff
