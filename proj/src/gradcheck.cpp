#include "csifb/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace csifb {

namespace {

double eval_loss(const LossBuilder& build, const std::vector<Tensor*>& params) {
  Graph g;
  const VarId loss = build(g, params);
  if (g.value(loss).size() != 1) throw std::invalid_argument("grad_check: loss not scalar");
  return g.value(loss).v[0];
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& build, const std::vector<Tensor*>& params,
                           double h) {
  if (h <= 0.0) throw std::invalid_argument("grad_check: h must be positive");

  // analytic pass
  for (Tensor* p : params) p->zero_grad();
  {
    Graph g;
    const VarId loss = build(g, params);
    g.backward(loss);
  }

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.v[i];
      p.v[i] = saved + h;
      const double up = eval_loss(build, params);
      p.v[i] = saved - h;
      const double down = eval_loss(build, params);
      p.v[i] = saved;

      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p.g[i];
      const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
      const double rel = std::fabs(analytic - numeric) / denom;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_param = "param" + std::to_string(k) + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

}  // namespace csifb
