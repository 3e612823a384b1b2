#include "spekit/report.hpp"

#include "json_io.hpp"

namespace spekit {
namespace json_io {

json fit_result(const FitResult& r) {
  json params = json::object();
  json sigmas = json::object();
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    params[r.names[i]] = number(r.params[i]);
    sigmas[r.names[i]] = number(r.sigmas[i]);
  }
  // Rows follow the order of `names`.
  json cov = json::array();
  for (Eigen::Index i = 0; i < r.covariance.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < r.covariance.cols(); ++j) row.push_back(number(r.covariance(i, j)));
    cov.push_back(std::move(row));
  }
  return json{{"model", r.model},
              {"names", r.names},
              {"params", params},
              {"sigmas", sigmas},
              {"covariance", cov},
              {"converged", r.converged},
              {"iterations", r.iterations},
              {"residual_norm", number(r.residual_norm)},
              {"chi_square", number(r.chi_square)},
              {"dof", r.dof},
              {"gradient_norm", number(r.gradient_norm)},
              {"diagnosis", r.diagnosis}};
}

json g2_params(const G2Params& p) {
  return json{{"tau1_ns", number(p.tau1)},
              {"tau2_ns", number(p.tau2)},
              {"alpha", number(p.alpha_bunching)},
              {"sigma_tau1_ns", number(p.sigma_tau1)},
              {"sigma_tau2_ns", number(p.sigma_tau2)},
              {"sigma_alpha", number(p.sigma_alpha)}};
}

json extrapolation(const LinearExtrapolation& e) {
  return json{{"intercept_per_ns", number(e.intercept)},
              {"slope_per_ns_mw", number(e.slope)},
              {"sigma_intercept_per_ns", number(e.sigma_intercept)},
              {"sigma_slope_per_ns_mw", number(e.sigma_slope)},
              {"covariance", number(e.covariance)},
              {"weighted", e.weighted}};
}

}  // namespace json_io

std::string fit_result_json(const FitResult& result, int indent) {
  return json_io::fit_result(result).dump(indent);
}

}  // namespace spekit
