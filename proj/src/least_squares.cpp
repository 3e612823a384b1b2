#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "spekit/errors.hpp"
#include "spekit/fitters.hpp"

namespace spekit {
namespace {

struct Problem {
  const Model& model;
  std::span<const DataPoint> data;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::size_t> free;  // indices of non-fixed parameters
};

double weighted_cost(const Problem& pb, const std::vector<double>& p, Eigen::VectorXd& r) {
  const std::size_t m = pb.data.size();
  r.resize(static_cast<Eigen::Index>(m));
  double cost = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& d = pb.data[i];
    const double v = (d.y - pb.model.value(d.x, p)) / d.sigma;
    r[static_cast<Eigen::Index>(i)] = v;
    cost += v * v;
  }
  return 0.5 * cost;
}

// Jacobian of the weighted model (d f_i / d p_j / sigma_i) over free params.
Eigen::MatrixXd jacobian(const Problem& pb, const std::vector<double>& p) {
  const std::size_t m = pb.data.size();
  const std::size_t n = p.size();
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(pb.free.size()));
  std::vector<double> grad(n);
  std::vector<double> work = p;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& d = pb.data[i];
    if (pb.model.gradient) {
      pb.model.gradient(d.x, p, grad);
    } else {
      for (std::size_t k : pb.free) {
        const double h = 1e-6 * std::max(std::abs(p[k]), 1e-6);
        work[k] = p[k] + h;
        const double up = pb.model.value(d.x, work);
        work[k] = p[k] - h;
        const double dn = pb.model.value(d.x, work);
        work[k] = p[k];
        grad[k] = (up - dn) / (2.0 * h);
      }
    }
    for (std::size_t c = 0; c < pb.free.size(); ++c) {
      jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = grad[pb.free[c]] / d.sigma;
    }
  }
  return jac;
}

// Largest cosine between the residual and a Jacobian column, ignoring
// components blocked by an active bound.
double scaled_gradient(const Problem& pb, const std::vector<double>& p, const Eigen::MatrixXd& jac,
                       const Eigen::VectorXd& r) {
  const double rn = r.norm();
  if (rn == 0.0) return 0.0;
  const Eigen::VectorXd g = jac.transpose() * r;
  double worst = 0.0;
  for (Eigen::Index c = 0; c < g.size(); ++c) {
    const std::size_t k = pb.free[static_cast<std::size_t>(c)];
    if (p[k] <= pb.lower[k] && g[c] < 0.0) continue;
    if (p[k] >= pb.upper[k] && g[c] > 0.0) continue;
    const double cn = jac.col(c).norm();
    if (cn == 0.0) continue;
    worst = std::max(worst, std::abs(g[c]) / (cn * rn));
  }
  return worst;
}

std::string degenerate_parameters(const Problem& pb, const Eigen::MatrixXd& normal) {
  const Eigen::Index n = normal.rows();
  std::vector<std::string> names;
  Eigen::VectorXd scale(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    scale[c] = normal(c, c) > 0.0 ? 1.0 / std::sqrt(normal(c, c)) : 0.0;
    if (normal(c, c) <= 0.0) names.push_back(pb.model.parameters[pb.free[static_cast<std::size_t>(c)]]);
  }
  if (names.empty()) {
    const Eigen::MatrixXd corr = scale.asDiagonal() * normal * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr);
    const double top = es.eigenvalues().maxCoeff();
    for (Eigen::Index e = 0; e < n; ++e) {
      if (es.eigenvalues()[e] > 1e-13 * top) continue;
      for (Eigen::Index c = 0; c < n; ++c) {
        if (std::abs(es.eigenvectors()(c, e)) > 0.2) {
          const auto& nm = pb.model.parameters[pb.free[static_cast<std::size_t>(c)]];
          if (std::find(names.begin(), names.end(), nm) == names.end()) names.push_back(nm);
        }
      }
    }
  }
  std::string out;
  for (const auto& nm : names) out += (out.empty() ? "" : ", ") + nm;
  return out;
}

void clamp_to_bounds(const Problem& pb, std::vector<double>& p) {
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::clamp(p[k], pb.lower[k], pb.upper[k]);
}

}  // namespace

std::size_t FitResult::index(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidInput("unknown fit parameter '" + name + "'");
  return static_cast<std::size_t>(it - names.begin());
}

double FitResult::value(const std::string& name) const { return params[index(name)]; }
double FitResult::sigma(const std::string& name) const { return sigmas[index(name)]; }

std::vector<double> evaluate_model(const Model& model, std::span<const double> params,
                                   std::span<const double> x) {
  std::vector<double> out;
  out.reserve(x.size());
  for (double xi : x) out.push_back(model.value(xi, params));
  return out;
}

FitResult fit_curve(const Model& model, std::span<const DataPoint> data,
                    std::span<const double> init, const Bounds& bounds,
                    const FitOptions& options) {
  const std::size_t n = model.parameters.size();
  if (init.size() != n) {
    throw InvalidInput("model '" + model.name + "' expects " + std::to_string(n) +
                       " initial values");
  }
  for (const auto& d : data) {
    if (!std::isfinite(d.x) || !std::isfinite(d.y) || !std::isfinite(d.sigma) || d.sigma <= 0.0) {
      throw InvalidInput("fit data must be finite with positive sigmas");
    }
  }

  Problem pb{model, data, {}, {}, {}};
  const double inf = std::numeric_limits<double>::infinity();
  pb.lower = bounds.lower.empty() ? std::vector<double>(n, -inf) : bounds.lower;
  pb.upper = bounds.upper.empty() ? std::vector<double>(n, inf) : bounds.upper;
  if (pb.lower.size() != n || pb.upper.size() != n) {
    throw InvalidInput("bounds size does not match the parameter count");
  }
  std::vector<double> p(init.begin(), init.end());
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(p[k])) throw InvalidInput("initial values must be finite");
    if (p[k] < pb.lower[k] || p[k] > pb.upper[k]) {
      throw InvalidInput("initial value of '" + model.parameters[k] + "' is outside its bounds");
    }
    if (pb.lower[k] < pb.upper[k]) pb.free.push_back(k);
  }
  const std::size_t nfree = pb.free.size();
  if (data.size() < nfree) {
    throw InvalidInput("model '" + model.name + "' needs at least " + std::to_string(nfree) +
                       " data points");
  }

  FitResult res;
  res.model = model.name;
  res.names = model.parameters;

  Eigen::VectorXd r;
  double cost = weighted_cost(pb, p, r);
  if (!std::isfinite(cost)) throw InvalidInput("model is not finite at the initial values");
  double lambda = 1e-3;
  bool converged = cost == 0.0 || nfree == 0;
  double gnorm = 0.0;
  int iter = 0;
  std::string diagnosis;

  while (!converged && iter < options.max_iterations) {
    const Eigen::MatrixXd jac = jacobian(pb, p);
    gnorm = scaled_gradient(pb, p, jac, r);
    if (gnorm < options.gradient_tolerance) {
      converged = true;
      break;
    }
    const Eigen::MatrixXd a = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    Eigen::VectorXd diag = a.diagonal();
    for (Eigen::Index c = 0; c < diag.size(); ++c) diag[c] = std::max(diag[c], 1e-300);

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd damped = a;
      damped.diagonal() += lambda * diag;
      const Eigen::VectorXd step = damped.ldlt().solve(g);
      std::vector<double> trial = p;
      for (std::size_t c = 0; c < nfree; ++c) {
        trial[pb.free[c]] += step[static_cast<Eigen::Index>(c)];
      }
      clamp_to_bounds(pb, trial);
      Eigen::VectorXd r_trial;
      const double cost_trial = weighted_cost(pb, trial, r_trial);
      if (std::isfinite(cost_trial) && cost_trial < cost) {
        double step_norm = 0.0;
        double p_norm = 0.0;
        for (std::size_t k : pb.free) {
          step_norm += (trial[k] - p[k]) * (trial[k] - p[k]);
          p_norm += p[k] * p[k];
        }
        const bool tiny_step =
            std::sqrt(step_norm) <= options.step_tolerance * (std::sqrt(p_norm) + options.step_tolerance);
        const bool tiny_gain = cost - cost_trial <= 1e-15 * cost;
        p = std::move(trial);
        r = std::move(r_trial);
        cost = cost_trial;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        ++iter;
        if (cost == 0.0 || tiny_step || tiny_gain) converged = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) {
          // No descent available at machine precision. A residual at the
          // rounding level of the data is an exact fit, not a stall.
          double data_cost = 0.0;
          for (const auto& d : pb.data) data_cost += 0.5 * (d.y / d.sigma) * (d.y / d.sigma);
          converged = gnorm < 1e-6 || cost <= 1e-26 * data_cost;
          if (!converged) diagnosis = "stalled: no decreasing step found";
          break;
        }
      }
    }
    if (!accepted) break;
  }
  if (!converged && diagnosis.empty()) diagnosis = "maximum iterations reached";

  // Final Jacobian for the covariance and the reported gradient.
  const Eigen::MatrixXd jac = jacobian(pb, p);
  res.gradient_norm = scaled_gradient(pb, p, jac, r);
  const Eigen::MatrixXd normal = jac.transpose() * jac;

  res.params = p;
  res.chi_square = 2.0 * cost;
  res.residual_norm = std::sqrt(res.chi_square);
  res.dof = data.size() > nfree ? data.size() - nfree : 0;
  res.iterations = iter;
  res.converged = converged;
  res.diagnosis = diagnosis;
  res.covariance = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  res.sigmas.assign(n, 0.0);

  if (nfree > 0) {
    Eigen::VectorXd scale(static_cast<Eigen::Index>(nfree));
    for (Eigen::Index c = 0; c < scale.size(); ++c) {
      scale[c] = normal(c, c) > 0.0 ? 1.0 / std::sqrt(normal(c, c)) : 0.0;
    }
    const Eigen::MatrixXd corr = scale.asDiagonal() * normal * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr);
    const double top = es.eigenvalues().maxCoeff();
    if (scale.minCoeff() == 0.0 || !(es.eigenvalues().minCoeff() > 1e-13 * top)) {
      throw FitError("singular Jacobian in model '" + model.name +
                     "': degenerate parameters: " + degenerate_parameters(pb, normal));
    }
    // Inverse through the scaled eigen-decomposition keeps it symmetric.
    const Eigen::MatrixXd inv_corr = es.eigenvectors() *
                                     es.eigenvalues().cwiseInverse().asDiagonal() *
                                     es.eigenvectors().transpose();
    Eigen::MatrixXd cov = scale.asDiagonal() * inv_corr * scale.asDiagonal();
    if (!options.absolute_sigma && res.dof > 0) cov *= res.chi_square / static_cast<double>(res.dof);
    for (std::size_t a = 0; a < nfree; ++a) {
      for (std::size_t b = 0; b < nfree; ++b) {
        res.covariance(static_cast<Eigen::Index>(pb.free[a]), static_cast<Eigen::Index>(pb.free[b])) =
            cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      }
    }
    for (std::size_t a = 0; a < nfree; ++a) {
      res.sigmas[pb.free[a]] = std::sqrt(std::max(0.0, cov(static_cast<Eigen::Index>(a),
                                                           static_cast<Eigen::Index>(a))));
    }
  }
  return res;
}

FitResult fit_curve(ModelId id, std::span<const DataPoint> data, std::span<const double> init,
                    const Bounds& bounds, const FitOptions& options) {
  return fit_curve(builtin_model(id), data, init, bounds, options);
}

}  // namespace spekit
