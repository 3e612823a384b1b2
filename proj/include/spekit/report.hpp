#pragma once

// JSON serialization of fit results. Keys: model, params, sigmas,
// covariance, converged, iterations, plus residual_norm, chi_square, dof,
// gradient_norm and diagnosis. Non-finite numbers are written as null.

#include <string>

#include "spekit/fitters.hpp"

namespace spekit {

std::string fit_result_json(const FitResult& result, int indent = 2);

}  // namespace spekit
