#pragma once

// JSON conversions shared by config and report code. Private to the library.

#include <cmath>

#include <json.hpp>

#include "spekit/fitters.hpp"
#include "spekit/kinetics.hpp"

namespace spekit::json_io {

using nlohmann::json;

/// NaN and infinities have no JSON spelling; they become null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json fit_result(const FitResult& r);
json g2_params(const G2Params& p);
json extrapolation(const LinearExtrapolation& e);

}  // namespace spekit::json_io
