#pragma once

#include <functional>

#include "dosegp/rng.hpp"

namespace dosegp {

// Univariate slice sampling (stepping out, then shrinkage). The log density
// may be unnormalized; it must be finite at the current point.
double slice_sample(const std::function<double(double)>& log_density,
                    double current, double width, int max_stepout,
                    RandomStream& rng);

}  // namespace dosegp
