#include "dosegp/slice.hpp"

#include <cmath>

#include "dosegp/errors.hpp"

namespace dosegp {

double slice_sample(const std::function<double(double)>& log_density,
                    double current, double width, int max_stepout,
                    RandomStream& rng) {
  if (!(width > 0.0)) throw InputError("slice: width must be positive");
  const double lf0 = log_density(current);
  if (!std::isfinite(lf0))
    throw InputError("slice: log density not finite at the current point");

  // Vertical level: log f(x0) + log U, with U in (0, 1].
  const double log_y = lf0 + std::log(1.0 - rng.uniform());

  // Step out.
  double left = current - width * rng.uniform();
  double right = left + width;
  int budget = max_stepout;
  while (budget-- > 0 && log_density(left) > log_y) left -= width;
  budget = max_stepout;
  while (budget-- > 0 && log_density(right) > log_y) right += width;

  // Shrink.
  for (int tries = 0; tries < 1000; ++tries) {
    const double x = rng.uniform(left, right);
    const double lx = log_density(x);
    if (lx > log_y) return x;
    if (x < current)
      left = x;
    else
      right = x;
    if (!(right > left)) break;
  }
  throw NumericalError("slice: shrinkage failed to find an acceptable point");
}

}  // namespace dosegp
