#include "hashtag/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "hashtag/error.hpp"
#include "hashtag/rng.hpp"

namespace hashtag {

namespace {

double checked(double value) {
  if (!std::isfinite(value)) throw NumericError("gradient check: loss is not finite");
  return value;
}

}  // namespace

GradCheckReport gradient_check(const std::function<double()>& loss, ParameterSet& params,
                               const GradCheckOptions& options) {
  if (!(options.epsilon > 0.0)) throw std::invalid_argument("gradient check: epsilon must be positive");
  Rng rng(options.seed);
  GradCheckReport report;
  checked(loss());

  for (auto& param : params.all()) {
    std::vector<std::size_t> coords(param.value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.max_coords_per_tensor) {
      rng.shuffle(std::span<std::size_t>(coords));
      coords.resize(options.max_coords_per_tensor);
    }
    for (std::size_t idx : coords) {
      const double saved = param.value[idx];
      param.value[idx] = saved + options.epsilon;
      const double plus = checked(loss());
      param.value[idx] = saved - options.epsilon;
      const double minus = checked(loss());
      param.value[idx] = saved;

      const double numeric = (plus - minus) / (2.0 * options.epsilon);
      const double analytic = param.grad[idx];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.coordinates_checked;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = param.name;
        report.worst_index = idx;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace hashtag
