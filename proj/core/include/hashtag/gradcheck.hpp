#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "hashtag/tensor.hpp"

namespace hashtag {

struct GradCheckOptions {
  double epsilon = 1e-5;
  // Coordinates sampled per tensor; tensors at or below this size are checked exhaustively.
  std::size_t max_coords_per_tensor = 200;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
};

/// Compares the gradients already stored in `params` against central
/// differences of `loss`. The loss callback must read parameter values from
/// `params` and must not touch the stored gradients. Values are restored
/// exactly after each probe.
///
/// Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-8).
/// Throws NumericError if the loss is ever non-finite.
GradCheckReport gradient_check(const std::function<double()>& loss, ParameterSet& params,
                               const GradCheckOptions& options = {});

}  // namespace hashtag
