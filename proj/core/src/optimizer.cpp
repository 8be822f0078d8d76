#include "hashtag/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "hashtag/error.hpp"

namespace hashtag {

void AdamOptimizer::step(ParameterSet& params) {
  for (const auto& p : params.all()) {
    if (!p.grad.all_finite()) throw NumericError("adam: non-finite gradient in " + p.name);
  }
  if (m_.empty()) {
    for (const auto& p : params.all()) {
      m_.emplace_back(p.value.shape());
      v_.emplace_back(p.value.shape());
    }
  } else if (m_.size() != params.size()) {
    throw std::invalid_argument("adam: parameter set changed between steps");
  }

  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);
  const double lr = config_.learning_rate;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    auto m = m_[k].data();
    auto v = v_[k].data();
    auto value = p.value.data();
    auto grad = p.grad.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      if (lr == 0.0) continue;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
}

}  // namespace hashtag
