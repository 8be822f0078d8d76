#include "hashtag/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "hashtag/rng.hpp"

namespace hashtag {

std::size_t shape_size(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  if (std::find(shape_.begin(), shape_.end(), std::size_t{0}) != shape_.end()) {
    throw std::invalid_argument("tensor extents must be positive");
  }
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw std::invalid_argument("tensor data length does not match shape");
  }
}

Tensor Tensor::vector(std::span<const double> values) {
  return Tensor({values.size()}, std::vector<double>(values.begin(), values.end()));
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::size_t ParameterSet::add(std::string name, std::vector<std::size_t> shape) {
  if (index_.contains(name)) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  const std::size_t idx = params_.size();
  Tensor value(shape);
  Tensor grad(std::move(shape));
  index_.emplace(name, idx);
  params_.push_back(Parameter{std::move(name), std::move(value), std::move(grad)});
  return idx;
}

Parameter& ParameterSet::get(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return params_[it->second];
}

const Parameter& ParameterSet::get(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter: " + std::string(name));
  return params_[it->second];
}

bool ParameterSet::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::size_t ParameterSet::scalar_count() const {
  std::size_t total = 0;
  for (const auto& p : params_) total += p.value.size();
  return total;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

void ParameterSet::scale_grad(double factor) {
  for (auto& p : params_) {
    for (double& g : p.grad.data()) g *= factor;
  }
}

void init_xavier_uniform(Tensor& weight, Rng& rng) {
  const double fan_out = static_cast<double>(weight.rows());
  const double fan_in = static_cast<double>(weight.cols());
  init_uniform(weight, std::sqrt(6.0 / (fan_in + fan_out)), rng);
}

void init_uniform(Tensor& weight, double limit, Rng& rng) {
  for (double& v : weight.data()) v = rng.uniform(-limit, limit);
}

void matvec_acc(const Tensor& w, std::span<const double> x, std::span<double> out) {
  const std::size_t n_out = w.rows();
  const std::size_t n_in = w.cols();
  const double* row = w.data().data();
  for (std::size_t r = 0; r < n_out; ++r, row += n_in) {
    double acc = 0.0;
    for (std::size_t c = 0; c < n_in; ++c) acc += row[c] * x[c];
    out[r] += acc;
  }
}

void matvec_t_acc(const Tensor& w, std::span<const double> y, std::span<double> out) {
  const std::size_t n_out = w.rows();
  const std::size_t n_in = w.cols();
  const double* row = w.data().data();
  for (std::size_t r = 0; r < n_out; ++r, row += n_in) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    for (std::size_t c = 0; c < n_in; ++c) out[c] += row[c] * yr;
  }
}

void outer_acc(Tensor& g, std::span<const double> y, std::span<const double> x) {
  const std::size_t n_in = g.cols();
  double* row = g.data().data();
  for (std::size_t r = 0; r < g.rows(); ++r, row += n_in) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    for (std::size_t c = 0; c < n_in; ++c) row[c] += yr * x[c];
  }
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace hashtag
