#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hashtag {

class Rng;

// Dense row-major tensor of doubles. Rank 1 and 2 are the only ranks the
// models use, but the shape is kept general for serialization.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor vector(std::span<const double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_.front(); }
  // Trailing extent: columns of a matrix, length of a vector.
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return std::span<double>(data_).subspan(r * cols(), cols()); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols(), cols());
  }

  void fill(double value);
  bool all_finite() const;

  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_size(std::span<const std::size_t> shape);

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

// Named parameter collection owned by a model. Indices handed out by add()
// stay valid for the lifetime of the set.
class ParameterSet {
 public:
  std::size_t add(std::string name, std::vector<std::size_t> shape);

  Parameter& operator[](std::size_t index) { return params_[index]; }
  const Parameter& operator[](std::size_t index) const { return params_[index]; }

  Parameter& get(std::string_view name);
  const Parameter& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }

  void zero_grad();
  void scale_grad(double factor);

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// Initializers.
void init_xavier_uniform(Tensor& weight, Rng& rng);
void init_uniform(Tensor& weight, double limit, Rng& rng);

// Small dense kernels over row-major matrices. `w` is [out x in].
// out += W x
void matvec_acc(const Tensor& w, std::span<const double> x, std::span<double> out);
// out += W^T y
void matvec_t_acc(const Tensor& w, std::span<const double> y, std::span<double> out);
// g += y x^T
void outer_acc(Tensor& g, std::span<const double> y, std::span<const double> x);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace hashtag
