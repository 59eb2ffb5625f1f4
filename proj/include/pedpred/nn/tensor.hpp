#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pedpred/core.hpp"
#include "pedpred/random.hpp"

namespace pedpred::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + "]";
}

/// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_))
      throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                       shape_string(shape_));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Learnable tensor with its gradient buffer.
struct Parameter {
  Tensor value;
  Tensor grad;
  bool trainable = true;
  bool is_weight = true;  // weight matrices take L2 regularisation; biases do not

  Parameter() = default;
  explicit Parameter(Shape shape, bool weight = true)
      : value(shape), grad(shape), trainable(true), is_weight(weight) {}

  void zero_grad() { grad.fill(0.0); }
};

/// Name -> tensor view of a parameter set, as stored in weight archives.
using LayerParams = std::map<std::string, Tensor>;

using ParamVisitor = std::function<void(const std::string&, Parameter&)>;

inline void init_uniform(Tensor& t, double scale, Rng& rng) {
  for (auto& v : t.span()) v = rng.uniform(-scale, scale);
}

/// Collects the values of every visited parameter.
template <class Model>
LayerParams export_params(Model& model) {
  LayerParams out;
  model.visit([&](const std::string& name, Parameter& p) { out.emplace(name, p.value); });
  return out;
}

/// Copies matching tensors into the model; every model parameter must be present with its shape.
template <class Model>
void import_params(Model& model, const LayerParams& params) {
  model.visit([&](const std::string& name, Parameter& p) {
    auto it = params.find(name);
    if (it == params.end()) throw ShapeError("missing parameter '" + name + "'");
    if (it->second.shape() != p.value.shape())
      throw ShapeError("parameter '" + name + "' has shape " + shape_string(it->second.shape()) + ", expected " +
                       shape_string(p.value.shape()));
    p.value = it->second;
  });
}

template <class Model>
void zero_grads(Model& model) {
  model.visit([](const std::string&, Parameter& p) { p.zero_grad(); });
}

template <class Model>
std::size_t parameter_count(Model& model, bool trainable_only = false) {
  std::size_t n = 0;
  model.visit([&](const std::string&, Parameter& p) {
    if (!trainable_only || p.trainable) n += p.value.size();
  });
  return n;
}

}  // namespace pedpred::nn
