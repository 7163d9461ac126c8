#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedleak/common.hpp"

namespace fedleak {

struct Tensor {
  std::vector<int64_t> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)), data(numel_of(shape), 0.0f) {}
  Tensor(std::vector<int64_t> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
    require(data.size() == numel_of(shape), ErrorKind::invalid_input, "tensor shape/data mismatch");
  }

  static size_t numel_of(const std::vector<int64_t>& s) {
    size_t n = 1;
    for (int64_t d : s) {
      require(d > 0, ErrorKind::invalid_input, "tensor dims must be positive");
      n *= static_cast<size_t>(d);
    }
    return n;
  }

  size_t numel() const { return data.size(); }
  bool finite() const;
  std::string shape_str() const;
};

double frobenius_norm(const Tensor& t);
double frobenius_diff(const Tensor& a, const Tensor& b);

// Named weight slabs in a fixed canonical order. Iteration order is insertion
// order, so every consumer sees the same deterministic layer sequence.
class ModelWeights {
 public:
  void add(const std::string& name, Tensor t);
  bool has(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  const std::vector<std::string>& names() const { return names_; }
  size_t size() const { return names_.size(); }
  size_t numel() const;
  bool finite() const;
  bool same_layout(const ModelWeights& other) const;

  const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  std::vector<std::pair<std::string, Tensor>>& items() { return items_; }

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
  std::vector<std::string> names_;
};

// result = sum_i coeff[i] * inputs[i], elementwise over identical layouts.
ModelWeights weighted_sum(const std::vector<const ModelWeights*>& inputs,
                          const std::vector<double>& coeffs);

}  // namespace fedleak
