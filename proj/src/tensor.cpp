#include "fedleak/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace fedleak {

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool Tensor::finite() const {
  return std::all_of(data.begin(), data.end(), [](float v) { return std::isfinite(v); });
}

std::string Tensor::shape_str() const {
  std::string s;
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s;
}

double frobenius_norm(const Tensor& t) {
  double acc = 0.0;
  for (float v : t.data) acc += static_cast<double>(v) * v;
  return std::sqrt(acc);
}

double frobenius_diff(const Tensor& a, const Tensor& b) {
  require(a.shape == b.shape, ErrorKind::invalid_input, "frobenius_diff shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = static_cast<double>(a.data[i]) - b.data[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

void ModelWeights::add(const std::string& name, Tensor t) {
  require(!has(name), ErrorKind::invalid_input, "duplicate layer id: " + name);
  names_.push_back(name);
  items_.emplace_back(name, std::move(t));
}

bool ModelWeights::has(const std::string& name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const Tensor& ModelWeights::at(const std::string& name) const {
  for (const auto& [n, t] : items_)
    if (n == name) return t;
  fail(ErrorKind::invalid_input, "unknown layer id: " + name);
}

Tensor& ModelWeights::at(const std::string& name) {
  for (auto& [n, t] : items_)
    if (n == name) return t;
  fail(ErrorKind::invalid_input, "unknown layer id: " + name);
}

size_t ModelWeights::numel() const {
  size_t n = 0;
  for (const auto& [name, t] : items_) n += t.numel();
  return n;
}

bool ModelWeights::finite() const {
  return std::all_of(items_.begin(), items_.end(),
                     [](const auto& it) { return it.second.finite(); });
}

bool ModelWeights::same_layout(const ModelWeights& other) const {
  if (names_ != other.names_) return false;
  for (size_t i = 0; i < items_.size(); ++i)
    if (items_[i].second.shape != other.items_[i].second.shape) return false;
  return true;
}

ModelWeights weighted_sum(const std::vector<const ModelWeights*>& inputs,
                          const std::vector<double>& coeffs) {
  require(!inputs.empty() && inputs.size() == coeffs.size(), ErrorKind::aggregation,
          "weighted_sum needs matching inputs and coefficients");
  for (const auto* w : inputs)
    require(w->same_layout(*inputs[0]), ErrorKind::aggregation, "weighted_sum layout mismatch");
  ModelWeights out;
  for (const auto& [name, t0] : inputs[0]->items()) {
    Tensor acc(t0.shape);
    for (size_t i = 0; i < inputs.size(); ++i) {
      const auto& src = inputs[i]->at(name).data;
      double c = coeffs[i];
      for (size_t e = 0; e < acc.data.size(); ++e)
        acc.data[e] = static_cast<float>(acc.data[e] + c * src[e]);
    }
    out.add(name, std::move(acc));
  }
  require(out.finite(), ErrorKind::aggregation, "weighted_sum produced non-finite values");
  return out;
}

}  // namespace fedleak
