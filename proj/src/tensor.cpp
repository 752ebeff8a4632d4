#include "stimgen/tensor.hpp"

#include <cmath>
#include <utility>

#include "stimgen/errors.hpp"

namespace stimgen {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  out += "]";
  return out;
}

Tensor::Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  if (data.size() != shape_numel(shape)) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
}

Tensor Tensor::zeros(const Shape& s) {
  Tensor t;
  t.shape = s;
  t.data.assign(shape_numel(s), 0.0);
  return t;
}

Tensor Tensor::full(const Shape& s, double v) {
  Tensor t;
  t.shape = s;
  t.data.assign(shape_numel(s), v);
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.shape = {1};
  t.data = {v};
  return t;
}

Tensor Tensor::row(std::vector<double> v) {
  Tensor t;
  t.shape = {v.size()};
  t.data = std::move(v);
  return t;
}

double& Tensor::at(std::size_t i, std::size_t j, std::size_t k) {
  return data[(i * shape[1] + j) * shape[2] + k];
}

double Tensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  return data[(i * shape[1] + j) * shape[2] + k];
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() needs a single-element tensor, got " + shape_str(shape));
  }
  return data[0];
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape) + " and " +
                     shape_str(b.shape) + " do not match");
  }
}

}  // namespace stimgen
