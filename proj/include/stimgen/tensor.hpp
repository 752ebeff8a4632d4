#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace stimgen {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense row-major tensor of doubles. data.size() == product(shape) always
// holds; an empty shape is a scalar with one element.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() : shape{0}, data{} {}
  Tensor(Shape s, std::vector<double> d);

  static Tensor zeros(const Shape& s);
  static Tensor full(const Shape& s, double v);
  static Tensor scalar(double v);
  static Tensor row(std::vector<double> v);  // rank-1

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  // rank-3 access, layout [d0][d1][d2]
  double& at(std::size_t i, std::size_t j, std::size_t k);
  double at(std::size_t i, std::size_t j, std::size_t k) const;

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  double item() const;  // single-element tensors only
};

// Named parameter array, the unit the optimizers and checkpoints work with.
struct NamedTensor {
  std::string name;
  Tensor value;
};

void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace stimgen
