#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace irsce::tl {

// Shape of a dense tensor, up to 4 extents.
struct Shape {
  std::array<std::int64_t, 4> d{1, 1, 1, 1};
  int rank = 0;

  Shape() = default;
  Shape(std::initializer_list<std::int64_t> dims) {
    if (dims.size() > 4) throw std::invalid_argument("tensor rank > 4");
    rank = static_cast<int>(dims.size());
    int i = 0;
    for (auto v : dims) {
      if (v < 1) throw std::invalid_argument("tensor extent < 1");
      d[i++] = v;
    }
  }

  std::int64_t operator[](int i) const { return d[static_cast<size_t>(i)]; }
  std::int64_t numel() const {
    std::int64_t n = 1;
    for (int i = 0; i < rank; ++i) n *= d[static_cast<size_t>(i)];
    return rank == 0 ? 1 : n;
  }
  bool operator==(const Shape& o) const {
    if (rank != o.rank) return false;
    for (int i = 0; i < rank; ++i)
      if (d[static_cast<size_t>(i)] != o.d[static_cast<size_t>(i)]) return false;
    return true;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }
  std::string str() const;
};

// Dense row-major tensor of doubles. Storage is shared; tensors are treated
// as immutable once handed to the graph, so sharing is safe. reshape() is a
// zero-copy alias.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(shape),
        data_(std::make_shared<std::vector<double>>(
            static_cast<size_t>(shape.numel()), fill)) {}
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{1}, {v}); }

  const Shape& shape() const { return shape_; }
  std::int64_t numel() const { return shape_.numel(); }
  bool empty() const { return !data_; }

  const double* data() const { return data_->data(); }
  double* mutable_data() { return data_->data(); }

  double operator[](std::int64_t i) const { return (*data_)[static_cast<size_t>(i)]; }
  double& operator[](std::int64_t i) { return (*data_)[static_cast<size_t>(i)]; }

  double at(std::int64_t i, std::int64_t j) const {
    return (*data_)[static_cast<size_t>(i * shape_[1] + j)];
  }
  double at(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return (*data_)[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  double at(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) const {
    return (*data_)[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }
  double& at(std::int64_t i, std::int64_t j) {
    return (*data_)[static_cast<size_t>(i * shape_[1] + j)];
  }
  double& at(std::int64_t i, std::int64_t j, std::int64_t k) {
    return (*data_)[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  double& at(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) {
    return (*data_)[static_cast<size_t>(((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }

  Tensor reshape(Shape s) const {
    if (s.numel() != numel()) throw std::invalid_argument("reshape numel mismatch");
    Tensor out;
    out.shape_ = s;
    out.data_ = data_;
    return out;
  }

  Tensor clone() const {
    Tensor out;
    out.shape_ = shape_;
    out.data_ = std::make_shared<std::vector<double>>(*data_);
    return out;
  }

  bool all_finite() const;
  double max_abs_diff(const Tensor& o) const;

 private:
  Shape shape_;
  std::shared_ptr<std::vector<double>> data_;
};

// Complex tensor as paired real channels with identical shapes.
struct CTensorData {
  Tensor re;
  Tensor im;
  CTensorData() = default;
  CTensorData(Tensor r, Tensor i) : re(std::move(r)), im(std::move(i)) {
    if (re.shape() != im.shape())
      throw std::invalid_argument("re/im shape mismatch");
  }
};

}  // namespace irsce::tl
