#include "irsce/tensor.hpp"

#include <cmath>
#include <sstream>

namespace irsce::tl {

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (int i = 0; i < rank; ++i) {
    if (i) os << 'x';
    os << d[static_cast<size_t>(i)];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(shape) {
  if (static_cast<std::int64_t>(values.size()) != shape.numel())
    throw std::invalid_argument("tensor data length != shape numel");
  data_ = std::make_shared<std::vector<double>>(std::move(values));
}

bool Tensor::all_finite() const {
  if (!data_) return true;
  for (double v : *data_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::max_abs_diff(const Tensor& o) const {
  if (shape_ != o.shape_) throw std::invalid_argument("shape mismatch in max_abs_diff");
  double m = 0.0;
  const double* a = data();
  const double* b = o.data();
  for (std::int64_t i = 0; i < numel(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace irsce::tl
