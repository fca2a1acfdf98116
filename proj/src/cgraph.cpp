#include "irsce/cgraph.hpp"

namespace irsce {

tl::Tensor tensor_from_real(const Eigen::MatrixXd& m) {
  tl::Tensor t(tl::Shape{m.rows(), m.cols()});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.at(i, j) = m(i, j);
  return t;
}

tl::Tensor tensor_re(const Eigen::MatrixXcd& m) {
  tl::Tensor t(tl::Shape{m.rows(), m.cols()});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.at(i, j) = m(i, j).real();
  return t;
}

tl::Tensor tensor_im(const Eigen::MatrixXcd& m) {
  tl::Tensor t(tl::Shape{m.rows(), m.cols()});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.at(i, j) = m(i, j).imag();
  return t;
}

Eigen::MatrixXcd complex_from(const tl::Tensor& re, const tl::Tensor& im) {
  if (re.shape() != im.shape() || re.shape().rank != 2)
    throw std::invalid_argument("complex_from expects matching rank-2 tensors");
  Eigen::MatrixXcd m(re.shape()[0], re.shape()[1]);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = {re.at(i, j), im.at(i, j)};
  return m;
}

tl::CTensorData ctensor_from(const Eigen::MatrixXcd& m) {
  return {tensor_re(m), tensor_im(m)};
}

}  // namespace irsce
