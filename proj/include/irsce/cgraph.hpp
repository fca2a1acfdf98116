#pragma once

#include <Eigen/Dense>

#include "irsce/autodiff.hpp"

namespace irsce {

// Complex value on the tape: paired real channels, the 2x2 real block
// convention for products.
struct CVal {
  tl::Value re, im;
};

inline CVal cadd(CVal a, CVal b) { return {tl::add(a.re, b.re), tl::add(a.im, b.im)}; }
inline CVal csub(CVal a, CVal b) { return {tl::sub(a.re, b.re), tl::sub(a.im, b.im)}; }

inline CVal cmatmul(CVal a, CVal b) {
  using tl::matmul;
  return {tl::sub(matmul(a.re, b.re), matmul(a.im, b.im)),
          tl::add(matmul(a.re, b.im), matmul(a.im, b.re))};
}

inline CVal cscale_by(CVal a, tl::Value s) {
  return {tl::scale_by(a.re, s), tl::scale_by(a.im, s)};
}

// Eigen <-> tensor conversion
tl::Tensor tensor_from_real(const Eigen::MatrixXd& m);
tl::Tensor tensor_re(const Eigen::MatrixXcd& m);
tl::Tensor tensor_im(const Eigen::MatrixXcd& m);
Eigen::MatrixXcd complex_from(const tl::Tensor& re, const tl::Tensor& im);
tl::CTensorData ctensor_from(const Eigen::MatrixXcd& m);

inline CVal cconstant(tl::Graph& g, const Eigen::MatrixXcd& m) {
  return {g.constant(tensor_re(m)), g.constant(tensor_im(m))};
}

inline Eigen::MatrixXcd cvalue(tl::Graph& g, CVal v) {
  return complex_from(g.value(v.re), g.value(v.im));
}

}  // namespace irsce
