#include "irsce/classical.hpp"

#include <cmath>
#include <stdexcept>

namespace irsce {

MatrixXcd shrink(const MatrixXcd& r, double l1, double l2, double sigma, ShrinkMode mode) {
  MatrixXcd out = MatrixXcd::Zero(r.rows(), r.cols());
  const double t = l2 * sigma;
  if (mode == ShrinkMode::kEntrywise) {
    for (Eigen::Index j = 0; j < r.cols(); ++j)
      for (Eigen::Index i = 0; i < r.rows(); ++i) {
        const double m = std::abs(r(i, j));
        if (m > t && m > 0.0) out(i, j) = l1 * (m - t) / m * r(i, j);
      }
  } else {
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      const double m = r.row(i).norm();
      if (m > t && m > 0.0) out.row(i) = l1 * (m - t) / m * r.row(i);
    }
  }
  return out;
}

long shrink_active(const MatrixXcd& r, double l2, double sigma, ShrinkMode mode) {
  const double t = l2 * sigma;
  long count = 0;
  if (mode == ShrinkMode::kEntrywise) {
    for (Eigen::Index j = 0; j < r.cols(); ++j)
      for (Eigen::Index i = 0; i < r.rows(); ++i)
        if (std::abs(r(i, j)) > t) ++count;
  } else {
    for (Eigen::Index i = 0; i < r.rows(); ++i)
      if (r.row(i).norm() > t) ++count;
  }
  return count;
}

SolverReport swomp(const MatrixXcd& y, const MatrixXcd& upsilon, const SwompOptions& opt) {
  const Eigen::Index m = upsilon.rows(), g = upsilon.cols(), k = y.cols();
  if (y.rows() != m) throw std::invalid_argument("swomp: Y rows != Upsilon rows");

  SolverReport rep;
  rep.x_hat = MatrixXcd::Zero(g, k);
  if (y.norm() == 0.0) return rep;

  // unit-normalized columns for the correlation step
  MatrixXcd un(m, g);
  Eigen::VectorXd norms(g);
  for (Eigen::Index c = 0; c < g; ++c) {
    norms(c) = upsilon.col(c).norm();
    un.col(c) = norms(c) > 0.0 ? upsilon.col(c) / norms(c) : upsilon.col(c);
  }

  MatrixXcd v = y;
  std::vector<char> used(static_cast<size_t>(g), 0);
  std::vector<int> support;
  rep.residual_norms.push_back(v.norm());
  const Eigen::Index max_support = std::min<Eigen::Index>(opt.max_iter, std::min(g, m));

  while (static_cast<Eigen::Index>(support.size()) < max_support &&
         v.squaredNorm() > opt.eps) {
    // joint row-support score across subcarriers
    Eigen::VectorXd w = Eigen::VectorXd::Ones(k);
    if (opt.weighted)
      for (Eigen::Index c = 0; c < k; ++c)
        w(c) = 1.0 / std::max(v.col(c).squaredNorm(), 1e-300);
    const MatrixXcd corr = un.adjoint() * v;  // G x K
    int best = -1;
    double best_score = -1.0;
    for (Eigen::Index c = 0; c < g; ++c) {
      if (used[static_cast<size_t>(c)]) continue;
      double s = 0.0;
      for (Eigen::Index kk = 0; kk < k; ++kk) s += w(kk) * std::abs(corr(c, kk));
      if (s > best_score) {
        best_score = s;
        best = static_cast<int>(c);
      }
    }
    if (best < 0) break;
    used[static_cast<size_t>(best)] = 1;
    support.push_back(best);

    // per-subcarrier least squares on the support
    const Eigen::Index s = static_cast<Eigen::Index>(support.size());
    MatrixXcd sub(m, s);
    for (Eigen::Index c = 0; c < s; ++c) sub.col(c) = upsilon.col(support[static_cast<size_t>(c)]);
    Eigen::ColPivHouseholderQR<MatrixXcd> qr(sub);
    MatrixXcd coef(s, k);
    if (qr.rank() < s) {
      rep.ls_regularized = true;
      const MatrixXcd gram =
          sub.adjoint() * sub + 1e-10 * MatrixXcd::Identity(s, s);
      coef = gram.ldlt().solve(sub.adjoint() * y);
    } else {
      coef = qr.solve(y);
    }
    v = y - sub * coef;
    rep.residual_norms.push_back(v.norm());
    rep.x_hat.setZero();
    for (Eigen::Index c = 0; c < s; ++c) rep.x_hat.row(support[static_cast<size_t>(c)]) = coef.row(c);
  }
  rep.support = support;
  rep.iterations = static_cast<int>(support.size());
  return rep;
}

SolverReport amp_untrained(const MatrixXcd& y, const MatrixXcd& upsilon, const AmpOptions& opt,
                           AmpTrace* trace) {
  const Eigen::Index m = upsilon.rows(), g = upsilon.cols(), k = y.cols();
  if (y.rows() != m) throw std::invalid_argument("amp: Y rows != Upsilon rows");
  const MatrixXcd beta = upsilon.adjoint();
  const double den = opt.sqrt_m_norm ? std::sqrt(static_cast<double>(m))
                                     : static_cast<double>(m);

  SolverReport rep;
  MatrixXcd xhat = MatrixXcd::Zero(g, k);
  MatrixXcd v = y;
  rep.residual_norms.push_back(v.norm());
  if (trace) trace->v.push_back(v);
  for (int n = 0; n < opt.iterations; ++n) {
    const double sigma = v.norm() / std::sqrt(static_cast<double>(m));
    const MatrixXcd r = xhat + beta * v;
    xhat = shrink(r, opt.lambda1, opt.lambda2, sigma, opt.shrink);
    if (!xhat.allFinite())
      throw std::runtime_error("amp_untrained diverged at iteration " + std::to_string(n + 1));
    const double b = opt.lambda_b / den * opt.lambda1 *
                     static_cast<double>(shrink_active(r, opt.lambda2, sigma, opt.shrink));
    v = y - upsilon * xhat + b * v;
    rep.residual_norms.push_back(v.norm());
    if (trace) {
      trace->x.push_back(xhat);
      trace->v.push_back(v);
      trace->b.push_back(b);
    }
  }
  rep.x_hat = xhat;
  rep.iterations = opt.iterations;
  return rep;
}

}  // namespace irsce
