#include "spatconf/linalg.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "spatconf/errors.hpp"

namespace spatconf {

Matrix intercept_design(const Vector& x) {
  Matrix d(x.size(), 2);
  d.col(0).setOnes();
  d.col(1) = x;
  return d;
}

Eigen::Index column_rank(const Matrix& m, double rel_tol) {
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  qr.setThreshold(rel_tol);
  return qr.rank();
}

Vector least_squares(const Matrix& design, const Vector& y) {
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols()) {
    throw RankError(fmt::format("design has rank {} < {} columns", qr.rank(), design.cols()));
  }
  return qr.solve(y);
}

LinearFit linear_fit(const Matrix& design, const Vector& y) {
  LinearFit fit;
  fit.coef = least_squares(design, y);
  fit.residuals = y - design * fit.coef;
  fit.rss = fit.residuals.squaredNorm();
  const Matrix gram = design.transpose() * design;
  fit.unscaled_covariance = gram.ldlt().solve(Matrix::Identity(gram.rows(), gram.cols()));
  return fit;
}

Matrix null_complement(const Matrix& u) {
  Eigen::HouseholderQR<Matrix> qr(u);
  const Eigen::Index n = u.rows();
  const Eigen::Index q = u.cols();
  if (column_rank(u) < q) throw RankError("constraint matrix is rank deficient");
  Matrix full = qr.householderQ() * Matrix::Identity(n, n);
  return full.rightCols(n - q);
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

double student_t_quantile(double p, double dof) {
  return boost::math::quantile(boost::math::students_t_distribution<double>(dof), p);
}

}  // namespace spatconf
