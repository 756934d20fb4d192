#pragma once

#include "spatconf/spatial_core.hpp"

namespace spatconf {

// [1 x]
Matrix intercept_design(const Vector& x);

// Least-squares coefficients via column-pivoting QR; throws RankError when
// the design is rank deficient.
Vector least_squares(const Matrix& design, const Vector& y);

struct LinearFit {
  Vector coef;
  Vector residuals;
  double rss = 0.0;
  // (D'D)^{-1}
  Matrix unscaled_covariance;
};

LinearFit linear_fit(const Matrix& design, const Vector& y);

// Column rank of `m` under a relative tolerance on the R diagonal.
Eigen::Index column_rank(const Matrix& m, double rel_tol = 1e-10);

// Orthonormal basis of the orthogonal complement of span(u), n x (n - rank).
Matrix null_complement(const Matrix& u);

// Symmetric part (m + m') / 2.
Matrix symmetrize(const Matrix& m);

// Two-sided quantile of the standard normal and of Student t.
double normal_quantile(double p);
double student_t_quantile(double p, double dof);

}  // namespace spatconf
