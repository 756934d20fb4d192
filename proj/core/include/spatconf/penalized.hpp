#pragma once

#include <optional>
#include <string>

#include "spatconf/spatial_core.hpp"

namespace spatconf {

// Ridge-type smoother: minimise ||y - F a - S d||^2 + lambda * sum_j pen_j d_j^2
// over the unpenalized block F and the penalized block S.
class PenalizedRegression {
 public:
  PenalizedRegression(const Matrix& fixed, const Matrix& smooth, const Vector& penalty);

  struct Fit {
    Vector coef;  // (a, d)
    Vector fitted;
    double lambda = 0.0;
    double rss = 0.0;
    double edf = 0.0;  // trace of the influence matrix
    double gcv = 0.0;
    // (D'D + lambda P)^{-1}
    Matrix unscaled_covariance;
    std::string warning;
  };

  Fit fit(const Vector& y, double lambda) const;
  // GCV = n RSS / (n - edf)^2, coarse log-grid then golden-section refinement.
  Fit fit_gcv(const Vector& y, int grid_points = 61) const;
  // Cheap GCV evaluation for a given lambda (no coefficients).
  double gcv(const Vector& y, double lambda) const;

  Eigen::Index columns() const { return r_.cols(); }

 private:
  struct Spectrum {
    Vector z;  // U' Q' y
    double resid0 = 0.0;  // part of ||y||^2 outside the column space
  };
  Spectrum project(const Vector& y) const;
  double gcv_from(const Spectrum& s, double lambda, double* edf, double* rss) const;

  Eigen::Index n_ = 0;
  Eigen::Index fixed_cols_ = 0;
  Matrix design_;
  Matrix q_thin_;   // n x m
  Matrix r_;        // m x m upper triangular
  Matrix u_;        // eigenvectors of R^{-T} P R^{-1}
  Vector lam_;      // matching eigenvalues (>= 0)
  Vector penalty_full_;
};

}  // namespace spatconf
