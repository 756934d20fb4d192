#include "spatconf/penalized.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "spatconf/errors.hpp"

namespace spatconf {

PenalizedRegression::PenalizedRegression(const Matrix& fixed, const Matrix& smooth,
                                         const Vector& penalty) {
  n_ = fixed.rows();
  if (smooth.rows() != n_ || penalty.size() != smooth.cols()) {
    throw UsageError("penalized regression blocks have inconsistent sizes");
  }
  fixed_cols_ = fixed.cols();
  const Eigen::Index m = fixed.cols() + smooth.cols();
  if (m >= n_) throw RankError("penalized design has as many columns as observations");
  design_.resize(n_, m);
  design_ << fixed, smooth;
  penalty_full_ = Vector::Zero(m);
  penalty_full_.tail(smooth.cols()) = penalty;

  Eigen::HouseholderQR<Matrix> qr(design_);
  r_ = qr.matrixQR().topLeftCorner(m, m).triangularView<Eigen::Upper>();
  const double rmax = r_.diagonal().cwiseAbs().maxCoeff();
  if ((r_.diagonal().cwiseAbs().array() < 1e-10 * rmax).any()) {
    throw RankError("penalized design is rank deficient");
  }
  q_thin_ = qr.householderQ() * Matrix::Identity(n_, m);

  // R^{-T} P R^{-1} = diag-scaled; symmetric PSD.
  const Matrix rinv = r_.triangularView<Eigen::Upper>().solve(Matrix::Identity(m, m));
  const Matrix s = rinv.transpose() * penalty_full_.asDiagonal() * rinv;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (s + s.transpose()));
  u_ = eig.eigenvectors();
  lam_ = eig.eigenvalues().cwiseMax(0.0);
}

PenalizedRegression::Spectrum PenalizedRegression::project(const Vector& y) const {
  if (y.size() != n_) throw UsageError("response length differs from the design");
  Spectrum s;
  const Vector qy = q_thin_.transpose() * y;
  s.z = u_.transpose() * qy;
  s.resid0 = std::max(y.squaredNorm() - qy.squaredNorm(), 0.0);
  return s;
}

double PenalizedRegression::gcv_from(const Spectrum& s, double lambda, double* edf,
                                     double* rss) const {
  double e = 0.0, r = s.resid0;
  for (Eigen::Index i = 0; i < lam_.size(); ++i) {
    const double shrink = 1.0 / (1.0 + lambda * lam_(i));
    e += shrink;
    const double left = (1.0 - shrink) * s.z(i);
    r += left * left;
  }
  if (edf) *edf = e;
  if (rss) *rss = r;
  const double n = static_cast<double>(n_);
  return n * r / ((n - e) * (n - e));
}

double PenalizedRegression::gcv(const Vector& y, double lambda) const {
  return gcv_from(project(y), lambda, nullptr, nullptr);
}

PenalizedRegression::Fit PenalizedRegression::fit(const Vector& y, double lambda) const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw UsageError("lambda must be finite and >= 0");
  const Spectrum s = project(y);
  Fit f;
  f.lambda = lambda;
  f.gcv = gcv_from(s, lambda, &f.edf, &f.rss);
  const Vector shrink = (1.0 + lambda * lam_.array()).inverse().matrix();
  // coef = R^{-1} U diag(shrink) U' Q' y
  const Vector inner = u_ * shrink.cwiseProduct(s.z);
  f.coef = r_.triangularView<Eigen::Upper>().solve(inner);
  f.fitted = design_ * f.coef;
  const Matrix rinv_u = r_.triangularView<Eigen::Upper>().solve(u_);
  f.unscaled_covariance = rinv_u * shrink.asDiagonal() * rinv_u.transpose();
  return f;
}

PenalizedRegression::Fit PenalizedRegression::fit_gcv(const Vector& y, int grid_points) const {
  const Spectrum s = project(y);
  double lmax = 0.0, lmin = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < lam_.size(); ++i) {
    if (lam_(i) > 0.0) {
      lmax = std::max(lmax, lam_(i));
      lmin = std::min(lmin, lam_(i));
    }
  }
  if (lmax <= 0.0) return fit(y, 0.0);
  const double lo = std::log(1e-3 / lmax);
  const double hi = std::log(1e3 / std::max(lmin, 1e-12 * lmax));
  grid_points = std::max(grid_points, 3);
  std::vector<double> grid(static_cast<std::size_t>(grid_points));
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_points; ++i) {
    grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (grid_points - 1);
    const double score = gcv_from(s, std::exp(grid[static_cast<std::size_t>(i)]), nullptr, nullptr);
    if (std::isfinite(score) && score < best_score) {
      best_score = score;
      best = static_cast<std::size_t>(i);
    }
  }
  if (!std::isfinite(best_score)) throw NumericalError("GCV is not finite anywhere on the grid");

  // Golden-section search inside the bracket around the best grid point.
  double a = grid[best == 0 ? 0 : best - 1];
  double b = grid[std::min<std::size_t>(best + 1, grid.size() - 1)];
  const double ratio = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - ratio * (b - a), d = a + ratio * (b - a);
  double fc = gcv_from(s, std::exp(c), nullptr, nullptr);
  double fd = gcv_from(s, std::exp(d), nullptr, nullptr);
  for (int it = 0; it < 60 && b - a > 1e-8; ++it) {
    if (fc < fd) {
      b = d; d = c; fd = fc;
      c = b - ratio * (b - a);
      fc = gcv_from(s, std::exp(c), nullptr, nullptr);
    } else {
      a = c; c = d; fc = fd;
      d = a + ratio * (b - a);
      fd = gcv_from(s, std::exp(d), nullptr, nullptr);
    }
  }
  const double refined = 0.5 * (a + b);
  const double refined_score = gcv_from(s, std::exp(refined), nullptr, nullptr);
  if (std::isfinite(refined_score) && refined_score <= best_score) {
    return fit(y, std::exp(refined));
  }
  Fit f = fit(y, std::exp(grid[best]));
  f.warning = "golden-section refinement failed; using the coarse-grid optimum";
  return f;
}

}  // namespace spatconf
