#include "spatconf/bias.hpp"

#include <cmath>

#include <fmt/format.h>

#include "spatconf/errors.hpp"
#include "spatconf/linalg.hpp"

namespace spatconf {

namespace {

struct ExposureDesign {
  Matrix xt;       // [1 x]
  Matrix hat;      // (X'X)^{-1} X'
};

ExposureDesign exposure_design(const Vector& x) {
  ExposureDesign d;
  d.xt = intercept_design(x);
  const Matrix xtx = d.xt.transpose() * d.xt;
  Eigen::LLT<Matrix> llt(xtx);
  const double var = (x.array() - x.mean()).square().sum();
  if (llt.info() != Eigen::Success || !(var > 1e-12 * std::max(1.0, x.squaredNorm()))) {
    throw RankError("exposure design [1 x] is singular");
  }
  d.hat = llt.solve(d.xt.transpose());
  return d;
}

double confounding_scale(const ConfoundingScenario& s) {
  return s.delta * s.sigma_w() / s.sigma_x();
}

}  // namespace

Vector delta_ols(const ConfoundingScenario& scenario, const FieldFactors& factors, const Vector& x) {
  const auto d = exposure_design(x);
  return confounding_scale(scenario) * (d.hat * confounding_direction(factors, x));
}

Vector delta_ols(const ConfoundingScenario& scenario, const SiteSet& sites, const Vector& x) {
  return delta_ols(scenario, field_factors(scenario, sites), x);
}

Vector delta_gls(const ConfoundingScenario& scenario, const FieldFactors& factors, const Vector& x) {
  const auto d = exposure_design(x);
  const double cond_var = scenario.sigma2_w * (1.0 - scenario.delta * scenario.delta);
  const Matrix& rw_root = factors.confounder.root;
  Matrix sigma = cond_var * (rw_root * rw_root.transpose());
  sigma.diagonal().array() += scenario.sigma2_eps;
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw RankError("Sigma_{y|x} is not positive definite");
  const Matrix sx = llt.solve(d.xt);
  Eigen::LLT<Matrix> inner(d.xt.transpose() * sx);
  if (inner.info() != Eigen::Success) throw RankError("GLS normal matrix is singular");
  const Vector m = confounding_direction(factors, x);
  return confounding_scale(scenario) * inner.solve(sx.transpose() * m);
}

Vector delta_gls(const ConfoundingScenario& scenario, const SiteSet& sites, const Vector& x) {
  return delta_gls(scenario, field_factors(scenario, sites), x);
}

namespace {

// -(X'X)^{-1} X' B c with c the least-squares coefficients of `target` on
// (I - P_X) B, i.e. T B' (P_X - I) target.
Vector adjustment(const ExposureDesign& d, const Matrix& basis, const Vector& target) {
  if (basis.rows() != d.xt.rows()) throw UsageError("basis row count differs from data length");
  if (basis.cols() == 0) return Vector::Zero(2);
  const Matrix bt = basis - d.xt * (d.hat * basis);
  Eigen::ColPivHouseholderQR<Matrix> qr(bt);
  // Absolute scale: a column lying in span[1 x] leaves only rounding noise in bt.
  const double scale = basis.colwise().norm().maxCoeff();
  const Vector r = qr.matrixQR().diagonal().cwiseAbs();
  const auto rank = (r.array() > 1e-10 * scale).count();
  if (rank < bt.cols()) {
    throw RankError(fmt::format("[1 x B] is rank deficient ({} of {} basis columns independent)",
                                rank, bt.cols()));
  }
  const Vector c = qr.solve(target);
  return -(d.hat * (basis * c));
}

}  // namespace

Vector d_x(const ConfoundingScenario& scenario, const FieldFactors& factors, const Vector& x,
           const Matrix& basis) {
  const auto d = exposure_design(x);
  return confounding_scale(scenario) * adjustment(d, basis, confounding_direction(factors, x));
}

Vector d_x(const ConfoundingScenario& scenario, const SiteSet& sites, const Vector& x,
           const Matrix& basis) {
  return d_x(scenario, field_factors(scenario, sites), x, basis);
}

BiasReport bias_report(const ConfoundingScenario& scenario, const FieldFactors& factors,
                       const Vector& x, const Matrix& basis, NullSpaceType nullspace,
                       bool with_gls) {
  BiasReport r;
  r.delta_ols = delta_ols(scenario, factors, x);
  if (with_gls) r.delta_gls = delta_gls(scenario, factors, x);
  r.d = d_x(scenario, factors, x, basis);
  r.delta_adj = r.delta_ols + r.d;
  r.k_used = static_cast<std::size_t>(basis.cols());
  r.nullspace = nullspace;
  return r;
}

BiasCurve bias_curve(const ConfoundingScenario& scenario, const FieldFactors& factors,
                     const Vector& x, const PrincipalBasis& basis, std::size_t max_k) {
  const auto d = exposure_design(x);
  const Eigen::Index n = x.size();
  if (basis.B.rows() != n) throw UsageError("basis was built for a different site set");
  if (max_k == 0) max_k = static_cast<std::size_t>(n - 3);
  const auto kmax = static_cast<Eigen::Index>(max_k);
  if (kmax > basis.B.cols() || kmax > n - 2) throw UsageError("max_k exceeds the usable basis");

  const Matrix b = basis.B.leftCols(kmax);
  const Matrix bt = b - d.xt * (d.hat * b);
  // Without pivoting, the leading k x k block of R is the R factor of the
  // first k columns, so one factorization serves every prefix.
  Eigen::HouseholderQR<Matrix> qr(bt);
  const Matrix r = qr.matrixQR().topLeftCorner(kmax, kmax).triangularView<Eigen::Upper>();
  const Vector g = (qr.householderQ().transpose() * confounding_direction(factors, x)).head(kmax);
  const Matrix hb = d.hat * b;  // 2 x k
  const double rmax = r.diagonal().cwiseAbs().maxCoeff();
  const double scale = confounding_scale(scenario);

  BiasCurve curve;
  curve.nullspace = basis.nullspace;
  curve.k.reserve(max_k);
  curve.d_x.reserve(max_k);
  // Forward substitution on R' a = (HB)' row by row: a_j only needs a_1..a_{j-1}.
  Matrix a(kmax, 2);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < kmax; ++j) {
    if (std::abs(r(j, j)) < 1e-10 * rmax) {
      throw RankError(fmt::format("basis column {} is collinear with [1 x] and earlier columns", j + 1));
    }
    for (int c = 0; c < 2; ++c) {
      double s = hb(c, j);
      for (Eigen::Index i = 0; i < j; ++i) s -= r(i, j) * a(i, c);
      a(j, c) = s / r(j, j);
    }
    acc += a(j, 1) * g(j);
    curve.k.push_back(static_cast<std::size_t>(j + 1));
    curve.d_x.push_back(-scale * acc);
  }
  return curve;
}

BiasCurve bias_curve(const ConfoundingScenario& scenario, const SiteSet& sites, const Vector& x,
                     NullSpaceType nullspace, std::size_t max_k) {
  const auto basis = principal_kriging_basis(sites, nullspace, x);
  return bias_curve(scenario, field_factors(scenario, sites), x, basis, max_k);
}

Vector posterior_mean_coefficients(const Matrix& design, const Vector& y,
                                   const Vector& prior_precision, double sigma2) {
  if (prior_precision.size() != design.cols()) throw UsageError("prior precision length mismatch");
  if (!(sigma2 > 0.0)) throw UsageError("sigma2 must be positive");
  Matrix f_inv = design.transpose() * design / sigma2;
  f_inv.diagonal() += prior_precision;
  Eigen::LLT<Matrix> llt(f_inv);
  if (llt.info() != Eigen::Success) throw RankError("posterior precision is not positive definite");
  return llt.solve(design.transpose() * y / sigma2);
}

Vector d_x_star(const Vector& y, const Vector& x, const Matrix& basis,
                const Vector& prior_variances, double sigma2) {
  const auto d = exposure_design(x);
  if (prior_variances.size() != basis.cols()) throw UsageError("prior variance length mismatch");
  if (!(sigma2 > 0.0) || !(prior_variances.array() > 0.0).all()) {
    throw UsageError("variances must be positive");
  }
  if (basis.cols() == 0) return Vector::Zero(2);
  const Vector fitted = d.xt * (d.hat * y);
  const Matrix bt = basis - d.xt * (d.hat * basis);
  Matrix s = basis.transpose() * bt / sigma2;
  s.diagonal() += prior_variances.cwiseInverse();
  s = symmetrize(s);
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) throw RankError("prior-augmented Schur complement is singular");
  // T = (X'X)^{-1} X' B S^{-1}
  const Vector rhs = basis.transpose() * (fitted - y) / sigma2;
  return d.hat * (basis * llt.solve(rhs));
}

}  // namespace spatconf
