#include "spatconf/spatial_core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "spatconf/errors.hpp"

namespace spatconf {

double distance(const Location& a, const Location& b) {
  return std::hypot(a.easting - b.easting, a.northing - b.northing);
}

SiteSet::SiteSet(std::vector<Location> locations) : locations_(std::move(locations)) {
  std::vector<std::size_t> order(locations_.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& s = locations_[i];
    if (!std::isfinite(s.easting) || !std::isfinite(s.northing)) {
      throw NumericalError(fmt::format("site {} has a non-finite coordinate", i));
    }
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& la = locations_[a];
    const auto& lb = locations_[b];
    return la.easting != lb.easting ? la.easting < lb.easting : la.northing < lb.northing;
  });
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (locations_[order[k]] == locations_[order[k - 1]]) {
      throw DuplicateSiteError(
          fmt::format("sites {} and {} share a location", order[k - 1], order[k]));
    }
  }
}

Matrix SiteSet::coordinates() const {
  Matrix c(size(), 2);
  for (std::size_t i = 0; i < size(); ++i) {
    c(i, 0) = locations_[i].easting;
    c(i, 1) = locations_[i].northing;
  }
  return c;
}

ExpCorrelation::ExpCorrelation(double range) : range_(range) {
  if (!(range > 0.0) || !std::isfinite(range)) {
    throw UsageError(fmt::format("correlation range must be positive, got {}", range));
  }
}

double ExpCorrelation::operator()(double d) const { return std::exp(-d / range_); }

double ExpCorrelation::practical_range(double level) const { return -range_ * std::log(level); }

Matrix distance_matrix(const SiteSet& sites) {
  const auto n = static_cast<Eigen::Index>(sites.size());
  Matrix d = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double dij = distance(sites[i], sites[j]);
      d(i, j) = dij;
      d(j, i) = dij;
    }
  }
  return d;
}

Matrix correlation_matrix(const SiteSet& sites, const ExpCorrelation& corr) {
  Matrix r = distance_matrix(sites);
  for (Eigen::Index j = 0; j < r.cols(); ++j) {
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      if (!std::isfinite(r(i, j))) throw NumericalError("non-finite inter-site distance");
      r(i, j) = corr(r(i, j));
    }
  }
  return r;
}

namespace {

// Smallest jitter in the escalation ladder that makes min_eig + jitter
// strictly positive; zero when no jitter is needed.
double eigen_jitter(double min_eig, double scale, const JitterPolicy& policy) {
  const double floor = scale * 1e-14;
  if (min_eig > floor) return 0.0;
  for (double j = policy.initial; j <= policy.max * (1.0 + 1e-12); j *= policy.growth) {
    if (min_eig + j > floor) return j;
  }
  throw FactorizationError(
      fmt::format("matrix is not positive definite (min eigenvalue {:.3e})", min_eig));
}

}  // namespace

SqrtPair matrix_sqrt_pair(const Matrix& r, SqrtMethod method, JitterPolicy jitter) {
  if (r.rows() != r.cols()) throw UsageError("matrix_sqrt needs a square matrix");
  const Eigen::Index n = r.rows();
  SqrtPair out;
  if (method == SqrtMethod::SymmetricEigen) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(r);
    if (es.info() != Eigen::Success) throw FactorizationError("eigendecomposition failed");
    const Vector& lambda = es.eigenvalues();
    const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
    out.jitter_used = eigen_jitter(lambda.minCoeff(), scale, jitter);
    const Vector shifted = lambda.array() + out.jitter_used;
    const Matrix& v = es.eigenvectors();
    out.root = v * shifted.cwiseSqrt().asDiagonal() * v.transpose();
    out.inverse_root = v * shifted.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
    return out;
  }

  double j = 0.0;
  while (true) {
    Matrix shifted = r;
    shifted.diagonal().array() += j;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() == Eigen::Success) {
      out.root = llt.matrixL();
      out.inverse_root = llt.matrixL().solve(Matrix::Identity(n, n));
      out.jitter_used = j;
      return out;
    }
    j = (j == 0.0) ? jitter.initial : j * jitter.growth;
    if (j > jitter.max * (1.0 + 1e-12)) {
      throw FactorizationError("Cholesky factorization failed after maximal jitter");
    }
  }
}

Matrix matrix_sqrt(const Matrix& r, SqrtMethod method, JitterPolicy jitter) {
  return matrix_sqrt_pair(r, method, jitter).root;
}

double tps_kernel_distance(double d) {
  if (d <= 0.0) return 0.0;
  return d * d * std::log(d) / (8.0 * std::numbers::pi);
}

double tps_kernel(const Location& a, const Location& b) {
  return tps_kernel_distance(distance(a, b));
}

Matrix tps_kernel_matrix(const SiteSet& sites) {
  Matrix k = distance_matrix(sites);
  k = k.unaryExpr([](double d) { return tps_kernel_distance(d); });
  return k;
}

}  // namespace spatconf
