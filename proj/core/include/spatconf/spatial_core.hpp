#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace spatconf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Location {
  double easting = 0.0;
  double northing = 0.0;

  friend bool operator==(const Location&, const Location&) = default;
};

double distance(const Location& a, const Location& b);

// Ordered collection of pairwise-distinct sites.
class SiteSet {
 public:
  SiteSet() = default;
  // Throws DuplicateSiteError on repeated locations and NumericalError on
  // non-finite coordinates.
  explicit SiteSet(std::vector<Location> locations);

  std::size_t size() const { return locations_.size(); }
  const Location& operator[](std::size_t i) const { return locations_[i]; }
  std::span<const Location> locations() const { return locations_; }

  // n x 2 matrix of (easting, northing).
  Matrix coordinates() const;

 private:
  std::vector<Location> locations_;
};

// R(d; phi) = exp(-d / phi).
class ExpCorrelation {
 public:
  explicit ExpCorrelation(double range);

  double range() const { return range_; }
  double operator()(double d) const;
  // Distance at which the correlation falls to `level`.
  double practical_range(double level = 0.05) const;

 private:
  double range_;
};

enum class SqrtMethod { SymmetricEigen, Cholesky };

struct JitterPolicy {
  double initial = 1e-10;
  double max = 1e-6;
  double growth = 10.0;
};

Matrix distance_matrix(const SiteSet& sites);
Matrix correlation_matrix(const SiteSet& sites, const ExpCorrelation& corr);

// Factor F with F F' = R. With SymmetricEigen, F is the symmetric root
// V diag(sqrt(l)) V'; with Cholesky, the lower-triangular factor.
Matrix matrix_sqrt(const Matrix& r, SqrtMethod method, JitterPolicy jitter = {});

// A square-root factor together with its inverse, sharing one decomposition.
struct SqrtPair {
  Matrix root;
  Matrix inverse_root;
  double jitter_used = 0.0;
};

SqrtPair matrix_sqrt_pair(const Matrix& r, SqrtMethod method, JitterPolicy jitter = {});

// Thin-plate potential (1 / 8 pi) d^2 log d, zero at d = 0.
double tps_kernel(const Location& a, const Location& b);
double tps_kernel_distance(double d);

Matrix tps_kernel_matrix(const SiteSet& sites);

}  // namespace spatconf
