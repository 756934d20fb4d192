#include "spatconf/principal_basis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "spatconf/errors.hpp"
#include "spatconf/linalg.hpp"

namespace spatconf {

std::size_t nullspace_dimension(NullSpaceType type) {
  switch (type) {
    case NullSpaceType::Type1: return 3;
    case NullSpaceType::Type2: return 4;
    case NullSpaceType::Type3: return 2;
  }
  return 0;
}

bool nullspace_uses_exposure(NullSpaceType type) { return type != NullSpaceType::Type1; }

Matrix nullspace_matrix(const SiteSet& sites, NullSpaceType type, const Vector& x) {
  const auto n = static_cast<Eigen::Index>(sites.size());
  if (nullspace_uses_exposure(type) && x.size() != n) {
    throw UsageError("this null space needs the exposure at every site");
  }
  const Matrix c = sites.coordinates();
  Matrix u(n, static_cast<Eigen::Index>(nullspace_dimension(type)));
  u.col(0).setOnes();
  switch (type) {
    case NullSpaceType::Type1:
      u.col(1) = c.col(0);
      u.col(2) = c.col(1);
      break;
    case NullSpaceType::Type2:
      u.col(1) = x;
      u.col(2) = c.col(0);
      u.col(3) = c.col(1);
      break;
    case NullSpaceType::Type3:
      u.col(1) = x;
      break;
  }
  return u;
}

KrigingBlocks build_blocks(const Matrix& kernel, const Matrix& u, double theta) {
  const Eigen::Index n = kernel.rows();
  if (kernel.cols() != n || u.rows() != n) throw UsageError("kernel and U sizes disagree");
  if (theta < 0.0) throw UsageError("theta must be nonnegative");
  if (u.cols() >= n) throw RankError("null space is as large as the data");
  if (column_rank(u) < u.cols()) throw RankError("null-space matrix U is rank deficient");

  Matrix k = kernel;
  k.diagonal().array() += theta;
  const Matrix z = null_complement(u);
  const Matrix w = symmetrize(z.transpose() * k * z);
  Eigen::FullPivLU<Matrix> lu(w);
  if (lu.rank() < w.rows()) throw RankError("kernel is singular on the complement of U");

  KrigingBlocks out;
  out.M = symmetrize(z * lu.inverse() * z.transpose());
  const Matrix utu = u.transpose() * u;
  Matrix resid = -k * out.M;
  resid.diagonal().array() += 1.0;
  out.G = utu.ldlt().solve(u.transpose() * resid);
  return out;
}

KrigingBlocks build_blocks(const SiteSet& sites, const Matrix& u, double theta) {
  return build_blocks(tps_kernel_matrix(sites), u, theta);
}

namespace {

void fix_sign(Eigen::Ref<Vector> v) {
  Eigen::Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  if (v(idx) < 0.0) v = -v;
}

}  // namespace

PrincipalBasis principal_kriging_basis(const SiteSet& sites, NullSpaceType type, const Vector& x) {
  const auto n = static_cast<Eigen::Index>(sites.size());
  if (n < 4) throw UsageError("at least four sites are required");

  PrincipalBasis pb;
  pb.nullspace = type;
  pb.sites = sites;
  pb.q = nullspace_dimension(type);
  pb.U = nullspace_matrix(sites, type, x);
  pb.K = tps_kernel_matrix(sites);
  auto blocks = build_blocks(pb.K, pb.U, 0.0);
  pb.M = std::move(blocks.M);
  pb.G = std::move(blocks.G);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(pb.M);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition of M failed");
  const Vector& lam = eig.eigenvalues();
  const double tol = 1e-9 * lam.cwiseAbs().maxCoeff();

  std::vector<Eigen::Index> null_idx, rest_idx;
  for (Eigen::Index i = 0; i < n; ++i) {
    (std::abs(lam(i)) < tol ? null_idx : rest_idx).push_back(i);
  }
  if (null_idx.size() != pb.q) {
    throw RankError(fmt::format("expected {} null eigenvalues of M, found {}", pb.q,
                                null_idx.size()));
  }
  // The solver returns ascending order already, so the remaining block stays sorted.
  std::vector<Eigen::Index> order = null_idx;
  order.insert(order.end(), rest_idx.begin(), rest_idx.end());

  pb.eigenvalues.resize(n);
  pb.eigenvectors.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    pb.eigenvalues(j) = lam(order[static_cast<std::size_t>(j)]);
    pb.eigenvectors.col(j) = eig.eigenvectors().col(order[static_cast<std::size_t>(j)]);
    fix_sign(pb.eigenvectors.col(j));
  }

  const Matrix c = sites.coordinates();
  pb.monomial_columns = type == NullSpaceType::Type3 ? 0 : 2;
  const auto mono = static_cast<Eigen::Index>(pb.monomial_columns);
  const auto q = static_cast<Eigen::Index>(pb.q);
  pb.B.resize(n, mono + (n - q));
  if (mono == 2) pb.B.leftCols(2) = c;
  pb.B.rightCols(n - q) = pb.eigenvectors.rightCols(n - q);
  return pb;
}

double evaluate_pkf(const PrincipalBasis& basis, const Location& s, std::size_t l,
                    double exposure_at_s) {
  const auto n = static_cast<Eigen::Index>(basis.sites.size());
  if (l >= static_cast<std::size_t>(n)) throw UsageError("basis index out of range");
  if (nullspace_uses_exposure(basis.nullspace) && !std::isfinite(exposure_at_s)) {
    throw UsageError("this null space needs the exposure value at the evaluation point");
  }
  Vector u(static_cast<Eigen::Index>(basis.q));
  switch (basis.nullspace) {
    case NullSpaceType::Type1: u << 1.0, s.easting, s.northing; break;
    case NullSpaceType::Type2: u << 1.0, exposure_at_s, s.easting, s.northing; break;
    case NullSpaceType::Type3: u << 1.0, exposure_at_s; break;
  }
  Vector k(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i) = tps_kernel(s, basis.sites[static_cast<std::size_t>(i)]);
  }
  const auto v = basis.eigenvectors.col(static_cast<Eigen::Index>(l));
  return u.dot(basis.G * v) + k.dot(basis.M * v);
}

TprsBasis tprs_basis(const SiteSet& sites, std::size_t k) {
  const auto n = static_cast<std::size_t>(sites.size());
  if (k <= 3) throw RankError("TPRS rank must exceed the null-space dimension 3");
  if (k > n) throw UsageError(fmt::format("TPRS rank {} exceeds the site count {}", k, n));

  TprsBasis out;
  out.null_space = nullspace_matrix(sites, NullSpaceType::Type1);
  const Matrix z = null_complement(out.null_space);
  const Matrix w = symmetrize(z.transpose() * tps_kernel_matrix(sites) * z);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(w);
  if (eig.info() != Eigen::Success) throw NumericalError("TPRS eigendecomposition failed");

  const auto m = static_cast<Eigen::Index>(k - 3);
  const Eigen::Index total = w.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(eig.eigenvalues()(a)) > std::abs(eig.eigenvalues()(b));
  });
  out.smooth.resize(static_cast<Eigen::Index>(n), m);
  out.penalty.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Index src = order[static_cast<std::size_t>(j)];
    Vector phi = z * eig.eigenvectors().col(src);
    fix_sign(phi);
    out.penalty(j) = eig.eigenvalues()(src);
    out.smooth.col(j) = out.penalty(j) * phi;
  }
  return out;
}

TprsBasis tprs_truncate(const TprsBasis& full, std::size_t k) {
  if (k <= 3) throw RankError("TPRS rank must exceed the null-space dimension 3");
  if (k > full.rank()) throw UsageError("requested TPRS rank exceeds the stored basis");
  const auto m = static_cast<Eigen::Index>(k - 3);
  TprsBasis out;
  out.null_space = full.null_space;
  out.smooth = full.smooth.leftCols(m);
  out.penalty = full.penalty.head(m);
  return out;
}

}  // namespace spatconf
