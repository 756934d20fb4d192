#pragma once

#include <cstddef>
#include <limits>

#include "spatconf/spatial_core.hpp"

namespace spatconf {

// Type1: (1, s1, s2); Type2: (1, x, s1, s2); Type3: (1, x).
enum class NullSpaceType { Type1, Type2, Type3 };

std::size_t nullspace_dimension(NullSpaceType type);
bool nullspace_uses_exposure(NullSpaceType type);

// Columns u_1..u_q evaluated at the sites. `x` is ignored for Type1.
Matrix nullspace_matrix(const SiteSet& sites, NullSpaceType type, const Vector& x = Vector());

// Blocks of the inverse of the bordered matrix [[K + theta I, U], [U', 0]].
struct KrigingBlocks {
  Matrix M;  // n x n
  Matrix G;  // q x n
};

// Computed as M = Z (Z'K Z)^{-1} Z' with Z an orthonormal complement of U and
// G = (U'U)^{-1} U'(I - K M); algebraically identical to the K^{-1} forms but
// keeps M U at rounding level even when K is badly conditioned.
KrigingBlocks build_blocks(const Matrix& kernel, const Matrix& u, double theta = 0.0);
KrigingBlocks build_blocks(const SiteSet& sites, const Matrix& u, double theta = 0.0);

struct PrincipalBasis {
  NullSpaceType nullspace = NullSpaceType::Type1;
  SiteSet sites;
  Matrix U;
  Matrix K;
  Matrix M;
  Matrix G;
  // Null block first (q entries), then the remaining eigenvalues ascending.
  Vector eigenvalues;
  // Columns v_l in the same order as `eigenvalues`.
  Matrix eigenvectors;
  // Non-intercept null-space columns that are not X, then v_{q+1}..v_n.
  Matrix B;
  std::size_t q = 0;
  // Number of leading columns of B that are null-space monomials.
  std::size_t monomial_columns = 0;
};

PrincipalBasis principal_kriging_basis(const SiteSet& sites, NullSpaceType type,
                                       const Vector& x = Vector());

// psi_l(s) = (u(s)'G + k(s)'M) v_l with l zero-based. Types that contain the
// exposure need its value at s.
double evaluate_pkf(const PrincipalBasis& basis, const Location& s, std::size_t l,
                    double exposure_at_s = std::numeric_limits<double>::quiet_NaN());

// Thin-plate regression spline basis of total rank k: the q = 3 unpenalized
// columns (1, s1, s2) plus k - q smooth columns lambda_l * phi_l, where
// (lambda_l, phi_l) are the leading eigenpairs of the kernel with the
// polynomial constraint absorbed (P K P, P the projector off span(U)).
struct TprsBasis {
  Matrix null_space;  // n x 3
  Matrix smooth;      // n x (k - 3), decreasing lambda
  Vector penalty;     // lambda_l for each smooth column
  std::size_t rank() const { return static_cast<std::size_t>(null_space.cols() + smooth.cols()); }
};

TprsBasis tprs_basis(const SiteSet& sites, std::size_t k);
// Leading-k prefix of an already computed basis.
TprsBasis tprs_truncate(const TprsBasis& full, std::size_t k);

}  // namespace spatconf
