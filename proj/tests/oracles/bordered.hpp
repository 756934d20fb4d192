#pragma once

#include <spatconf/spatial_core.hpp>

namespace oracle {

using spatconf::Matrix;
using spatconf::Vector;

struct Blocks {
  Matrix M;
  Matrix G;
};

// Inverts [[K, U], [U', 0]] as one dense matrix and reads off the blocks.
Blocks bordered_inverse(const Matrix& K, const Matrix& U);

// K^{-1} - K^{-1} U (U' K^{-1} U)^{-1} U' K^{-1}; needs K invertible.
Matrix m_from_kernel_inverse(const Matrix& K, const Matrix& U);

// (1 / 8 pi) r^2 log r with explicit loops.
Matrix tps_kernel(const spatconf::SiteSet& sites);

// 1, easting, northing.
Matrix linear_monomials(const spatconf::SiteSet& sites);

}  // namespace oracle
