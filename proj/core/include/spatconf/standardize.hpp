#pragma once

#include "spatconf/spatial_core.hpp"

namespace spatconf {

// Column means and sample standard deviations used to move between the
// original and the standardized scale.
struct StandardizationRecord {
  double y_mean = 0.0;
  double y_scale = 1.0;
  double x_mean = 0.0;
  double x_scale = 1.0;
  Vector b_mean;
  Vector b_scale;
};

struct StandardizedData {
  Vector y;
  Vector x;
  Matrix B;
  StandardizationRecord record;
};

// Throws UsageError when y, x or any column of B has (numerically) zero spread.
StandardizedData standardize(const Vector& y, const Vector& x, const Matrix& basis);

// Slope of y on x back on the original scale.
double destandardize_beta_x(const StandardizationRecord& record, double beta_x_std);
double standardize_beta_x(const StandardizationRecord& record, double beta_x);

}  // namespace spatconf
