#include "spatconf/standardize.hpp"

#include <cmath>

#include <fmt/format.h>

#include "spatconf/errors.hpp"

namespace spatconf {

namespace {

std::pair<double, double> moments(const Eigen::Ref<const Vector>& v, const char* what) {
  const auto n = static_cast<double>(v.size());
  if (v.size() < 2) throw UsageError("need at least two observations to standardize");
  const double mean = v.mean();
  const double sd = std::sqrt((v.array() - mean).square().sum() / (n - 1.0));
  if (!std::isfinite(sd) || sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
    throw UsageError(fmt::format("{} has no spread and cannot be standardized", what));
  }
  return {mean, sd};
}

}  // namespace

StandardizedData standardize(const Vector& y, const Vector& x, const Matrix& basis) {
  if (x.size() != y.size() || basis.rows() != y.size()) {
    throw UsageError("y, x and basis must have the same number of rows");
  }
  StandardizedData out;
  auto& rec = out.record;
  std::tie(rec.y_mean, rec.y_scale) = moments(y, "response");
  std::tie(rec.x_mean, rec.x_scale) = moments(x, "exposure");
  out.y = (y.array() - rec.y_mean) / rec.y_scale;
  out.x = (x.array() - rec.x_mean) / rec.x_scale;
  rec.b_mean.resize(basis.cols());
  rec.b_scale.resize(basis.cols());
  out.B.resize(basis.rows(), basis.cols());
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    const auto name = fmt::format("basis column {}", j);
    std::tie(rec.b_mean(j), rec.b_scale(j)) = moments(basis.col(j), name.c_str());
    out.B.col(j) = (basis.col(j).array() - rec.b_mean(j)) / rec.b_scale(j);
  }
  return out;
}

double destandardize_beta_x(const StandardizationRecord& record, double beta_x_std) {
  return beta_x_std * record.y_scale / record.x_scale;
}

double standardize_beta_x(const StandardizationRecord& record, double beta_x) {
  return beta_x * record.x_scale / record.y_scale;
}

}  // namespace spatconf
