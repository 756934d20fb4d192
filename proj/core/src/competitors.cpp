#include "spatconf/competitors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "spatconf/errors.hpp"
#include "spatconf/linalg.hpp"
#include "spatconf/penalized.hpp"

namespace spatconf {

const std::vector<MethodId>& all_methods() {
  static const std::vector<MethodId> methods = {
      MethodId::OLS,  MethodId::SRE, MethodId::SpatialTP, MethodId::SpatialPlusFx,
      MethodId::SpatialPlus, MethodId::GSEM, MethodId::KS, MethodId::SS_fv,
      MethodId::SS_nmig, MethodId::SS_mom};
  return methods;
}

std::string to_string(MethodId method) {
  switch (method) {
    case MethodId::OLS: return "OLS";
    case MethodId::SRE: return "SRE";
    case MethodId::SpatialTP: return "SpatialTP";
    case MethodId::SpatialPlusFx: return "SpatialPlus_fx";
    case MethodId::SpatialPlus: return "SpatialPlus";
    case MethodId::GSEM: return "gSEM";
    case MethodId::KS: return "KS";
    case MethodId::SS_fv: return "SS_fv";
    case MethodId::SS_nmig: return "SS_nmig";
    case MethodId::SS_mom: return "SS_mom";
  }
  return "?";
}

MethodId method_from_string(const std::string& name) {
  auto lower = [](std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    std::string out;
    for (char c : s) {
      if (c == '+') out += "plus";
      else if (c != '_') out += c;
    }
    return out;
  };
  const std::string key = lower(name);
  for (MethodId m : all_methods()) {
    if (lower(to_string(m)) == key) return m;
  }
  if (key == "spatialplusfx" || key == "spatialfx") return MethodId::SpatialPlusFx;
  throw UsageError(fmt::format("unknown method '{}'", name));
}

FitResult fit_ols(const Vector& y, const Vector& x) {
  const auto fit = linear_fit(intercept_design(x), y);
  const double n = static_cast<double>(y.size());
  if (y.size() < 3) throw UsageError("OLS needs at least three observations");
  const double s2 = fit.rss / (n - 2.0);
  const double se = std::sqrt(s2 * fit.unscaled_covariance(1, 1));
  const double t = student_t_quantile(0.975, n - 2.0);
  FitResult r;
  r.method = MethodId::OLS;
  r.beta_x_hat = fit.coef(1);
  r.lo = r.beta_x_hat - t * se;
  r.hi = r.beta_x_hat + t * se;
  return r;
}

std::size_t required_tprs_rank(std::size_t n, const SplineConfig& cfg) {
  if (n < 8) throw UsageError("spline methods need at least eight sites");
  const std::size_t cap = n - 4;
  std::size_t need = std::min(cfg.k_max, cap);
  for (std::size_t k : cfg.ks_grid) need = std::max(need, std::min(k, cap));
  return need;
}

namespace {

Matrix hcat(std::initializer_list<const Matrix*> blocks) {
  Eigen::Index cols = 0, rows = (*blocks.begin())->rows();
  for (auto* b : blocks) cols += b->cols();
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (auto* b : blocks) {
    out.middleCols(at, b->cols()) = *b;
    at += b->cols();
  }
  return out;
}

PenalizedRegression::Fit smooth_fit(const PenalizedRegression& reg, const Vector& y,
                                    const SplineConfig& cfg) {
  if (cfg.fixed_lambda) return reg.fit(y, *cfg.fixed_lambda);
  return reg.fit_gcv(y, cfg.gcv_grid_points);
}

FitResult from_penalized(MethodId method, const PenalizedRegression::Fit& f, Eigen::Index col,
                         Eigen::Index n, double edf_smooth) {
  FitResult r;
  r.method = method;
  r.beta_x_hat = f.coef(col);
  const double dof = std::max(static_cast<double>(n) - f.edf, 1.0);
  const double se = std::sqrt(f.rss / dof * f.unscaled_covariance(col, col));
  const double z = normal_quantile(0.975);
  r.lo = r.beta_x_hat - z * se;
  r.hi = r.beta_x_hat + z * se;
  r.edf = edf_smooth;
  r.diagnostics["lambda"] = fmt::format("{:.6g}", f.lambda);
  if (!f.warning.empty()) r.diagnostics["warning"] = f.warning;
  return r;
}

}  // namespace

FitResult fit_spline_family(MethodId method, const Vector& y, const Vector& x,
                            const TprsBasis& tprs, const SplineConfig& cfg) {
  const Eigen::Index n = y.size();
  if (x.size() != n || tprs.null_space.rows() != n) throw UsageError("data and basis lengths differ");
  const std::size_t cap = static_cast<std::size_t>(n) - 4;
  const std::size_t k = std::min(cfg.k_max, cap);
  if (tprs.rank() < k) throw UsageError("TPRS basis has lower rank than k_max");
  const auto sub = tprs_truncate(tprs, k);
  const Matrix ones = Matrix::Ones(n, 1);
  const Matrix xcol = x;
  const Matrix coords = sub.null_space.rightCols(2);

  switch (method) {
    case MethodId::SpatialTP: {
      const Matrix fixed = hcat({&ones, &xcol, &coords});
      PenalizedRegression reg(fixed, sub.smooth, sub.penalty);
      const auto f = smooth_fit(reg, y, cfg);
      return from_penalized(method, f, 1, n, f.edf - 2.0);
    }
    case MethodId::SpatialPlusFx:
    case MethodId::SpatialPlus: {
      SplineConfig c = cfg;
      if (method == MethodId::SpatialPlusFx) c.fixed_lambda = 0.0;
      PenalizedRegression xreg(sub.null_space, sub.smooth, sub.penalty);
      const auto fx = smooth_fit(xreg, x, c);
      const Matrix rx = x - fx.fitted;
      const Matrix fixed = hcat({&ones, &rx, &coords});
      PenalizedRegression yreg(fixed, sub.smooth, sub.penalty);
      const auto f = smooth_fit(yreg, y, c);
      auto r = from_penalized(method, f, 1, n, f.edf - 2.0);
      r.diagnostics["lambda_x"] = fmt::format("{:.6g}", fx.lambda);
      return r;
    }
    case MethodId::GSEM: {
      PenalizedRegression reg(sub.null_space, sub.smooth, sub.penalty);
      const auto fy = smooth_fit(reg, y, cfg);
      const auto fx = smooth_fit(reg, x, cfg);
      const Vector ry = y - fy.fitted;
      const Vector rx = x - fx.fitted;
      const double sxx = rx.squaredNorm();
      if (!(sxx > 1e-12 * std::max(1.0, x.squaredNorm()))) {
        throw RankError("exposure is fully explained by the spatial smooth");
      }
      FitResult r;
      r.method = method;
      r.beta_x_hat = rx.dot(ry) / sxx;
      const double rss = (ry - r.beta_x_hat * rx).squaredNorm();
      const double se = std::sqrt(rss / static_cast<double>(n - 1) / sxx);
      const double z = normal_quantile(0.975);
      r.lo = r.beta_x_hat - z * se;
      r.hi = r.beta_x_hat + z * se;
      r.edf = fy.edf - 1.0;
      r.diagnostics["lambda_y"] = fmt::format("{:.6g}", fy.lambda);
      r.diagnostics["lambda_x"] = fmt::format("{:.6g}", fx.lambda);
      return r;
    }
    case MethodId::KS: {
      const double nn = static_cast<double>(n);
      std::size_t best_k = 0;
      double best_aic = std::numeric_limits<double>::infinity();
      std::vector<std::size_t> grid;
      for (std::size_t kk : cfg.ks_grid) {
        const std::size_t c = std::min(kk, cap);
        if (c > 3 && std::find(grid.begin(), grid.end(), c) == grid.end()) grid.push_back(c);
      }
      if (grid.empty()) throw UsageError("KS grid has no usable rank");
      for (std::size_t kk : grid) {
        if (tprs.rank() < kk) throw UsageError("TPRS basis has lower rank than the KS grid");
        const auto b = tprs_truncate(tprs, kk);
        const Matrix d = hcat({&b.null_space, &b.smooth});
        const double rss = linear_fit(d, y).rss;
        const double aic = nn * std::log(rss / nn) + 2.0 * static_cast<double>(kk + 1);
        if (aic < best_aic) {
          best_aic = aic;
          best_k = kk;
        }
      }
      const auto b = tprs_truncate(tprs, best_k);
      const Matrix kc = b.null_space.rightCols(2);
      const Matrix d = hcat({&ones, &xcol, &kc, &b.smooth});
      const auto fit = linear_fit(d, y);
      FitResult r;
      r.method = method;
      r.beta_x_hat = fit.coef(1);
      const double dof = nn - static_cast<double>(d.cols());
      const double se = std::sqrt(fit.rss / dof * fit.unscaled_covariance(1, 1));
      const double t = student_t_quantile(0.975, dof);
      r.lo = r.beta_x_hat - t * se;
      r.hi = r.beta_x_hat + t * se;
      r.edf = static_cast<double>(best_k) - 1.0;
      r.diagnostics["k_selected"] = std::to_string(best_k);
      return r;
    }
    default:
      throw UsageError(fmt::format("{} is not a spline-family method", to_string(method)));
  }
}

FitResult fit_spline_family(MethodId method, const Vector& y, const Vector& x,
                            const SiteSet& sites, const SplineConfig& cfg) {
  const auto tprs = tprs_basis(sites, required_tprs_rank(sites.size(), cfg));
  return fit_spline_family(method, y, x, tprs, cfg);
}

}  // namespace spatconf
