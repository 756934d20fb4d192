#pragma once

#include <functional>
#include <vector>

#include <spatconf/ss_regression.hpp>

namespace oracle {

using spatconf::Matrix;
using spatconf::Vector;

// log of the integral of exp(logf) over [lo, hi], by Gauss-Kronrod on pieces
// of the given width after a coarse scan for the maximum.
double log_integrate(const std::function<double(double)>& logf, double lo, double hi, double width);

// log p(y | gamma) under the FV prior, integrating sigma2 numerically.
// `a` is the full design [1 x B]; gamma has one entry per basis column.
double fv_log_marginal(const Vector& y, const Matrix& a, const std::vector<int>& gamma,
                       const spatconf::SsPriorConfig& prior);

// Same under NMIG with every slab variance integrated (nested quadrature;
// only sensible for one or two bases).
double nmig_log_marginal(const Vector& y, const Matrix& a, const std::vector<int>& gamma,
                         const spatconf::SsPriorConfig& prior);

// Posterior probabilities of every inclusion pattern (bit j of the index is
// basis j) with independent Bernoulli(w) model priors.
std::vector<double> fv_model_posterior(const Vector& y, const Matrix& a,
                                       const spatconf::SsPriorConfig& prior);
std::vector<double> nmig_model_posterior(const Vector& y, const Matrix& a,
                                         const spatconf::SsPriorConfig& prior);

// pMOM log joint of (y, beta, xi_S, eta = log sigma2), written from the
// model definition with no shared code.
double mom_log_joint(const Vector& y, const Matrix& a, const std::vector<int>& model,
                     const Vector& params, const spatconf::SsPriorConfig& prior);

struct LaplaceResult {
  double log_marginal = 0.0;
  Vector mode;
};

// Laplace approximation with a finite-difference Newton search. Each xi
// stays on the side of its least-squares estimate.
LaplaceResult mom_laplace(const Vector& y, const Matrix& a, const std::vector<int>& model,
                          const spatconf::SsPriorConfig& prior);

// Posterior over all 2^p models with the Beta-Binomial(1, 1) model prior.
std::vector<double> mom_model_posterior(const Vector& y, const Matrix& a,
                                        const spatconf::SsPriorConfig& prior);

double total_variation(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace oracle
