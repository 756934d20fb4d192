#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include <Eigen/Dense>

namespace spatconf {

using Rng = std::mt19937_64;

// Counter-based seed derivation: the same (master, counters...) tuple always
// yields the same stream, independent of scheduling order.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> counters);

Eigen::VectorXd standard_normal_vector(Eigen::Index n, Rng& rng);

double draw_normal(Rng& rng);
double draw_uniform(Rng& rng);
// Gamma(shape, rate = 1).
double draw_gamma(double shape, Rng& rng);
// Inverse gamma with density proportional to x^{-shape-1} exp(-scale / x).
double draw_inverse_gamma(double shape, double scale, Rng& rng);

}  // namespace spatconf
