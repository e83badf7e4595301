#pragma once

#include "dsaga/dataset.hpp"
#include "dsaga/objective.hpp"

#include <functional>
#include <random>

namespace testing {

inline dsaga::Dataset logistic_data(std::size_t n, std::size_t d, std::uint64_t seed,
                                    double scale = 2.0) {
  dsaga::LabelSpec labels{dsaga::LabelRule::logistic, 0.0, scale};
  return dsaga::generate_gaussian(n, d, dsaga::IdentityCovariance{}, seed, labels);
}

inline dsaga::Dataset linear_data(std::size_t n, std::size_t d, std::uint64_t seed,
                                  double noise = 0.1) {
  dsaga::LabelSpec labels{dsaga::LabelRule::linear, noise, 1.0};
  return dsaga::generate_gaussian(n, d, dsaga::IdentityCovariance{}, seed, labels);
}

inline dsaga::Vector random_vector(std::size_t d, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  dsaga::Vector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  return v;
}

inline dsaga::Vector central_difference(const std::function<double(const dsaga::Vector&)>& f,
                                        const dsaga::Vector& w, double h = 1e-6) {
  dsaga::Vector g(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    dsaga::Vector a = w, b = w;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

inline dsaga::Matrix random_spd(std::size_t d, std::mt19937_64& rng, double shift = 0.5) {
  std::normal_distribution<double> normal(0.0, 1.0);
  dsaga::Matrix a(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) a(i, j) = normal(rng);
  dsaga::Matrix h = a.transpose() * a / double(d);
  h.diagonal().array() += shift;
  return h;
}

// Random eigenbasis with eigenvalues uniform in [lo, hi].
inline dsaga::Matrix random_spd_spectrum(std::size_t d, std::mt19937_64& rng, double lo, double hi) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(lo, hi);
  dsaga::Matrix a(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) a(i, j) = normal(rng);
  const dsaga::Matrix q = Eigen::HouseholderQR<dsaga::Matrix>(a).householderQ();
  dsaga::Vector ev(d);
  for (std::size_t i = 0; i < d; ++i) ev[i] = unif(rng);
  return q * ev.asDiagonal() * q.transpose();
}

}  // namespace testing
