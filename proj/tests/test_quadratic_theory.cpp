#include "dsaga/quadratic_theory.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <Eigen/SVD>

#include <cmath>

using namespace dsaga;

namespace {

ShardHessian from_matrix(int id, const Matrix& h) {
  ShardHessian s;
  s.node_id = id;
  s.H = h;
  s.rhs = Vector::Zero(h.rows());
  s.samples = 100;
  return s;
}

double svd_norm(const Matrix& m) {
  return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

}  // namespace

TEST_CASE("rank-deficient shard is flagged singular") {
  const std::vector<Shard> shards = {{0, parse_libsvm("1 1:1", 2)}};
  const auto h = shard_hessians(Objective::quadratic(), shards);
  REQUIRE(h.size() == 1);
  Matrix expected = Matrix::Zero(2, 2);
  expected(0, 0) = 1.0;
  CHECK(h[0].H == expected);
  CHECK(h[0].singular);
  CHECK(h[0].center.size() == 0);
  CHECK_THROWS_AS(rho_bound({h[0], h[0]}), Error);
  CHECK_THROWS_AS(global_optimum(h), Error);
  CHECK_THROWS_AS(shard_hessians(Objective::logistic(0.1), shards), Error);
}

TEST_CASE("identical shards have identical Hessians and rho = 0") {
  const Dataset data = testing::linear_data(50, 3, 1);
  const std::vector<Shard> shards = {{0, data}, {1, data}, {2, data}};
  const auto h = shard_hessians(Objective::quadratic(), shards);
  CHECK(h[0].H == h[1].H);
  CHECK(h[1].H == h[2].H);
  const auto p = rho_bound(h);
  CHECK(p.rho == doctest::Approx(0.0));
  CHECK(p.contraction == doctest::Approx(0.0));
  CHECK(p.gamma_mp == doctest::Approx(3.0 * 3.0 / 150.0));
}

TEST_CASE("shard Hessians average to the pooled Hessian") {
  const Dataset data = testing::linear_data(120, 4, 2);
  const auto shards = partition(data, 4, 3);
  const auto h = shard_hessians(Objective::quadratic(0.1), shards);
  Matrix avg = Matrix::Zero(4, 4);
  for (const auto& s : h) avg += s.H / 4.0;
  CHECK((avg - quadratic_hessian(data, 0.1)).norm() <= 1e-10);
  // Global optimum satisfies sum H_l w = sum H_l w_l*.
  const Vector w = global_optimum(h);
  Vector lhs = Vector::Zero(4), rhs = Vector::Zero(4);
  for (const auto& s : h) {
    lhs += s.H * w;
    rhs += s.H * s.center;
  }
  CHECK((lhs - rhs).norm() <= 1e-10);
}

TEST_CASE("scalar two-node rho") {
  const auto p = rho_bound({from_matrix(0, Matrix::Constant(1, 1, 1.0)),
                            from_matrix(1, Matrix::Constant(1, 1, 2.0))});
  CHECK(p.rho == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.contraction == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("K=1 convention") {
  std::mt19937_64 rng(1);
  const auto p = rho_bound({from_matrix(0, testing::random_spd(3, rng))});
  CHECK(p.rho == 0.0);
  CHECK(p.contraction == 0.0);
}

TEST_CASE("rho is permutation and scale invariant") {
  std::mt19937_64 rng(2);
  std::vector<ShardHessian> h;
  for (int k = 0; k < 4; ++k) h.push_back(from_matrix(k, testing::random_spd(5, rng)));
  const double base = rho_bound(h).rho;
  std::vector<ShardHessian> permuted = {h[2], h[0], h[3], h[1]};
  CHECK(rho_bound(permuted).rho == doctest::Approx(base).epsilon(1e-9));
  auto scaled = h;
  for (auto& s : scaled) s.H *= 7.5;
  CHECK(rho_bound(scaled).rho == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("power iteration matches the SVD") {
  std::mt19937_64 rng(3);
  CHECK(spectral_norm(Matrix::Constant(1, 1, -3.0)) == doctest::Approx(3.0).epsilon(1e-12));
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = transfer_matrix(testing::random_spd(2, rng), testing::random_spd(2, rng));
    CHECK(std::abs(spectral_norm(a) - svd_norm(a)) <= 1e-8);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix b(2, 2);
    b << normal(rng), normal(rng), normal(rng), normal(rng);
    CHECK(std::abs(spectral_norm(b) - svd_norm(b)) <= 1e-8);
  }
  const Matrix big = transfer_matrix(testing::random_spd(30, rng), testing::random_spd(30, rng));
  CHECK(spectral_norm(big) == doctest::Approx(svd_norm(big)).epsilon(1e-8));
  CHECK(spectral_norm(Matrix::Zero(3, 3)) == 0.0);
}

TEST_CASE("Wishart limit closed forms") {
  CHECK(wishart_limit(1e-12) == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(wishart_limit(0.0) == 0.0);
  CHECK(wishart_limit(1.0 / 9.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(wishart_limit(0.25) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(wishart_limit(0.1) == doctest::Approx(0.9249).epsilon(1e-4));
  CHECK_THROWS_AS(wishart_limit(1.0), Error);
  CHECK_THROWS_AS(wishart_limit(2.0), Error);
  CHECK_THROWS_AS(wishart_limit(-0.1), Error);
}

TEST_CASE("contraction step on the scalar example") {
  const std::vector<ShardHessian> h = {from_matrix(0, Matrix::Constant(1, 1, 1.0)),
                                       from_matrix(1, Matrix::Constant(1, 1, 2.0))};
  auto e = contraction_step(h, {Vector::Constant(1, -2.0), Vector::Constant(1, -2.0)});
  CHECK(e[0][0] == doctest::Approx(1.0));
  CHECK(e[1][0] == doctest::Approx(-0.5));
  e = contraction_step(h, e);
  CHECK(e[0][0] == doctest::Approx(0.25));
  CHECK(e[1][0] == doctest::Approx(0.25));
  CHECK_THROWS_AS(contraction_step(h, {Vector::Zero(1)}), Error);
}

TEST_CASE("Wishart sampling and empirics") {
  const Matrix a = sample_wishart(4, 50, 9);
  CHECK(a == sample_wishart(4, 50, 9));
  CHECK((a - a.transpose()).norm() == 0.0);
  CHECK_THROWS_AS(wishart_empirics({10, 10, 1, 0, 1}), Error);
  CHECK_THROWS_AS(wishart_empirics({0, 10, 1, 0, 1}), Error);

  const auto s = wishart_empirics({50, 500, 3, 2, 4});
  CHECK(s.gamma_mp == doctest::Approx(0.1));
  CHECK(s.norm_limit == doctest::Approx(std::pow(1.0 + std::sqrt(0.1), 2)));
  CHECK(s.trace_inv_limit == doctest::Approx(1.0 / 0.9));
  CHECK(s.norm_stat == doctest::Approx(s.norm_limit).epsilon(0.15));
  CHECK(s.trace_inv_stat == doctest::Approx(s.trace_inv_limit).epsilon(0.1));
  CHECK(s.rho_stat > 0.0);
}
