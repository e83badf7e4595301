#include "dsaga/diagnostics.hpp"
#include "dsaga/quadratic_theory.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace dsaga;

namespace {

std::vector<Shard> two_node_scalar() {
  return {Shard{0, make_quadratic_dataset(Matrix::Constant(1, 1, 1.0), Vector::Constant(1, 0.0))},
          Shard{1, make_quadratic_dataset(Matrix::Constant(1, 1, 2.0), Vector::Constant(1, 3.0))}};
}

ClusterConfig exact_config(std::size_t k, std::size_t t) {
  ClusterConfig c;
  c.nodes = k;
  c.rounds = t;
  c.inner = InnerSolve::exact;
  c.record_iterates = true;
  return c;
}

std::size_t line_count(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("closed-form reference for an explicit quadratic") {
  Matrix h = Matrix::Zero(2, 2);
  h(0, 0) = 1.0;
  h(1, 1) = 2.0;
  const Dataset data = make_quadratic_dataset(h, Vector{{3.0, -1.0}});
  const auto ref = reference_optimum(Objective::quadratic(), data);
  CHECK(std::abs(ref.w[0] - 3.0) <= 1e-12);
  CHECK(std::abs(ref.w[1] + 1.0) <= 1e-12);
  CHECK(std::abs(ref.f) <= 1e-12);
}

TEST_CASE("logistic reference is certified and start independent") {
  const Dataset data = testing::logistic_data(500, 10, 3);
  const auto obj = Objective::logistic(0.01);
  const auto a = reference_optimum(obj, data);
  CHECK(a.grad_norm <= 1e-12);
  CHECK(full_gradient(obj, data, a.w).norm() <= 1e-12);
  ReferenceOptions other;
  std::mt19937_64 rng(4);
  other.start = testing::random_vector(10, rng, 3.0);
  const auto b = reference_optimum(obj, data, other);
  CHECK(std::abs(a.f - b.f) <= 1e-12);
  CHECK(std::abs(objective_difference(obj, data, a.w, b.w)) <= 1e-12);
  CHECK_THROWS_AS(reference_optimum(Objective::logistic(0.0), data), Error);
}

TEST_CASE("reference non-convergence carries the best point") {
  const Dataset data = testing::logistic_data(200, 5, 3);
  ReferenceOptions tight;
  tight.max_iterations = 2;
  try {
    reference_optimum(Objective::logistic(0.01), data, tight);
    FAIL("expected non-convergence");
  } catch (const NonConvergenceError& e) {
    CHECK(e.best().size() == 5);
    CHECK(e.best().norm() > 0.0);
  }
}

TEST_CASE("sharded reference minimises the shard average") {
  const Dataset data = testing::logistic_data(301, 4, 5);
  const auto shards = partition(data, 3, 1);  // unequal sizes
  for (const auto obj : {Objective::logistic(0.01), Objective::quadratic(0.01)}) {
    const auto ref = reference_optimum(obj, shards);
    CHECK(sharded_gradient(obj, shards, ref.w).norm() <= 1e-12);
  }
}

TEST_CASE("decomposition: exact mode has no inner error") {
  const auto shards = two_node_scalar();
  const auto obj = Objective::quadratic();
  const auto result = run_dsaga(obj, shards, exact_config(2, 3), Vector::Zero(1));
  const Vector w_star = Vector::Constant(1, 2.0);
  for (const auto& round : result.rounds) {
    const auto optima = inner_optima(obj, shards, round);
    const auto parts = decompose_error(round, optima, w_star);
    REQUIRE(parts.size() == 2);  // start and end of the round
    CHECK(parts.back().inner <= 1e-12);
    for (const auto& p : parts) CHECK(p.holds);
  }
  CHECK_THROWS_AS(decompose_error(result.rounds[0], {}, w_star), Error);
}

TEST_CASE("decomposition: K=1 at convergence") {
  const Dataset data = testing::linear_data(50, 3, 6);
  const auto obj = Objective::quadratic(0.1);
  const auto shards = partition(data, 1, 0);
  const auto ref = reference_optimum(obj, shards);
  ClusterConfig config;
  config.rounds = 2;
  config.passes_per_round = 60;
  config.record_iterates = true;
  const auto result = run_dsaga(obj, shards, config, Vector::Zero(3));
  const auto& last = result.rounds.back();
  const auto parts = decompose_error(last, inner_optima(obj, shards, last), ref.w);
  CHECK(parts.back().inner <= 1e-9);
  CHECK(parts.back().discrepancy <= 1e-9);
}

TEST_CASE("decomposition holds along iterative runs") {
  const Dataset data = testing::logistic_data(400, 5, 7);
  const auto obj = Objective::logistic(0.01);
  const auto shards = partition(data, 4, 1);
  const auto ref = reference_optimum(obj, shards);
  ClusterConfig config;
  config.nodes = 4;
  config.passes_per_round = 3;
  config.rounds = 3;
  config.record_iterates = true;
  const auto result = run_dsaga(obj, shards, config, Vector::Zero(5));
  const auto report = rate_report(result, obj, shards, config, ref);
  CHECK(report.decomposition_holds);
  REQUIRE(report.rounds.size() == 3);
  for (const auto& m : report.rounds) {
    CHECK(m.decomposition.size() == 4);
    CHECK(m.alpha_tilde.size() == 3);
    CHECK(m.omega_tilde.size() == 3);
    for (const auto& a : m.alpha_tilde) CHECK((!a || *a >= 0.0));
    for (const auto& o : m.omega_tilde) CHECK((!o || *o >= 0.0));
    REQUIRE(m.rho_tilde);
    CHECK(*m.rho_tilde >= 0.0);
    CHECK(std::isfinite(*m.rho_tilde));
  }
  CHECK(report.rho_hat);
  CHECK(*report.rho_hat == doctest::Approx(0.75 * wishart_limit(5.0 * 4.0 / 400.0)));
  config.record_iterates = false;
  CHECK_THROWS_AS(rate_report(result, obj, shards, config, ref), Error);
}

TEST_CASE("rho tilde on the scalar two-node example follows the hand recursion") {
  const auto shards = two_node_scalar();
  const auto obj = Objective::quadratic();
  const std::size_t rounds = 6;
  const auto config = exact_config(2, rounds);
  const auto result = run_dsaga(obj, shards, config, Vector::Zero(1));
  const auto ref = reference_optimum(obj, shards);
  const auto report = rate_report(result, obj, shards, config, ref);

  // e1' = -e2 / 2, e2' = e1 / 4; the excess at an averaged point is 0.75 e^2.
  double e1 = -2.0, e2 = -2.0, start = -2.0;
  for (std::size_t t = 0; t < rounds; ++t) {
    const double n1 = -0.5 * e2, n2 = 0.25 * e1;
    e1 = n1;
    e2 = n2;
    const double avg = 0.5 * (e1 + e2);
    const double ratio = (avg * avg) / (start * start);
    REQUIRE(report.rounds[t].rho_tilde);
    CHECK(*report.rounds[t].rho_tilde == doctest::Approx(ratio).epsilon(1e-9));
    CHECK(report.rounds[t].excess_end == doctest::Approx(0.75 * avg * avg).epsilon(1e-9));
    start = avg;
  }
  CHECK(*report.rounds[0].rho_tilde == doctest::Approx(0.015625));
  CHECK(*report.rounds[1].rho_tilde == doctest::Approx(1.0));
}

TEST_CASE("rho tilde edge cases") {
  const Dataset data = testing::linear_data(100, 3, 8);
  const auto obj = Objective::quadratic(0.1);
  const auto shards = partition(data, 1, 0);
  const auto ref = reference_optimum(obj, shards);
  const auto config = exact_config(1, 2);
  const auto result = run_dsaga(obj, shards, config, Vector::Zero(3));
  const auto report = rate_report(result, obj, shards, config, ref);
  CHECK(*report.rounds[0].rho_tilde <= 1e-15);  // exact convergence in one round
  CHECK(!report.rounds[1].rho_tilde);           // nothing left to reduce
  CHECK(*report.rho_hat == 0.0);

  // A round that does not move: ratio one.
  DsagaResult frozen = result;
  frozen.rounds.resize(1);
  frozen.rounds[0].averaged = frozen.rounds[0].start;
  frozen.rounds[0].nodes[0].end_params = frozen.rounds[0].start;
  frozen.rounds[0].nodes[0].iterates = {frozen.rounds[0].start, frozen.rounds[0].start};
  const auto still = rate_report(frozen, obj, shards, config, ref);
  CHECK(*still.rounds[0].rho_tilde == 1.0);
}

TEST_CASE("exact runs obey the function-value form of the contraction bound") {
  const Dataset data = testing::linear_data(800, 5, 9);
  const auto obj = Objective::quadratic();
  for (std::size_t k : {2, 4}) {
    const auto shards = partition(data, k, 2);
    const auto hessians = shard_hessians(obj, shards);
    const auto theory = rho_bound(hessians);
    const Vector w_star = global_optimum(hessians);
    const double big_l = smoothness_constants(obj, data).L;
    const auto result = run_dsaga(obj, shards, exact_config(k, 6), Vector::Zero(5));
    double previous = w_star.norm();
    for (const auto& round : result.rounds) {
      const double excess = sharded_difference(obj, shards, round.averaged, w_star);
      CHECK(excess <= 0.5 * big_l * std::pow(theory.contraction * previous, 2) * (1 + 1e-9) + 1e-15);
      previous = 0.0;
      for (const auto& n : round.nodes) previous = std::max(previous, (n.end_params - w_star).norm());
    }
  }
}

TEST_CASE("predicted rate") {
  CHECK(*predicted_rate(10, 1, 100) == 0.0);
  CHECK(*predicted_rate(10, 2, 180) == doctest::Approx(0.5 * 1.0));
  CHECK(!predicted_rate(10, 20, 100));
  CHECK(!median({}));
  CHECK(*median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(*median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}

TEST_CASE("CSV contract") {
  std::ostringstream empty;
  write_csv({}, empty);
  CHECK(empty.str() ==
        "run_id,algo,K,U,round,pass_opt,pass_total,node,f,excess,grad_norm,inner_err,disc_err,"
        "rho_tilde,alpha_tilde,omega_tilde,rho_hat\n");

  std::vector<TraceRecord> records(3);
  records[0].run_id = "a";
  records[0].algo = "dsaga";
  records[0].nodes = 4;
  records[0].passes_per_round = 2;
  records[0].round = 1;
  records[0].pass_opt = 2.0;
  records[0].pass_total = 4.0;
  records[0].node = "avg";
  records[0].f = 0.1 + 0.2;
  records[0].excess = 1e-300;
  records[0].grad_norm = 123456789.125;
  records[1].node = "0";
  records[1].rho_tilde = -0.0;
  records[1].alpha_tilde = 5e-324;
  records[2].omega_tilde = 0.7;
  records[2].rho_hat = 1.0 / 3.0;
  records[2].inner_err = 2.0;
  records[2].disc_err = 1e20;

  std::ostringstream out;
  write_csv(records, out);
  CHECK(line_count(out.str()) == 4);
  CHECK(out.str().find("0.30000000000000004") != std::string::npos);
  std::istringstream in(out.str());
  CHECK(read_csv(in) == records);

  std::istringstream bad("run_id,algo\n");
  CHECK_THROWS_AS(read_csv(bad), ParseError);
  records[0].run_id = "a,b";
  std::ostringstream sink;
  CHECK_THROWS_AS(write_csv(records, sink), Error);
  CHECK_THROWS_AS(write_csv({}, std::string("/nonexistent-dir/x.csv")), Error);
}
