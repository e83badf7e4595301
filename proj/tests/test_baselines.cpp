#include "dsaga/baselines.hpp"
#include "dsaga/diagnostics.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace dsaga;

namespace {

Dataset quadratic(const Matrix& h, const Vector& c) { return make_quadratic_dataset(h, c); }

}  // namespace

TEST_CASE("gradient descent stays at the optimum") {
  const Dataset data = testing::logistic_data(100, 4, 1);
  const auto obj = Objective::logistic(0.01);
  const auto ref = reference_optimum(obj, data);
  const auto run = gd_run(obj, data, ref.w, 5);
  // Each 1/L step moves at most |grad|/L, and the gradient is already tiny.
  const double L = smoothness_constants(obj, data).L;
  CHECK((run.w - ref.w).norm() <= 5.0 * ref.grad_norm / L + 1e-15);
  CHECK(run.trace.size() == 6);
}

TEST_CASE("gradient descent: Newton-sized step on a scalar quadratic") {
  const Dataset data = quadratic(Matrix::Constant(1, 1, 2.0), Vector::Constant(1, 5.0));
  const auto run = gd_run(Objective::quadratic(), data, Vector::Zero(1), 1, 0.5);
  CHECK(run.w[0] == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("gradient descent rate on a kappa = 10 quadratic") {
  Vector diag(4);
  diag << 1.0, 3.0, 7.0, 10.0;
  const Dataset data = quadratic(diag.asDiagonal().toDenseMatrix(), Vector{{1.0, -2.0, 0.5, 3.0}});
  const auto obj = Objective::quadratic();
  const auto ref = reference_optimum(obj, data);
  const auto run = gd_run(obj, data, Vector::Zero(4), 60);
  const double kappa = 10.0;
  // Asymptotic per-step contraction of the excess.
  for (std::size_t i = 40; i < 60; ++i) {
    const double ratio = (run.trace[i + 1].f - ref.f) / (run.trace[i].f - ref.f);
    CHECK(ratio <= std::pow(1.0 - 1.0 / kappa, 2) + 1e-6);
  }
}

TEST_CASE("gradient descent divergence is detected") {
  const Dataset data = quadratic(Matrix::Constant(1, 1, 1.0), Vector::Constant(1, 1.0));
  CHECK_THROWS_AS(gd_run(Objective::quadratic(), data, Vector::Zero(1), 20, 3.0), DivergenceError);
  CHECK_THROWS_AS(gd_run(Objective::quadratic(), data, Vector::Zero(1), 20, 0.0), Error);
}

TEST_CASE("L-BFGS: identity Hessian converges in one unit step") {
  const Dataset data = quadratic(Matrix::Identity(3, 3), Vector{{1.0, 2.0, -3.0}});
  LbfgsOptions options;
  options.tolerance = 1e-12;
  const auto run = lbfgs_run(Objective::quadratic(), data, Vector::Zero(3), options);
  CHECK(run.iterations == 1);
  CHECK(run.trace[1].step == 1.0);
  CHECK(run.converged);
}

TEST_CASE("L-BFGS returns immediately when already converged") {
  const Dataset data = quadratic(Matrix::Identity(2, 2), Vector{{1.0, 2.0}});
  const auto run = lbfgs_run(Objective::quadratic(), data, Vector{{1.0, 2.0}});
  CHECK(run.iterations == 0);
  CHECK(run.w == Vector{{1.0, 2.0}});
  CHECK(run.converged);
}

TEST_CASE("L-BFGS on random quadratics matches a direct solve") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix h = testing::random_spd_spectrum(10, rng, 1.0, 3.0);
    const Vector c = testing::random_vector(10, rng);
    const Dataset data = quadratic(h, c);
    LbfgsOptions options;
    options.tolerance = 1e-10;
    const auto run = lbfgs_run(Objective::quadratic(), data, Vector::Zero(10), options);
    CHECK(run.converged);
    CHECK(run.iterations <= 20);
    CHECK((run.w - h.llt().solve(h * c)).norm() <= 1e-8);
  }
}

TEST_CASE("L-BFGS on a kappa ~ 10 quadratic needs more than d iterations but converges") {
  std::mt19937_64 rng(2);
  const Matrix h = testing::random_spd(10, rng, 0.3);
  const Vector c = testing::random_vector(10, rng);
  LbfgsOptions options;
  options.tolerance = 1e-10;
  const auto run = lbfgs_run(Objective::quadratic(), quadratic(h, c), Vector::Zero(10), options);
  CHECK(run.converged);
  CHECK(run.iterations <= 40);
  CHECK((run.w - c).norm() <= 1e-8);
}

TEST_CASE("L-BFGS invariants: descent and Armijo at every accepted step") {
  const Dataset data = testing::logistic_data(300, 8, 3);
  const auto obj = Objective::logistic(0.01);
  const auto problem = make_problem(obj, data);
  LbfgsOptions options;
  options.tolerance = 1e-10;
  const auto run = lbfgs_run(problem, Vector::Zero(8), options);
  CHECK(run.converged);
  for (std::size_t i = 1; i < run.trace.size(); ++i) {
    const auto& it = run.trace[i];
    CHECK(it.directional < 0.0);
    CHECK(it.f - run.trace[i - 1].f <= 1e-4 * it.step * it.directional + 1e-15);
  }
  // One pass per value and per gradient.
  CHECK(run.passes >= 2.0 * double(run.iterations));
}

TEST_CASE("L-BFGS without memory is line-searched gradient descent") {
  std::mt19937_64 rng(4);
  const Matrix h = testing::random_spd(6, rng, 0.2);
  const Dataset data = quadratic(h, testing::random_vector(6, rng));
  const auto problem = make_problem(Objective::quadratic(), data);
  const Vector w0 = testing::random_vector(6, rng);
  LbfgsOptions options;
  options.memory = 0;
  options.max_iterations = 25;
  options.tolerance = 0.0;
  const auto lbfgs = lbfgs_run(problem, w0, options);
  const auto gd = gd_run(problem, w0, 25, GdStepRule::backtracking());
  REQUIRE(lbfgs.trace.size() == gd.trace.size());
  CHECK(lbfgs.w == gd.w);
  for (std::size_t i = 1; i < gd.trace.size(); ++i) CHECK(lbfgs.trace[i].step == gd.trace[i].step);
}

TEST_CASE("line search failure is reported") {
  const Dataset data = quadratic(Matrix::Identity(1, 1), Vector::Zero(1));
  const auto problem = make_problem(Objective::quadratic(), data);
  // An ascent direction mislabelled as descent never satisfies Armijo.
  CHECK_THROWS_AS(armijo_backtrack(problem, Vector::Constant(1, 1.0), Vector::Constant(1, 1.0), -1.0),
                  LineSearchError);
  CHECK_THROWS_AS(armijo_backtrack(problem, Vector::Constant(1, 1.0), Vector::Constant(1, -1.0), 0.0),
                  LineSearchError);
}

TEST_CASE("two-loop recursion with one pair applies the secant scaling") {
  LbfgsState state;
  const Vector s = Vector{{1.0, 0.0}}, y = Vector{{2.0, 0.0}};
  state.history.emplace_back(s, y);
  const Vector d = lbfgs_direction(state, Vector{{4.0, 0.0}});
  CHECK(d[0] == doctest::Approx(-2.0));  // exact inverse Hessian along s
  CHECK(lbfgs_direction(LbfgsState{}, Vector{{4.0, 1.0}}) == Vector{{-4.0, -1.0}});
}

TEST_CASE("SGD warm start") {
  const Dataset one = testing::logistic_data(1, 3, 5);
  const auto obj = Objective::logistic(0.1);
  const Vector w0 = Vector::Zero(3);
  const Vector step = w0 - auto_step_size(obj, one) * full_gradient(obj, one, w0);
  CHECK((sgd_warmstart(obj, one, w0, 3) - step).norm() <= 1e-15);

  const Dataset data = testing::logistic_data(500, 5, 6);
  const Vector z = Vector::Zero(5);
  CHECK(sgd_warmstart(obj, data, z, 9) == sgd_warmstart(obj, data, z, 9));
  CHECK(smoothness_constants(obj, data).condition() <= 200.0);
  const auto well = Objective::logistic(1.0);
  CHECK(smoothness_constants(well, data).condition() <= 10.0);
  const Vector w = sgd_warmstart(well, data, z, 9);
  CHECK(objective_value(well, data, w) <= objective_value(well, data, z));
  CHECK_THROWS_AS(sgd_warmstart(obj, Dataset({}, 3), w0, 1), Error);
}
