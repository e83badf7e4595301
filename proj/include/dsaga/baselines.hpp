#pragma once

#include "dsaga/saga.hpp"

#include <deque>
#include <functional>
#include <optional>
#include <vector>

namespace dsaga {

/// A smooth function seen through value, gradient and a cancellation-free
/// difference f(w) - f(v). Each value or difference call costs one data
/// pass, each gradient call one more.
struct SmoothProblem {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<double(const Vector&, const Vector&)> difference;
};

/// The returned problem copies `obj` but refers to `data`, which must outlive it.
SmoothProblem make_problem(const Objective& obj, const Dataset& data);
SmoothProblem make_problem(const Objective& obj, const std::vector<Shard>& shards);

struct IterationRecord {
  std::size_t iteration = 0;
  double f = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  double directional = 0.0;  // g^T d of the accepted direction
  double passes = 0.0;       // cumulative data passes
};

struct SolverResult {
  Vector w;
  std::vector<IterationRecord> trace;
  std::size_t iterations = 0;
  bool converged = false;
  double passes = 0.0;
};

class LineSearchError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

struct ArmijoOptions {
  double c1 = 1e-4;
  double initial_step = 1.0;
  std::size_t max_halvings = 60;
};

struct ArmijoResult {
  double step = 0.0;
  std::size_t trials = 0;
};

/// Largest step 2^-i * initial with f(w + a d) - f(w) <= c1 a g^T d.
ArmijoResult armijo_backtrack(const SmoothProblem& problem, const Vector& w,
                              const Vector& direction, double directional,
                              const ArmijoOptions& options = {});

struct GdStepRule {
  enum class Kind { inverse_lipschitz, fixed, backtracking };
  Kind kind = Kind::inverse_lipschitz;
  double gamma = 0.0;  // fixed: the step; inverse_lipschitz: L

  static GdStepRule inverse_lipschitz(double lipschitz) { return {Kind::inverse_lipschitz, lipschitz}; }
  static GdStepRule fixed(double gamma) { return {Kind::fixed, gamma}; }
  static GdStepRule backtracking() { return {Kind::backtracking, 0.0}; }
};

/// w <- w - step * g(w) for `steps` iterations. Throws DivergenceError when
/// the objective grows tenfold over its starting value.
SolverResult gd_run(const SmoothProblem& problem, const Vector& w0, std::size_t steps,
                    GdStepRule rule, double tolerance = 0.0);
SolverResult gd_run(const Objective& obj, const Dataset& data, const Vector& w0,
                    std::size_t steps, std::optional<double> fixed_step = std::nullopt);

struct LbfgsOptions {
  std::size_t max_iterations = 1000;
  double tolerance = 1e-10;  // on |g|
  std::size_t memory = 10;
  ArmijoOptions line_search;
};

struct LbfgsState {
  Vector w;
  std::deque<std::pair<Vector, Vector>> history;  // (s, y), oldest first
  std::size_t memory = 10;
  std::size_t iteration = 0;
};

/// Two-loop recursion direction -H_k g from the stored pairs.
Vector lbfgs_direction(const LbfgsState& state, const Vector& gradient);

/// Limited-memory BFGS with Armijo backtracking; pairs with s^T y <= 1e-12 |s| |y|
/// are skipped.
SolverResult lbfgs_run(const SmoothProblem& problem, const Vector& w0,
                       const LbfgsOptions& options = {});
SolverResult lbfgs_run(const Objective& obj, const Dataset& data, const Vector& w0,
                       const LbfgsOptions& options = {});

/// One pass of plain SGD, step 1/(3 L_max) / sqrt(i + 1), with replacement.
Vector sgd_warmstart(const Objective& obj, const Dataset& data, const Vector& w0,
                     std::uint64_t seed);

}  // namespace dsaga
