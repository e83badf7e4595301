#include "dsaga/baselines.hpp"

#include <cmath>
#include <random>

namespace dsaga {

SmoothProblem make_problem(const Objective& obj, const Dataset& data) {
  return {
      [obj, &data](const Vector& w) { return objective_value(obj, data, w); },
      [obj, &data](const Vector& w) { return full_gradient(obj, data, w); },
      [obj, &data](const Vector& w, const Vector& v) {
        return objective_difference(obj, data, w, v);
      },
  };
}

SmoothProblem make_problem(const Objective& obj, const std::vector<Shard>& shards) {
  return {
      [obj, &shards](const Vector& w) { return sharded_value(obj, shards, w); },
      [obj, &shards](const Vector& w) { return sharded_gradient(obj, shards, w); },
      [obj, &shards](const Vector& w, const Vector& v) {
        return sharded_difference(obj, shards, w, v);
      },
  };
}

ArmijoResult armijo_backtrack(const SmoothProblem& problem, const Vector& w,
                              const Vector& direction, double directional,
                              const ArmijoOptions& options) {
  if (!(directional < 0.0))
    throw LineSearchError("not a descent direction (g^T d = " + std::to_string(directional) + ")");
  double step = options.initial_step;
  ArmijoResult out;
  for (std::size_t i = 0; i <= options.max_halvings; ++i) {
    ++out.trials;
    const double decrease = problem.difference(w + step * direction, w);
    if (std::isfinite(decrease) && decrease <= options.c1 * step * directional) {
      out.step = step;
      return out;
    }
    step *= 0.5;
  }
  throw LineSearchError("Armijo line search failed after " +
                        std::to_string(options.max_halvings) + " halvings (|d| = " +
                        std::to_string(direction.norm()) + ", g^T d = " +
                        std::to_string(directional) + ")");
}

SolverResult gd_run(const SmoothProblem& problem, const Vector& w0, std::size_t steps,
                    GdStepRule rule, double tolerance) {
  if (rule.kind == GdStepRule::Kind::inverse_lipschitz && !(rule.gamma > 0.0))
    throw Error("gradient descent needs L > 0");
  if (rule.kind == GdStepRule::Kind::fixed && !(rule.gamma > 0.0))
    throw Error("step size must be positive");

  SolverResult out;
  out.w = w0;
  const double f0 = problem.value(w0);
  Vector g = problem.gradient(out.w);
  out.passes = 2.0;
  out.trace.push_back({0, f0, g.norm(), 0.0, 0.0, out.passes});

  for (std::size_t it = 1; it <= steps; ++it) {
    if (g.norm() <= tolerance) {
      out.converged = true;
      break;
    }
    double step = 0.0;
    const double directional = -g.squaredNorm();
    switch (rule.kind) {
      case GdStepRule::Kind::inverse_lipschitz:
        step = 1.0 / rule.gamma;
        break;
      case GdStepRule::Kind::fixed:
        step = rule.gamma;
        break;
      case GdStepRule::Kind::backtracking: {
        const auto ls = armijo_backtrack(problem, out.w, -g, directional);
        step = ls.step;
        out.passes += double(ls.trials);
        break;
      }
    }
    out.w -= step * g;
    const double f = problem.value(out.w);
    g = problem.gradient(out.w);
    out.passes += 2.0;
    out.iterations = it;
    out.trace.push_back({it, f, g.norm(), step, directional, out.passes});
    if (!std::isfinite(f) || f > f0 + 9.0 * std::abs(f0))
      throw DivergenceError("gradient descent diverged at step " + std::to_string(it) +
                            " (f = " + std::to_string(f) + ", f0 = " + std::to_string(f0) + ")");
  }
  if (g.norm() <= tolerance) out.converged = true;
  return out;
}

SolverResult gd_run(const Objective& obj, const Dataset& data, const Vector& w0,
                    std::size_t steps, std::optional<double> fixed_step) {
  check_dimension(data, w0);
  const auto problem = make_problem(obj, data);
  const GdStepRule rule = fixed_step ? GdStepRule::fixed(*fixed_step)
                                     : GdStepRule::inverse_lipschitz(smoothness_constants(obj, data).L);
  return gd_run(problem, w0, steps, rule);
}

Vector lbfgs_direction(const LbfgsState& state, const Vector& gradient) {
  Vector q = gradient;
  const std::size_t m = state.history.size();
  std::vector<double> alpha(m), rho(m);
  for (std::size_t i = m; i-- > 0;) {
    const auto& [s, y] = state.history[i];
    rho[i] = 1.0 / s.dot(y);
    alpha[i] = rho[i] * s.dot(q);
    q -= alpha[i] * y;
  }
  if (m > 0) {
    const auto& [s, y] = state.history.back();
    q *= s.dot(y) / y.squaredNorm();
  }
  for (std::size_t i = 0; i < m; ++i) {
    const auto& [s, y] = state.history[i];
    const double beta = rho[i] * y.dot(q);
    q += (alpha[i] - beta) * s;
  }
  return -q;
}

SolverResult lbfgs_run(const SmoothProblem& problem, const Vector& w0,
                       const LbfgsOptions& options) {
  LbfgsState state;
  state.w = w0;
  state.memory = options.memory;

  SolverResult out;
  Vector g = problem.gradient(state.w);
  double f = problem.value(state.w);
  out.passes = 2.0;
  out.trace.push_back({0, f, g.norm(), 0.0, 0.0, out.passes});

  while (g.norm() > options.tolerance && state.iteration < options.max_iterations) {
    Vector d = lbfgs_direction(state, g);
    double directional = g.dot(d);
    if (!(directional < 0.0)) {
      // Stale curvature pairs; fall back to steepest descent.
      state.history.clear();
      d = -g;
      directional = -g.squaredNorm();
    }
    const auto ls = armijo_backtrack(problem, state.w, d, directional, options.line_search);
    const Vector s = ls.step * d;
    const Vector w_next = state.w + s;
    const Vector g_next = problem.gradient(w_next);
    f += problem.difference(w_next, state.w);
    out.passes += double(ls.trials) + 1.0;
    const Vector y = g_next - g;
    if (state.memory > 0 && s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      state.history.emplace_back(s, y);
      if (state.history.size() > state.memory) state.history.pop_front();
    }
    state.w = w_next;
    g = g_next;
    ++state.iteration;
    out.trace.push_back({state.iteration, f, g.norm(), ls.step, directional, out.passes});
  }
  out.w = state.w;
  out.iterations = state.iteration;
  out.converged = g.norm() <= options.tolerance;
  return out;
}

SolverResult lbfgs_run(const Objective& obj, const Dataset& data, const Vector& w0,
                       const LbfgsOptions& options) {
  check_dimension(data, w0);
  return lbfgs_run(make_problem(obj, data), w0, options);
}

Vector sgd_warmstart(const Objective& obj, const Dataset& data, const Vector& w0,
                     std::uint64_t seed) {
  if (data.empty()) throw Error("warm start needs at least one example");
  check_dimension(data, w0);
  const double gamma = auto_step_size(obj, data);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  Vector w = w0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Example& ex = data[pick(rng)];
    const Vector g = reconstruct_gradient(obj, ex, example_gradient(obj, ex, w), w);
    w -= gamma / std::sqrt(double(i + 1)) * g;
  }
  return w;
}

}  // namespace dsaga
