#include "dsaga/saga.hpp"

namespace dsaga {

double auto_step_size(const Objective& obj, const Dataset& data) {
  return 1.0 / (3.0 * max_example_smoothness(obj, data));
}

SagaState init_saga(const Objective& obj, const Dataset& data, const Vector& w0,
                    StepRule rule, std::uint64_t seed) {
  if (data.empty()) throw Error("SAGA needs at least one example");
  check_dimension(data, w0);
  SagaState state;
  if (rule.kind == StepRule::Kind::automatic) {
    state.step = auto_step_size(obj, data);
  } else {
    if (!(rule.gamma > 0.0)) throw Error("step size must be positive");
    state.step = rule.gamma;
  }
  state.w = w0;
  state.rng.seed(seed);
  state.scratch = Vector::Zero(w0.size());
  refresh_memory(state, obj, data);
  return state;
}

std::size_t sample_index(SagaState& state, std::size_t n) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  return pick(state.rng);
}

namespace {

// dir = grad_sum / N + lambda w (+ c) + (a_new - a_old) x_j
void fill_direction(const SagaState& state, const Objective& obj,
                    const Dataset& data, std::size_t j, double a_new, Vector& dir) {
  const double n = double(data.size());
  dir = state.grad_sum / n + obj.lambda * state.w;
  if (obj.has_linear()) dir += obj.linear;
  data[j].axpy(a_new - state.memory[j].scalar, dir);
}

}  // namespace

Vector saga_direction(const SagaState& state, const Objective& obj,
                      const Dataset& data, std::size_t j) {
  const auto a_new = example_gradient(obj, data[j], state.w).scalar;
  Vector dir;
  fill_direction(state, obj, data, j, a_new, dir);
  return dir;
}

void saga_step_at(SagaState& state, const Objective& obj, const Dataset& data,
                  std::size_t j) {
  const Example& ex = data[j];
  const double a_new = example_gradient(obj, ex, state.w).scalar;
  const double delta = a_new - state.memory[j].scalar;
  fill_direction(state, obj, data, j, a_new, state.scratch);
  state.w.noalias() -= state.step * state.scratch;
  ex.axpy(delta, state.grad_sum);
  state.memory[j].scalar = a_new;
  ++state.steps;
  if (state.steps % (kGradSumRefreshPasses * data.size()) == 0)
    recompute_grad_sum(state, data);
}

void saga_step(SagaState& state, const Objective& obj, const Dataset& data) {
  saga_step_at(state, obj, data, sample_index(state, data.size()));
}

void refresh_memory(SagaState& state, const Objective& obj, const Dataset& data) {
  state.memory.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    state.memory[i] = example_gradient(obj, data[i], state.w);
  recompute_grad_sum(state, data);
  ++state.gradient_passes;
}

void recompute_grad_sum(SagaState& state, const Dataset& data) {
  state.grad_sum = Vector::Zero(static_cast<Eigen::Index>(data.dimension()));
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i].axpy(state.memory[i].scalar, state.grad_sum);
}

Vector memory_average(const SagaState& state, const Objective& obj,
                      const Dataset& data) {
  return state.grad_sum / double(data.size()) + obj.lambda * state.w;
}

double passes_done(const SagaState& state, std::size_t n) {
  return double(state.steps) / double(n);
}

std::vector<TraceRecord> run_saga(SagaState& state, const Objective& obj,
                                  const Dataset& data, std::size_t passes,
                                  const SagaTraceOptions& options) {
  std::vector<TraceRecord> trace;
  const std::size_t every = options.trace_every == 0 ? 1 : options.trace_every;
  for (std::size_t p = 1; p <= passes; ++p) {
    for (std::size_t s = 0; s < data.size(); ++s) saga_step(state, obj, data);
    if (p % every != 0 && p != passes) continue;
    TraceRecord r;
    r.run_id = options.run_id;
    r.algo = "saga";
    r.nodes = 1;
    r.pass_opt = passes_done(state, data.size());
    r.pass_total = *r.pass_opt + double(state.gradient_passes);
    r.node = "0";
    r.f = objective_value(obj, data, state.w);
    if (options.w_star) r.excess = objective_difference(obj, data, state.w, *options.w_star);
    r.grad_norm = full_gradient(obj, data, state.w).norm();
    trace.push_back(std::move(r));
  }
  return trace;
}

}  // namespace dsaga
