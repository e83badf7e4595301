#pragma once

#include "dsaga/objective.hpp"
#include "dsaga/trace.hpp"

#include <random>
#include <vector>

namespace dsaga {

struct StepRule {
  enum class Kind { automatic, fixed };
  Kind kind = Kind::automatic;
  double gamma = 0.0;

  static StepRule automatic() { return {}; }
  static StepRule fixed(double gamma) { return {Kind::fixed, gamma}; }
};

/// 1 / (3 L_max) where L_max is the largest per-example smoothness.
double auto_step_size(const Objective& obj, const Dataset& data);

/// Parameters plus the per-example stored gradients of SAGA.
struct SagaState {
  Vector w;
  std::vector<GradientStat> memory;
  Vector grad_sum;  // sum_i a_i x_i over the stored statistics
  double step = 0.0;
  std::mt19937_64 rng;
  std::uint64_t steps = 0;           // sampled updates performed
  std::uint64_t gradient_passes = 0;  // full sweeps (initialisation, refreshes)

  Vector scratch;  // update direction buffer
};

/// grad_sum is rebuilt from memory every this many passes.
inline constexpr std::uint64_t kGradSumRefreshPasses = 10;

SagaState init_saga(const Objective& obj, const Dataset& data, const Vector& w0,
                    StepRule rule, std::uint64_t seed);

/// Draws the next example index from the state's sampler.
std::size_t sample_index(SagaState& state, std::size_t n);

/// The SAGA direction g_j(w) - g_j(phi_j) + mean of stored gradients, plus
/// the dense terms of `obj`, for a given example j. Does not modify state.
Vector saga_direction(const SagaState& state, const Objective& obj,
                      const Dataset& data, std::size_t j);

/// One update with a sampled example.
void saga_step(SagaState& state, const Objective& obj, const Dataset& data);
/// One update with example j.
void saga_step_at(SagaState& state, const Objective& obj, const Dataset& data,
                  std::size_t j);

/// Sets every stored gradient to its value at the current w.
void refresh_memory(SagaState& state, const Objective& obj, const Dataset& data);
void recompute_grad_sum(SagaState& state, const Dataset& data);

/// Average of the stored gradients, regulariser included.
Vector memory_average(const SagaState& state, const Objective& obj,
                      const Dataset& data);

double passes_done(const SagaState& state, std::size_t n);

struct SagaTraceOptions {
  std::size_t trace_every = 1;
  const Vector* w_star = nullptr;  // fills `excess` when set
  std::string run_id;
};

/// passes * N sampled steps; one record every `trace_every` passes.
std::vector<TraceRecord> run_saga(SagaState& state, const Objective& obj,
                                  const Dataset& data, std::size_t passes,
                                  const SagaTraceOptions& options = {});

}  // namespace dsaga
