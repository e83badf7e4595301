#pragma once

#include "dsaga/saga.hpp"

#include <optional>
#include <vector>

namespace dsaga {

enum class InnerSolve {
  iterative,  // U passes of the corrected SAGA loop
  exact,      // closed-form inner optimum, quadratic objectives only
};

/// What a node reports as its gradient at the end of a round.
enum class SyncGradient {
  exact,   // recomputed local gradient at the end-of-round point (one pass)
  memory,  // average of the node's stored SAGA gradients (free)
};

struct ClusterConfig {
  std::size_t nodes = 1;             // K
  std::size_t passes_per_round = 1;  // U
  std::size_t rounds = 1;            // T
  std::uint64_t seed = 0;
  StepRule step_rule;
  InnerSolve inner = InnerSolve::iterative;
  SyncGradient sync = SyncGradient::exact;
  /// Also reset every stored gradient during the local gradient pass.
  bool refresh_memory = false;
  /// Keep w_k at every inner pass boundary (needed by rate_report).
  bool record_iterates = false;
  /// Worker threads for the node loops; 0 means one per node.
  std::size_t threads = 0;

  void validate() const;
};

/// Per-node sampler seed. Node 0 uses the base seed.
std::uint64_t node_seed(std::uint64_t seed, int node_id);

struct SyncMessage {
  int node_id = 0;
  Vector params;
  Vector grad_estimate;
};

struct NodeState {
  int node_id = 0;
  const Shard* shard = nullptr;
  SagaState inner;
  Vector round_start;      // w^{t,0}
  Vector anchor_grad;      // g_k(w^{t,0})
  Vector global_avg_grad;  // (1/K) sum_l g_l(w_l^{t-1,end})
  /// f_k plus the linear correction (global_avg_grad - anchor_grad).
  Objective surrogate;

  // Exact inner solves: H_k = (1/N_k) X^T X + lambda I and b_k = (1/N_k) X^T y.
  std::optional<Eigen::LLT<Matrix>> hessian_factor;
  Vector hessian_rhs;
};

NodeState make_node(const Objective& obj, const Shard& shard, const Vector& w0,
                    const ClusterConfig& config);

/// Recomputes the exact local gradient at the round start.
void local_gradient_pass(NodeState& node, const Objective& obj, bool refresh = false);

/// One corrected SAGA update on the node.
void dsaga_step(NodeState& node, const Objective& obj);

/// `passes` local passes (iterative) or the closed-form inner optimum (exact).
/// When `iterates` is set, receives w at every pass boundary, start included.
void run_inner_round(NodeState& node, const Objective& obj, std::size_t passes,
                     InnerSolve mode, std::vector<Vector>* iterates = nullptr);

SyncMessage make_message(const NodeState& node, const Objective& obj, SyncGradient mode);

struct Synchronized {
  Vector w_start;
  Vector global_avg_grad;
};

/// Coordinate-wise averages over exactly one message per node 0..K-1.
Synchronized synchronize(const std::vector<SyncMessage>& messages, std::size_t k);

struct NodeRound {
  int node_id = 0;
  Vector anchor_grad;
  std::vector<Vector> iterates;  // only when record_iterates
  Vector end_params;
  Vector grad_estimate;
};

struct RoundSnapshot {
  std::size_t round = 0;  // 1-based
  Vector start;           // w^{t,0}
  Vector global_avg_grad;
  std::vector<NodeRound> nodes;
  Vector averaged;  // w^{t+1,0}
  double pass_opt = 0.0;    // cumulative after this round
  double pass_total = 0.0;  // cumulative after this round
};

struct DsagaResult {
  Vector w;
  std::vector<RoundSnapshot> rounds;
  std::vector<TraceRecord> trace;
  /// Parameters after the bootstrap (round 0) synchronisation.
  Vector bootstrap_params;
  double bootstrap_passes = 0.0;
};

struct DsagaTraceOptions {
  const Vector* w_star = nullptr;
  std::string run_id;
  /// Passes spent before the run (warm start); added to pass_total.
  double prior_passes = 0.0;
};

DsagaResult run_dsaga(const Objective& obj, const std::vector<Shard>& shards,
                      const ClusterConfig& config, const Vector& w0,
                      const DsagaTraceOptions& options = {});

}  // namespace dsaga
