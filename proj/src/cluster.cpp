#include "dsaga/cluster.hpp"

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>

namespace dsaga {

void ClusterConfig::validate() const {
  if (nodes < 1) throw Error("cluster needs K >= 1");
  if (passes_per_round < 1) throw Error("cluster needs U >= 1");
  if (rounds < 1) throw Error("cluster needs T >= 1");
  if (step_rule.kind == StepRule::Kind::fixed && !(step_rule.gamma > 0.0))
    throw Error("step size must be positive");
}

std::uint64_t node_seed(std::uint64_t seed, int node_id) {
  return seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(node_id);
}

NodeState make_node(const Objective& obj, const Shard& shard, const Vector& w0,
                    const ClusterConfig& config) {
  NodeState node;
  node.node_id = shard.node_id;
  node.shard = &shard;
  node.inner = init_saga(obj, shard.data, w0, config.step_rule,
                         node_seed(config.seed, shard.node_id));
  if (config.inner == InnerSolve::exact) {
    if (obj.loss != Loss::quadratic)
      throw Error("exact inner solves need a quadratic objective");
    node.hessian_factor.emplace(quadratic_hessian(shard.data, obj.lambda));
    if (node.hessian_factor->info() != Eigen::Success)
      throw Error("node " + std::to_string(shard.node_id) +
                  " has a singular Hessian; exact inner solve impossible");
    node.hessian_rhs = quadratic_rhs(shard.data);
  }
  return node;
}

void local_gradient_pass(NodeState& node, const Objective& obj, bool refresh) {
  const Dataset& data = node.shard->data;
  if (node.global_avg_grad.size() != node.inner.w.size())
    throw Error("local gradient pass before any synchronisation");
  node.round_start = node.inner.w;
  if (refresh) {
    refresh_memory(node.inner, obj, data);
    node.anchor_grad = memory_average(node.inner, obj, data);
  } else {
    node.anchor_grad = full_gradient(obj, data, node.round_start);
  }
  node.surrogate = obj.with_linear(node.global_avg_grad - node.anchor_grad,
                                   node.round_start);
}

void dsaga_step(NodeState& node, const Objective& /*obj*/) {
  saga_step(node.inner, node.surrogate, node.shard->data);
}

void run_inner_round(NodeState& node, const Objective& obj, std::size_t passes,
                     InnerSolve mode, std::vector<Vector>* iterates) {
  if (iterates) {
    iterates->clear();
    iterates->push_back(node.inner.w);
  }
  if (mode == InnerSolve::exact) {
    if (!node.hessian_factor)
      throw Error("exact inner solve requested but node has no Hessian factor");
    node.inner.w = node.hessian_factor->solve(node.hessian_rhs + node.anchor_grad -
                                              node.global_avg_grad);
    if (iterates) iterates->push_back(node.inner.w);
    return;
  }
  const std::size_t n = node.shard->local_count();
  for (std::size_t p = 0; p < passes; ++p) {
    for (std::size_t s = 0; s < n; ++s) dsaga_step(node, obj);
    if (iterates) iterates->push_back(node.inner.w);
  }
}

SyncMessage make_message(const NodeState& node, const Objective& obj, SyncGradient mode) {
  SyncMessage msg;
  msg.node_id = node.node_id;
  msg.params = node.inner.w;
  if (mode == SyncGradient::exact)
    msg.grad_estimate = full_gradient(obj, node.shard->data, node.inner.w);
  else
    msg.grad_estimate = memory_average(node.inner, obj, node.shard->data);
  return msg;
}

Synchronized synchronize(const std::vector<SyncMessage>& messages, std::size_t k) {
  if (messages.size() != k)
    throw Error("synchronise expected " + std::to_string(k) + " messages, got " +
                std::to_string(messages.size()));
  std::vector<const SyncMessage*> by_node(k, nullptr);
  for (const auto& m : messages) {
    if (m.node_id < 0 || static_cast<std::size_t>(m.node_id) >= k)
      throw Error("message from unknown node " + std::to_string(m.node_id));
    if (by_node[m.node_id])
      throw Error("duplicate message from node " + std::to_string(m.node_id));
    by_node[m.node_id] = &m;
  }
  const auto d = by_node[0]->params.size();
  Synchronized out{Vector::Zero(d), Vector::Zero(d)};
  for (const auto* m : by_node) {
    if (m->params.size() != d || m->grad_estimate.size() != d)
      throw DimensionError("message dimensions disagree");
    out.w_start += m->params;
    out.global_avg_grad += m->grad_estimate;
  }
  out.w_start /= double(k);
  out.global_avg_grad /= double(k);
  return out;
}

namespace {

template <typename Fn>
void for_each_node(std::size_t count, std::size_t threads, Fn&& fn) {
  const std::size_t workers = std::clamp<std::size_t>(threads == 0 ? count : threads, 1, count);
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += workers) fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

TraceRecord point_record(const Objective& obj, const std::vector<Shard>& shards,
                         const ClusterConfig& config, const DsagaTraceOptions& options,
                         std::size_t round, double pass_opt, double pass_total,
                         std::string node, const Vector& w) {
  TraceRecord r;
  r.run_id = options.run_id;
  r.algo = "dsaga";
  r.nodes = static_cast<std::int64_t>(config.nodes);
  r.passes_per_round = static_cast<std::int64_t>(config.passes_per_round);
  r.round = static_cast<std::int64_t>(round);
  r.pass_opt = pass_opt;
  r.pass_total = pass_total;
  r.node = std::move(node);
  r.f = sharded_value(obj, shards, w);
  if (options.w_star) r.excess = sharded_difference(obj, shards, w, *options.w_star);
  r.grad_norm = sharded_gradient(obj, shards, w).norm();
  return r;
}

}  // namespace

DsagaResult run_dsaga(const Objective& obj, const std::vector<Shard>& shards,
                      const ClusterConfig& config, const Vector& w0,
                      const DsagaTraceOptions& options) {
  config.validate();
  if (shards.size() != config.nodes)
    throw Error("config has K=" + std::to_string(config.nodes) + " but " +
                std::to_string(shards.size()) + " shards were given");
  for (std::size_t k = 0; k < shards.size(); ++k) {
    if (shards[k].node_id != static_cast<int>(k))
      throw Error("shard " + std::to_string(k) + " has node id " +
                  std::to_string(shards[k].node_id));
    check_dimension(shards[k].data, w0);
  }
  if (obj.has_linear()) throw Error("run_dsaga expects an objective without a linear term");
  const bool exact_inner = config.inner == InnerSolve::exact;
  const SyncGradient sync = exact_inner ? SyncGradient::exact : config.sync;
  const std::size_t k = config.nodes;

  std::vector<NodeState> nodes(k);
  std::vector<SyncMessage> messages(k);
  for_each_node(k, config.threads, [&](std::size_t i) {
    nodes[i] = make_node(obj, shards[i], w0, config);
    // Round 0: every node reports its exact gradient at the shared start.
    messages[i] = make_message(nodes[i], obj, SyncGradient::exact);
  });
  Synchronized sync_state = synchronize(messages, k);

  DsagaResult result;
  double pass_opt = 0.0;
  double pass_total = options.prior_passes + 1.0;
  result.bootstrap_params = sync_state.w_start;
  result.bootstrap_passes = pass_total;

  for (std::size_t t = 1; t <= config.rounds; ++t) {
    RoundSnapshot snap;
    snap.round = t;
    snap.start = sync_state.w_start;
    snap.global_avg_grad = sync_state.global_avg_grad;
    snap.nodes.resize(k);

    for_each_node(k, config.threads, [&](std::size_t i) {
      NodeState& node = nodes[i];
      node.inner.w = sync_state.w_start;
      node.global_avg_grad = sync_state.global_avg_grad;
      local_gradient_pass(node, obj, config.refresh_memory && !exact_inner);
      NodeRound& rec = snap.nodes[i];
      rec.node_id = node.node_id;
      rec.anchor_grad = node.anchor_grad;
      run_inner_round(node, obj, config.passes_per_round, config.inner,
                      config.record_iterates ? &rec.iterates : nullptr);
      messages[i] = make_message(node, obj, sync);
      rec.end_params = messages[i].params;
      rec.grad_estimate = messages[i].grad_estimate;
    });
    sync_state = synchronize(messages, k);

    if (!exact_inner) pass_opt += double(config.passes_per_round);
    pass_total += 1.0 + (exact_inner ? 0.0 : double(config.passes_per_round)) +
                  (sync == SyncGradient::exact ? 1.0 : 0.0);
    snap.averaged = sync_state.w_start;
    snap.pass_opt = pass_opt;
    snap.pass_total = pass_total;

    for (std::size_t i = 0; i < k; ++i)
      result.trace.push_back(point_record(obj, shards, config, options, t, pass_opt,
                                          pass_total, std::to_string(i),
                                          snap.nodes[i].end_params));
    result.trace.push_back(point_record(obj, shards, config, options, t, pass_opt,
                                        pass_total, "avg", snap.averaged));
    result.rounds.push_back(std::move(snap));
  }
  result.w = sync_state.w_start;
  return result;
}

}  // namespace dsaga
