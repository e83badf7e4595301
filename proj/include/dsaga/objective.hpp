#pragma once

#include "dsaga/dataset.hpp"

#include <vector>

namespace dsaga {

enum class Loss {
  logistic,   // log(1 + exp(-y x.w))
  quadratic,  // 0.5 (x.w - y)^2
};

/// f(w) = (1/N) sum_i loss_i(w) + (lambda/2)|w|^2 + c.(w - origin).
///
/// The optional linear term turns a node objective f_k into the corrected
/// surrogate that the distributed inner loop actually minimises.
struct Objective {
  Loss loss = Loss::logistic;
  double lambda = 0.0;
  Vector linear;
  Vector origin;

  static Objective logistic(double lambda) { return {Loss::logistic, lambda, {}, {}}; }
  static Objective quadratic(double lambda = 0.0) { return {Loss::quadratic, lambda, {}, {}}; }

  bool has_linear() const { return linear.size() != 0; }
  Objective with_linear(Vector c, Vector at) const;
  Objective without_linear() const { return {loss, lambda, {}, {}}; }
};

/// Per-example inner derivative a_i: the data-fit gradient is a_i x_i.
struct GradientStat {
  double scalar = 0.0;
  bool operator==(const GradientStat&) const = default;
};

double loss_value(Loss loss, double label, double margin);
double loss_derivative(Loss loss, double label, double margin);

double objective_value(const Objective& obj, const Dataset& data, const Vector& w);

/// f(w) - f(v) evaluated term by term so that no cancellation occurs
/// between two nearly equal objective values.
double objective_difference(const Objective& obj, const Dataset& data,
                            const Vector& w, const Vector& v);

/// Loss of a single example plus the dense terms (regulariser, linear term).
double example_objective(const Objective& obj, const Example& ex, const Vector& w);

GradientStat example_gradient(const Objective& obj, const Example& ex, const Vector& w);
Vector reconstruct_gradient(const Objective& obj, const Example& ex,
                            GradientStat stat, const Vector& w);

Vector full_gradient(const Objective& obj, const Dataset& data, const Vector& w);

/// Sum of a_i x_i over the data, accumulated in example order.
Vector data_gradient_sum(const Objective& obj, const Dataset& data, const Vector& w);

struct Smoothness {
  double L = 0.0;
  double mu = 0.0;
  double condition() const { return L / mu; }
};

/// Logistic: L = max_i |x_i|^2 / 4 + lambda, mu = lambda.
/// Quadratic: extreme eigenvalues of (1/N) sum x x^T + lambda I.
Smoothness smoothness_constants(const Objective& obj, const Dataset& data);

/// Largest curvature of any single example loss plus lambda.
double max_example_smoothness(const Objective& obj, const Dataset& data);

/// (1/N) sum x x^T + lambda I.
Matrix quadratic_hessian(const Dataset& data, double lambda);
/// (1/N) sum y x.
Vector quadratic_rhs(const Dataset& data);

void check_dimension(const Dataset& data, const Vector& w);

/// The objective of a sharded problem, (1/K) sum_k f_k. Its minimiser is
/// the fixed point of the distributed algorithm.
double sharded_value(const Objective& obj, const std::vector<Shard>& shards,
                     const Vector& w);
Vector sharded_gradient(const Objective& obj, const std::vector<Shard>& shards,
                        const Vector& w);
double sharded_difference(const Objective& obj, const std::vector<Shard>& shards,
                          const Vector& w, const Vector& v);

}  // namespace dsaga
