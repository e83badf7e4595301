#include "dsaga/objective.hpp"

#include <algorithm>
#include <cmath>

namespace dsaga {

namespace {

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// softplus(b + delta) - softplus(b)
double softplus_difference(double b, double delta) {
  if (delta > 700.0) return softplus(b + delta) - softplus(b);
  return std::log1p(sigmoid(b) * std::expm1(delta));
}

double dense_terms(const Objective& obj, const Vector& w) {
  double s = 0.5 * obj.lambda * w.squaredNorm();
  if (obj.has_linear()) s += obj.linear.dot(w - obj.origin);
  return s;
}

}  // namespace

Objective Objective::with_linear(Vector c, Vector at) const {
  if (c.size() != at.size()) throw DimensionError("linear term and origin differ in size");
  return {loss, lambda, std::move(c), std::move(at)};
}

void check_dimension(const Dataset& data, const Vector& w) {
  if (static_cast<std::size_t>(w.size()) != data.dimension())
    throw DimensionError("parameter dimension " + std::to_string(w.size()) +
                         " does not match data dimension " +
                         std::to_string(data.dimension()));
}

double loss_value(Loss loss, double label, double margin) {
  if (loss == Loss::logistic) return softplus(-label * margin);
  const double r = margin - label;
  return 0.5 * r * r;
}

double loss_derivative(Loss loss, double label, double margin) {
  if (loss == Loss::logistic) return -label * sigmoid(-label * margin);
  return margin - label;
}

double objective_value(const Objective& obj, const Dataset& data, const Vector& w) {
  check_dimension(data, w);
  double s = 0.0;
  for (const auto& ex : data.examples()) s += loss_value(obj.loss, ex.label, ex.dot(w));
  const double fit = data.empty() ? 0.0 : s / double(data.size());
  return fit + dense_terms(obj, w);
}

double objective_difference(const Objective& obj, const Dataset& data,
                            const Vector& w, const Vector& v) {
  check_dimension(data, w);
  check_dimension(data, v);
  const Vector dw = w - v;
  double s = 0.0;
  for (const auto& ex : data.examples()) {
    const double mv = ex.dot(v);
    const double dm = ex.dot(dw);
    if (obj.loss == Loss::logistic) {
      s += softplus_difference(-ex.label * mv, -ex.label * dm);
    } else {
      s += dm * ((mv - ex.label) + 0.5 * dm);
    }
  }
  double diff = data.empty() ? 0.0 : s / double(data.size());
  diff += 0.5 * obj.lambda * dw.dot(w + v);
  if (obj.has_linear()) diff += obj.linear.dot(dw);
  return diff;
}

double example_objective(const Objective& obj, const Example& ex, const Vector& w) {
  return loss_value(obj.loss, ex.label, ex.dot(w)) + dense_terms(obj, w);
}

GradientStat example_gradient(const Objective& obj, const Example& ex, const Vector& w) {
  return {loss_derivative(obj.loss, ex.label, ex.dot(w))};
}

Vector reconstruct_gradient(const Objective& obj, const Example& ex,
                            GradientStat stat, const Vector& w) {
  Vector g = obj.lambda * w;
  if (obj.has_linear()) g += obj.linear;
  ex.axpy(stat.scalar, g);
  return g;
}

Vector data_gradient_sum(const Objective& obj, const Dataset& data, const Vector& w) {
  check_dimension(data, w);
  Vector sum = Vector::Zero(w.size());
  for (const auto& ex : data.examples())
    ex.axpy(loss_derivative(obj.loss, ex.label, ex.dot(w)), sum);
  return sum;
}

Vector full_gradient(const Objective& obj, const Dataset& data, const Vector& w) {
  Vector g = data_gradient_sum(obj, data, w);
  if (!data.empty()) g /= double(data.size());
  g += obj.lambda * w;
  if (obj.has_linear()) g += obj.linear;
  return g;
}

Matrix quadratic_hessian(const Dataset& data, double lambda) {
  const auto d = static_cast<Eigen::Index>(data.dimension());
  Matrix h = Matrix::Zero(d, d);
  for (const auto& ex : data.examples()) {
    for (std::size_t a = 0; a < ex.nnz(); ++a)
      for (std::size_t b = 0; b < ex.nnz(); ++b)
        h(ex.index[a], ex.index[b]) += ex.value[a] * ex.value[b];
  }
  if (!data.empty()) h /= double(data.size());
  h.diagonal().array() += lambda;
  return h;
}

Vector quadratic_rhs(const Dataset& data) {
  Vector b = Vector::Zero(static_cast<Eigen::Index>(data.dimension()));
  for (const auto& ex : data.examples()) ex.axpy(ex.label, b);
  if (!data.empty()) b /= double(data.size());
  return b;
}

Smoothness smoothness_constants(const Objective& obj, const Dataset& data) {
  if (data.empty()) throw Error("smoothness constants need nonempty data");
  if (obj.loss == Loss::logistic) {
    double max_norm = 0.0;
    for (const auto& ex : data.examples()) max_norm = std::max(max_norm, ex.squared_norm());
    return {max_norm / 4.0 + obj.lambda, obj.lambda};
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(quadratic_hessian(data, obj.lambda),
                                            Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  return {ev.maxCoeff(), ev.minCoeff()};
}

double max_example_smoothness(const Objective& obj, const Dataset& data) {
  if (data.empty()) throw Error("smoothness constants need nonempty data");
  double max_norm = 0.0;
  for (const auto& ex : data.examples()) max_norm = std::max(max_norm, ex.squared_norm());
  const double curvature = obj.loss == Loss::logistic ? 0.25 : 1.0;
  return curvature * max_norm + obj.lambda;
}

namespace {

void check_shards(const std::vector<Shard>& shards) {
  if (shards.empty()) throw Error("no shards");
}

}  // namespace

double sharded_value(const Objective& obj, const std::vector<Shard>& shards,
                     const Vector& w) {
  check_shards(shards);
  double s = 0.0;
  for (const auto& shard : shards) s += objective_value(obj, shard.data, w);
  return s / double(shards.size());
}

Vector sharded_gradient(const Objective& obj, const std::vector<Shard>& shards,
                        const Vector& w) {
  check_shards(shards);
  Vector g = Vector::Zero(w.size());
  for (const auto& shard : shards) g += full_gradient(obj, shard.data, w);
  return g / double(shards.size());
}

double sharded_difference(const Objective& obj, const std::vector<Shard>& shards,
                          const Vector& w, const Vector& v) {
  check_shards(shards);
  double s = 0.0;
  for (const auto& shard : shards) s += objective_difference(obj, shard.data, w, v);
  return s / double(shards.size());
}

}  // namespace dsaga
