#include "dsaga/quadratic_theory.hpp"

#include <cmath>
#include <random>

namespace dsaga {

std::vector<ShardHessian> shard_hessians(const Objective& obj,
                                         const std::vector<Shard>& shards) {
  if (obj.loss != Loss::quadratic)
    throw Error("shard Hessians are defined for quadratic objectives only");
  std::vector<ShardHessian> out;
  out.reserve(shards.size());
  for (const auto& shard : shards) {
    if (shard.data.dimension() > kMaxTheoryDimension)
      throw Error("dimension " + std::to_string(shard.data.dimension()) +
                  " exceeds the dense theory limit");
    ShardHessian h;
    h.node_id = shard.node_id;
    h.samples = shard.local_count();
    h.H = quadratic_hessian(shard.data, obj.lambda);
    h.rhs = quadratic_rhs(shard.data);
    Eigen::LLT<Matrix> llt(h.H);
    h.singular = llt.info() != Eigen::Success;
    if (!h.singular) h.center = llt.solve(h.rhs);
    out.push_back(std::move(h));
  }
  return out;
}

Vector global_optimum(const std::vector<ShardHessian>& hessians) {
  if (hessians.empty()) throw Error("no shard Hessians");
  Matrix h = Matrix::Zero(hessians[0].H.rows(), hessians[0].H.cols());
  Vector b = Vector::Zero(hessians[0].rhs.size());
  for (const auto& s : hessians) {
    h += s.H;
    b += s.rhs;
  }
  Eigen::LLT<Matrix> llt(h);
  if (llt.info() != Eigen::Success) throw Error("global Hessian is singular");
  return llt.solve(b);
}

double spectral_norm(const Matrix& m, const PowerIterationOptions& options) {
  const auto n = m.cols();
  if (n == 0 || m.rows() == 0) return 0.0;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + double(i) / double(n);
  v.normalize();
  double estimate = 0.0;
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    const Vector mv = m * v;
    const Vector z = m.transpose() * mv;
    const double next = v.dot(z);  // Rayleigh quotient of M^T M
    const double z_norm = z.norm();
    if (z_norm == 0.0) return 0.0;
    v = z / z_norm;
    const bool done = std::abs(next - estimate) <= options.tolerance * next;
    estimate = next;
    if (done) break;
  }
  return std::sqrt(estimate);
}

Matrix transfer_matrix(const Matrix& h_k, const Matrix& h_l) {
  Eigen::LLT<Matrix> llt(h_k);
  if (llt.info() != Eigen::Success) throw Error("H_k is singular");
  return Matrix::Identity(h_k.rows(), h_k.cols()) - llt.solve(h_l);
}

TheoryParams rho_bound(const std::vector<ShardHessian>& hessians,
                       const PowerIterationOptions& options) {
  if (hessians.empty()) throw Error("no shard Hessians");
  TheoryParams out;
  std::size_t total = 0;
  for (const auto& h : hessians) {
    if (h.singular) throw Error("node " + std::to_string(h.node_id) + " has a singular Hessian");
    total += h.samples;
  }
  const std::size_t k = hessians.size();
  const auto d = double(hessians[0].H.rows());
  out.gamma_mp = total == 0 ? 0.0 : d * double(k) / double(total);
  if (k == 1) return out;

  std::vector<Eigen::LLT<Matrix>> factors;
  factors.reserve(k);
  for (const auto& h : hessians) factors.emplace_back(h.H);
  const Matrix eye = Matrix::Identity(hessians[0].H.rows(), hessians[0].H.cols());
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      const Matrix m = eye - factors[a].solve(hessians[b].H);
      out.rho = std::max(out.rho, spectral_norm(m, options));
    }
  out.contraction = (1.0 - 1.0 / double(k)) * out.rho;
  return out;
}

std::vector<Vector> contraction_step(const std::vector<ShardHessian>& hessians,
                                     const std::vector<Vector>& errors) {
  const std::size_t k = hessians.size();
  if (errors.size() != k) throw Error("one error vector per node expected");
  std::vector<Vector> next(k);
  for (std::size_t a = 0; a < k; ++a) {
    Eigen::LLT<Matrix> llt(hessians[a].H);
    Vector acc = Vector::Zero(errors[a].size());
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      acc += errors[b] - llt.solve(hessians[b].H * errors[b]);
    }
    next[a] = acc / double(k);
  }
  return next;
}

double wishart_limit(double gamma_mp) {
  if (!(gamma_mp >= 0.0) || !(gamma_mp < 1.0))
    throw Error("the Wishart limit needs 0 < gamma < 1");
  const double s = std::sqrt(gamma_mp);
  return 2.0 * s / (1.0 - s);
}

Matrix sample_wishart(std::size_t d, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix u(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) u(i, j) = normal(rng);
  Matrix h = Matrix::Zero(d, d);
  h.selfadjointView<Eigen::Lower>().rankUpdate(u.transpose(), 1.0 / double(n));
  return h.selfadjointView<Eigen::Lower>();
}

WishartStats wishart_empirics(const WishartOptions& options) {
  const std::size_t d = options.d;
  const std::size_t n = options.n_per_node;
  if (d == 0) throw Error("Wishart check needs d >= 1");
  if (n <= d) throw Error("Wishart check needs n_per_node > d");
  if (d > kMaxTheoryDimension) throw Error("dimension exceeds the dense theory limit");

  WishartStats out;
  out.gamma_mp = double(d) / double(n);
  const double s = std::sqrt(out.gamma_mp);
  out.norm_limit = (1.0 + s) * (1.0 + s);
  out.trace_inv_limit = 1.0 / (1.0 - out.gamma_mp);
  out.rho_limit = wishart_limit(out.gamma_mp);

  // Matrix r uses its own stream so replicates are independent of each other.
  auto draw = [&](std::size_t r) {
    return sample_wishart(d, n, options.seed + 0xD1B54A32D192ED03ULL * (r + 1));
  };
  const std::size_t count = std::max(options.replicates, 2 * options.pairs);
  std::vector<Matrix> mats;
  mats.reserve(count);
  for (std::size_t r = 0; r < count; ++r) mats.push_back(draw(r));

  const Matrix eye = Matrix::Identity(d, d);
  for (std::size_t r = 0; r < options.replicates; ++r) {
    out.norm_stat += spectral_norm(mats[r]);
    Eigen::LLT<Matrix> llt(mats[r]);
    const Matrix lower_inv = llt.matrixL().solve(eye);
    out.trace_inv_stat += lower_inv.squaredNorm() / double(d);  // Tr(H^-1) = |L^-1|_F^2
  }
  if (options.replicates > 0) {
    out.norm_stat /= double(options.replicates);
    out.trace_inv_stat /= double(options.replicates);
  }
  for (std::size_t p = 0; p < options.pairs; ++p)
    out.rho_stat += spectral_norm(transfer_matrix(mats[2 * p], mats[2 * p + 1]));
  if (options.pairs > 0) out.rho_stat /= double(options.pairs);
  return out;
}

}  // namespace dsaga
