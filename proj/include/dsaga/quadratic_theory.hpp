#pragma once

#include "dsaga/objective.hpp"

#include <vector>

namespace dsaga {

/// Dense matrices in this module are limited to this dimension.
inline constexpr std::size_t kMaxTheoryDimension = 2000;

struct ShardHessian {
  int node_id = 0;
  Matrix H;        // (1/N_k) sum x x^T + lambda I
  Vector rhs;      // (1/N_k) sum y x, so that g_k(w) = H w - rhs
  Vector center;   // local minimiser; empty when H is singular
  std::size_t samples = 0;
  bool singular = false;
};

/// Per-shard Hessians of a quadratic (least-squares) objective.
std::vector<ShardHessian> shard_hessians(const Objective& obj,
                                         const std::vector<Shard>& shards);

/// Solves (sum_l H_l) w = sum_l H_l w_l^*; throws on a singular sum.
Vector global_optimum(const std::vector<ShardHessian>& hessians);

struct TheoryParams {
  double gamma_mp = 0.0;  // d K / N
  double rho = 0.0;       // max_{k != l} |I - H_k^{-1} H_l|
  double contraction = 0.0;  // (1 - 1/K) rho
};

struct PowerIterationOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 20000;
};

/// Largest singular value of M, by power iteration on M^T M from a fixed
/// start vector.
double spectral_norm(const Matrix& m, const PowerIterationOptions& options = {});

/// I - H_k^{-1} H_l, applied through a Cholesky factorisation of H_k.
Matrix transfer_matrix(const Matrix& h_k, const Matrix& h_l);

TheoryParams rho_bound(const std::vector<ShardHessian>& hessians,
                       const PowerIterationOptions& options = {});

/// One step of the exact-inner-solve error recursion:
/// e_k' = (1/K) sum_{l != k} (I - H_k^{-1} H_l) e_l.
std::vector<Vector> contraction_step(const std::vector<ShardHessian>& hessians,
                                     const std::vector<Vector>& errors);

/// 2 sqrt(g) / (1 - sqrt(g)), the large-system limit of |I - H_i^{-1} H_j|.
double wishart_limit(double gamma_mp);

struct WishartOptions {
  std::size_t d = 0;
  std::size_t n_per_node = 0;
  std::size_t replicates = 1;  // matrices used for the norm and trace statistics
  std::size_t pairs = 0;       // independent pairs for the transfer-norm statistic
  std::uint64_t seed = 0;
};

struct WishartStats {
  double gamma_mp = 0.0;
  double norm_stat = 0.0;       // mean |H|
  double norm_limit = 0.0;      // (1 + sqrt g)^2
  double trace_inv_stat = 0.0;  // mean Tr(H^{-1}) / d
  double trace_inv_limit = 0.0; // 1 / (1 - g)
  double rho_stat = 0.0;        // mean |I - H_i^{-1} H_j| (0 when pairs == 0)
  double rho_limit = 0.0;       // wishart_limit(g)
};

/// Monte-Carlo check of the Wishart facts behind the rho estimate.
WishartStats wishart_empirics(const WishartOptions& options);

/// H = (1/n) U^T U for an n x d standard-normal U drawn from `seed`.
Matrix sample_wishart(std::size_t d, std::size_t n, std::uint64_t seed);

}  // namespace dsaga
