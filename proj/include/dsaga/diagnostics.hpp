#pragma once

#include "dsaga/baselines.hpp"
#include "dsaga/cluster.hpp"
#include "dsaga/trace.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace dsaga {

struct Reference {
  Vector w;
  double f = 0.0;
  double grad_norm = 0.0;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, Vector best)
      : Error(what), best_(std::move(best)) {}
  const Vector& best() const { return best_; }

 private:
  Vector best_;
};

struct ReferenceOptions {
  double tolerance = 1e-12;  // on |g|, logistic only
  std::size_t max_iterations = 5000;
  Vector start;  // logistic starting point; zero when empty
};

/// Minimiser and minimum of a strongly convex objective: closed form for
/// quadratics, L-BFGS otherwise.
Reference reference_optimum(const Objective& obj, const Dataset& data,
                            const ReferenceOptions& options = {});
/// Same for the shard-average objective (1/K) sum_k f_k.
Reference reference_optimum(const Objective& obj, const std::vector<Shard>& shards,
                            const ReferenceOptions& options = {});

/// f_k^t: node k's objective plus the frozen correction of `round`.
Objective round_surrogate(const Objective& obj, const RoundSnapshot& round, std::size_t k);

/// Minimisers w_k^{t,inf} of every node's surrogate for one round.
std::vector<Vector> inner_optima(const Objective& obj, const std::vector<Shard>& shards,
                                 const RoundSnapshot& round, double tolerance = 1e-10);

struct ErrorDecomposition {
  std::size_t pass = 0;  // u
  double total = 0.0;    // (1/K) sum |w_k^{t,u} - w*|
  double inner = 0.0;    // (1/K) sum |w_k^{t,u} - w_k^{t,inf}|
  double discrepancy = 0.0;  // (1/K) sum |w_k^{t,inf} - w*|
  bool holds = false;    // total <= inner + discrepancy + 1e-12
};

inline constexpr double kDecompositionSlack = 1e-12;

/// The decomposition at every recorded pass boundary of a round (only the
/// end of the round when iterates were not recorded). The last entry also
/// requires |w^{t+1,0} - w*| <= total.
std::vector<ErrorDecomposition> decompose_error(const RoundSnapshot& round,
                                                const std::vector<Vector>& optima,
                                                const Vector& w_star);

/// Denominators at or below this make a rate absent.
inline constexpr double kRateFloor = 1e-14;

struct RoundMetrics {
  std::size_t round = 0;
  double excess_start = 0.0;  // f(w^{t,0}) - f*
  double excess_end = 0.0;    // f(w^{t+1,0}) - f*
  std::optional<double> rho_tilde;
  std::vector<std::optional<double>> alpha_tilde;  // one per inner pass
  std::vector<std::optional<double>> omega_tilde;
  double inner_err = 0.0;  // at the end of the round
  double disc_err = 0.0;
  std::vector<ErrorDecomposition> decomposition;
};

struct MetricReport {
  std::optional<double> rho_hat;
  std::vector<RoundMetrics> rounds;
  bool decomposition_holds = true;

  std::optional<double> median_rho_tilde() const;
  std::optional<double> median_alpha_tilde() const;
  std::optional<double> median_omega_tilde() const;
};

/// (1 - 1/K) * wishart_limit(dK/N); absent when dK/N >= 1.
std::optional<double> predicted_rate(std::size_t d, std::size_t k, std::size_t n_total);

std::optional<double> median(std::vector<double> values);

/// All diagnostics of a finished run. Needs config.record_iterates.
MetricReport rate_report(const DsagaResult& result, const Objective& obj,
                         const std::vector<Shard>& shards, const ClusterConfig& config,
                         const Reference& reference);

/// One "all" row per (round, pass) carrying alpha/omega; the last pass of a
/// round also carries rho_tilde and the error decomposition.
std::vector<TraceRecord> report_records(const MetricReport& report, const ClusterConfig& config,
                                        const std::string& run_id);

/// Errors below this fraction of the starting error are rounding noise.
inline constexpr double kContractionFloor = 1e-12;

struct ContractionStep {
  double previous = 0.0;  // max_l |w_l^{t-1,end} - w*|, the common start for t = 1
  double current = 0.0;   // max_k |w_k^{t,end} - w*|
  double ratio = 0.0;     // current / previous, 0 when previous is 0
  bool holds = true;      // current <= bound * previous + floor
};

std::vector<ContractionStep> contraction_steps(const DsagaResult& result, const Vector& w0,
                                               const Vector& w_star, double bound);

extern const std::vector<std::string> kCsvColumns;

void write_csv(const std::vector<TraceRecord>& records, std::ostream& out);
void write_csv(const std::vector<TraceRecord>& records, const std::string& path);
std::vector<TraceRecord> read_csv(std::istream& in);
std::string format_number(double v);

}  // namespace dsaga
